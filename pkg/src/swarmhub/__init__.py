"""swarmhub: research-tool registry and LLM-guided workflow orchestration."""

__version__ = "0.1.0"
