"""Workflow layouts, sessions, assets, and the execution engine."""

from .assets import Asset, AssetChainError, AssetStore, AssetVersion, is_text_media_type
from .engine import (
    DEFAULT_MAX_TOOL_CALLS,
    GateDecision,
    InvalidRollbackTarget,
    LayoutLibrary,
    MissingSeedAsset,
    NotAtGate,
    SeedAsset,
    SessionStateError,
    StaleAssetVersion,
    StepOutcome,
    ToolCallBudgetExceeded,
    UnknownAsset,
    UnknownLayout,
    UnresolvedTool,
    WorkflowEngine,
    WorkflowError,
    load_seed_dir,
)
from .model import (
    AssetSelector,
    AssetSpec,
    LayoutError,
    StepAgent,
    WorkflowLayout,
    layout_dict,
    load_layout,
)
from .session import (
    AgentTranscript,
    ResolvedTool,
    SessionStore,
    UnknownSession,
    WorkflowSession,
)

__all__ = [
    "AgentTranscript",
    "Asset",
    "AssetChainError",
    "AssetSelector",
    "AssetSpec",
    "AssetStore",
    "AssetVersion",
    "DEFAULT_MAX_TOOL_CALLS",
    "GateDecision",
    "InvalidRollbackTarget",
    "LayoutError",
    "LayoutLibrary",
    "MissingSeedAsset",
    "NotAtGate",
    "ResolvedTool",
    "SeedAsset",
    "SessionStateError",
    "SessionStore",
    "StaleAssetVersion",
    "StepAgent",
    "StepOutcome",
    "ToolCallBudgetExceeded",
    "UnknownAsset",
    "UnknownLayout",
    "UnknownSession",
    "UnresolvedTool",
    "WorkflowEngine",
    "WorkflowError",
    "WorkflowLayout",
    "WorkflowSession",
    "is_text_media_type",
    "layout_dict",
    "load_layout",
    "load_seed_dir",
]
