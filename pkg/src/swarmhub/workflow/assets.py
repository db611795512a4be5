"""Versioned assets with provenance.

Assets are the only carrier of state between agents and between human and
machine. Content is immutable per version; edits and re-runs append new
versions forming a single chain rooted at version 1.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field, replace
from fnmatch import fnmatch

TEXT_MEDIA_TYPES = {"application/json", "application/xml", "text/csv"}


def is_text_media_type(media_type: str) -> bool:
    return media_type.startswith("text/") or media_type in TEXT_MEDIA_TYPES


class AssetChainError(ValueError):
    """A version chain is broken (gap, bad parent, or bad root)."""


@dataclass(frozen=True)
class AssetVersion:
    version: int
    content: bytes
    producer: str | tuple[str, str]
    parent_version: int | None
    created_at: str
    superseded: bool = False

    def to_dict(self) -> dict:
        doc: dict = {
            "version": self.version,
            "producer": list(self.producer) if isinstance(self.producer, tuple)
            else self.producer,
            "parent_version": self.parent_version,
            "created_at": self.created_at,
            "superseded": self.superseded,
        }
        try:
            text = self.content.decode("utf-8")
        except UnicodeDecodeError:
            doc["content_b64"] = base64.b64encode(self.content).decode("ascii")
        else:
            doc["content"] = text
        return doc

    @classmethod
    def from_dict(cls, raw: dict) -> "AssetVersion":
        if "content" in raw:
            content = raw["content"].encode("utf-8")
        else:
            content = base64.b64decode(raw["content_b64"])
        producer = raw["producer"]
        if isinstance(producer, list):
            producer = tuple(producer)
        return cls(
            version=raw["version"],
            content=content,
            producer=producer,
            parent_version=raw.get("parent_version"),
            created_at=raw.get("created_at", ""),
            superseded=raw.get("superseded", False),
        )


@dataclass
class Asset:
    asset_id: str
    name: str
    media_type: str
    versions: list[AssetVersion] = field(default_factory=list)

    @property
    def latest(self) -> AssetVersion:
        return self.versions[-1]

    @property
    def root_producer(self) -> str | tuple[str, str]:
        return self.versions[0].producer

    def check_chain(self) -> None:
        if not self.versions:
            raise AssetChainError(f"{self.asset_id}: asset has no versions")
        for i, version in enumerate(self.versions):
            expected_parent = None if i == 0 else i
            if version.version != i + 1 or version.parent_version != expected_parent:
                raise AssetChainError(
                    f"{self.asset_id}: broken chain at position {i} "
                    f"(version={version.version}, parent={version.parent_version})"
                )

    def to_dict(self) -> dict:
        return {
            "asset_id": self.asset_id,
            "name": self.name,
            "media_type": self.media_type,
            "versions": [v.to_dict() for v in self.versions],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Asset":
        asset = cls(
            asset_id=raw["asset_id"],
            name=raw["name"],
            media_type=raw["media_type"],
            versions=[AssetVersion.from_dict(v) for v in raw["versions"]],
        )
        asset.check_chain()
        return asset


class AssetStore:
    """Session-scoped collection of named assets."""

    def __init__(self) -> None:
        self._assets: dict[str, Asset] = {}

    def __len__(self) -> int:
        return len(self._assets)

    def __contains__(self, asset_id: str) -> bool:
        return asset_id in self._assets

    def get(self, asset_id: str) -> Asset | None:
        return self._assets.get(asset_id)

    def all(self) -> list[Asset]:
        return [self._assets[name] for name in sorted(self._assets)]

    def match(self, pattern: str) -> list[Asset]:
        return [asset for asset in self.all() if fnmatch(asset.name, pattern)]

    def put_version(
        self,
        name: str,
        content: bytes,
        producer: str | tuple[str, str],
        created_at: str,
        media_type: str = "text/markdown",
    ) -> Asset:
        """Create the asset at version 1 or append the next version."""
        asset = self._assets.get(name)
        if asset is None:
            asset = Asset(asset_id=name, name=name, media_type=media_type)
            self._assets[name] = asset
            parent: int | None = None
        else:
            parent = asset.latest.version
        asset.versions.append(
            AssetVersion(
                version=(parent or 0) + 1,
                content=content,
                producer=producer,
                parent_version=parent,
                created_at=created_at,
            )
        )
        return asset

    def supersede_all_versions(self, asset_id: str) -> None:
        asset = self._assets[asset_id]
        asset.versions = [replace(v, superseded=True) for v in asset.versions]

    def to_dict(self) -> dict:
        return {name: asset.to_dict() for name, asset in sorted(self._assets.items())}

    @classmethod
    def from_dict(cls, raw: dict) -> "AssetStore":
        store = cls()
        for name, asset_raw in raw.items():
            store._assets[name] = Asset.from_dict(asset_raw)
        return store
