"""Artifact serialization for rlunlearn."""

import json
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

from pydantic import BaseModel

from rlunlearn.errors import MissingArtifact


class ArtifactFormat(str, Enum):
    """Serialization formats.

    Attributes:
        JSON: One canonical JSON document.
        JSONL: JSON-lines, one canonical document per line.
    """

    JSON = "json"
    JSONL = "jsonl"


def _plain(data: Any) -> Any:
    if isinstance(data, BaseModel):
        return data.model_dump(mode="json")
    if isinstance(data, dict):
        return {str(k): _plain(v) for k, v in data.items()}
    if isinstance(data, (list, tuple)):
        return [_plain(v) for v in data]
    if isinstance(data, (set, frozenset)):
        return sorted(_plain(v) for v in data)
    if isinstance(data, Enum):
        return data.value
    if hasattr(data, "item") and callable(data.item):
        # numpy scalars
        return data.item()
    return data


class ArtifactSerializer:
    """Canonical serializer for run artifacts.

    Keys are sorted, separators are compact, and floats are written with
    ``repr`` which is the shortest string that parses back to the same double.
    Identical inputs therefore always give identical bytes.
    """

    @staticmethod
    def dumps(data: Any) -> str:
        """Serialize one document to a canonical JSON string."""
        return json.dumps(
            _plain(data),
            sort_keys=True,
            separators=(",", ":"),
            ensure_ascii=False,
            allow_nan=False,
        )

    @staticmethod
    def serialize(data: Any, format: ArtifactFormat = ArtifactFormat.JSON) -> bytes:
        """Serialize data to UTF-8 bytes.

        Args:
            data: A document (JSON) or an iterable of documents (JSONL).
            format: Serialization format to use.

        Returns:
            Serialized data as bytes, newline-terminated.
        """
        if format == ArtifactFormat.JSON:
            return (ArtifactSerializer.dumps(data) + "\n").encode("utf-8")
        elif format == ArtifactFormat.JSONL:
            lines = [ArtifactSerializer.dumps(item) for item in data]
            return "".join(line + "\n" for line in lines).encode("utf-8")
        else:
            raise ValueError(f"Unsupported serialization format: {format}")

    @staticmethod
    def deserialize(data: bytes, format: ArtifactFormat = ArtifactFormat.JSON) -> Any:
        """Deserialize bytes written by :meth:`serialize`."""
        text = data.decode("utf-8")
        if format == ArtifactFormat.JSON:
            return json.loads(text)
        elif format == ArtifactFormat.JSONL:
            return [json.loads(line) for line in text.splitlines() if line.strip()]
        else:
            raise ValueError(f"Unsupported serialization format: {format}")

    @staticmethod
    def write(path: Path, data: Any, format: ArtifactFormat = ArtifactFormat.JSON) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(ArtifactSerializer.serialize(data, format))
        return path

    @staticmethod
    def read(path: Path, format: ArtifactFormat = ArtifactFormat.JSON) -> Any:
        path = Path(path)
        if not path.exists():
            raise MissingArtifact(path)
        return ArtifactSerializer.deserialize(path.read_bytes(), format)

    @staticmethod
    def write_lines(path: Path, records: Iterable[Any]) -> Path:
        return ArtifactSerializer.write(path, list(records), ArtifactFormat.JSONL)

    @staticmethod
    def read_lines(path: Path) -> list[Any]:
        return ArtifactSerializer.read(path, ArtifactFormat.JSONL)
