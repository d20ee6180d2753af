"""Test cases for the artifact serializer."""

import numpy as np
import pytest

from rlunlearn.errors import MissingArtifact
from rlunlearn.utils.serializer import ArtifactFormat, ArtifactSerializer


def test_json_serialization():
    """Test JSON serialization and deserialization."""
    data = {"name": "metrics", "values": [1, 2, 3], "nested": {"key": "value"}}

    serialized = ArtifactSerializer.serialize(data, ArtifactFormat.JSON)
    assert isinstance(serialized, bytes)

    deserialized = ArtifactSerializer.deserialize(serialized, ArtifactFormat.JSON)
    assert deserialized == data


def test_keys_sorted_and_compact():
    """Key order of the input does not change the bytes."""
    a = ArtifactSerializer.serialize({"b": 1, "a": 2})
    b = ArtifactSerializer.serialize({"a": 2, "b": 1})
    assert a == b == b'{"a":2,"b":1}\n'


def test_floats_round_trip_exactly():
    values = [0.1, 1 / 3, np.float64(2.0) / 7, 1e-300]
    back = ArtifactSerializer.deserialize(ArtifactSerializer.serialize(values))
    assert back == [float(v) for v in values]


def test_sets_and_numpy_scalars():
    data = {"ids": frozenset({3, 1, 2}), "count": np.int64(4)}
    assert ArtifactSerializer.deserialize(ArtifactSerializer.serialize(data)) == {
        "ids": [1, 2, 3],
        "count": 4,
    }


def test_nan_rejected():
    with pytest.raises(ValueError):
        ArtifactSerializer.serialize({"x": float("nan")})


def test_jsonl_round_trip(tmp_path):
    records = [{"i": 0}, {"i": 1, "tokens": ["a", "dog"]}]
    path = ArtifactSerializer.write_lines(tmp_path / "out.jsonl", records)
    assert path.read_text(encoding="utf-8").count("\n") == 2
    assert ArtifactSerializer.read_lines(path) == records


def test_unsupported_format():
    with pytest.raises(ValueError, match="Unsupported"):
        ArtifactSerializer.serialize({}, "pickle")


def test_read_missing_file(tmp_path):
    with pytest.raises(MissingArtifact, match="missing.json"):
        ArtifactSerializer.read(tmp_path / "missing.json")
    with pytest.raises(MissingArtifact, match="missing.jsonl"):
        ArtifactSerializer.read_lines(tmp_path / "missing.jsonl")
