"""Training log: one metadata record followed by one record per iteration."""

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from rlunlearn.utils.serializer import ArtifactSerializer


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    forget_reward: float
    retain_reward: float
    kl: float
    forget_mass: float
    hypernym_mass: float
    objective: float
    groups: int
    wall_time: Optional[float] = None

    def to_dict(self) -> dict[str, Any]:
        data = {"kind": "iteration", **asdict(self)}
        if self.wall_time is None:
            del data["wall_time"]
        return data


@dataclass
class TrainLog:
    """In-memory training log.

    Attributes:
        meta: Run settings, including the KL estimator in use.
        records: Per-iteration signals, in iteration order.
    """

    meta: dict[str, Any] = field(default_factory=dict)
    records: list[IterationRecord] = field(default_factory=list)

    def append(self, record: IterationRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def series(self, name: str) -> list[float]:
        return [getattr(r, name) for r in self.records]

    def to_lines(self) -> list[dict[str, Any]]:
        return [{"kind": "meta", **self.meta}] + [r.to_dict() for r in self.records]

    def write(self, path: Union[str, Path]) -> Path:
        return ArtifactSerializer.write_lines(Path(path), self.to_lines())

    @classmethod
    def read(cls, path: Union[str, Path]) -> "TrainLog":
        log = cls()
        for line in ArtifactSerializer.read_lines(Path(path)):
            kind = line.pop("kind", None)
            if kind == "meta":
                log.meta = line
            elif kind == "iteration":
                log.records.append(IterationRecord(**line))
        return log
