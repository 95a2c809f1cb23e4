"""The JSON envelope shared by every command: config, verdicts, summaries, timing."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any

from .verification import Verdict


@dataclass
class Summary:
    name: str
    mean: float
    variance: float
    se: float
    replicates: int
    extra: dict[str, Any] = field(default_factory=dict)


@dataclass
class RunReport:
    config: dict[str, Any]
    verdicts: list[Verdict] = field(default_factory=list)
    summaries: list[Summary] = field(default_factory=list)
    timing: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def to_dict(self, with_timing: bool = True) -> dict:
        doc = {
            "config": self.config,
            "verdicts": [v.to_dict() for v in self.verdicts],
            "summaries": [asdict(s) for s in self.summaries],
        }
        if with_timing:
            doc["timing"] = dict(self.timing)
        return doc

    def to_json(self, with_timing: bool = True) -> str:
        return json.dumps(self.to_dict(with_timing), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunReport":
        return cls(
            dict(doc["config"]),
            [Verdict.from_dict(v) for v in doc.get("verdicts", [])],
            [Summary(**s) for s in doc.get("summaries", [])],
            dict(doc.get("timing", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))
