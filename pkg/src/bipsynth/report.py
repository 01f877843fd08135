"""Machine-readable verdicts: one JSON object per line, versioned."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

SCHEMA = "bipsynth.check/1"
VERDICTS = ("proved", "safe_up_to", "cex", "resource_limit")


class ReportError(Exception):
    pass


@dataclass(frozen=True)
class Record:
    model: str
    property: str
    verdict: str
    k: Optional[int] = None
    bip_depth: Optional[int] = None
    seconds: float = 0.0
    vcd: Optional[str] = None
    trace: Optional[str] = None
    interactions: Optional[tuple[str, ...]] = None
    message: str = ""

    def to_json(self) -> str:
        d = {"schema": SCHEMA}
        for key in self.__dataclass_fields__:
            value = getattr(self, key)
            if key == "interactions" and value is not None:
                value = list(value)
            d[key] = value
        return json.dumps(d, ensure_ascii=False, sort_keys=True)


_REQUIRED = {"schema": str, "model": str, "property": str, "verdict": str}
_OPTIONAL_INT = ("k", "bip_depth")


def parse_report(text: str) -> list[Record]:
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ReportError(f"line {n}: {exc}") from None
        if not isinstance(d, dict):
            raise ReportError(f"line {n}: expected an object")
        for key, ty in _REQUIRED.items():
            if not isinstance(d.get(key), ty):
                raise ReportError(f"line {n}: missing or invalid {key!r}")
        if d["schema"] != SCHEMA:
            raise ReportError(f"line {n}: unsupported schema {d['schema']!r}")
        if d["verdict"] not in VERDICTS:
            raise ReportError(f"line {n}: unknown verdict {d['verdict']!r}")
        for key in _OPTIONAL_INT:
            if d.get(key) is not None and not isinstance(d[key], int):
                raise ReportError(f"line {n}: {key!r} must be an integer")
        known = set(Record.__dataclass_fields__)
        extra = set(d) - known - {"schema"}
        if extra:
            raise ReportError(f"line {n}: unknown fields {sorted(extra)}")
        inter = d.get("interactions")
        out.append(
            Record(
                model=d["model"],
                property=d["property"],
                verdict=d["verdict"],
                k=d.get("k"),
                bip_depth=d.get("bip_depth"),
                seconds=float(d.get("seconds", 0.0)),
                vcd=d.get("vcd"),
                trace=d.get("trace"),
                interactions=None if inter is None else tuple(inter),
                message=d.get("message", ""),
            )
        )
    return out
