"""Structured analysis reports: full-precision values plus display strings."""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Optional

from . import __version__
from .bounds import AssumptionSet, BoundsResult
from .estimators import IvEstimates, SensitivityResult
from .model import ValidationReport

DEFAULT_DECIMALS = 2


def display_decimals() -> int:
    raw = os.environ.get("IVPI_PRECISION")
    if raw is None or raw == "":
        return DEFAULT_DECIMALS
    try:
        value = int(raw)
        if not 0 <= value <= 15:
            raise ValueError
    except ValueError:
        print(f"ivpi: ignoring IVPI_PRECISION={raw!r} (need an integer 0-15)", file=sys.stderr)
        return DEFAULT_DECIMALS
    return value


def fmt(value: Optional[float], decimals: Optional[int] = None) -> str:
    if value is None:
        return "NA"
    d = display_decimals() if decimals is None else decimals
    out = f"{value:.{d}f}"
    # avoid "-0.00"
    if out.lstrip("-").strip("0.") == "":
        out = out.lstrip("-")
    return out


def num(value: Optional[float], decimals: Optional[int] = None) -> Optional[dict]:
    if value is None:
        return None
    return {"value": float(value), "display": fmt(value, decimals)}


def assumptions_dict(a: AssumptionSet) -> dict:
    return {
        "monotonicity": a.monotonicity,
        "cap_never_taker_treated": a.cap_never_taker_treated,
        "cap_always_taker_untreated": a.cap_always_taker_untreated,
    }


def bounds_dict(result: BoundsResult, law_label: str = "empirical") -> dict:
    out = {
        "assumptions": assumptions_dict(result.assumptions),
        "label": result.assumptions.describe(),
        "law": law_label,
        "status": result.status,
        "lower": num(result.lower),
        "upper": num(result.upper),
    }
    if result.bounded:
        out["display"] = f"[{fmt(result.lower)}, {fmt(result.upper)}]"
    return out


def estimates_dict(est: IvEstimates) -> dict:
    return {
        "itt_y": num(est.itt_y),
        "itt_x": num(est.itt_x),
        "wald": num(est.wald),
        "complier_share": num(est.complier_share),
        "always_taker_share": num(est.always_taker_share),
        "never_taker_share": num(est.never_taker_share),
        "weak_instrument": est.weak_instrument,
    }


def sensitivity_dict(s: SensitivityResult, ranges) -> dict:
    return {
        "always_taker_effect_range": list(ranges.always_taker_effect),
        "never_taker_effect_range": list(ranges.never_taker_effect),
        "lower": num(s.lower),
        "upper": num(s.upper),
        "display": f"[{fmt(s.lower)}, {fmt(s.upper)}]",
        "late": num(s.late),
        "terms": {
            "complier": num(s.complier_term),
            "always_taker": [num(v) for v in s.always_taker_terms],
            "never_taker": [num(v) for v in s.never_taker_terms],
        },
        "note": "stratum-decomposition sensitivity; assumes no defiers and uses the Wald ratio as the complier effect",
    }


def findings_list(report: ValidationReport) -> list[dict]:
    return [{"severity": f.severity, "code": f.code, "message": f.message} for f in report.messages]


@dataclass
class AnalysisReport:
    command: str
    inputs: dict
    estimates: Optional[dict] = None
    bounds: Optional[list] = None
    sweep: Optional[dict] = None
    sensitivity: Optional[dict] = None
    findings: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    tool: str = "ivpi"
    version: str = __version__

    def to_dict(self) -> dict[str, Any]:
        out = {"tool": self.tool, "version": self.version, "command": self.command, "inputs": self.inputs}
        for key in ("estimates", "bounds", "sweep", "sensitivity"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        out["findings"] = self.findings
        out.update(self.extra)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "AnalysisReport":
        data = dict(data)
        known = {k: data.pop(k) for k in ("command", "inputs", "estimates", "bounds", "sweep",
                                           "sensitivity", "findings", "tool", "version") if k in data}
        return cls(extra=data, **known)
