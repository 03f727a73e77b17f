"""Check records, residual accumulation and report aggregation."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from . import series as S

__all__ = ["CheckRecord", "Report", "Residual", "norm"]


def _scalar(v):
    return float(S.constant_part(v))


def norm(vec):
    """Euclidean norm of a vector of scalars, as a float."""
    return math.sqrt(sum(_scalar(v) ** 2 for v in vec))


class Residual:
    """Running maximum of ``|lhs - rhs|`` over blocks.

    The relative residual divides by the larger side's norm, floored at 1 so
    that identities between tiny vectors do not blow up.
    """

    def __init__(self):
        self.max_abs = 0.0
        self.max_rel = 0.0
        self.exact_zero = True
        self.count = 0

    def update(self, lhs, rhs):
        lhs = tuple(lhs)
        rhs = tuple(rhs)
        if len(lhs) != len(rhs):
            raise ValueError("residual blocks differ in length")
        diff = [a - b for a, b in zip(lhs, rhs)]
        if any(d != 0 for d in diff):
            self.exact_zero = False
        a = norm(diff)
        scale = max(norm(lhs), norm(rhs), 1.0)
        self.max_abs = max(self.max_abs, a)
        self.max_rel = max(self.max_rel, a / scale)
        self.count += 1
        return a

    def passes(self, tolerance):
        if tolerance == 0:
            return self.exact_zero
        return self.max_rel <= tolerance

    def record(self, name, k, samples, tolerance, details=None, diagnostic=None):
        return CheckRecord(
            name=name,
            k=k,
            samples=samples,
            max_abs_residual=self.max_abs,
            max_rel_residual=self.max_rel,
            tolerance=tolerance,
            passed=self.passes(tolerance),
            details=dict(details or {}),
            diagnostic=diagnostic,
        )


@dataclass(frozen=True)
class CheckRecord:
    name: str
    k: int
    samples: int
    max_abs_residual: float
    max_rel_residual: float
    tolerance: float
    passed: bool
    details: dict = field(default_factory=dict)
    diagnostic: str = None

    def to_dict(self):
        out = asdict(self)
        out["pass"] = out.pop("passed")
        for key in ("max_abs_residual", "max_rel_residual"):
            if isinstance(out[key], float) and math.isnan(out[key]):
                out[key] = None
        return out

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        text = (f"{status} {self.name} k={self.k} samples={self.samples} "
                f"abs={self.max_abs_residual:.3e} rel={self.max_rel_residual:.3e} "
                f"tol={self.tolerance:g}")
        if self.diagnostic:
            text += f" ({self.diagnostic})"
        return text


@dataclass
class Report:
    scenario: str
    records: list = field(default_factory=list)

    @property
    def passed(self):
        return all(r.passed for r in self.records)

    def add(self, record):
        self.records.append(record)
        return record

    def text(self):
        lines = [f"scenario {self.scenario}"]
        lines += ["  " + r.line() for r in self.records]
        lines.append(f"overall {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)

    def jsonl(self):
        """One JSON object per record followed by a summary object."""
        rows = [json.dumps(r.to_dict(), sort_keys=True) for r in self.records]
        rows.append(json.dumps({"scenario": self.scenario, "summary": True,
                                "checks": len(self.records), "pass": self.passed},
                               sort_keys=True))
        return "\n".join(rows) + "\n"
