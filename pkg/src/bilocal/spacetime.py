"""Space-like separation audit for the events of one experimental trial.

Each condition reads ``L / c > max_i (t + tau_i)``: two events a beeline
distance ``L`` apart, starting ``t`` apart and lasting ``tau_i``, must not be
connectable by light. Signals travel in fibre, but causality is judged on the
beeline, so fibre lengths are carried as metadata only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact
_M_PER_NS = SPEED_OF_LIGHT * 1e-9


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class SeparationCondition:
    label: str
    distance_m: float
    relative_delay_ns: float
    elapses_ns: tuple[float, ...]
    printed_difference_ns: float | None = None

    def __post_init__(self):
        if not self.distance_m > 0:
            raise GeometryError(f"{self.label}: distance must be positive, got {self.distance_m!r}")
        if len(self.elapses_ns) == 0:
            raise GeometryError(f"{self.label}: needs at least one elapse time")
        if any(tau < 0 for tau in self.elapses_ns):
            raise GeometryError(f"{self.label}: elapse times must be nonnegative")
        object.__setattr__(self, "elapses_ns", tuple(float(t) for t in self.elapses_ns))


def light_time_ns(distance_m: float) -> float:
    return distance_m / _M_PER_NS


def margin(c: SeparationCondition) -> float:
    """Slack ``L/c - max(t + tau)`` in ns; positive means space-like."""
    return light_time_ns(c.distance_m) - max(c.relative_delay_ns + tau for tau in c.elapses_ns)


@dataclass(frozen=True)
class ConditionResult:
    condition: SeparationCondition
    margin_ns: float

    @property
    def satisfied(self) -> bool:
        return self.margin_ns > 0


@dataclass(frozen=True)
class CausalityReport:
    results: tuple[ConditionResult, ...]
    fibre_lengths_m: dict = field(default_factory=dict)

    @property
    def satisfied(self) -> bool:
        return all(r.satisfied for r in self.results)

    def to_json(self) -> dict:
        rows = []
        for r in self.results:
            c = r.condition
            row = {
                "label": c.label,
                "distance_m": c.distance_m,
                "light_time_ns": round(light_time_ns(c.distance_m), 6),
                "relative_delay_ns": c.relative_delay_ns,
                "elapses_ns": list(c.elapses_ns),
                "margin_ns": round(r.margin_ns, 6),
                "satisfied": r.satisfied,
            }
            if c.printed_difference_ns is not None:
                row["printed_difference_ns"] = c.printed_difference_ns
            rows.append(row)
        return {"conditions": rows, "fibre_lengths_m": dict(self.fibre_lengths_m),
                "all_satisfied": self.satisfied}

    def to_text(self) -> str:
        head = ("condition", "L (m)", "L/c (ns)", "t (ns)", "max tau", "margin", "printed", "ok")
        lines = []
        for r in self.results:
            c = r.condition
            printed = "" if c.printed_difference_ns is None else f"{c.printed_difference_ns:.2f}"
            lines.append((c.label, f"{c.distance_m:g}", f"{light_time_ns(c.distance_m):.2f}",
                          f"{c.relative_delay_ns:.1f}", f"{max(c.elapses_ns):.1f}",
                          f"{r.margin_ns:.2f}", printed, "yes" if r.satisfied else "NO"))
        widths = [max(len(row[i]) for row in [head] + lines) for i in range(len(head))]
        fmt = lambda row: "  ".join(  # noqa: E731
            cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths)))
        out = [fmt(head), "  ".join("-" * w for w in widths)] + [fmt(row) for row in lines]
        out.append(f"all space-like: {'yes' if self.satisfied else 'NO'}")
        return "\n".join(out)


def audit(conditions, fibre_lengths_m: dict | None = None) -> CausalityReport:
    conditions = list(conditions)
    if not conditions:
        raise GeometryError("audit needs at least one condition")
    results = tuple(ConditionResult(c, margin(c)) for c in conditions)
    return CausalityReport(results, dict(fibre_lengths_m or {}))


@dataclass(frozen=True)
class Geometry:
    conditions: tuple[SeparationCondition, ...]
    fibre_lengths_m: dict


def load_geometry(doc: dict) -> Geometry:
    """Parse a geometry document ``{conditions: [...], fibre_lengths_m: {...}}``."""
    if not isinstance(doc, dict) or not isinstance(doc.get("conditions"), list):
        raise GeometryError("geometry document needs a 'conditions' list")
    conds = []
    for i, item in enumerate(doc["conditions"]):
        if not isinstance(item, dict):
            raise GeometryError(f"condition {i} is not an object")
        label = str(item.get("label", f"condition {i}"))
        for key in ("distance_m", "relative_delay_ns", "elapses_ns"):
            if key not in item:
                raise GeometryError(f"{label}: missing field {key!r}")
        elapses = item["elapses_ns"]
        if not isinstance(elapses, list):
            elapses = [elapses]
        try:
            conds.append(SeparationCondition(
                label,
                float(item["distance_m"]),
                float(item["relative_delay_ns"]),
                tuple(float(t) for t in elapses),
                None if item.get("printed_difference_ns") is None
                else float(item["printed_difference_ns"]),
            ))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, GeometryError):
                raise
            raise GeometryError(f"{label}: {exc}") from None
    fibres = doc.get("fibre_lengths_m", {}) or {}
    try:
        fibres = {str(k): float(v) for k, v in fibres.items()}
    except (AttributeError, TypeError, ValueError):
        raise GeometryError("fibre_lengths_m must map link names to lengths") from None
    return Geometry(tuple(conds), fibres)


def load_geometry_file(path: str | Path) -> Geometry:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GeometryError(f"{path}: invalid JSON ({exc})") from None
    return load_geometry(doc)


def bundled_geometry() -> Geometry:
    """The bundled geometry of the two-source campus network."""
    text = resources.files("bilocal").joinpath("data/campus_geometry.json").read_text()
    return load_geometry(json.loads(text))
