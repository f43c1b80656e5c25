"""Energy savings of a recommended flight against measured alternatives.

Input is a measured-performance file: one or more groups, each with a
single ``recommended`` row and any number of ``adjacent`` rows carrying
measured recall and energy. The saving against an alternative is
``(E_alt - E_rec) / E_alt``; the headline figure is the largest one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import ValidationError
from .profiles import read_json

MODULE = "report"


@dataclass(frozen=True)
class MeasuredRow:
    label: str
    energy: float
    recall: float
    altitude: float | None = None
    speed: float | None = None
    rate: float | None = None
    model: str | None = None


@dataclass(frozen=True)
class GroupComparison:
    name: str
    recommended: MeasuredRow
    savings: tuple[tuple[MeasuredRow, float], ...]
    # Alternatives with higher recall that fit within beta of the recommendation.
    tolerance_conflicts: tuple[MeasuredRow, ...]

    @property
    def max_saving(self) -> float:
        return max((s for _, s in self.savings), default=0.0)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "recommended_energy": self.recommended.energy,
            "max_saving": self.max_saving,
            "savings": [{"row": _row_dict(r), "saving": s} for r, s in self.savings],
            "tolerance_conflicts": [_row_dict(r) for r in self.tolerance_conflicts],
        }


def _row_dict(row: MeasuredRow) -> dict:
    out = {"label": row.label, "energy": row.energy, "recall": row.recall}
    for key in ("altitude", "speed", "rate", "model"):
        if getattr(row, key) is not None:
            out[key] = getattr(row, key)
    return out


def saving(recommended_energy: float, alternative_energy: float) -> float:
    return (alternative_energy - recommended_energy) / alternative_energy


def compare_group(name: str, rows: Sequence[MeasuredRow], beta: float = 1.0) -> GroupComparison:
    recommended = [r for r in rows if r.label == "recommended"]
    if len(recommended) != 1:
        raise ValidationError(f"{name}.rows", f"need exactly one recommended row, got {len(recommended)}",
                              module=MODULE)
    rec = recommended[0]
    others = [r for r in rows if r is not rec]
    conflicts = tuple(r for r in others if r.recall > rec.recall and r.energy <= beta * rec.energy)
    return GroupComparison(name, rec, tuple((r, saving(rec.energy, r.energy)) for r in others), conflicts)


def _row_from(item: Mapping, path: str) -> MeasuredRow:
    try:
        return MeasuredRow(
            label=str(item["label"]),
            energy=float(item["energy"]),
            recall=float(item["recall"]),
            altitude=None if item.get("altitude") is None else float(item["altitude"]),
            speed=None if item.get("speed") is None else float(item["speed"]),
            rate=None if item.get("rate") is None else float(item["rate"]),
            model=None if item.get("model") is None else str(item["model"]),
        )
    except (KeyError, TypeError, ValueError):
        raise ValidationError(path, "expected {label, energy, recall, ...}", module=MODULE) from None


def compare_measured(data: Mapping, beta: float | None = None) -> list[GroupComparison]:
    if beta is None:
        beta = float(data.get("beta", 1.0))
    groups = data.get("groups")
    if not isinstance(groups, list) or not groups:
        raise ValidationError("groups", "expected a non-empty list", module=MODULE)
    out = []
    for i, group in enumerate(groups):
        rows = [_row_from(r, f"groups[{i}].rows[{j}]") for j, r in enumerate(group.get("rows", []))]
        out.append(compare_group(str(group.get("name", f"group{i}")), rows, beta))
    return out


def load_and_compare(path, beta: float | None = None) -> list[GroupComparison]:
    return compare_measured(read_json(path, module=MODULE), beta)
