"""Energy-efficiency decision over measured performance tables.

Per model, the altitude scan keeps the highest altitude index before the
first altitude whose best score misses ``perf_min`` and looks ``n`` grid
steps below it. Every qualifying (score, rate) entry is flown as fast as the
UAV and the model's maximum rate allow, with the rate scaled in proportion
to speed. Across models, candidates more than ``beta`` times the cheapest
are dropped and the best-scoring survivor wins.

Ties after (score, energy) go to the higher altitude, then the lower rate,
then the lexicographically smaller model id, then the higher speed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .energy import derive_altitude_range, system_energy
from .errors import InfeasibleError, ValidationError
from .profiles import FlightParams, MissionProfiles, ModelPerfTable, TaskSpec, check_table

MODULE = "decision"


@dataclass(frozen=True)
class Candidate:
    params: FlightParams
    perf: float
    energy: float

    def to_dict(self) -> dict:
        p = self.params
        return {"model_id": p.model_id, "h": p.h, "v": p.v, "r": p.r, "perf": self.perf, "energy": self.energy}


@dataclass(frozen=True)
class Recommendation:
    chosen: Candidate
    candidates_considered: int
    energy_min: float
    filtered_by_beta: int
    candidates: tuple[Candidate, ...] = field(default=(), repr=False)

    def to_dict(self, with_candidates: bool = True) -> dict:
        out = {
            "chosen": self.chosen.to_dict(),
            "candidates_considered": self.candidates_considered,
            "energy_min": self.energy_min,
            "filtered_by_beta": self.filtered_by_beta,
        }
        if with_candidates:
            out["candidates"] = [c.to_dict() for c in self.candidates]
        return out


def _tiebreak(c: Candidate) -> tuple:
    return (-c.params.h, c.params.r, c.params.model_id, -c.params.v)


def resolve_n(table: ModelPerfTable, profiles: MissionProfiles, task: TaskSpec) -> int:
    if task.n is not None:
        return task.n
    if len(table.altitudes) < 2:
        return 0
    return derive_altitude_range(profiles, table.altitudes, profiles.uav.v_max).n


def highest_feasible_index(perf_max: Sequence[float], perf_min: float) -> int:
    """Index of the last altitude before the first one scoring below ``perf_min``; -1 if none."""
    h_max = -1
    for perf in perf_max:
        if perf >= perf_min:
            h_max += 1
        else:
            break
    return h_max


def make_candidate(
    table: ModelPerfTable,
    profiles: MissionProfiles,
    h: float,
    perf: float,
    r_s: float,
) -> Candidate:
    """Fly a benchmark (score, rate) entry at the fastest speed the hardware allows."""
    r_max = profiles.edge.model(table.model_id).r_max
    v = min(profiles.uav.v_max, (r_max / r_s) * table.v_s)
    # (v / v_s) * r_s can land one ulp above r_max when the rate limit binds
    r = min((v / table.v_s) * r_s, r_max)
    params = FlightParams(table.model_id, h, v, r)
    return Candidate(params, perf, system_energy(profiles, params).p_system)


def decide_single_model(table: ModelPerfTable, profiles: MissionProfiles, task: TaskSpec) -> list[Candidate]:
    h_max = highest_feasible_index(table.perf_max, task.perf_min)
    if h_max < 0:
        return []
    n = resolve_n(table, profiles, task)
    results = []
    for i in range(max(0, h_max - n), h_max + 1):
        for perf, r_s in table.perf_r[i]:
            if perf >= task.perf_min:
                results.append(make_candidate(table, profiles, table.altitudes[i], perf, r_s))
    return results


def _best_perf_max(tables: Iterable[ModelPerfTable]) -> float | None:
    values = [p for t in tables for p in t.perf_max]
    return max(values) if values else None


def _validate(tables: Sequence[ModelPerfTable], profiles: MissionProfiles) -> None:
    if not tables:
        raise ValidationError("tables", "at least one performance table is required", module=MODULE)
    for i, table in enumerate(tables):
        check_table(table, profiles.edge, prefix=f"tables[{i}]", warn_monotone=False)


def decide(tables: Sequence[ModelPerfTable], profiles: MissionProfiles, task: TaskSpec) -> Recommendation:
    tables = tuple(tables)
    _validate(tables, profiles)
    results: list[Candidate] = []
    for table in tables:
        results.extend(decide_single_model(table, profiles, task))
    if not results:
        raise InfeasibleError(task.perf_min, _best_perf_max(tables))

    energy_min = min(c.energy for c in results)
    limit = task.beta * energy_min
    survivors = [c for c in results if c.energy <= limit]
    best_perf = max(c.perf for c in survivors)
    survivors = [c for c in survivors if c.perf == best_perf]
    lowest = min(c.energy for c in survivors)
    survivors = [c for c in survivors if c.energy == lowest]
    chosen = min(survivors, key=_tiebreak)
    return Recommendation(chosen, len(results), energy_min, len(results) - sum(c.energy <= limit for c in results),
                          tuple(results))


def brute_force_decide(
    tables: Sequence[ModelPerfTable],
    profiles: MissionProfiles,
    task: TaskSpec,
    prune: bool = True,
) -> Recommendation:
    """Exhaustive reference for :func:`decide`.

    With ``prune`` the enumeration covers the same altitude window as the
    decision (found here by a direct prefix test rather than the scan);
    without it every entry meeting ``perf_min`` at any altitude is flown.
    Selection is a single lexicographic minimum over the survivors.
    """
    tables = tuple(tables)
    _validate(tables, profiles)
    pool: list[Candidate] = []
    for table in tables:
        count = len(table.altitudes)
        if prune:
            prefix_ok = [all(p >= task.perf_min for p in table.perf_max[: i + 1]) for i in range(count)]
            top = max((i for i in range(count) if prefix_ok[i]), default=-1)
            if top < 0:
                continue
            indices = range(max(0, top - resolve_n(table, profiles, task)), top + 1)
        else:
            indices = range(count)
        for i in indices:
            for point in table.perf_r[i]:
                if point.perf >= task.perf_min:
                    pool.append(make_candidate(table, profiles, table.altitudes[i], point.perf, point.rate))
    if not pool:
        raise InfeasibleError(task.perf_min, _best_perf_max(tables))

    energy_min = min(c.energy for c in pool)
    limit = task.beta * energy_min
    kept = [c for c in pool if c.energy <= limit]
    chosen = min(kept, key=lambda c: (-c.perf, c.energy) + _tiebreak(c))
    return Recommendation(chosen, len(pool), energy_min, len(pool) - len(kept), tuple(pool))


@dataclass(frozen=True)
class Audit:
    decided: Recommendation
    pruned_oracle: Recommendation
    unpruned_oracle: Recommendation

    @property
    def oracle_agrees(self) -> bool:
        return self.decided == self.pruned_oracle

    @property
    def energy_regret(self) -> float:
        """Extra Wh/km² the windowed choice costs over the unwindowed one."""
        return self.decided.chosen.energy - self.unpruned_oracle.chosen.energy

    @property
    def perf_regret(self) -> float:
        return self.unpruned_oracle.chosen.perf - self.decided.chosen.perf

    def to_dict(self) -> dict:
        return {
            "oracle_agrees": self.oracle_agrees,
            "pruned_oracle": self.pruned_oracle.to_dict(with_candidates=False),
            "unpruned_oracle": self.unpruned_oracle.to_dict(with_candidates=False),
            "energy_regret": self.energy_regret,
            "perf_regret": self.perf_regret,
        }


def audit(tables: Sequence[ModelPerfTable], profiles: MissionProfiles, task: TaskSpec) -> Audit:
    return Audit(
        decide(tables, profiles, task),
        brute_force_decide(tables, profiles, task, prune=True),
        brute_force_decide(tables, profiles, task, prune=False),
    )
