"""Sector-overload game with a cooperativeness weight, and best-response dynamics.

Each sector owns a set of flights and picks a departure shift for each of
them. Sector ``i`` pays ``J_i = L_i + kappa * sum_{j != i} L_j`` where
``L_j`` is the per-bin excess demand of sector ``j`` over its capacity,
summed over the horizon. A route entry occupies exactly one time bin, its
nominal bin plus the flight's shift.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import GameInputError, SizeLimitError

log = logging.getLogger(__name__)

CONVERGED = "converged"
CYCLE_DETECTED = "cycle_detected"
MAX_ROUNDS = "max_rounds"


@dataclass(frozen=True)
class Sector:
    id: str
    capacity: int


@dataclass(frozen=True)
class Flight:
    id: str
    owner: str
    route: tuple[tuple[str, int], ...]
    shifts: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "route", tuple((str(s), int(b)) for s, b in self.route))
        shifts = tuple(sorted(set(int(s) for s in self.shifts)))
        if not shifts:
            raise GameInputError(f"flight {self.id} has no allowed shifts")
        object.__setattr__(self, "shifts", shifts)


@dataclass(frozen=True)
class CongestionInstance:
    sectors: tuple[Sector, ...]
    horizon: int
    flights: tuple[Flight, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        sectors = tuple(self.sectors)
        flights = tuple(self.flights)
        object.__setattr__(self, "sectors", sectors)
        object.__setattr__(self, "flights", flights)
        if self.horizon < 1:
            raise GameInputError("horizon must be positive")
        ids = [s.id for s in sectors]
        if len(set(ids)) != len(ids):
            raise GameInputError("duplicate sector ids")
        if any(s.capacity < 0 for s in sectors):
            raise GameInputError("capacities must be nonnegative")
        fids = [f.id for f in flights]
        if len(set(fids)) != len(fids):
            raise GameInputError("duplicate flight ids")
        index = {sid: k for k, sid in enumerate(ids)}
        for f in flights:
            if f.owner not in index:
                raise GameInputError(f"flight {f.id} owned by unknown sector {f.owner}")
            for sid, b in f.route:
                if sid not in index:
                    raise GameInputError(f"flight {f.id} visits unknown sector {sid}")
                if b + f.shifts[0] < 0 or b + f.shifts[-1] >= self.horizon:
                    raise GameInputError(
                        f"flight {f.id}: bin {b} with shifts {f.shifts} leaves [0, {self.horizon})"
                    )
        object.__setattr__(self, "_index", index)

    @property
    def n_sectors(self) -> int:
        return len(self.sectors)

    def sector_index(self, sector_id: str) -> int:
        try:
            return self._index[sector_id]
        except KeyError:
            raise GameInputError(f"unknown sector {sector_id!r}") from None

    def owned(self, sector_id: str) -> list[int]:
        """Indices of flights owned by a sector, in flight order."""
        return [k for k, f in enumerate(self.flights) if f.owner == sector_id]

    def capacities(self) -> np.ndarray:
        return np.array([s.capacity for s in self.sectors], dtype=float)


@dataclass(frozen=True)
class ScheduleProfile:
    """Chosen shift per flight, aligned with ``CongestionInstance.flights``."""

    shifts: tuple[int, ...]

    @classmethod
    def from_mapping(cls, shifts: Mapping[str, int], inst: CongestionInstance) -> ScheduleProfile:
        try:
            return cls(tuple(int(shifts[f.id]) for f in inst.flights))
        except KeyError as exc:
            raise GameInputError(f"no shift given for flight {exc.args[0]}") from None

    @classmethod
    def nominal(cls, inst: CongestionInstance) -> ScheduleProfile:
        """Zero shift where allowed, otherwise the allowed shift closest to zero."""
        return cls(tuple(min(f.shifts, key=lambda s: (abs(s), s)) for f in inst.flights))

    @classmethod
    def random(cls, inst: CongestionInstance, rng: np.random.Generator) -> ScheduleProfile:
        return cls(tuple(int(f.shifts[rng.integers(len(f.shifts))]) for f in inst.flights))

    def as_mapping(self, inst: CongestionInstance) -> dict[str, int]:
        return {f.id: s for f, s in zip(inst.flights, self.shifts)}

    def validate(self, inst: CongestionInstance) -> None:
        if len(self.shifts) != len(inst.flights):
            raise GameInputError("profile length does not match the flight list")
        for f, s in zip(inst.flights, self.shifts):
            if s not in f.shifts:
                raise GameInputError(f"shift {s} not allowed for flight {f.id}")


@dataclass(frozen=True)
class BrdConfig:
    kappa: float = 0.0
    br_cap: int = 4096
    eps: float = 1e-9
    max_rounds: int = 1000
    greedy_above_cap: bool = False
    seed: int | None = None

    def __post_init__(self) -> None:
        check_kappa(self.kappa)
        if self.max_rounds < 1:
            raise GameInputError("max_rounds must be positive")


@dataclass(frozen=True)
class BrdStep:
    step: int
    sector: str
    cost_before: float
    cost_after: float
    total_overload: float
    greedy: bool = False


@dataclass(frozen=True)
class BrdTrace:
    steps: tuple[BrdStep, ...]
    status: str
    final: ScheduleProfile
    rounds: int
    initial_total_overload: float

    @property
    def final_total_overload(self) -> float:
        return self.steps[-1].total_overload if self.steps else self.initial_total_overload


def check_kappa(kappa: float) -> None:
    if not 0.0 <= kappa <= 1.0:
        raise GameInputError(f"kappa={kappa} outside [0, 1]")


def _contributions(inst: CongestionInstance) -> list[np.ndarray]:
    """Per flight: occupancy tensor of shape (n_shifts, n_sectors, horizon)."""
    out = []
    for f in inst.flights:
        occ = np.zeros((len(f.shifts), inst.n_sectors, inst.horizon))
        for k, s in enumerate(f.shifts):
            for sid, b in f.route:
                occ[k, inst.sector_index(sid), b + s] += 1.0
        out.append(occ)
    return out


def demand(x: ScheduleProfile, inst: CongestionInstance) -> np.ndarray:
    """Occupancy counts per (sector, bin)."""
    x.validate(inst)
    d = np.zeros((inst.n_sectors, inst.horizon))
    for f, s in zip(inst.flights, x.shifts):
        for sid, b in f.route:
            d[inst.sector_index(sid), b + s] += 1.0
    return d


def overloads(x: ScheduleProfile, inst: CongestionInstance) -> np.ndarray:
    """Vector of ``L_j`` for every sector."""
    excess = demand(x, inst) - inst.capacities()[:, None]
    return np.clip(excess, 0.0, None).sum(axis=1)


def overload(sector: str, x: ScheduleProfile, inst: CongestionInstance) -> float:
    return float(overloads(x, inst)[inst.sector_index(sector)])


def _cost(loads: np.ndarray, i: int, kappa: float) -> np.ndarray:
    own = loads[..., i]
    return own + kappa * (loads.sum(axis=-1) - own)


def agent_cost(sector: str, x: ScheduleProfile, kappa: float, inst: CongestionInstance) -> float:
    """``L_i(x) + kappa * sum_{j != i} L_j(x)``."""
    check_kappa(kappa)
    return float(_cost(overloads(x, inst), inst.sector_index(sector), kappa))


class _Evaluator:
    """Fast repeated cost evaluation for one instance."""

    def __init__(self, inst: CongestionInstance):
        self.inst = inst
        self.occ = _contributions(inst)
        self.cap = inst.capacities()[:, None]
        self.shift_pos = [{s: k for k, s in enumerate(f.shifts)} for f in inst.flights]

    def demand(self, shifts: Sequence[int]) -> np.ndarray:
        d = np.zeros((self.inst.n_sectors, self.inst.horizon))
        for k, s in enumerate(shifts):
            d += self.occ[k][self.shift_pos[k][s]]
        return d

    def loads(self, d: np.ndarray) -> np.ndarray:
        return np.clip(d - self.cap, 0.0, None).sum(axis=-1)


def _exact_response(ev: _Evaluator, i: int, owned: list[int], shifts: list[int], kappa: float):
    inst = ev.inst
    base = ev.demand(shifts)
    for k in owned:
        base -= ev.occ[k][ev.shift_pos[k][shifts[k]]]
    choices = [inst.flights[k].shifts for k in owned]
    combos = np.array(list(itertools.product(*(range(len(c)) for c in choices))))
    d = np.broadcast_to(base, (len(combos),) + base.shape).copy()
    for col, k in enumerate(owned):
        d += ev.occ[k][combos[:, col]]
    costs = _cost(ev.loads(d), i, kappa)
    return [tuple(c[j] for c, j in zip(choices, row)) for row in combos], costs


def best_response(
    sector: str, x: ScheduleProfile, cfg: BrdConfig, inst: CongestionInstance, _ev=None
) -> tuple[dict[str, int], float]:
    """Cost-minimizing joint shift of the sector's own flights, others held fixed.

    Returns the new shifts of the owned flights and the sector's cost under
    them. The assignment is unchanged unless some alternative beats the
    current cost by more than ``cfg.eps``; among minimizers (within ``eps``)
    the lexicographically smallest shift vector wins.
    """
    new, cost, _ = _best_response(sector, x, cfg, inst, _ev)
    return {inst.flights[k].id: new[k] for k in inst.owned(sector)}, cost


def _best_response(sector, x, cfg, inst, ev=None):
    ev = ev or _Evaluator(inst)
    i = inst.sector_index(sector)
    owned = inst.owned(sector)
    shifts = list(x.shifts)
    current = float(_cost(ev.loads(ev.demand(shifts)), i, cfg.kappa))
    if not owned:
        return shifts, current, False
    combos = math.prod(len(inst.flights[k].shifts) for k in owned)
    if combos <= cfg.br_cap:
        vectors, costs = _exact_response(ev, i, owned, shifts, cfg.kappa)
        best = float(costs.min())
        if best < current - cfg.eps:
            pick = int(np.flatnonzero(costs <= best + cfg.eps)[0])
            for k, s in zip(owned, vectors[pick]):
                shifts[k] = s
            return shifts, float(costs[pick]), False
        return shifts, current, False
    if not cfg.greedy_above_cap:
        raise SizeLimitError(
            f"sector {sector} has {combos} joint shift combinations, above cap {cfg.br_cap}"
        )
    # coordinate descent over single flights until no flight improves
    cost = current
    improved = True
    while improved:
        improved = False
        for k in owned:
            vectors, costs = _exact_response(ev, i, [k], shifts, cfg.kappa)
            best = float(costs.min())
            if best < cost - cfg.eps:
                pick = int(np.flatnonzero(costs <= best + cfg.eps)[0])
                shifts[k] = vectors[pick][0]
                cost = float(costs[pick])
                improved = True
    return shifts, cost, True


def run_brd(x0: ScheduleProfile, cfg: BrdConfig, inst: CongestionInstance) -> BrdTrace:
    """Round-robin best-response dynamics from ``x0``.

    Sectors move in list order; a move is accepted only when it lowers the
    mover's cost by more than ``cfg.eps``. A full sweep without accepted
    moves means the profile is a pure Nash equilibrium. Revisiting a
    profile stops the run with ``cycle_detected``.
    """
    x0.validate(inst)
    ev = _Evaluator(inst)
    shifts = list(x0.shifts)
    initial_total = float(ev.loads(ev.demand(shifts)).sum())
    seen = {tuple(shifts)}
    steps: list[BrdStep] = []
    for rnd in range(1, cfg.max_rounds + 1):
        moved = False
        for sector in inst.sectors:
            current = ScheduleProfile(tuple(shifts))
            before = float(_cost(ev.loads(ev.demand(shifts)), inst.sector_index(sector.id), cfg.kappa))
            new, after, greedy = _best_response(sector.id, current, cfg, inst, ev)
            if new == shifts:
                continue
            moved = True
            shifts = new
            total = float(ev.loads(ev.demand(shifts)).sum())
            steps.append(BrdStep(len(steps) + 1, sector.id, before, after, total, greedy))
            key = tuple(shifts)
            if key in seen:
                log.info("cycle detected after %d accepted moves", len(steps))
                return BrdTrace(tuple(steps), CYCLE_DETECTED, ScheduleProfile(key), rnd, initial_total)
            seen.add(key)
        if not moved:
            return BrdTrace(tuple(steps), CONVERGED, ScheduleProfile(tuple(shifts)), rnd, initial_total)
    return BrdTrace(tuple(steps), MAX_ROUNDS, ScheduleProfile(tuple(shifts)), cfg.max_rounds, initial_total)


@dataclass(frozen=True)
class SweepRow:
    kappa: float
    seed: int
    final_overload: float
    rounds: int
    status: str


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]

    def summary(self) -> dict[float, tuple[float, float]]:
        """Mean and population standard deviation of final overload per kappa."""
        out: dict[float, list[float]] = {}
        for r in self.rows:
            out.setdefault(r.kappa, []).append(r.final_overload)
        return {k: (float(np.mean(v)), float(np.std(v))) for k, v in out.items()}


def _sweep_one(args) -> SweepRow:
    inst, kappa, seed, cfg = args
    x0 = ScheduleProfile.random(inst, np.random.default_rng(seed))
    run_cfg = BrdConfig(
        kappa=kappa,
        br_cap=cfg.br_cap,
        eps=cfg.eps,
        max_rounds=cfg.max_rounds,
        greedy_above_cap=cfg.greedy_above_cap,
    )
    trace = run_brd(x0, run_cfg, inst)
    return SweepRow(kappa, seed, trace.final_total_overload, trace.rounds, trace.status)


def kappa_sweep(
    inst: CongestionInstance,
    kappas: Sequence[float],
    seeds: Sequence[int],
    cfg: BrdConfig = BrdConfig(),
    max_workers: int | None = None,
) -> SweepResult:
    """BRD from a seeded uniformly random start for every (kappa, seed) pair.

    ``cfg.kappa`` is ignored; the other settings apply to every run. Rows
    come back in (kappa, seed) grid order regardless of ``max_workers``.
    """
    if not kappas or not seeds:
        raise GameInputError("kappa and seed grids must be nonempty")
    for k in kappas:
        check_kappa(k)
    jobs = [(inst, float(k), int(s), cfg) for k in kappas for s in seeds]
    if max_workers and max_workers > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    return SweepResult(tuple(rows))
