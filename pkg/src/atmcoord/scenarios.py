"""Seeded synthetic scenarios: runway slot games and sector-congestion instances.

Also the comparison metrics (delay, welfare, Jain fairness) used to rank
FCFS, Nash and correlated outcomes on runway scenarios.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .congestion import CongestionInstance, Flight, Sector
from .errors import GameInputError, SizeLimitError
from .game import JointDistribution, NormalFormGame

RUNWAY_JOINT_CAP = 4096


@dataclass(frozen=True)
class RunwayScenario:
    n_airlines: int
    n_slots: int
    preferred: tuple[int, ...]
    weights: tuple[float, ...]
    seed: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "preferred", tuple(int(p) for p in self.preferred))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.n_airlines < 2 or self.n_slots < 1:
            raise GameInputError("need at least 2 airlines and 1 slot")
        if len(self.preferred) != self.n_airlines or len(self.weights) != self.n_airlines:
            raise GameInputError("one preferred slot and one weight per airline")
        if any(not 0 <= p < self.n_slots for p in self.preferred):
            raise GameInputError("preferred slots must lie in [0, n_slots)")
        if any(not math.isfinite(w) or w <= 0 for w in self.weights):
            raise GameInputError("delay weights must be positive")

    @classmethod
    def random(cls, n_airlines: int, n_slots: int, seed: int) -> RunwayScenario:
        """Preferences uniform over slots, weights uniform on {1, 2, 3}."""
        rng = np.random.default_rng(seed)
        preferred = rng.integers(0, n_slots, size=n_airlines)
        weights = rng.integers(1, 4, size=n_airlines)
        return cls(n_airlines, n_slots, tuple(preferred), tuple(weights), seed)


@dataclass(frozen=True, eq=False)
class MetricsReport:
    label: str
    total_delay: float
    delays: np.ndarray
    welfare: float
    fairness: float

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "total_delay": self.total_delay,
            "delays": [float(d) for d in self.delays],
            "welfare": self.welfare,
            "fairness": self.fairness,
        }


def fairness_index(delays) -> float:
    """Jain's index ``(sum d)^2 / (n sum d^2)``; 1.0 when every delay is zero."""
    d = np.asarray(delays, dtype=float).reshape(-1)
    if d.size == 0:
        raise GameInputError("fairness index of an empty vector")
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise GameInputError("delays must be finite and nonnegative")
    sq = float(np.sum(d * d))
    if sq == 0.0:
        return 1.0
    return float(d.sum() ** 2 / (d.size * sq))


def runway_delays(profile: tuple[int, ...], sc: RunwayScenario) -> np.ndarray:
    """Unweighted delay per airline: preference miss plus queue position."""
    out = np.zeros(sc.n_airlines)
    for i, slot in enumerate(profile):
        ahead = sum(1 for j in range(i) if profile[j] == slot)
        out[i] = abs(slot - sc.preferred[i]) + ahead
    return out


def gen_runway_game(sc: RunwayScenario, cap: int = RUNWAY_JOINT_CAP) -> NormalFormGame:
    """Each airline picks a slot; cost is weight times (miss + airlines ahead in queue).

    The queue order at a shared slot is airline index order.
    """
    size = sc.n_slots**sc.n_airlines
    if size > cap:
        raise SizeLimitError(f"runway game has {size} joint actions, above cap {cap}")
    weights = np.array(sc.weights)
    util = np.zeros((sc.n_airlines, size))
    for k, prof in enumerate(itertools.product(range(sc.n_slots), repeat=sc.n_airlines)):
        util[:, k] = -weights * runway_delays(prof, sc)
    return NormalFormGame(
        tuple(f"airline{i}" for i in range(sc.n_airlines)),
        tuple(tuple(f"slot{t}" for t in range(sc.n_slots)) for _ in range(sc.n_airlines)),
        util,
    )


def _report(label: str, delays: np.ndarray, sc: RunwayScenario) -> MetricsReport:
    return MetricsReport(
        label=label,
        total_delay=float(delays.sum()),
        delays=delays,
        welfare=float(-(np.array(sc.weights) @ delays)),
        fairness=fairness_index(delays),
    )


def fcfs_baseline(sc: RunwayScenario) -> MetricsReport:
    """Airlines claim slots in index order, overflowing to the next free later slot.

    Slots past the horizon are allowed and count their full delay, so every
    airline is served.
    """
    taken: set[int] = set()
    delays = np.zeros(sc.n_airlines)
    for i, pref in enumerate(sc.preferred):
        slot = pref
        while slot in taken:
            slot += 1
        taken.add(slot)
        delays[i] = slot - pref
    return _report("fcfs", delays, sc)


def distribution_metrics(z: JointDistribution, sc: RunwayScenario, label: str) -> MetricsReport:
    """Expected per-airline delays when joint slot choices are drawn from ``z``."""
    size = sc.n_slots**sc.n_airlines
    if len(z) != size:
        raise GameInputError("distribution does not match the runway game")
    delays = np.zeros(sc.n_airlines)
    for k, prof in enumerate(itertools.product(range(sc.n_slots), repeat=sc.n_airlines)):
        if z.probs[k] > 0.0:
            delays += z.probs[k] * runway_delays(prof, sc)
    return _report(label, delays, sc)


def gen_congestion_instance(
    sectors: int, flights: int, horizon: int, shift_radius: int, seed: int
) -> CongestionInstance:
    """Random routes of 1-3 distinct sectors with unit capacities or a little more.

    A flight is owned by the first sector on its route. Consecutive route
    entries are one or two bins apart, and every entry keeps its full shift
    window ``[-r, r]`` inside the horizon. Capacity is drawn from
    ``1..ceil(mean load per bin)``, so collisions (hence overload) are the
    norm rather than the exception.
    """
    if min(sectors, flights, horizon) < 1 or shift_radius < 0:
        raise GameInputError("sizes must be positive and the shift radius nonnegative")
    lo, hi = shift_radius, horizon - 1 - shift_radius
    if hi < lo:
        raise GameInputError(
            f"horizon {horizon} too short for shift radius {shift_radius}"
        )
    rng = np.random.default_rng(seed)
    sector_ids = [f"S{k}" for k in range(sectors)]
    shifts = tuple(range(-shift_radius, shift_radius + 1))
    flight_list = []
    load = np.zeros(sectors)
    for n in range(flights):
        visits = int(rng.integers(1, 4))
        visits = min(visits, sectors, hi - lo + 1)
        path = rng.choice(sectors, size=visits, replace=False)
        gaps = rng.integers(1, 3, size=visits - 1)
        span = int(gaps.sum())
        while span > hi - lo:
            gaps = np.maximum(gaps - 1, 1)
            if int(gaps.sum()) == span:
                break
            span = int(gaps.sum())
        start = int(rng.integers(lo, hi - span + 1))
        bins = [start] + list(start + np.cumsum(gaps))
        route = tuple((sector_ids[int(s)], int(b)) for s, b in zip(path, bins))
        for s in path:
            load[int(s)] += 1
        flight_list.append(Flight(f"F{n}", route[0][0], route, shifts))
    caps = []
    for k in range(sectors):
        top = max(1, math.ceil(load[k] / horizon))
        caps.append(Sector(sector_ids[k], int(rng.integers(1, top + 1))))
    return CongestionInstance(tuple(caps), horizon, tuple(flight_list))
