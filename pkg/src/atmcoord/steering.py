"""Steering best-response dynamics with bounded incentive offsets.

States are pure joint profiles. One step of the dynamics lets every player,
in a fixed order, switch to the action minimizing its cost plus its
incentive offset given the partially updated profile. Incentive offsets
live on the grid ``{k * delta : |k * delta| <= u_max}`` and are planned by
uniform-cost search, minimizing the total L1 magnitude.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import GameInputError, SizeLimitError
from .game import JointProfile, NormalFormGame, joint_index

SIGNAL_GRID_CAP = 10**4
MAX_HORIZON = 12


@dataclass(frozen=True, eq=False)
class SteeringProblem:
    game: NormalFormGame
    u_max: float
    delta: float
    safe: tuple[JointProfile, ...]
    target: tuple[JointProfile, ...]
    horizon: int
    order: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        g = self.game
        safe = tuple(tuple(int(a) for a in p) for p in self.safe)
        target = tuple(tuple(int(a) for a in p) for p in self.target)
        for p in safe + target:
            joint_index(p, g)
        if not target:
            raise GameInputError("target set must be nonempty")
        if not set(target) <= set(safe):
            raise GameInputError("target set must be contained in the safe set")
        if not math.isfinite(self.u_max) or self.u_max < 0:
            raise GameInputError("u_max must be finite and nonnegative")
        if not self.delta > 0:
            raise GameInputError("incentive grid step must be positive")
        if self.u_max > 0 and self.delta > 2 * self.u_max:
            raise GameInputError("grid step larger than 2 * u_max")
        if self.horizon < 1:
            raise GameInputError("horizon must be positive")
        order = tuple(range(g.n_players)) if self.order is None else tuple(self.order)
        if sorted(order) != list(range(g.n_players)):
            raise GameInputError("update order must be a permutation of the players")
        object.__setattr__(self, "safe", safe)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "order", order)

    @property
    def grid_levels(self) -> int:
        """Largest ``k`` with ``k * delta <= u_max``."""
        return int(math.floor(self.u_max / self.delta + 1e-9))

    def grid_values(self) -> np.ndarray:
        k = self.grid_levels
        return np.arange(-k, k + 1) * self.delta


@dataclass(frozen=True, eq=False)
class IncentiveSignal:
    """Per-player cost offsets, one per action."""

    offsets: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "offsets", tuple(np.array(o, dtype=float).reshape(-1) for o in self.offsets)
        )

    @classmethod
    def zero(cls, game: NormalFormGame) -> IncentiveSignal:
        return cls(tuple(np.zeros(m) for m in game.shape))

    @property
    def magnitude(self) -> float:
        return float(sum(np.abs(o).sum() for o in self.offsets))

    def flat(self) -> tuple[float, ...]:
        return tuple(float(v) for o in self.offsets for v in o)

    def __eq__(self, other) -> bool:
        return isinstance(other, IncentiveSignal) and self.flat() == other.flat()

    def check(self, prob: SteeringProblem) -> None:
        if len(self.offsets) != prob.game.n_players:
            raise GameInputError("signal has the wrong number of players")
        for i, o in enumerate(self.offsets):
            if o.size != prob.game.shape[i]:
                raise GameInputError(f"signal for player {i} has the wrong length")
            if np.any(np.abs(o) > prob.u_max + 1e-12):
                raise GameInputError(f"signal for player {i} exceeds the bound {prob.u_max}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: tuple[JointProfile, ...]
    signals: tuple[IncentiveSignal, ...]
    reached: bool
    feasible: bool = True

    @property
    def total_incentive(self) -> float:
        return float(sum(s.magnitude for s in self.signals))

    def __len__(self) -> int:
        return len(self.signals)


@dataclass(frozen=True)
class UnreachableReport:
    states_explored: int
    frontier_exhausted: bool
    reason: str


def _costs(game: NormalFormGame) -> list[np.ndarray]:
    return [-game.tensor(i) for i in range(game.n_players)]


def _step(x: JointProfile, offsets: Sequence[np.ndarray], costs, order) -> JointProfile:
    cur = list(x)
    for i in order:
        index = list(cur)
        index[i] = slice(None)
        total = costs[i][tuple(index)] + offsets[i]
        cur[i] = int(np.argmin(total))
    return tuple(cur)


def br_step(x: JointProfile, u: IncentiveSignal, prob: SteeringProblem) -> JointProfile:
    """One sequential best-response sweep under incentive ``u``; ties go to the lowest action."""
    joint_index(x, prob.game)
    u.check(prob)
    return _step(tuple(x), u.offsets, _costs(prob.game), prob.order)


def simulate(
    x0: JointProfile, signals: Sequence[IncentiveSignal], prob: SteeringProblem
) -> Trajectory:
    """Apply ``signals`` in turn, stopping at the target or on leaving the safe set."""
    x0 = tuple(int(a) for a in x0)
    joint_index(x0, prob.game)
    if len(signals) > prob.horizon:
        raise GameInputError(f"{len(signals)} signals exceed horizon {prob.horizon}")
    safe = set(prob.safe)
    target = set(prob.target)
    if x0 not in safe:
        raise GameInputError(f"initial state {x0} is not safe")
    states = [x0]
    used: list[IncentiveSignal] = []
    costs = _costs(prob.game)
    for u in signals:
        if states[-1] in target:
            break
        u.check(prob)
        nxt = _step(states[-1], u.offsets, costs, prob.order)
        states.append(nxt)
        used.append(u)
        if nxt not in safe:
            return Trajectory(tuple(states), tuple(used), False, feasible=False)
    return Trajectory(tuple(states), tuple(used), states[-1] in target)


def _transitions(x: JointProfile, prob: SteeringProblem, costs, grid_units):
    """Cheapest grid signal (in units of ``delta``) reaching each successor of ``x``."""
    shape = prob.game.shape
    best: dict[JointProfile, tuple[int, tuple[int, ...]]] = {}
    for units in itertools.product(grid_units, repeat=sum(shape)):
        offsets, pos = [], 0
        for m in shape:
            offsets.append(np.array(units[pos : pos + m], dtype=float) * prob.delta)
            pos += m
        nxt = _step(x, offsets, costs, prob.order)
        cost = sum(abs(v) for v in units)
        if nxt not in best or cost < best[nxt][0]:
            best[nxt] = (cost, units)
    return best


def _signal_from_units(units: tuple[int, ...], prob: SteeringProblem) -> IncentiveSignal:
    offsets, pos = [], 0
    for m in prob.game.shape:
        offsets.append(np.array(units[pos : pos + m], dtype=float) * prob.delta)
        pos += m
    return IncentiveSignal(tuple(offsets))


def plan_incentives(
    x0: JointProfile, prob: SteeringProblem, grid_cap: int = SIGNAL_GRID_CAP
) -> Trajectory | UnreachableReport:
    """Minimum-total-L1 incentive plan driving ``x0`` into the target within the horizon.

    Search nodes are (state, step). Plans never pass through unsafe states.
    Equal-cost plans are ranked shorter first, then by the lexicographic
    order of their signal sequences.
    """
    x0 = tuple(int(a) for a in x0)
    joint_index(x0, prob.game)
    if prob.horizon > MAX_HORIZON:
        raise SizeLimitError(f"horizon {prob.horizon} above the planning limit {MAX_HORIZON}")
    k = prob.grid_levels
    per_step = (2 * k + 1) ** sum(prob.game.shape)
    if per_step > grid_cap:
        raise SizeLimitError(f"{per_step} grid signals per step exceed cap {grid_cap}")
    safe = set(prob.safe)
    target = set(prob.target)
    if x0 not in safe:
        raise GameInputError(f"initial state {x0} is not safe")
    if x0 in target:
        return Trajectory((x0,), (), True)
    costs = _costs(prob.game)
    units = range(-k, k + 1)
    cache: dict[JointProfile, dict] = {}
    heap = [(0, 0, (), x0, (x0,))]
    closed: set[tuple[JointProfile, int]] = set()
    while heap:
        cost, steps, seq, x, path = heapq.heappop(heap)
        if (x, steps) in closed:
            continue
        closed.add((x, steps))
        if x in target:
            signals = tuple(_signal_from_units(s, prob) for s in seq)
            return Trajectory(path, signals, True)
        if steps == prob.horizon:
            continue
        if x not in cache:
            cache[x] = _transitions(x, prob, costs, units)
        for nxt, (c, sig) in cache[x].items():
            if nxt in safe and (nxt, steps + 1) not in closed:
                heapq.heappush(heap, (cost + c, steps + 1, seq + (sig,), nxt, path + (nxt,)))
    return UnreachableReport(
        states_explored=len(closed),
        frontier_exhausted=True,
        reason=f"no safe plan reaches the target within {prob.horizon} steps",
    )
