"""Finite normal-form games, joint distributions and equilibrium checks.

Joint actions are flattened row-major with player 0 as the most significant
digit, so for action counts ``(m0, m1, m2)`` the profile ``(a0, a1, a2)``
lives at ``(a0 * m1 + a1) * m2 + a2``. Both utility tensors and joint
distributions use this order everywhere, including on disk.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import GameInputError, SizeLimitError, UnsupportedError

JointProfile = tuple[int, ...]

PURE_NASH_CAP = 10**6
MIXED_NASH_MAX_ACTIONS = 8
MIXED_DEDUP_TOL = 1e-7

_CLAMP_TOL = 1e-12
_SUM_TOL = 1e-9


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class NormalFormGame:
    """An n-player finite game with dense utility tensors.

    ``utilities[i]`` is player ``i``'s payoff for every joint action, as a
    flat vector in row-major joint order. Higher is better.
    """

    player_names: tuple[str, ...]
    action_labels: tuple[tuple[str, ...], ...]
    utilities: np.ndarray
    shape: tuple[int, ...] = field(init=False)

    def __post_init__(self) -> None:
        names = tuple(str(p) for p in self.player_names)
        labels = tuple(tuple(str(a) for a in acts) for acts in self.action_labels)
        if len(names) < 2:
            raise GameInputError("a game needs at least 2 players")
        if len(labels) != len(names):
            raise GameInputError(
                f"{len(names)} players but {len(labels)} action lists"
            )
        if any(len(acts) < 1 for acts in labels):
            raise GameInputError("every player needs at least one action")
        shape = tuple(len(acts) for acts in labels)
        size = math.prod(shape)
        util = np.array(self.utilities, dtype=float)
        if util.shape != (len(names), size):
            if util.ndim == 1 + len(shape) and util.shape[1:] == shape:
                util = util.reshape(len(names), size)
            else:
                raise GameInputError(
                    f"utilities must have shape ({len(names)}, {size}), got {util.shape}"
                )
        if not np.all(np.isfinite(util)):
            raise GameInputError("utilities must be finite")
        object.__setattr__(self, "player_names", names)
        object.__setattr__(self, "action_labels", labels)
        object.__setattr__(self, "utilities", _frozen(util))
        object.__setattr__(self, "shape", shape)

    @classmethod
    def from_tensors(
        cls,
        tensors: Sequence[np.ndarray],
        player_names: Sequence[str] | None = None,
        action_labels: Sequence[Sequence[str]] | None = None,
    ) -> NormalFormGame:
        """Build a game from per-player payoff tensors indexed ``[a0, a1, ...]``."""
        arrs = [np.asarray(t, dtype=float) for t in tensors]
        shape = arrs[0].shape
        if any(a.shape != shape for a in arrs):
            raise GameInputError("all payoff tensors must share one shape")
        if player_names is None:
            player_names = [f"p{i}" for i in range(len(arrs))]
        if action_labels is None:
            action_labels = [[str(k) for k in range(m)] for m in shape]
        return cls(
            tuple(player_names),
            tuple(tuple(a) for a in action_labels),
            np.stack([a.reshape(-1) for a in arrs]),
        )

    @property
    def n_players(self) -> int:
        return len(self.player_names)

    @property
    def n_joint(self) -> int:
        return math.prod(self.shape)

    def tensor(self, player: int) -> np.ndarray:
        """Player's utilities reshaped to the joint-action tensor."""
        self._check_player(player)
        return self.utilities[player].reshape(self.shape)

    def payoff(self, player: int, profile: JointProfile) -> float:
        return float(self.utilities[player, joint_index(profile, self)])

    def profiles(self) -> Iterator[JointProfile]:
        """All joint profiles in ascending flat-index order."""
        return itertools.product(*(range(m) for m in self.shape))

    def _check_player(self, player: int) -> None:
        if not 0 <= player < self.n_players:
            raise GameInputError(f"player index {player} out of range")

    def _check_action(self, player: int, action: int) -> None:
        self._check_player(player)
        if not 0 <= action < self.shape[player]:
            raise GameInputError(
                f"action {action} out of range for player {player} "
                f"({self.shape[player]} actions)"
            )


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Probability vector over joint actions (row-major order)."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.array(self.probs, dtype=float).reshape(-1)
        if p.size == 0 or not np.all(np.isfinite(p)):
            raise GameInputError("distribution must be a finite, nonempty vector")
        if np.any(p < -_CLAMP_TOL):
            raise GameInputError(f"negative probability {p.min():.3g}")
        p = np.where(p <= 0.0, 0.0, p)  # also clears -0.0
        if abs(p.sum() - 1.0) > _SUM_TOL:
            raise GameInputError(f"probabilities sum to {p.sum():.12g}, not 1")
        object.__setattr__(self, "probs", _frozen(p))

    @classmethod
    def point_mass(cls, profile: JointProfile, game: NormalFormGame) -> JointDistribution:
        p = np.zeros(game.n_joint)
        p[joint_index(profile, game)] = 1.0
        return cls(p)

    @classmethod
    def uniform(cls, game: NormalFormGame) -> JointDistribution:
        return cls(np.full(game.n_joint, 1.0 / game.n_joint))

    def __len__(self) -> int:
        return self.probs.size


@dataclass(frozen=True, eq=False)
class MixedProfile:
    """One mixed strategy per player."""

    strategies: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        strats = []
        for i, s in enumerate(self.strategies):
            v = np.array(s, dtype=float).reshape(-1)
            if np.any(v < -_SUM_TOL) or abs(v.sum() - 1.0) > _SUM_TOL:
                raise GameInputError(f"strategy of player {i} is not a distribution")
            strats.append(_frozen(np.clip(v, 0.0, None)))
        object.__setattr__(self, "strategies", tuple(strats))

    @classmethod
    def pure(cls, profile: JointProfile, game: NormalFormGame) -> MixedProfile:
        strats = []
        for i, a in enumerate(profile):
            game._check_action(i, a)
            v = np.zeros(game.shape[i])
            v[a] = 1.0
            strats.append(v)
        return cls(tuple(strats))

    def distance(self, other: MixedProfile) -> float:
        """L-infinity distance between two profiles of the same shape."""
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self.strategies, other.strategies))


@dataclass(frozen=True)
class Constraint:
    """One incentive constraint: ``player`` told ``rec`` considers ``alt``."""

    player: int
    rec: int
    alt: int
    gain: float


@dataclass(frozen=True)
class CeReport:
    passed: bool
    worst: Constraint | None
    constraints: tuple[Constraint, ...]

    @property
    def min_gain(self) -> float:
        return self.worst.gain if self.worst is not None else math.inf


def joint_index(profile: JointProfile, game: NormalFormGame) -> int:
    """Mixed-radix row-major index of a joint profile."""
    if len(profile) != game.n_players:
        raise GameInputError(
            f"profile has {len(profile)} entries, game has {game.n_players} players"
        )
    idx = 0
    for i, (a, m) in enumerate(zip(profile, game.shape)):
        a = int(a)
        if not 0 <= a < m:
            raise GameInputError(f"action {a} out of range for player {i} ({m} actions)")
        idx = idx * m + a
    return idx


def profile_of_index(index: int, game: NormalFormGame) -> JointProfile:
    """Inverse of :func:`joint_index`."""
    if not 0 <= index < game.n_joint:
        raise GameInputError(f"flat index {index} out of range [0, {game.n_joint})")
    out = []
    for m in reversed(game.shape):
        index, a = divmod(index, m)
        out.append(a)
    return tuple(reversed(out))


def _check_dist(z: JointDistribution, game: NormalFormGame) -> np.ndarray:
    if len(z) != game.n_joint:
        raise GameInputError(
            f"distribution has {len(z)} entries, game has {game.n_joint} joint actions"
        )
    return z.probs.reshape(game.shape)


def expected_utility(z: JointDistribution, player: int, game: NormalFormGame) -> float:
    _check_dist(z, game)
    game._check_player(player)
    return float(z.probs @ game.utilities[player])


def gain_coefficients(game: NormalFormGame, player: int, rec: int, alt: int) -> np.ndarray:
    """Row vector ``r`` over joint actions with ``r @ z`` equal to the deviation gain.

    Nonzero only on joint actions where ``player`` plays ``rec``; there it
    holds ``u(rec, a_-i) - u(alt, a_-i)``.
    """
    u = game.tensor(player)
    diff = np.take(u, rec, axis=player) - np.take(u, alt, axis=player)
    row = np.zeros(game.shape)
    index = [slice(None)] * game.n_players
    index[player] = rec
    row[tuple(index)] = diff
    return row.reshape(-1)


def deviation_gain(
    z: JointDistribution, player: int, recommended: int, alternative: int, game: NormalFormGame
) -> float:
    """Unnormalized gain of obeying ``recommended`` over switching to ``alternative``.

    Not divided by the marginal mass of the recommendation, so it is linear
    in ``z`` and zero when the recommendation is never issued.
    """
    zt = _check_dist(z, game)
    game._check_action(player, recommended)
    game._check_action(player, alternative)
    if recommended == alternative:
        raise GameInputError("recommended and alternative actions must differ")
    u = game.tensor(player)
    z_rec = np.take(zt, recommended, axis=player)
    diff = np.take(u, recommended, axis=player) - np.take(u, alternative, axis=player)
    return float(np.sum(z_rec * diff))


def deviation_triples(game: NormalFormGame) -> Iterator[tuple[int, int, int]]:
    """Every (player, rec, alt) with rec != alt, in a fixed order."""
    for i, m in enumerate(game.shape):
        for rec in range(m):
            for alt in range(m):
                if rec != alt:
                    yield i, rec, alt


def verify_ce(z: JointDistribution, game: NormalFormGame, tol: float = 1e-9) -> CeReport:
    """Check every correlated-equilibrium constraint; passes iff all gains >= -tol."""
    _check_dist(z, game)
    cons = tuple(
        Constraint(i, rec, alt, deviation_gain(z, i, rec, alt, game))
        for i, rec, alt in deviation_triples(game)
    )
    worst = min(cons, key=lambda c: c.gain, default=None)
    passed = worst is None or worst.gain >= -tol
    return CeReport(passed, worst, cons)


def enumerate_pure_nash(game: NormalFormGame, cap: int = PURE_NASH_CAP) -> list[JointProfile]:
    """All pure Nash equilibria (weak inequalities), ascending flat index."""
    if game.n_joint > cap:
        raise SizeLimitError(f"{game.n_joint} joint actions exceed enumeration cap {cap}")
    stable = np.ones(game.shape, dtype=bool)
    for i in range(game.n_players):
        u = game.tensor(i)
        best = u.max(axis=i, keepdims=True)
        stable &= u >= best
    return [profile_of_index(int(k), game) for k in np.flatnonzero(stable.reshape(-1))]


def _solve_indifference(payoff: np.ndarray, rows: tuple[int, ...], cols: tuple[int, ...]):
    """Mixture over ``cols`` making every row in ``rows`` earn the same payoff.

    Returns ``None`` unless the system has a unique solution.
    """
    k = len(cols)
    sub = payoff[np.ix_(rows, cols)]
    a = np.vstack([
        np.hstack([sub, -np.ones((len(rows), 1))]),
        np.hstack([np.ones((1, k)), np.zeros((1, 1))]),
    ])
    b = np.zeros(len(rows) + 1)
    b[-1] = 1.0
    if np.linalg.matrix_rank(a) < k + 1:
        return None
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    if np.max(np.abs(a @ sol - b)) > 1e-9:
        return None
    return sol[:k]


def enumerate_mixed_nash_2p(game: NormalFormGame) -> list[MixedProfile]:
    """Support enumeration for bimatrix games.

    Every pair of supports is tried; a pair yields an equilibrium when the
    indifference systems have unique nonnegative solutions and no action
    outside a support does strictly better. Supports whose indifference
    system is underdetermined (continua of equilibria in degenerate games)
    are skipped. Results are deduplicated at ``1e-7`` and include pure
    equilibria.
    """
    if game.n_players != 2:
        raise UnsupportedError("mixed Nash enumeration supports exactly 2 players")
    m1, m2 = game.shape
    if max(m1, m2) > MIXED_NASH_MAX_ACTIONS:
        raise SizeLimitError(
            f"mixed Nash enumeration limited to {MIXED_NASH_MAX_ACTIONS} actions per player"
        )
    a = game.tensor(0)
    b = game.tensor(1)
    found: list[MixedProfile] = []
    supports1 = [s for k in range(1, m1 + 1) for s in itertools.combinations(range(m1), k)]
    supports2 = [s for k in range(1, m2 + 1) for s in itertools.combinations(range(m2), k)]
    for s1 in supports1:
        for s2 in supports2:
            y = _solve_indifference(a, s1, s2)
            if y is None:
                continue
            x = _solve_indifference(b.T, s2, s1)
            if x is None:
                continue
            if np.any(x < -MIXED_DEDUP_TOL) or np.any(y < -MIXED_DEDUP_TOL):
                continue
            p = np.zeros(m1)
            q = np.zeros(m2)
            p[list(s1)] = np.clip(x, 0.0, None)
            q[list(s2)] = np.clip(y, 0.0, None)
            p /= p.sum()
            q /= q.sum()
            row_pay = a @ q
            col_pay = p @ b
            if row_pay.max() > row_pay[list(s1)].min() + MIXED_DEDUP_TOL:
                continue
            if col_pay.max() > col_pay[list(s2)].min() + MIXED_DEDUP_TOL:
                continue
            cand = MixedProfile((p, q))
            if all(cand.distance(f) > MIXED_DEDUP_TOL for f in found):
                found.append(cand)
    return found


def product_distribution(profile: MixedProfile, game: NormalFormGame) -> JointDistribution:
    """Lift a mixed profile to the independent joint distribution."""
    if len(profile.strategies) != game.n_players:
        raise GameInputError("mixed profile does not match the number of players")
    z = np.ones(1)
    for i, s in enumerate(profile.strategies):
        if s.size != game.shape[i]:
            raise GameInputError(f"strategy of player {i} has wrong length")
        z = np.multiply.outer(z, s).reshape(-1)
    return JointDistribution(z / z.sum())


def welfare(z: JointDistribution, game: NormalFormGame) -> float:
    """Utilitarian welfare: sum of expected payoffs."""
    _check_dist(z, game)
    return float(z.probs @ game.utilities.sum(axis=0))
