"""Welfare-optimal, reduced-rank and chance-constrained correlated equilibria.

All three solvers maximize a weighted sum of expected payoffs (utilitarian
welfare by default) over distributions satisfying the incentive
constraints. The reduced-rank solver searches only the convex hull of a
Nash basis; the chance-constrained solver tightens each incentive
constraint by a Gaussian quantile of the payoff-noise spread.

Noise model: every utility entry ``u_i(a)`` carries its own independent
``N(0, sigma_i^2)`` perturbation. A single scalar per player would cancel
in every payoff difference, so per-entry noise is the weakest reading under
which the chance constraint differs from the nominal one. The deviation
gain then has standard deviation ``sigma_i * sqrt(2 * sum z_rec^2)`` where
``z_rec`` is the slice of ``z`` on which player ``i`` is told ``rec``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from statistics import NormalDist
from typing import Sequence

import numpy as np

from . import lp
from .errors import EmptyBasisError, GameInputError, NumericalError, SizeLimitError
from .game import (
    CeReport,
    Constraint,
    JointDistribution,
    NormalFormGame,
    deviation_gain,
    deviation_triples,
    enumerate_mixed_nash_2p,
    enumerate_pure_nash,
    gain_coefficients,
    product_distribution,
    verify_ce,
    welfare,
    MixedProfile,
)

CE_JOINT_CAP = 4096
PROB_FLOOR = 1e-12
BASIS_SOURCES = ("pure", "pure+mixed2p")


@dataclass(frozen=True, eq=False)
class NashBasis:
    """Ordered product distributions of Nash equilibria spanning the RRCE hull."""

    members: tuple[JointDistribution, ...]

    def __post_init__(self) -> None:
        members = tuple(self.members)
        if not members:
            raise EmptyBasisError("empty basis: a Nash basis needs at least one member")
        size = len(members[0])
        if any(len(z) != size for z in members):
            raise GameInputError("basis members have different lengths")
        for a in range(len(members)):
            for b in range(a):
                if np.max(np.abs(members[a].probs - members[b].probs)) <= 1e-7:
                    raise GameInputError(f"basis members {b} and {a} coincide")
        object.__setattr__(self, "members", members)

    def __len__(self) -> int:
        return len(self.members)

    def matrix(self) -> np.ndarray:
        """Joint-action by member matrix; column k is member k."""
        return np.column_stack([z.probs for z in self.members])

    def check(self, game: NormalFormGame, tol: float = 1e-8) -> None:
        for k, z in enumerate(self.members):
            if len(z) != game.n_joint:
                raise GameInputError("basis does not match the game dimensions")
            if not verify_ce(z, game, tol).passed:
                raise GameInputError(f"basis member {k} is not a correlated equilibrium")


@dataclass(frozen=True)
class NoiseModel:
    """Per-player payoff noise scale and the required confidence level."""

    sigma: tuple[float, ...]
    alpha: float

    def __post_init__(self) -> None:
        sigma = tuple(float(s) for s in self.sigma)
        if any(not math.isfinite(s) or s < 0 for s in sigma):
            raise GameInputError("sigma entries must be finite and nonnegative")
        if not 0.5 <= self.alpha < 1.0:
            raise GameInputError(
                f"alpha={self.alpha} outside the convex regime [0.5, 1)"
            )
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def uniform(cls, n_players: int, sigma: float, alpha: float) -> NoiseModel:
        return cls((sigma,) * n_players, alpha)

    @property
    def quantile(self) -> float:
        # Wichura's AS241 rational approximation, ~1e-16 relative accuracy.
        return NormalDist().inv_cdf(self.alpha)

    def spread_factor(self, player: int) -> float:
        """Multiplier on the slice norm in the margin: ``Phi^-1(alpha) sigma_i sqrt 2``."""
        return self.quantile * self.sigma[player] * math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    z: JointDistribution | None
    welfare: float | None
    per_player_payoffs: np.ndarray | None
    status: str
    objective: float | None = None
    min_margin: float | None = None
    rounds: int = 0
    weights: np.ndarray | None = None
    lam: np.ndarray | None = None
    restricted_to_basis: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == lp.OPTIMAL


def _weights(game: NormalFormGame, weights: Sequence[float] | None) -> np.ndarray:
    if weights is None:
        return np.ones(game.n_players)
    w = np.array(weights, dtype=float).reshape(-1)
    if w.size != game.n_players or not np.all(np.isfinite(w)):
        raise GameInputError(f"need {game.n_players} finite welfare weights")
    return w


def _check_size(game: NormalFormGame, cap: int) -> None:
    if game.n_joint > cap:
        raise SizeLimitError(
            f"{game.n_joint} joint actions exceed the cap of {cap}; use solve_rrce, which "
            "works in the low-dimensional hull of a Nash basis"
        )


def ce_constraint_matrix(game: NormalFormGame) -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    """Stack every gain row; ``G @ z >= 0`` is the CE polytope (before the simplex)."""
    triples = list(deviation_triples(game))
    if not triples:
        return np.zeros((0, game.n_joint)), triples
    rows = np.vstack([gain_coefficients(game, i, rec, alt) for i, rec, alt in triples])
    return rows, triples


def _finish(
    game: NormalFormGame,
    probs: np.ndarray,
    w: np.ndarray,
    status: str,
    **extra,
) -> EquilibriumResult:
    # simplex round-off leaves ~1e-18 mass on unused profiles; drop it so
    # unused recommendations have exactly zero conditional mass
    p = np.where(probs > PROB_FLOOR, probs, 0.0)
    z = JointDistribution(p / p.sum())
    payoffs = game.utilities @ z.probs
    return EquilibriumResult(
        z=z,
        welfare=float(payoffs.sum()),
        per_player_payoffs=payoffs,
        status=status,
        objective=float(w @ payoffs),
        weights=w,
        **extra,
    )


def solve_ce(
    game: NormalFormGame, weights: Sequence[float] | None = None, cap: int = CE_JOINT_CAP
) -> EquilibriumResult:
    """Correlated equilibrium maximizing ``sum_i w_i E_z[u_i]``.

    Raises
    ------
    SizeLimitError
        If the game has more than ``cap`` joint actions.
    NumericalError
        If the LP comes back infeasible. Every game has a correlated
        equilibrium, so this means the solver went wrong.
    """
    _check_size(game, cap)
    w = _weights(game, weights)
    g, _ = ce_constraint_matrix(game)
    prog = lp.LinearProgram(
        c=w @ game.utilities,
        A_ub=-g,
        b_ub=np.zeros(g.shape[0]),
        A_eq=np.ones((1, game.n_joint)),
        b_eq=[1.0],
    )
    sol = lp.solve_lp(prog)
    if not sol.optimal:
        raise NumericalError(f"CE program reported {sol.status}; a CE always exists")
    res = _finish(game, sol.x, w, lp.OPTIMAL, diagnostics={"pivots": sol.iterations})
    return _with_margin(res, verify_ce(res.z, game, 0.0))


def _with_margin(res: EquilibriumResult, report: CeReport) -> EquilibriumResult:
    return replace(res, min_margin=report.min_gain)


def build_nash_basis(
    game: NormalFormGame, source: str = "pure", max_members: int | None = None
) -> NashBasis:
    """Collect Nash equilibria as product distributions, best welfare first.

    Ties in welfare keep the member whose probability vector is
    lexicographically larger first, which for point masses means lower flat
    index first.
    """
    if source not in BASIS_SOURCES:
        raise GameInputError(f"unknown basis source {source!r}; expected one of {BASIS_SOURCES}")
    if source == "pure":
        profiles = [MixedProfile.pure(p, game) for p in enumerate_pure_nash(game)]
    else:
        profiles = enumerate_mixed_nash_2p(game)
    members = [product_distribution(p, game) for p in profiles]
    if not members:
        raise EmptyBasisError(f"empty basis: no Nash equilibria found with source {source!r}")
    members.sort(key=lambda z: (-round(welfare(z, game), 9), tuple(-z.probs)))
    if max_members is not None:
        if max_members < 1:
            raise GameInputError("max_members must be at least 1")
        members = members[:max_members]
    return NashBasis(tuple(members))


def solve_rrce(
    game: NormalFormGame, basis: NashBasis, weights: Sequence[float] | None = None
) -> EquilibriumResult:
    """Best incentive-compatible mixture ``z = sum_k lam_k z_k`` of basis members."""
    basis.check(game)
    w = _weights(game, weights)
    zmat = basis.matrix()
    g, _ = ce_constraint_matrix(game)
    k = len(basis)
    prog = lp.LinearProgram(
        c=(w @ game.utilities) @ zmat,
        A_ub=-(g @ zmat),
        b_ub=np.zeros(g.shape[0]),
        A_eq=np.ones((1, k)),
        b_eq=[1.0],
    )
    sol = lp.solve_lp(prog)
    if not sol.optimal:
        raise NumericalError(f"RRCE program reported {sol.status}; basis members are feasible")
    lam = np.clip(sol.x, 0.0, None)
    lam /= lam.sum()
    res = _finish(game, zmat @ lam, w, lp.OPTIMAL, lam=lam, restricted_to_basis=True)
    return _with_margin(res, verify_ce(res.z, game, 0.0))


def _slice_mask(game: NormalFormGame, player: int, rec: int) -> np.ndarray:
    mask = np.zeros(game.shape, dtype=bool)
    index = [slice(None)] * game.n_players
    index[player] = rec
    mask[tuple(index)] = True
    return mask.reshape(-1)


def ccce_margin(
    z: JointDistribution,
    game: NormalFormGame,
    noise: NoiseModel,
    player: int,
    rec: int,
    alt: int,
) -> float:
    """Nominal deviation gain minus its ``alpha``-quantile noise allowance.

    The chance constraint for this triple holds iff the margin is >= 0.
    """
    if len(noise.sigma) != game.n_players:
        raise GameInputError("noise model has the wrong number of players")
    nominal = deviation_gain(z, player, rec, alt, game)
    block = z.probs[_slice_mask(game, player, rec)]
    return nominal - noise.spread_factor(player) * float(np.linalg.norm(block))


def verify_ccce(
    z: JointDistribution, game: NormalFormGame, noise: NoiseModel, tol: float = 1e-6
) -> CeReport:
    cons = tuple(
        Constraint(i, rec, alt, ccce_margin(z, game, noise, i, rec, alt))
        for i, rec, alt in deviation_triples(game)
    )
    worst = min(cons, key=lambda c: c.gain, default=None)
    return CeReport(worst is None or worst.gain >= -tol, worst, cons)


def _margin_constraint(coef: np.ndarray, mask: np.ndarray, factor: float, lift: np.ndarray):
    """Concave margin as a function of the decision vector ``v`` with ``z = lift @ v``."""
    coef_v = coef @ lift
    lift_b = lift[mask]

    def evaluate(v: np.ndarray) -> tuple[float, np.ndarray]:
        block = lift_b @ v
        norm = float(np.linalg.norm(block))
        value = float(coef_v @ v) - factor * norm
        if norm == 0.0:
            return value, coef_v
        return value, coef_v - factor * (block / norm) @ lift_b

    return evaluate


def solve_ccce(
    game: NormalFormGame,
    noise: NoiseModel,
    weights: Sequence[float] | None = None,
    basis: NashBasis | None = None,
    tol: float = lp.CUT_TOL,
    max_rounds: int = 200,
    cap: int = CE_JOINT_CAP,
) -> EquilibriumResult:
    """Welfare-optimal chance-constrained correlated equilibrium.

    Solved by outer approximation: the nominal CE constraints form the
    starting relaxation and tangent cuts of the margin functions are added
    until every margin is >= ``-tol``. Passing ``basis`` restricts the
    search to the hull of the basis members.

    The returned status is ``optimal``, ``infeasible`` or
    ``not_converged``; the last two carry no distribution.
    """
    if len(noise.sigma) != game.n_players:
        raise GameInputError("noise model has the wrong number of players")
    if basis is None:
        _check_size(game, cap)
        lift = np.eye(game.n_joint)
    else:
        basis.check(game)
        lift = basis.matrix()
    w = _weights(game, weights)
    g, triples = ce_constraint_matrix(game)
    dim = lift.shape[1]
    prog = lp.LinearProgram(
        c=(w @ game.utilities) @ lift,
        A_ub=-(g @ lift),
        b_ub=np.zeros(g.shape[0]),
        A_eq=np.ones((1, dim)),
        b_eq=[1.0],
    )
    constraints = []
    for row, (i, rec, _alt) in zip(g, triples):
        factor = noise.spread_factor(i)
        if factor > 0.0:
            constraints.append(_margin_constraint(row, _slice_mask(game, i, rec), factor, lift))
    sol = lp.solve_with_concave_cuts(prog, constraints, tol=tol, max_rounds=max_rounds)
    diag = {"cuts": len(sol.cuts)}
    if not sol.optimal:
        return EquilibriumResult(
            z=None,
            welfare=None,
            per_player_payoffs=None,
            status=sol.status,
            rounds=sol.rounds,
            weights=w,
            restricted_to_basis=basis is not None,
            diagnostics=diag,
        )
    extra = {}
    if basis is not None:
        lam = np.clip(sol.x, 0.0, None)
        extra["lam"] = lam / lam.sum()
    res = _finish(
        game,
        lift @ sol.x,
        w,
        lp.OPTIMAL,
        rounds=sol.rounds,
        restricted_to_basis=basis is not None,
        diagnostics=diag,
        **extra,
    )
    return _with_margin(res, verify_ccce(res.z, game, noise))
