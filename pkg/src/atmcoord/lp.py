"""Dense simplex solver and a cutting-plane loop for concave constraints.

Programs are stated as::

    maximize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                x >= 0

The solver is a two-phase dense tableau simplex. By default the entering
variable is the one with the largest reduced cost (ties to the smallest
index) and the leaving row is the minimum ratio, ties going to the largest
pivot element. The first time a basis repeats, the phase switches to
Bland's smallest-index rule for both choices, which cannot cycle. Passing
``pricing="bland"`` uses Bland's entering rule from the start. Either way
the pivot sequence is a deterministic function of the input.

Pure Bland pricing is exact in theory but on the degenerate programs built
by the equilibrium solvers (every constraint through the origin) it takes
tens of thousands of pivots and drifts into nearly singular bases.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import GameInputError, NumericalError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NOT_CONVERGED = "not_converged"

BLAND = "bland"
DANTZIG = "dantzig"
PRICING_RULES = (DANTZIG, BLAND)

PIVOT_TOL = 1e-9
RESIDUAL_TOL = 1e-8
# Round-off accumulated over long degenerate pivot runs (CE polytopes have
# an all-zero rhs) can push entries across PIVOT_TOL and make Bland's rule
# cycle. The tableau is therefore rebuilt from the original columns every
# max(REINVERT_EVERY, rows / 2) pivots, and sub-ZERO_TOL entries are
# flushed to zero. A rebuild costs about rows / 2 pivots' worth of work.
ZERO_TOL = 1e-12
REINVERT_EVERY = 32
# cosine above 1 - PARALLEL_TOL counts as the same cut direction
PARALLEL_TOL = 1e-12
# Between tangent cuts at angle t a norm constraint is violated by about
# t^2 / 8 of its spread, so asking for violations below CUT_TOL needs cuts
# about sqrt(CUT_TOL) apart. Much tighter targets than this push the
# relaxation into bases too ill-conditioned to meet RESIDUAL_TOL.
CUT_TOL = 1e-7

# g(x) and a supergradient of g at x; feasible means g(x) >= 0, g concave.
ConcaveConstraint = Callable[[np.ndarray], tuple[float, np.ndarray]]


def _as_matrix(a, n: int, name: str) -> np.ndarray:
    if a is None:
        return np.zeros((0, n))
    arr = np.array(a, dtype=float)
    if arr.size == 0:
        return np.zeros((0, n))
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != n:
        raise GameInputError(f"{name} must have {n} columns, got shape {arr.shape}")
    return arr


def _as_vector(b, m: int, name: str) -> np.ndarray:
    if b is None:
        b = []
    arr = np.array(b, dtype=float).reshape(-1)
    if arr.size != m:
        raise GameInputError(f"{name} must have {m} entries, got {arr.size}")
    return arr


@dataclass(frozen=True, eq=False)
class LinearProgram:
    c: np.ndarray
    A_ub: np.ndarray = None
    b_ub: np.ndarray = None
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None

    def __post_init__(self) -> None:
        c = np.array(self.c, dtype=float).reshape(-1)
        n = c.size
        a_ub = _as_matrix(self.A_ub, n, "A_ub")
        a_eq = _as_matrix(self.A_eq, n, "A_eq")
        b_ub = _as_vector(self.b_ub, a_ub.shape[0], "b_ub")
        b_eq = _as_vector(self.b_eq, a_eq.shape[0], "b_eq")
        for name, arr in (("c", c), ("A_ub", a_ub), ("b_ub", b_ub), ("A_eq", a_eq), ("b_eq", b_eq)):
            if not np.all(np.isfinite(arr)):
                raise GameInputError(f"{name} has non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vars(self) -> int:
        return self.c.size

    def with_cuts(self, rows: np.ndarray, rhs: np.ndarray) -> LinearProgram:
        """Copy of this program with extra ``rows @ x <= rhs`` constraints."""
        if len(rhs) == 0:
            return self
        return replace(
            self,
            A_ub=np.vstack([self.A_ub, rows]),
            b_ub=np.concatenate([self.b_ub, rhs]),
        )


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: str
    x: np.ndarray | None = None
    objective_value: float | None = None
    iterations: int = 0
    pivots: tuple[tuple[int, int], ...] = ()
    # cutting-plane diagnostics; left at defaults by solve_lp
    rounds: int = 0
    min_constraint: float | None = None
    cuts: tuple[tuple[np.ndarray, float], ...] = field(default=())

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class SimplexSolver:
    """Holds the mutable tableau for one solve; use one instance per solve."""

    def __init__(
        self,
        lp: LinearProgram,
        max_iter: int | None = None,
        tol: float = PIVOT_TOL,
        pricing: str = DANTZIG,
    ):
        if pricing not in PRICING_RULES:
            raise GameInputError(f"unknown pricing rule {pricing!r}; expected one of {PRICING_RULES}")
        self.lp = lp
        self.pricing = pricing
        self.tol = tol
        rows = lp.A_ub.shape[0] + 2 * lp.A_eq.shape[0]
        self.max_iter = max_iter if max_iter is not None else 10 * (rows + lp.n_vars) ** 2
        self.iterations = 0
        self.pivots: list[tuple[int, int]] = []

    def _build(self) -> None:
        lp = self.lp
        a = np.vstack([lp.A_ub, lp.A_eq, -lp.A_eq])
        b = np.concatenate([lp.b_ub, lp.b_eq, -lp.b_eq])
        m, n = a.shape
        neg = b < 0
        sign = np.where(neg, -1.0, 1.0)
        a = a * sign[:, None]
        b = b * sign
        art_rows = np.flatnonzero(neg)
        k = art_rows.size
        std = np.zeros((m, n + m + k))
        std[:, :n] = a
        std[np.arange(m), n + np.arange(m)] = sign
        std[art_rows, n + m + np.arange(k)] = 1.0
        self.n, self.m, self.k = n, m, k
        self.std = std
        self.rhs = b
        self.basis = [n + i for i in range(m)]
        self.reinvert_every = max(REINVERT_EVERY, m // 2)
        for j, i in enumerate(art_rows):
            self.basis[i] = n + m + j
        self.T = np.zeros((m + 1, n + m + k + 1))
        self.T[:m, :-1] = std
        self.T[:m, -1] = b
        self.active_cols = n + m + k

    def _set_objective(self, costs: np.ndarray) -> None:
        self.costs = costs
        m = self.T.shape[0] - 1
        cb = costs[self.basis]
        self.T[m] = 0.0
        self.T[m, : costs.size] = costs
        self.T[m] -= cb @ self.T[:m]

    def _pivot(self, i: int, j: int) -> None:
        if self.iterations >= self.max_iter:
            raise NumericalError(f"simplex iteration cap {self.max_iter} exceeded")
        self.iterations += 1
        self.pivots.append((i, j))
        T = self.T
        T[i] /= T[i, j]
        col = T[:, j].copy()
        col[i] = 0.0
        rows = np.flatnonzero(col)
        T[rows] -= np.outer(col[rows], T[i])
        T[:, j] = 0.0
        T[i, j] = 1.0
        self.basis[i] = j
        if self.iterations % self.reinvert_every == 0:
            self._reinvert()

    def _reinvert(self) -> None:
        """Recompute the tableau as ``B^-1 [A | b]`` from the stored standard form."""
        m = self.T.shape[0] - 1
        if m == 0:
            return
        try:
            body = np.linalg.solve(
                self.std[:, self.basis], np.column_stack([self.std, self.rhs])
            )
        except np.linalg.LinAlgError:
            return
        body[np.abs(body) < ZERO_TOL] = 0.0
        body[np.arange(m), self.basis] = 1.0
        self.T[:m] = body
        self._set_objective(self.costs)
        self.T[m, np.abs(self.T[m]) < ZERO_TOL] = 0.0

    def _iterate(self) -> str:
        """Pivot to optimality; see the module docstring for the rules."""
        T = self.T
        m = T.shape[0] - 1
        seen: set[frozenset] = set()
        strict = False
        while True:
            reduced = T[m, : self.active_cols]
            entering = np.flatnonzero(reduced > self.tol)
            if entering.size == 0:
                return OPTIMAL
            if strict or self.pricing == BLAND:
                j = int(entering[0])
            else:
                j = int(entering[np.argmax(reduced[entering])])
            col = T[:m, j]
            # entries tiny next to the column's largest are treated as zero
            rows = np.flatnonzero(col > self.tol * max(1.0, float(col.max(initial=0.0))))
            if rows.size == 0:
                return UNBOUNDED
            # drift can leave degenerate rhs entries at -1e-13; a negative
            # ratio would otherwise win the test
            ratios = np.maximum(T[rows, -1], 0.0) / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * (1.0 + abs(best))]
            if strict:
                i = int(min(ties, key=lambda r: self.basis[r]))
            else:
                i = int(min(ties, key=lambda r: (-col[r], self.basis[r])))
            self._pivot(i, j)
            if not strict:
                key = frozenset(self.basis)
                strict = key in seen
                seen.add(key)

    def _drive_out_artificials(self) -> None:
        n_real = self.n + self.m
        i = 0
        while i < self.T.shape[0] - 1:
            if self.basis[i] >= n_real:
                cand = np.flatnonzero(np.abs(self.T[i, :n_real]) > self.tol)
                if cand.size:
                    self._pivot(i, int(cand[0]))
                else:
                    # redundant row
                    self.T = np.delete(self.T, i, axis=0)
                    self.std = np.delete(self.std, i, axis=0)
                    self.rhs = np.delete(self.rhs, i)
                    del self.basis[i]
                    continue
            i += 1
        self.T = np.delete(self.T, np.s_[n_real : n_real + self.k], axis=1)
        self.std = self.std[:, :n_real]
        self.active_cols = n_real

    def _refine(self) -> np.ndarray:
        m = self.T.shape[0] - 1
        values = self.T[:m, -1].copy()
        if m:
            try:
                values = np.linalg.solve(self.std[:, self.basis], self.rhs)
            except np.linalg.LinAlgError:
                pass
        x = np.zeros(self.n + self.m)
        x[self.basis] = values
        return x

    def solve(self) -> LpSolution:
        self._build()
        scale = max(1.0, float(np.max(np.abs(self.rhs), initial=0.0)))
        if self.k:
            phase1 = np.zeros(self.active_cols)
            phase1[self.n + self.m :] = -1.0
            self._set_objective(phase1)
            self._iterate()
            infeasibility = self.T[-1, -1]
            if infeasibility > 1e-8 * scale:
                return self._result(INFEASIBLE)
        self._drive_out_artificials()
        costs = np.zeros(self.active_cols)
        costs[: self.n] = self.lp.c
        self._set_objective(costs)
        status = self._iterate()
        if status == UNBOUNDED:
            return self._result(UNBOUNDED)
        full = self._refine()
        if np.min(full, initial=0.0) < -1e-7 * scale:
            # refinement disagreed with the tableau; fall back to tableau values
            full = np.zeros(self.n + self.m)
            full[self.basis] = self.T[:-1, -1]
        x = np.clip(full[: self.n], 0.0, None)
        self._check_residuals(x, scale)
        return self._result(OPTIMAL, x)

    def _check_residuals(self, x: np.ndarray, scale: float) -> None:
        lp = self.lp
        viol = 0.0
        if lp.A_ub.shape[0]:
            viol = max(viol, float(np.max(lp.A_ub @ x - lp.b_ub)))
        if lp.A_eq.shape[0]:
            viol = max(viol, float(np.max(np.abs(lp.A_eq @ x - lp.b_eq))))
        if viol > RESIDUAL_TOL * scale:
            raise NumericalError(f"primal residual {viol:.3g} exceeds tolerance")

    def _result(self, status: str, x: np.ndarray | None = None) -> LpSolution:
        value = float(self.lp.c @ x) if x is not None else None
        return LpSolution(status, x, value, self.iterations, tuple(self.pivots))


def solve_lp(
    lp: LinearProgram, max_iter: int | None = None, pricing: str = DANTZIG
) -> LpSolution:
    """Solve ``lp`` to an optimal vertex, or report infeasible / unbounded.

    A Dantzig-priced solve that ends in a basis failing the residual check
    is repeated once with Bland pricing, which follows a different pivot
    path and usually ends in a better conditioned basis.
    """
    try:
        return SimplexSolver(lp, max_iter=max_iter, pricing=pricing).solve()
    except NumericalError:
        if pricing == BLAND:
            raise
        return SimplexSolver(lp, max_iter=max_iter, pricing=BLAND).solve()


def solve_with_concave_cuts(
    lp: LinearProgram,
    constraints: Sequence[ConcaveConstraint] = (),
    tol: float = CUT_TOL,
    max_rounds: int = 200,
) -> LpSolution:
    """Kelley outer approximation of ``lp`` intersected with ``{g >= 0}`` sets.

    Each round solves the current relaxation and, for every constraint with
    ``g(x0) < -tol``, adds the tangent cut ``g(x0) + s @ (x - x0) >= 0``
    where ``s`` is the supergradient at ``x0``. The base feasible region
    must be bounded.

    Cuts are stored with unit-norm rows; a cut with the same direction as
    a stored one (to round-off) overwrites it. In rounds where the
    relaxation value strictly dropped, cuts with slack above ``tol`` at
    the new iterate are discarded first. Such cuts have zero duals, so the
    iterate stays optimal for the smaller relaxation and values never
    increase, while the relaxation stays small. Should a later relaxation
    fail numerically, the last good iterate is returned as
    ``not_converged``.
    """
    rows: list[np.ndarray] = []
    rhs: list[float] = []
    last: LpSolution | None = None
    for rnd in range(1, max_rounds + 1):
        current = lp.with_cuts(np.array(rows).reshape(-1, lp.n_vars), np.array(rhs))
        cuts = tuple(zip(rows, rhs))
        try:
            sol = solve_lp(current)
        except NumericalError:
            if last is None:
                raise
            return replace(last, status=NOT_CONVERGED, rounds=rnd, cuts=cuts)
        if not sol.optimal:
            if sol.status == UNBOUNDED and last is not None:
                # cuts only shrink a region whose optimum was finite
                return replace(last, status=NOT_CONVERGED, rounds=rnd, cuts=cuts)
            return replace(sol, rounds=rnd, cuts=cuts)
        x0 = sol.x
        evaluated = [g(x0) for g in constraints]
        values = [float(v) for v, _ in evaluated]
        worst = min(values, default=np.inf)
        dropped = last is not None and sol.objective_value < last.objective_value - tol
        last = replace(sol, rounds=rnd, min_constraint=worst, cuts=cuts)
        if worst >= -tol:
            return last
        if dropped and rows:
            slack = np.array(rhs) - np.array(rows) @ x0
            rows = [r for r, s in zip(rows, slack) if s <= tol]
            rhs = [b for b, s in zip(rhs, slack) if s <= tol]
        for value, (_, grad) in zip(values, evaluated):
            if value < -tol:
                _add_cut(rows, rhs, np.asarray(grad, dtype=float), value, x0)
    return replace(last, status=NOT_CONVERGED)


def _add_cut(rows: list, rhs: list, grad: np.ndarray, value: float, x0: np.ndarray) -> None:
    """Append ``-grad @ x <= value - grad @ x0`` normalized, or overwrite a same-direction cut."""
    norm = float(np.linalg.norm(grad))
    if norm == 0.0:
        # constant violated constraint: 0 <= value < 0, infeasible
        rows.append(np.zeros_like(grad))
        rhs.append(value)
        return
    row = -grad / norm
    b = (value - float(grad @ x0)) / norm
    for k, other in enumerate(rows):
        if float(row @ other) > 1.0 - PARALLEL_TOL:
            rows[k], rhs[k] = row, b
            return
    rows.append(row)
    rhs.append(b)
