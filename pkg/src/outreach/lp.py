"""Dense revised simplex with Bland's rule.

Minimizes ``c @ x`` over ``x >= 0`` subject to rows ``a @ x (<=|=|>=) b``.
Two phases: artificial variables are driven out first, then the original
objective is optimized from the feasible basis. The basis inverse is updated
by elementary row operations and rebuilt from an LU factorization every
``REFACTOR_EVERY`` pivots.

Dual values follow the convention ``duals @ rhs == objective`` at optimality,
so a binding ``<=`` row in a minimization has a non-positive dual.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import CycleGuardTripped, DimensionMismatch

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
DUALITY_TOL = 1e-7
REFACTOR_EVERY = 50
MAX_ITER = 10**6

LE, EQ, GE = "<=", "=", ">="


@dataclass
class LinearProgram:
    objective: np.ndarray
    rows: list = field(default_factory=list)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)

    @property
    def n_vars(self) -> int:
        return len(self.objective)

    def add_row(self, coeffs, relation: str, rhs: float) -> None:
        self.rows.append((np.asarray(coeffs, dtype=float), relation, float(rhs)))

    @classmethod
    def from_arrays(cls, c, a, relations: Sequence[str], b) -> "LinearProgram":
        lp = cls(c)
        for row, rel, rhs in zip(np.atleast_2d(a), relations, b):
            lp.add_row(row, rel, rhs)
        return lp


@dataclass
class LPResult:
    status: str
    primal: Optional[np.ndarray] = None
    duals: Optional[np.ndarray] = None
    objective: Optional[float] = None
    iterations: int = 0
    basis: Optional[list] = None
    phase1_objective: float = 0.0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _check(lp: LinearProgram):
    n = lp.n_vars
    if not np.all(np.isfinite(lp.objective)):
        raise DimensionMismatch("objective has non-finite entries")
    for coeffs, rel, rhs in lp.rows:
        if coeffs.shape != (n,):
            raise DimensionMismatch(f"row of length {coeffs.shape} for {n} variables")
        if rel not in (LE, EQ, GE):
            raise DimensionMismatch(f"unknown relation {rel!r}")
        if not (np.all(np.isfinite(coeffs)) and np.isfinite(rhs)):
            raise DimensionMismatch("row has non-finite entries")


class _Simplex:
    def __init__(self, a: np.ndarray, b: np.ndarray, basis: list, max_iter: int):
        self.a = a
        self.b = b
        self.m = a.shape[0]
        self.basis = list(basis)
        self.max_iter = max_iter
        self.iterations = 0
        self._since_refactor = 0
        self.refactor()

    def refactor(self):
        if self.m == 0:
            self.binv = np.zeros((0, 0))
            self.xb = np.zeros(0)
            return
        lu = scipy.linalg.lu_factor(self.a[:, self.basis])
        self.binv = scipy.linalg.lu_solve(lu, np.eye(self.m))
        self.xb = self.binv @ self.b
        self.xb[np.abs(self.xb) < FEAS_TOL * 1e-3] = 0.0
        self._since_refactor = 0

    def run(self, cost: np.ndarray, allowed: np.ndarray) -> str:
        """Optimize ``cost`` over columns marked ``allowed``; returns a status."""
        while True:
            if self.iterations >= self.max_iter:
                raise CycleGuardTripped(f"simplex exceeded {self.max_iter} iterations")
            y = cost[self.basis] @ self.binv if self.m else np.zeros(0)
            reduced = cost - y @ self.a if self.m else cost.copy()
            reduced[self.basis] = 0.0
            scale = 1.0 + np.max(np.abs(cost)) if cost.size else 1.0
            cand = np.flatnonzero(allowed & (reduced < -OPT_TOL * scale))
            if cand.size == 0:
                return "optimal"
            enter = int(cand[0])  # Bland: lowest index
            alpha = self.binv @ self.a[:, enter]
            pos = alpha > FEAS_TOL
            if not np.any(pos):
                return "unbounded"
            ratios = np.full(self.m, np.inf)
            ratios[pos] = np.maximum(self.xb[pos], 0.0) / alpha[pos]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + FEAS_TOL * 1e-3 * max(1.0, best))
            leave = int(min(ties, key=lambda r: self.basis[r]))  # Bland: lowest variable index
            self.pivot(leave, enter, alpha)
            self.iterations += 1

    def pivot(self, r: int, enter: int, alpha: np.ndarray):
        piv = alpha[r]
        theta = max(self.xb[r], 0.0) / piv
        self.xb -= theta * alpha
        self.xb[r] = theta
        row = self.binv[r] / piv
        self.binv -= np.outer(alpha, row)
        self.binv[r] = row
        self.basis[r] = enter
        self._since_refactor += 1
        if self._since_refactor >= REFACTOR_EVERY:
            self.refactor()


def solve(lp: LinearProgram, max_iter: int = MAX_ITER) -> LPResult:
    """Solve ``lp``; status is ``optimal``, ``infeasible`` or ``unbounded``."""
    _check(lp)
    n = lp.n_vars
    m = len(lp.rows)
    a_rows, b, signs, rels = [], [], [], []
    for coeffs, rel, rhs in lp.rows:
        s = -1.0 if rhs < 0 else 1.0
        if s < 0:
            rel = {LE: GE, GE: LE, EQ: EQ}[rel]
        a_rows.append(s * coeffs)
        b.append(s * rhs)
        signs.append(s)
        rels.append(rel)
    b = np.asarray(b)
    signs = np.asarray(signs)

    # columns: structural | slack/surplus | artificial
    n_slack = sum(1 for r in rels if r != EQ)
    art_rows = [k for k, r in enumerate(rels) if r != LE]
    total = n + n_slack + len(art_rows)
    a = np.zeros((m, total))
    if m:
        a[:, :n] = np.asarray(a_rows)
    basis = [-1] * m
    col = n
    for k, rel in enumerate(rels):
        if rel == LE:
            a[k, col] = 1.0
            basis[k] = col
            col += 1
        elif rel == GE:
            a[k, col] = -1.0
            col += 1
    art_start = col
    for k in art_rows:
        a[k, col] = 1.0
        basis[k] = col
        col += 1

    sx = _Simplex(a, b, basis, max_iter)
    is_art = np.zeros(total, dtype=bool)
    is_art[art_start:] = True
    phase1 = 0.0
    if art_rows:
        cost1 = is_art.astype(float)
        sx.run(cost1, np.ones(total, dtype=bool))
        sx.refactor()
        phase1 = float(cost1[sx.basis] @ sx.xb)
        if phase1 > FEAS_TOL * max(1.0, np.max(np.abs(b))):
            return LPResult("infeasible", iterations=sx.iterations, phase1_objective=phase1)
        _drive_out_artificials(sx, is_art)

    cost = np.zeros(total)
    cost[:n] = lp.objective
    status = sx.run(cost, ~is_art)
    if status == "unbounded":
        return LPResult("unbounded", iterations=sx.iterations, phase1_objective=phase1)
    sx.refactor()
    x = np.zeros(total)
    x[sx.basis] = np.maximum(sx.xb, 0.0)
    y = cost[sx.basis] @ sx.binv if m else np.zeros(0)
    return LPResult(
        "optimal",
        primal=x[:n],
        duals=y * signs,
        objective=float(lp.objective @ x[:n]),
        iterations=sx.iterations,
        basis=list(sx.basis),
        phase1_objective=phase1,
    )


def _drive_out_artificials(sx: _Simplex, is_art: np.ndarray):
    """Pivot zero-valued basic artificials out where a non-artificial column allows it."""
    for r in range(sx.m):
        if not is_art[sx.basis[r]]:
            continue
        row = sx.binv[r] @ sx.a
        cand = np.flatnonzero(~is_art & (np.abs(row) > 1e-7))
        if cand.size:
            enter = int(cand[0])
            sx.pivot(r, enter, sx.binv @ sx.a[:, enter])
    sx.refactor()


def dump_basis(result: LPResult) -> str:
    """Plain-text rendering of the final basis, for debugging."""
    if result.basis is None:
        return f"status={result.status} (no basis)"
    lines = [f"status={result.status} objective={result.objective!r} iterations={result.iterations}"]
    for r, j in enumerate(result.basis):
        lines.append(f"row {r}: basic column {j}")
    return "\n".join(lines)
