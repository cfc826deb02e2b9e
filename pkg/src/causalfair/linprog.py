"""Dense two-phase simplex for box-bounded linear programs.

Solves max c'x subject to A_eq x = b_eq, A_ub x <= b_ub, lo <= x <= hi.
Upper bounds become explicit rows after shifting to nonnegative variables;
equalities get phase-1 artificial variables rather than row elimination, so
rank-deficient constraint blocks (common with empirical masses) are handled
gracefully. The pivot rule is greatest-improvement with a switch to Bland's
rule after a run of degenerate pivots, which guarantees termination.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["LinearProgram", "LpSolution", "solve"]

_PIVOT_TOL = 1e-9


@dataclass
class LinearProgram:
    objective: np.ndarray  # maximize objective @ x
    eq_rows: tuple = (None, None)  # (A_eq, b_eq) or (None, None)
    ub_rows: tuple = (None, None)  # (A_ub, b_ub) meaning A_ub x <= b_ub
    bounds: np.ndarray | None = None  # (n, 2), default [0, 1] per variable

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=np.float64)
        n = len(self.objective)
        if self.bounds is None:
            self.bounds = np.tile([0.0, 1.0], (n, 1))
        else:
            self.bounds = np.asarray(self.bounds, dtype=np.float64)
        if self.bounds.shape != (n, 2):
            raise ValueError("bounds must be (n, 2)")
        if np.any(self.bounds[:, 0] > self.bounds[:, 1]):
            raise ValueError("lower bound exceeds upper bound")
        if not np.all(np.isfinite(self.bounds)):
            raise ValueError("bounds must be finite")
        for attr in ("eq_rows", "ub_rows"):
            a, b = getattr(self, attr)
            if a is None:
                setattr(self, attr, (np.zeros((0, n)), np.zeros(0)))
            else:
                a = np.atleast_2d(np.asarray(a, dtype=np.float64))
                b = np.atleast_1d(np.asarray(b, dtype=np.float64))
                if a.shape != (len(b), n):
                    raise ValueError(f"{attr} dimensions do not match objective")
                setattr(self, attr, (a, b))


@dataclass
class LpSolution:
    status: str  # "Optimal" | "Infeasible" | "Unbounded"
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    objective: float = float("nan")
    phase1_residual: float = float("nan")


class _IterationLimit(Exception):
    pass


def _pivot(T, b, basis, row, col):
    piv = T[row, col]
    T[row] /= piv
    b[row] /= piv
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row])
    b -= factors * b[row]
    np.clip(b, 0.0, None, out=b)
    basis[row] = col


def _run_simplex(T, b, c, basis, tol, blocked=None):
    """Maximize c'x on the canonical tableau. Mutates T, b, basis."""
    m, ncols = T.shape
    allowed = np.ones(ncols, dtype=bool)
    if blocked is not None:
        allowed[blocked] = False
    bland = False
    degenerate_run = 0
    bland_after = 5 * (m + ncols)
    max_iter = 100 * (m + ncols) + 1000

    for _ in range(max_iter):
        red = c - c[basis] @ T
        red[basis] = 0.0
        red[~allowed] = -np.inf
        candidates = np.flatnonzero(red > tol)
        if len(candidates) == 0:
            return
        if bland:
            col = candidates[0]
        else:
            # Greatest improvement: reduced cost times the ratio-test step.
            sub = T[:, candidates]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(sub > _PIVOT_TOL, b[:, None] / sub, np.inf)
            theta = ratios.min(axis=0)
            if np.any(np.isinf(theta)):
                raise _Unbounded
            gain = red[candidates] * theta
            col = candidates[int(np.argmax(gain))]
        col_vals = T[:, col]
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(col_vals > _PIVOT_TOL, b / col_vals, np.inf)
        row = int(np.argmin(r))
        if np.isinf(r[row]):
            raise _Unbounded
        if bland:
            # Smallest basis index among ties, for the termination guarantee.
            ties = np.flatnonzero(np.abs(r - r[row]) <= 1e-15)
            row = int(ties[np.argmin(np.asarray(basis)[ties])])
        if r[row] <= tol:
            degenerate_run += 1
            if degenerate_run > bland_after:
                bland = True
        else:
            degenerate_run = 0
        _pivot(T, b, basis, row, col)
    raise _IterationLimit("simplex iteration limit reached")


class _Unbounded(Exception):
    pass


def solve(lp: LinearProgram, tol: float = 1e-9) -> LpSolution:
    """Two-phase simplex; see module docstring for the conventions."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = len(lp.objective)
    lo = lp.bounds[:, 0]
    hi = lp.bounds[:, 1]
    span = hi - lo

    a_eq, b_eq = lp.eq_rows
    a_ub, b_ub = lp.ub_rows

    # Shift to x' = x - lo >= 0; upper bounds become rows x'_i <= span_i.
    rows = []
    for a, rhs in zip(a_eq, b_eq - a_eq @ lo):
        rows.append((a, rhs, "eq"))
    for a, rhs in zip(a_ub, b_ub - a_ub @ lo):
        rows.append((a, rhs, "le"))
    eye = np.eye(n)
    for i in range(n):
        rows.append((eye[i], span[i], "le"))

    m = len(rows)
    n_ineq = sum(1 for _, _, kind in rows if kind == "le")
    # Column layout: structural | slack/surplus per inequality | artificials.
    need_artificial = []
    slack_col = {}
    next_slack = n
    for idx, (_, rhs, kind) in enumerate(rows):
        if kind == "le":
            slack_col[idx] = next_slack
            next_slack += 1
            if rhs < 0:
                need_artificial.append(idx)
        else:
            need_artificial.append(idx)
    n_art = len(need_artificial)
    ncols = n + n_ineq + n_art

    T = np.zeros((m, ncols))
    b = np.zeros(m)
    basis = [0] * m
    art_cols = []
    art_base = n + n_ineq
    k_art = 0
    for idx, (a, rhs, kind) in enumerate(rows):
        sign = 1.0
        if rhs < 0:
            sign = -1.0
            rhs = -rhs
        T[idx, :n] = sign * a
        b[idx] = rhs
        if kind == "le":
            T[idx, slack_col[idx]] = sign
        if idx in slack_col and sign > 0 and kind == "le":
            basis[idx] = slack_col[idx]
        else:
            col = art_base + k_art
            k_art += 1
            T[idx, col] = 1.0
            basis[idx] = col
            art_cols.append(col)
    art_cols = np.array(art_cols, dtype=np.int64)

    basis = np.array(basis, dtype=np.int64)

    # Canonicalize rows whose basis is an artificial (they already are) and
    # those basic in a negated slack (surplus) -- handled via the artificial.

    try:
        if n_art:
            c1 = np.zeros(ncols)
            c1[art_cols] = -1.0
            _run_simplex(T, b, c1, basis, tol)
            residual = float(b[np.isin(basis, art_cols)].sum()) if n_art else 0.0
            if residual > tol:
                return LpSolution(status="Infeasible", phase1_residual=residual)
            # Pivot remaining zero-level artificials out of the basis.
            art_set = set(art_cols.tolist())
            for row in range(m):
                if basis[row] in art_set:
                    nonzero = np.flatnonzero(np.abs(T[row, : n + n_ineq]) > _PIVOT_TOL)
                    nonzero = [j for j in nonzero if j not in art_set]
                    if nonzero:
                        _pivot(T, b, basis, row, int(nonzero[0]))
        else:
            residual = 0.0

        c2 = np.zeros(ncols)
        c2[:n] = lp.objective
        _run_simplex(T, b, c2, basis, tol, blocked=art_cols if n_art else None)
    except _Unbounded:
        return LpSolution(status="Unbounded", phase1_residual=residual if n_art else 0.0)

    x_shift = np.zeros(ncols)
    x_shift[basis] = b
    x = lo + x_shift[:n]
    np.clip(x, lo, hi, out=x)
    return LpSolution(
        status="Optimal",
        values=x,
        objective=float(lp.objective @ x),
        phase1_residual=residual,
    )
