"""Dense linear programming with primal and dual solutions.

Conventions
-----------
Problems are stated as maximizations::

    max  objective @ x
    s.t. a[i] @ x  (<= | = | >=)  rhs[i]      for every row i
         lower[j] <= x[j] <= upper[j]         (+-inf allowed)

``solve_lp`` returns one dual multiplier per *row* (bounds are handled
internally and carry no reported dual).  Signs follow the usual convention
for a maximization: duals of ``<=`` rows are nonnegative, duals of ``>=``
rows are nonpositive, duals of ``=`` rows are free, and at optimality
``objective == duals @ rhs + (bound terms)`` holds within tolerance.

The solver is a two-phase dense tableau simplex.  Entering columns are
chosen by Dantzig's rule (ties by lowest index); if the objective stalls
for many consecutive pivots the solver switches to Bland's rule, which
guarantees termination.  Identical inputs always take identical pivot
sequences, so results are reproducible.

Problem sizes here are small (at most a few thousand rows/columns), which
is why a dense tableau is used instead of sparse machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LeakyGamesError

LE, EQ, GE = "<=", "=", ">="
_SENSES = (LE, EQ, GE)

_PIVOT_TOL = 1e-9
_ENTER_TOL = 1e-8
_FEAS_TOL = 1e-8
_RESIDUAL_TOL = 1e-7
_STALL_LIMIT = 30


class LinProgError(LeakyGamesError):
    """Structural problem or numerical failure; never a silently wrong answer."""


@dataclass(frozen=True)
class LinearProgram:
    """A dense LP in the conventions documented at module level."""

    objective: np.ndarray
    a: np.ndarray
    senses: tuple[str, ...]
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def build(cls, objective, rows, lower=None, upper=None) -> "LinearProgram":
        """Assemble from ``rows = [(coefficients, sense, rhs), ...]``.

        ``lower``/``upper`` default to 0 and +inf per variable.
        """
        c = np.asarray(objective, dtype=float)
        n = c.size
        if rows:
            coeffs = [np.asarray(r[0], dtype=float) for r in rows]
            if any(v.shape != (n,) for v in coeffs):
                raise LinProgError("row coefficient length differs from objective")
            a = np.vstack([v.reshape(1, n) for v in coeffs])
            senses = tuple(r[1] for r in rows)
            b = np.asarray([r[2] for r in rows], dtype=float)
        else:
            a = np.zeros((0, n))
            senses = ()
            b = np.zeros(0)
        lo = np.zeros(n) if lower is None else np.asarray(lower, dtype=float)
        hi = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
        return cls(c, a, senses, b, lo, hi)

    def validate(self) -> None:
        n = self.objective.size
        if self.a.ndim != 2 or self.a.shape[1] != n:
            raise LinProgError("constraint matrix shape inconsistent with objective")
        m = self.a.shape[0]
        if len(self.senses) != m or self.rhs.shape != (m,):
            raise LinProgError("row senses/rhs length mismatch")
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise LinProgError("bound vector length mismatch")
        if any(s not in _SENSES for s in self.senses):
            raise LinProgError("unknown row sense")
        if not np.all(np.isfinite(self.objective)) or not np.all(np.isfinite(self.a)):
            raise LinProgError("non-finite coefficient")
        if not np.all(np.isfinite(self.rhs)):
            raise LinProgError("non-finite right-hand side")
        if np.any(self.lower > self.upper):
            raise LinProgError("lower bound exceeds upper bound")


@dataclass(frozen=True)
class LpSolution:
    """Result of ``solve_lp``; vectors are None unless status == "optimal"."""

    status: str
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float | None = None


@dataclass
class _Standardized:
    """max c@y with y >= 0 plus bookkeeping to undo the variable transforms."""

    c: np.ndarray
    a: np.ndarray
    senses: list[str]
    b: np.ndarray
    obj_const: float
    n_user_rows: int
    # ('plain', j, lo): x_j = lo + y ; ('flip', j, hi): x_j = hi - y ;
    # ('split', j, 0):  x_j = y1 - y2
    var_map: list[tuple]


def _standardize(lp: LinearProgram) -> _Standardized:
    cols: list[np.ndarray] = []
    c: list[float] = []
    var_map: list[tuple] = []
    upper_rows: list[tuple[int, float]] = []  # (new var index, residual upper bound)
    obj_const = 0.0
    b = lp.rhs.astype(float).copy()

    new_idx = 0
    for j in range(lp.objective.size):
        lo, hi, col, cj = lp.lower[j], lp.upper[j], lp.a[:, j], lp.objective[j]
        if np.isfinite(lo):
            obj_const += cj * lo
            b -= col * lo
            cols.append(col)
            c.append(cj)
            var_map.append(("plain", j, lo))
            if np.isfinite(hi):
                upper_rows.append((new_idx, hi - lo))
            new_idx += 1
        elif np.isfinite(hi):
            obj_const += cj * hi
            b -= col * hi
            cols.append(-col)
            c.append(-cj)
            var_map.append(("flip", j, hi))
            new_idx += 1
        else:
            cols.append(col)
            c.append(cj)
            cols.append(-col)
            c.append(-cj)
            var_map.append(("split", j, 0.0))
            new_idx += 2

    a = np.column_stack(cols) if cols else np.zeros((lp.a.shape[0], 0))
    senses = list(lp.senses)
    n_user = len(senses)
    if upper_rows:
        extra = np.zeros((len(upper_rows), a.shape[1]))
        extra_b = np.empty(len(upper_rows))
        for i, (idx, ub) in enumerate(upper_rows):
            extra[i, idx] = 1.0
            extra_b[i] = ub
        a = np.vstack([a, extra])
        b = np.concatenate([b, extra_b])
        senses += [LE] * len(upper_rows)
    return _Standardized(np.asarray(c, dtype=float), a, senses, b, obj_const, n_user, var_map)


def _pivot(tab: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    factors = tab[:, col].copy()
    factors[row] = 0.0
    tab -= np.outer(factors, tab[row])
    tab[:, col] = 0.0
    tab[row, col] = 1.0
    basis[row] = col


def _refactor(orig: np.ndarray, basis: np.ndarray, n_body: int) -> np.ndarray:
    """Rebuild the tableau from the original data and the current basis.

    Discards the error accumulated by repeated rank-one pivot updates; the
    carried rows (objectives) are re-priced against the basis for free.
    """
    body = orig[:n_body]
    try:
        fresh = np.linalg.solve(body[:, basis], body)
    except np.linalg.LinAlgError as exc:
        raise LinProgError("singular basis during refactorization") from exc
    rows = [fresh]
    for r in range(n_body, orig.shape[0]):
        rows.append((orig[r] - orig[r, basis] @ fresh).reshape(1, -1))
    return np.vstack(rows)


_REFACTOR_EVERY = 60


def _run_simplex(tab, orig, basis, allowed, n_body, max_iters):
    """Optimize the last row of ``tab``.

    Rows ``[:n_body]`` are constraints; rows between ``n_body`` and the last
    are passively carried (kept priced w.r.t. the basis); the last row holds
    reduced costs with ``tab[-1, -1] == -objective``.  Returns the final
    tableau and a status string.
    """
    stall = 0
    since_refactor = 0
    clean_checks = 0
    use_bland = False
    last_val = tab[-1, -1]
    for _ in range(max_iters):
        red = tab[-1, :-1]
        if use_bland:
            cand = np.nonzero(allowed & (red > _ENTER_TOL))[0]
            col = int(cand[0]) if cand.size else -1
        else:
            masked = np.where(allowed, red, -np.inf)
            col = int(np.argmax(masked))
            if masked[col] <= _ENTER_TOL:
                col = -1
        if col < 0:
            # confirm optimality on a freshly refactored tableau
            tab = _refactor(orig, basis, n_body)
            red = np.where(allowed, tab[-1, :-1], -np.inf)
            if red.max() <= _ENTER_TOL or clean_checks >= 4:
                return tab, "optimal"
            clean_checks += 1
            since_refactor = 0
            continue
        pivcol = tab[:n_body, col]
        positive = pivcol > _PIVOT_TOL
        if not np.any(positive):
            tab = _refactor(orig, basis, n_body)
            pivcol = tab[:n_body, col]
            if tab[-1, col] <= _ENTER_TOL:
                continue
            if not np.any(pivcol > _PIVOT_TOL):
                return tab, "unbounded"
            positive = pivcol > _PIVOT_TOL
        # Exact min-ratio rule keeps every step nonnegative, so the objective
        # is monotone.  Among tied rows Dantzig mode takes the sturdiest
        # pivot element; Bland mode takes the lowest basis index.
        rhs = tab[:n_body, -1]
        safe = np.where(positive, pivcol, 1.0)
        ratios = np.where(positive, rhs / safe, np.inf)
        theta = ratios.min()
        tied = np.nonzero(positive & (ratios <= theta + 1e-12 + 1e-9 * theta))[0]
        if use_bland:
            row = int(tied[np.argmin(basis[tied])])
        else:
            row = int(tied[np.argmax(pivcol[tied])])
        frail_pivot = pivcol[row] < 1e-6
        _pivot(tab, basis, row, col)
        since_refactor += 1
        if frail_pivot or since_refactor >= _REFACTOR_EVERY:
            tab = _refactor(orig, basis, n_body)
            since_refactor = 0
        # basic values dip below zero only through roundoff; fail loudly if a
        # refactorization exposes genuine infeasibility
        body_rhs = tab[:n_body, -1]
        if body_rhs.min() < -1e-7:
            tab = _refactor(orig, basis, n_body)
            body_rhs = tab[:n_body, -1]
            since_refactor = 0
            if body_rhs.min() < -1e-7:
                raise LinProgError("lost primal feasibility during pivoting")
        np.maximum(body_rhs, 0.0, out=body_rhs)
        val = tab[-1, -1]
        if val < last_val - 1e-12:
            stall = 0
            last_val = val
        else:
            stall += 1
            if stall >= _STALL_LIMIT:
                use_bland = True
    raise LinProgError("simplex iteration limit exceeded")


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Solve ``lp``; see the module docstring for conventions.

    Raises LinProgError for malformed input or on numerical failure
    (claimed-optimal solutions are verified against the residual contract
    before being returned).
    """
    lp.validate()
    std = _standardize(lp)
    m, n = std.a.shape

    # Orient all rows to nonnegative rhs so slacks/artificials start feasible.
    flip = std.b < 0
    a = std.a.copy()
    b = std.b.copy()
    senses = list(std.senses)
    a[flip] *= -1.0
    b[flip] *= -1.0
    for i in np.nonzero(flip)[0]:
        senses[i] = {LE: GE, GE: LE, EQ: EQ}[senses[i]]

    n_slack = sum(1 for s in senses if s != EQ)
    art_rows = [i for i, s in enumerate(senses) if s != LE]
    total = n + n_slack + len(art_rows)

    body = np.zeros((m, total + 1))
    body[:, :n] = a
    body[:, -1] = b
    slack_col_of_row = np.full(m, -1, dtype=int)
    art_col_of_row = np.full(m, -1, dtype=int)
    col = n
    for i, s in enumerate(senses):
        if s != EQ:
            body[i, col] = 1.0 if s == LE else -1.0
            slack_col_of_row[i] = col
            col += 1
    for i in art_rows:
        body[i, col] = 1.0
        art_col_of_row[i] = col
        col += 1

    basis = np.empty(m, dtype=int)
    for i in range(m):
        basis[i] = art_col_of_row[i] if art_col_of_row[i] >= 0 else slack_col_of_row[i]

    is_artificial = np.zeros(total, dtype=bool)
    if art_rows:
        is_artificial[[art_col_of_row[i] for i in art_rows]] = True

    # The phase-2 objective row rides through phase-1 pivots so it stays
    # priced against the evolving basis (initial basics all have cost 0).
    obj_row = np.zeros(total + 1)
    obj_row[:n] = std.c
    max_iters = max(2000, 200 * (m + 1))
    allowed = ~is_artificial

    if art_rows:
        phase1 = np.zeros(total + 1)
        phase1[:-1][is_artificial] = -1.0
        orig = np.vstack([body, obj_row, phase1])
        tab, status = _run_simplex(
            _refactor(orig, basis, m), orig, basis, allowed, m, max_iters
        )
        if status != "optimal":
            raise LinProgError("phase-1 simplex failed to terminate at optimum")
        if tab[-1, -1] > _FEAS_TOL * (1.0 + float(np.abs(b).max(initial=0.0))):
            return LpSolution(status="infeasible")
        for i in np.nonzero(is_artificial[basis])[0]:
            # swap basic-at-zero artificials for the sturdiest structural column;
            # rows with no usable entry are redundant and keep their artificial
            rowvals = np.abs(tab[i, :-1].copy())
            rowvals[is_artificial] = 0.0
            j = int(np.argmax(rowvals))
            if rowvals[j] > 1e-7:
                _pivot(tab, basis, int(i), j)
        orig = orig[:-1]
        tab = tab[:-1]
    else:
        orig = np.vstack([body, obj_row])
        tab = _refactor(orig, basis, m)

    tab, status = _run_simplex(tab, orig, basis, allowed, m, max_iters)
    if status == "unbounded":
        return LpSolution(status="unbounded")

    y_std = np.zeros(total)
    y_std[basis] = tab[:m, -1]
    obj_internal = -tab[-1, -1]

    # Row duals from reduced costs: slack column e_i gives y_i = -red,
    # surplus column -e_i gives y_i = +red, artificial e_i gives y_i = -red.
    red = tab[-1, :-1]
    duals_internal = np.empty(m)
    for i in range(m):
        if senses[i] == EQ:
            duals_internal[i] = -red[art_col_of_row[i]]
        elif senses[i] == LE:
            duals_internal[i] = -red[slack_col_of_row[i]]
        else:
            duals_internal[i] = red[slack_col_of_row[i]]
    duals_internal[flip] *= -1.0

    x = np.zeros(lp.objective.size)
    pos = 0
    for kind, j, ref in std.var_map:
        if kind == "plain":
            x[j] = ref + y_std[pos]
            pos += 1
        elif kind == "flip":
            x[j] = ref - y_std[pos]
            pos += 1
        else:
            x[j] = y_std[pos] - y_std[pos + 1]
            pos += 2
    objective = obj_internal + std.obj_const

    _verify(lp, std, x, duals_internal, objective)
    return LpSolution(
        status="optimal",
        x=x,
        duals=duals_internal[: std.n_user_rows],
        objective=float(objective),
    )


def _verify(lp, std, x, duals_internal, objective) -> None:
    scale = 1.0 + float(np.max(np.abs(lp.rhs))) if lp.rhs.size else 1.0
    ax = lp.a @ x
    for i, s in enumerate(lp.senses):
        r = ax[i] - lp.rhs[i]
        bad = (
            (s == LE and r > _RESIDUAL_TOL * scale)
            or (s == GE and r < -_RESIDUAL_TOL * scale)
            or (s == EQ and abs(r) > _RESIDUAL_TOL * scale)
        )
        if bad:
            raise LinProgError(f"primal residual {r:.2e} on row {i}")
    if np.any(x < lp.lower - _RESIDUAL_TOL) or np.any(x > lp.upper + _RESIDUAL_TOL):
        raise LinProgError("variable bound violated at claimed optimum")
    gap = abs((objective - std.obj_const) - float(duals_internal @ std.b))
    if gap > _RESIDUAL_TOL * (1.0 + abs(objective)):
        raise LinProgError(f"duality gap {gap:.2e} at claimed optimum")
    red = std.c - duals_internal @ std.a
    if np.any(red > _RESIDUAL_TOL * (1.0 + np.abs(std.c))):
        raise LinProgError("dual residual at claimed optimum")
