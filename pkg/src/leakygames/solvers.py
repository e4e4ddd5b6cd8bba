"""Optimal leakage-aware strategies: direct LPs and column generation.

The full problem maximizes the leakage-weighted defender utility over all
C(n, k) pure strategies.  ``solve_full_lp`` poses it directly (small
instances; also the exact oracle for tests).  ``column_generation`` keeps a
restricted atom set, reads the master's duals, and prices new columns with
a defender oracle that maximizes ``s^T A s`` over size-k subsets:

* ``defender_oracle_support_enum`` exploits the block structure induced by a
  leakage support of size m (off-support off-diagonal entries are zero): it
  enumerates the 2^m support subsets and completes each greedily, which is
  exact;
* ``defender_oracle_bruteforce`` enumerates all C(n, k) subsets.

Masters substitute the joint-coverage variables out and are solved in
multiplier form (one nonnegative price per utility row, one row per atom),
so the pricing data rho/omega are primal values and the atom probabilities
are the atom rows' duals; per-pair prices are recovered mechanically from
the stored substitution coefficients.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import InputError, LeakyGamesError, SizeGuardError
from .game import (
    ADIL,
    PRIL,
    GameInstance,
    LeakageModel,
    MixedStrategy,
    PureStrategy,
    _readonly,
    enumerate_pure_strategies,
    leakage_utility,
    pairwise_marginals,
)
from .linprog import EQ, LE, LinearProgram, solve_lp
from .sampling import comb_layout, comb_support

FULL_LP_GUARD = 200_000
SUPPORT_ENUM_GUARD = 25
CERTIFICATE_TOL = 1e-7


@dataclass(frozen=True)
class OracleMatrix:
    """Symmetric pricing matrix whose off-support off-diagonal block is zero."""

    matrix: np.ndarray
    support: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "matrix", _readonly(self.matrix))
        object.__setattr__(self, "support", tuple(sorted(self.support)))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def m(self) -> int:
        return len(self.support)

    def validate_structure(self, tol: float = 1e-12) -> None:
        a = self.matrix
        if not np.allclose(a, a.T, atol=tol):
            raise InputError("oracle matrix not symmetric")
        outside = [i for i in range(self.n) if i not in set(self.support)]
        block = a[np.ix_(outside, outside)]
        if np.any(np.abs(block - np.diag(np.diag(block))) > tol):
            raise InputError("off-support block of the oracle matrix is not diagonal")


@dataclass(frozen=True)
class MasterDuals:
    """Dual prices of a restricted master: per-pair beta, omega, raw rho."""

    beta: dict[tuple[int, int], float]
    omega: float
    rho: np.ndarray


@dataclass(frozen=True)
class SolveReport:
    """Outcome of an exact solve; utility always matches the strategy."""

    utility: float
    strategy: MixedStrategy
    iterations: int
    oracle_calls: int
    wall_time_s: float
    termination: str
    master_utilities: tuple[float, ...]


def quad_value(matrix: np.ndarray, targets) -> float:
    """s^T A s for the indicator of ``targets``."""
    idx = list(targets)
    return float(matrix[np.ix_(idx, idx)].sum())


def effective_support(model: LeakageModel) -> tuple[int, ...]:
    """Targets whose leakage actually affects the objective."""
    if model.variant == PRIL:
        if model.p is None:
            return ()
        return tuple(i for i in model.support if model.p[i] > 0)
    return model.support if model.p0 < 1.0 else ()


# ---------------------------------------------------------------------------
# Baseline marginal LP


def solve_marginal_lp(g: GameInstance) -> tuple[np.ndarray, float]:
    """Optimal no-leakage coverage marginals and value.

    The returned vector is padded to sum exactly to k (raising coverage on
    the lowest-index unsaturated targets, which never lowers the value).
    """
    n = g.n
    rows = []
    for j in range(n):
        coeff = np.zeros(n + 1)
        coeff[0] = 1.0
        coeff[1 + j] = -(g.rewards[j] - g.costs[j])
        rows.append((coeff, LE, float(g.costs[j])))
    rows.append((np.concatenate([[0.0], np.ones(n)]), LE, float(g.k)))
    lower = np.concatenate([[-np.inf], np.zeros(n)])
    upper = np.concatenate([[np.inf], np.ones(n)])
    lp = LinearProgram.build(np.eye(n + 1)[0], rows, lower, upper)
    sol = solve_lp(lp)
    if sol.status != "optimal":
        raise LeakyGamesError(f"baseline LP ended with status {sol.status}")
    x = np.clip(sol.x[1:], 0.0, 1.0)
    deficit = float(g.k) - float(x.sum())
    for i in range(n):
        if deficit <= 0:
            break
        bump = min(1.0 - x[i], deficit)
        x[i] += bump
        deficit -= bump
    return x, float(sol.objective)


# ---------------------------------------------------------------------------
# Master LP over an atom set (full problem when the atom set is all of S)


@dataclass
class _MasterRow:
    scalars: dict
    pairs: dict
    rhs: float


class _MasterStructure:
    """Rows and objective of the leakage LP with joint coverage substituted out.

    Each row stores its joint-coverage coefficients keyed by the unordered
    target pair, so an atom's column is the pair-coefficient sum over pairs
    inside the atom, and dual prices per pair fall out mechanically.
    """

    def __init__(self, g: GameInstance, model: LeakageModel):
        self.g = g
        self.support = effective_support(model)
        r, c, n = g.rewards, g.costs, g.n
        scalar_vars: list = ["u"]
        for i in self.support:
            scalar_vars += [("u", i), ("v", i)]
        if model.variant == ADIL and self.support:
            scalar_vars.append("w")
        self.scalar_vars = scalar_vars
        self.scalar_index = {v: a for a, v in enumerate(scalar_vars)}

        def key(i, j):
            return (i, j) if i <= j else (j, i)

        rows: list[_MasterRow] = []
        for j in range(n):
            rows.append(
                _MasterRow({"u": 1.0}, {key(j, j): -(r[j] - c[j])}, float(c[j]))
            )
        for i in self.support:
            for j in range(n):
                pairs: dict = {}
                pairs[key(i, j)] = pairs.get(key(i, j), 0.0) - (r[j] - c[j])
                pairs[key(i, i)] = pairs.get(key(i, i), 0.0) - c[j]
                rows.append(_MasterRow({("u", i): 1.0}, pairs, 0.0))
            for j in range(n):
                pairs = {key(j, j): -(r[j] - c[j])}
                pairs[key(i, j)] = pairs.get(key(i, j), 0.0) + (r[j] - c[j])
                pairs[key(i, i)] = pairs.get(key(i, i), 0.0) + c[j]
                rows.append(_MasterRow({("v", i): 1.0}, pairs, float(c[j])))
        if model.variant == ADIL and self.support:
            for i in self.support:
                rows.append(
                    _MasterRow({"w": 1.0, ("u", i): -1.0, ("v", i): -1.0}, {}, 0.0)
                )
        self.rows = rows

        obj: dict = {}
        if model.variant == PRIL:
            obj["u"] = model.p0
            for i in self.support:
                obj[("u", i)] = float(model.p[i])
                obj[("v", i)] = float(model.p[i])
        else:
            obj["u"] = model.p0
            if self.support:
                obj["w"] = 1.0 - model.p0
        self.objective_scalars = obj

    def theta_column(self, atom: PureStrategy) -> np.ndarray:
        inside = np.zeros(self.g.n, dtype=bool)
        inside[list(atom.targets)] = True
        col = np.empty(len(self.rows))
        for ridx, row in enumerate(self.rows):
            col[ridx] = sum(
                coef for (a, b), coef in row.pairs.items() if inside[a] and inside[b]
            )
        return col

    def build_multiplier_lp(self, theta_cols: list[np.ndarray]) -> LinearProgram:
        """The master in multiplier form.

        Variables are one nonnegative price per utility row plus the free
        normalization price omega; there is one row per atom (the pricing
        inequality) and one equality per scalar utility variable.  The atom
        probabilities are exactly the duals of the atom rows, which keeps
        this LP small and far less degenerate than the atom-variable form.
        """
        n_rows = len(self.rows)
        b = np.array([row.rhs for row in self.rows])
        obj = np.concatenate([-b, [-1.0]])
        lp_rows = []
        for col in theta_cols:
            lp_rows.append((np.concatenate([-col, [-1.0]]), LE, 0.0))
        for var in self.scalar_vars:
            h = np.zeros(n_rows + 1)
            for ridx, row in enumerate(self.rows):
                coef = row.scalars.get(var)
                if coef:
                    h[ridx] = coef
            lp_rows.append((h, EQ, float(self.objective_scalars.get(var, 0.0))))
        lower = np.concatenate([np.zeros(n_rows), [-np.inf]])
        upper = np.full(n_rows + 1, np.inf)
        return LinearProgram.build(obj, lp_rows, lower, upper)

    def extract(self, sol, n_atoms: int) -> tuple[float, np.ndarray, MasterDuals]:
        """Utility, atom probabilities, and pair prices from the multiplier LP."""
        rho = sol.x[: len(self.rows)]
        omega = float(sol.x[len(self.rows)])
        theta = np.clip(sol.duals[:n_atoms], 0.0, None)
        beta: dict[tuple[int, int], float] = {}
        for ridx, row in enumerate(self.rows):
            if rho[ridx] == 0.0:
                continue
            for pair, coef in row.pairs.items():
                beta[pair] = beta.get(pair, 0.0) - rho[ridx] * coef
        duals = MasterDuals(beta=beta, omega=omega, rho=np.array(rho))
        return -float(sol.objective), theta, duals


@dataclass(frozen=True)
class MasterResult:
    utility: float
    strategy: MixedStrategy
    duals: MasterDuals


def restricted_master(
    g: GameInstance, model: LeakageModel, atoms: list[PureStrategy]
) -> MasterResult:
    """Solve the leakage LP restricted to ``atoms`` and price its duals."""
    structure = _MasterStructure(g, model)
    cols = [structure.theta_column(a) for a in atoms]
    return _solve_master(structure, cols, atoms)


def _solve_master(structure, cols, atoms) -> MasterResult:
    sol = solve_lp(structure.build_multiplier_lp(cols))
    if sol.status != "optimal":
        raise LeakyGamesError(f"master LP ended with status {sol.status}")
    utility, theta, duals = structure.extract(sol, len(atoms))
    strategy = MixedStrategy.from_pairs(
        (atom, float(t)) for atom, t in zip(atoms, theta)
    )
    return MasterResult(utility=utility, strategy=strategy, duals=duals)


def build_oracle_matrix(duals: MasterDuals, n: int, support) -> OracleMatrix:
    """Fold the per-pair dual prices into the symmetric pricing matrix."""
    m = np.zeros((n, n))
    for (i, j), val in duals.beta.items():
        m[i, j] += val
    a = (m + m.T) / 2.0
    np.fill_diagonal(a, np.diag(m))
    return OracleMatrix(matrix=a, support=tuple(support))


# ---------------------------------------------------------------------------
# Defender oracles


def defender_oracle_bruteforce(A: OracleMatrix, k: int) -> tuple[PureStrategy, float]:
    """Exact maximizer of s^T A s by enumeration; lexicographic tie-break."""
    n = A.n
    if math.comb(n, k) > FULL_LP_GUARD:
        raise SizeGuardError(f"brute-force oracle would enumerate C({n}, {k}) subsets")
    best_val = -np.inf
    best: tuple[int, ...] | None = None
    for combo in itertools.combinations(range(n), k):
        val = quad_value(A.matrix, combo)
        if val > best_val:
            best_val = val
            best = combo
    return PureStrategy(best), best_val


def defender_oracle_support_enum(A: OracleMatrix, k: int) -> tuple[PureStrategy, float]:
    """Maximize s^T A s using the leakage-support block structure.

    For each support subset C the optimal completion is explicit: with
    ``v = 2 * sum of A's C-rows + diag(A)``, take the k - |C| largest
    off-support entries of v (ties by lowest index).  Enumerating all
    2^m support subsets is exact because the off-support block is diagonal.
    """
    A.validate_structure()
    if A.m > SUPPORT_ENUM_GUARD:
        raise SizeGuardError(f"support enumeration needs m <= {SUPPORT_ENUM_GUARD}")
    n = A.n
    mat = A.matrix
    support = list(A.support)
    outside = [i for i in range(n) if i not in set(support)]
    diag = np.diag(mat)
    if k - len(outside) > len(support):
        raise InputError(f"no size-{k} strategy exists over {n} targets")

    best_val = -np.inf
    best_s: tuple[int, ...] | None = None
    lo_size = max(0, k - len(outside))
    for csize in range(lo_size, min(len(support), k) + 1):
        for c_set in itertools.combinations(support, csize):
            cl = list(c_set)
            v = diag if not cl else 2.0 * mat[cl].sum(axis=0) + diag
            need = k - csize
            if need:
                v_out = v[outside]
                order = np.argsort(-v_out, kind="stable")[:need]
                completion = [outside[int(o)] for o in order]
                val = quad_value(mat, cl) + float(v_out[order].sum())
            else:
                completion = []
                val = quad_value(mat, cl)
            s = tuple(sorted(cl + completion))
            if val > best_val or (val == best_val and (best_s is None or s < best_s)):
                best_val = val
                best_s = s
    return PureStrategy(best_s), quad_value(mat, best_s)


_ORACLES = {
    "alg1": defender_oracle_support_enum,
    "brute": defender_oracle_bruteforce,
}


# ---------------------------------------------------------------------------
# Exact solvers


def solve_full_lp(g: GameInstance, model: LeakageModel) -> SolveReport:
    """Globally optimal strategy by enumerating every pure strategy."""
    if math.comb(g.n, g.k) > FULL_LP_GUARD:
        raise SizeGuardError(
            f"full LP would carry C({g.n}, {g.k}) atoms; use column generation"
        )
    start = time.perf_counter()
    atoms = list(enumerate_pure_strategies(g.n, g.k))
    result = restricted_master(g, model, atoms)
    report = SolveReport(
        utility=result.utility,
        strategy=result.strategy,
        iterations=1,
        oracle_calls=0,
        wall_time_s=time.perf_counter() - start,
        termination="optimal",
        master_utilities=(result.utility,),
    )
    _check_report(report, g, model)
    return report


def initial_atoms(g: GameInstance) -> list[PureStrategy]:
    """Feasible warm start: the comb support of the baseline marginals plus
    the greedy top-k-reward strategy."""
    x_star, _ = solve_marginal_lp(g)
    atoms = [s for s, _ in comb_support(comb_layout(x_star, g.k)).atoms]
    greedy = PureStrategy(np.argsort(-g.rewards, kind="stable")[: g.k])
    if greedy.targets not in {a.targets for a in atoms}:
        atoms.append(greedy)
    return atoms


def column_generation(
    g: GameInstance,
    model: LeakageModel,
    oracle_kind: str = "alg1",
    max_iters: int = 500,
    tol: float = CERTIFICATE_TOL,
) -> SolveReport:
    """Master/pricing loop; terminates when no column prices above omega + tol."""
    if oracle_kind not in _ORACLES:
        raise InputError(f"unknown oracle kind {oracle_kind!r}")
    oracle = _ORACLES[oracle_kind]
    start = time.perf_counter()
    structure = _MasterStructure(g, model)
    support = structure.support
    atoms = initial_atoms(g)
    seen = {a.targets for a in atoms}
    cols = [structure.theta_column(a) for a in atoms]

    master_values: list[float] = []
    termination = "iteration cap"
    oracle_calls = 0
    result: MasterResult | None = None
    for _ in range(max_iters):
        result = _solve_master(structure, cols, atoms)
        master_values.append(result.utility)
        pricing = build_oracle_matrix(result.duals, g.n, support)
        new_atom, value = oracle(pricing, g.k)
        oracle_calls += 1
        if value <= result.duals.omega + tol or new_atom.targets in seen:
            termination = "optimal"
            break
        atoms.append(new_atom)
        seen.add(new_atom.targets)
        cols.append(structure.theta_column(new_atom))
    if result is None:
        raise LeakyGamesError("column generation ran zero iterations")

    report = SolveReport(
        utility=result.utility,
        strategy=result.strategy,
        iterations=len(master_values),
        oracle_calls=oracle_calls,
        wall_time_s=time.perf_counter() - start,
        termination=termination,
        master_utilities=tuple(master_values),
    )
    _check_report(report, g, model)
    return report


def _check_report(report: SolveReport, g: GameInstance, model: LeakageModel) -> None:
    x = pairwise_marginals(report.strategy, g.n)
    recomputed = leakage_utility(x, g, model)
    if abs(recomputed - report.utility) > 1e-7 * (1.0 + abs(report.utility)):
        raise LeakyGamesError(
            f"reported utility {report.utility} differs from strategy value {recomputed}"
        )
