"""Domain types and exact utility evaluation for leaky security games.

A zero-sum security game allocates ``k`` indistinguishable resources over
``n`` targets.  The defender commits to a distribution over size-``k``
covered subsets; the attacker best-responds, possibly after observing the
realized protection status of a single target (the "leak").  Everything the
attacker can exploit is captured by the pairwise coverage probabilities
``x_ij = Pr(i and j both covered)``, so utilities are evaluated from that
matrix alone.

All values are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InputError, SizeGuardError

PSD_TOL = 1e-9

PRIL = "pril"  # probabilistic leakage: target i leaks with known probability p_i
ADIL = "adil"  # adversarial leakage: attacker picks the surveilled target


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class GameInstance:
    """Payoffs of a zero-sum security game.

    ``rewards[i]`` is the defender's utility when the attacked target ``i``
    is covered, ``costs[i]`` when it is not; coverage never hurts
    (``costs <= rewards``).
    """

    n: int
    k: int
    rewards: np.ndarray
    costs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rewards", _readonly(self.rewards))
        object.__setattr__(self, "costs", _readonly(self.costs))


@dataclass(frozen=True)
class LeakageModel:
    """How the protection status of one target may leak to the attacker.

    ``variant`` is "pril" (target ``i`` leaks with probability ``p[i]``,
    nothing leaks with probability ``p0``) or "adil" (with probability
    ``1 - p0`` the attacker observes a target of his choosing from
    ``support``).  ``support`` lists the targets that can possibly leak.
    """

    variant: str
    p0: float
    support: tuple[int, ...]
    p: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(sorted(self.support)))
        if self.p is not None:
            object.__setattr__(self, "p", _readonly(self.p))

    @classmethod
    def pril(cls, p, p0=None, support=None) -> "LeakageModel":
        """Probabilistic leakage from a length-n vector of leak probabilities."""
        p = np.asarray(p, dtype=float)
        if p0 is None:
            p0 = 1.0 - float(p.sum())
        if support is None:
            support = tuple(int(i) for i in np.nonzero(p > 0)[0])
        return cls(PRIL, float(p0), tuple(support), p)

    @classmethod
    def adil(cls, p0, support) -> "LeakageModel":
        """Adversarial leakage from any target in ``support``."""
        return cls(ADIL, float(p0), tuple(support), None)

    @classmethod
    def none(cls, n: int) -> "LeakageModel":
        """No leakage at all (p0 = 1)."""
        return cls(PRIL, 1.0, (), np.zeros(n))


@dataclass(frozen=True, order=True)
class PureStrategy:
    """A covered subset of exactly ``k`` targets, stored sorted."""

    targets: tuple[int, ...]

    def __init__(self, targets):
        object.__setattr__(self, "targets", tuple(sorted(int(t) for t in targets)))
        if len(set(self.targets)) != len(self.targets):
            raise InputError(f"duplicate targets in pure strategy {self.targets}")

    def indicator(self, n: int) -> np.ndarray:
        s = np.zeros(n)
        s[list(self.targets)] = 1.0
        return s


@dataclass(frozen=True)
class MixedStrategy:
    """A distribution over pure strategies; atoms are canonically sorted."""

    atoms: tuple[tuple[PureStrategy, float], ...]

    @classmethod
    def from_pairs(cls, pairs, drop_tol: float = 1e-12) -> "MixedStrategy":
        """Merge duplicates, drop atoms below ``drop_tol`` and renormalize."""
        merged: dict[tuple[int, ...], float] = {}
        for strat, prob in pairs:
            if not isinstance(strat, PureStrategy):
                strat = PureStrategy(strat)
            merged[strat.targets] = merged.get(strat.targets, 0.0) + float(prob)
        kept = {t: p for t, p in merged.items() if p > drop_tol}
        if not kept:
            raise InputError("mixed strategy has no mass")
        total = sum(kept.values())
        atoms = tuple(
            (PureStrategy(t), p / total) for t, p in sorted(kept.items())
        )
        return cls(atoms)

    def __post_init__(self):
        total = 0.0
        seen = set()
        for strat, prob in self.atoms:
            if prob <= 0:
                raise InputError("non-positive atom probability")
            if strat.targets in seen:
                raise InputError(f"duplicate atom {strat.targets}")
            seen.add(strat.targets)
            total += prob
        if abs(total - 1.0) > 1e-12:
            raise InputError(f"atom probabilities sum to {total!r}, not 1")

    def support_size(self) -> int:
        return len(self.atoms)


@dataclass(frozen=True)
class PairwiseMarginals:
    """Symmetric matrix of joint coverage probabilities.

    ``matrix[i, j] = Pr(i and j both covered)``; the diagonal holds the
    per-target coverage probabilities.
    """

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _readonly(self.matrix))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def symmetrized(self) -> np.ndarray:
        return (self.matrix + self.matrix.T) / 2.0

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.symmetrized()).min())

    def is_psd(self, tol: float = PSD_TOL) -> bool:
        return self.min_eigenvalue() >= -tol

    def check(self, k: int | None = None, tol: float = PSD_TOL) -> list[str]:
        """Report violated structural invariants (empty list = clean)."""
        x = self.matrix
        issues = []
        if not np.allclose(x, x.T, atol=tol):
            issues.append("not symmetric")
        d = np.diag(x)
        if np.any(x > np.minimum.outer(d, d) + tol):
            issues.append("entry exceeds min of its diagonals")
        if np.any(x < np.add.outer(d, d) - 1.0 - tol):
            issues.append("entry below pairwise lower bound")
        if np.any(d < -tol) or np.any(d > 1.0 + tol):
            issues.append("diagonal outside [0, 1]")
        if not self.is_psd(tol):
            issues.append("not positive semi-definite")
        if k is not None:
            if abs(float(d.sum()) - k) > tol:
                issues.append(f"trace != {k}")
            if abs(float(x.sum()) - k * k) > tol:
                issues.append(f"entry sum != {k}^2")
        return issues


@dataclass(frozen=True)
class ConditionalUtilities:
    """Defender utility decomposition against a single observed target.

    ``u`` is the no-leak utility; for each support target ``i``,
    ``u_vec[i]`` is the utility mass when ``i`` is observed covered and
    ``v_vec[i]`` when observed uncovered (both already weighted by the
    probability of the observation).  ``w`` is the worst case
    ``min_i (u_vec[i] + v_vec[i])`` over the support, None if the support
    is empty.  Entries outside the support are NaN.
    """

    u: float
    u_vec: np.ndarray
    v_vec: np.ndarray
    w: float | None

    def __post_init__(self):
        object.__setattr__(self, "u_vec", _readonly(self.u_vec))
        object.__setattr__(self, "v_vec", _readonly(self.v_vec))


def validate_instance(g: GameInstance, model: LeakageModel | None = None) -> list[str]:
    """Return the list of violated invariants (empty = valid)."""
    issues: list[str] = []
    if g.n < 2:
        issues.append("n out of range (need n >= 2)")
    if not (1 <= g.k <= g.n):
        issues.append("k out of range (need 1 <= k <= n)")
    if g.rewards.shape != (g.n,) or g.costs.shape != (g.n,):
        issues.append("payoff vector length != n")
        return issues
    if not (np.all(np.isfinite(g.rewards)) and np.all(np.isfinite(g.costs))):
        issues.append("non-finite payoff")
    elif np.any(g.costs > g.rewards):
        issues.append("cost exceeds reward (coverage must never hurt)")

    if model is None:
        return issues
    if model.variant not in (PRIL, ADIL):
        issues.append(f"unknown leakage variant {model.variant!r}")
        return issues
    if not 0.0 <= model.p0 <= 1.0 + 1e-12:
        issues.append("p0 outside [0, 1]")
    if any(not 0 <= i < g.n for i in model.support):
        issues.append("support index out of range")
    if model.variant == PRIL:
        p = model.p
        if p is None or p.shape != (g.n,):
            issues.append("PRIL requires a length-n leak probability vector")
            return issues
        if np.any(p < -1e-15):
            issues.append("negative leak probability")
        if abs(model.p0 + float(p.sum()) - 1.0) > 1e-9:
            issues.append("simplex violation: p0 + sum(p) != 1")
        outside = [i for i in range(g.n) if i not in model.support and p[i] > 0]
        if outside:
            issues.append(f"positive leak probability outside support: {outside}")
    else:
        if model.p0 < 1.0 - 1e-12 and not model.support:
            issues.append("ADIL support empty while p0 < 1")
    return issues


def pairwise_marginals(ms: MixedStrategy, n: int) -> PairwiseMarginals:
    """Joint coverage matrix of a mixed strategy: sum of prob * s s^T."""
    x = np.zeros((n, n))
    for strat, prob in ms.atoms:
        idx = list(strat.targets)
        if idx and (idx[0] < 0 or idx[-1] >= n):
            raise InputError(f"target index out of range in atom {strat.targets}")
        x[np.ix_(idx, idx)] += prob
    return PairwiseMarginals(x)


def conditional_utilities(
    X: PairwiseMarginals, g: GameInstance, support
) -> ConditionalUtilities:
    """Evaluate the attacker's best responses for each possible observation.

    With joint coverage ``x_ij`` the defender's utility mass is
    ``min_j [r_j x_ij + c_j (x_ii - x_ij)]`` when target ``i`` is seen
    covered, and ``min_j [r_j (x_jj - x_ij) + c_j (1 - x_ii - x_jj + x_ij)]``
    when seen uncovered.  Ties in the minima go to the lowest target index
    (reporting convention only; the value is tie-independent).
    """
    x = X.matrix
    r, c = g.rewards, g.costs
    d = np.diag(x)
    u = float(np.min(r * d + c * (1.0 - d)))
    u_vec = np.full(g.n, np.nan)
    v_vec = np.full(g.n, np.nan)
    support = sorted(int(i) for i in support)
    for i in support:
        row = x[i]
        u_vec[i] = float(np.min(r * row + c * (x[i, i] - row)))
        v_vec[i] = float(np.min(r * (d - row) + c * (1.0 - x[i, i] - d + row)))
    w = min((u_vec[i] + v_vec[i] for i in support), default=None)
    return ConditionalUtilities(u=u, u_vec=u_vec, v_vec=v_vec, w=w)


def leakage_utility(X: PairwiseMarginals, g: GameInstance, model: LeakageModel) -> float:
    """Defender's expected utility under the given leakage model.

    PRIL: ``p0 * u + sum_i p_i (u_i + v_i)``; ADIL: ``p0 * u + (1-p0) * w``.
    """
    if model.variant == PRIL:
        live = [i for i in model.support if model.p is not None and model.p[i] > 0]
        cond = conditional_utilities(X, g, live)
        out = model.p0 * cond.u
        for i in live:
            out += float(model.p[i]) * (cond.u_vec[i] + cond.v_vec[i])
        return out
    cond = conditional_utilities(X, g, model.support)
    out = model.p0 * cond.u
    if model.p0 < 1.0:
        if cond.w is None:
            raise InputError("ADIL with p0 < 1 needs a non-empty support")
        out += (1.0 - model.p0) * cond.w
    return out


def enumerate_pure_strategies(n: int, k: int):
    """All size-k covered subsets in lexicographic order."""
    for combo in itertools.combinations(range(n), k):
        yield PureStrategy(combo)


def membership_check_small(X: PairwiseMarginals, n: int, k: int) -> bool:
    """Decide whether ``X`` is a convex combination of vertices ``s s^T``.

    Solves a feasibility LP over all C(n, k) enumerated vertices, so it is
    gated to n <= 12.  Returns False in particular whenever the trace or
    entry-sum conditions (trace = k, sum = k^2) fail.
    """
    if n > 12:
        raise SizeGuardError(f"membership check enumerates C(n, k) vertices; n={n} > 12")
    from .linprog import LE, EQ, LinearProgram, solve_lp  # local import to avoid cycle

    verts = [s.indicator(n) for s in enumerate_pure_strategies(n, k)]
    nv = len(verts)
    keys = [(i, j) for i in range(n) for j in range(i, n)]
    xs = X.symmetrized()
    rows = []
    for (i, j) in keys:
        coeffs = np.array([v[i] * v[j] for v in verts])
        rows.append((coeffs, EQ, float(xs[i, j])))
    rows.append((np.ones(nv), EQ, 1.0))
    lp = LinearProgram.build(np.zeros(nv), rows)
    sol = solve_lp(lp)
    return sol.status == "optimal"
