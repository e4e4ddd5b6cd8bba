"""Strategy-generation schemes that realize a given marginal coverage.

Four samplers are provided, together with exact distributions where
tractable so the induced pairwise marginals can be evaluated without
Monte Carlo:

* comb sampling -- deterministic bucket filling in index order; its mixed
  strategy has at most ``n + 1`` atoms and is recovered exactly by
  :func:`comb_support`;
* uniform comb sampling -- a fresh uniform target order per draw, which
  spreads the same marginals over exponentially many atoms;
* independent sampling without replacement -- i.i.d. draws from ``x / k``
  until ``k`` distinct targets appear;
* max-entropy sampling -- the entropy-maximizing distribution with the
  given marginals, represented by per-target weights ``alpha`` and sampled
  exactly through a table of weighted elementary symmetric polynomials.

All weight-table arithmetic runs in log space so extreme marginals
(near 0 or 1) cannot overflow.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import ConvergenceError, InputError, SizeGuardError
from .game import MixedStrategy, PairwiseMarginals, PureStrategy, _readonly

_MARGINAL_SUM_TOL = 1e-9
_PIN_TOL = 1e-9
_CUT_DEDUP_TOL = 1e-10
MAXENT_RESIDUAL_TOL = 1e-6


# ---------------------------------------------------------------------------
# Exact set distributions


@dataclass(frozen=True)
class SetDistribution:
    """An explicit distribution over size-k covered subsets."""

    probs: tuple[tuple[tuple[int, ...], float], ...]

    @classmethod
    def from_dict(cls, d: dict[tuple[int, ...], float]) -> "SetDistribution":
        items = tuple(sorted((tuple(t), float(p)) for t, p in d.items() if p > 0))
        total = sum(p for _, p in items)
        if abs(total - 1.0) > 1e-10:
            raise InputError(f"set distribution sums to {total!r}")
        return cls(items)

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return dict(self.probs)

    def pairwise(self, n: int) -> PairwiseMarginals:
        x = np.zeros((n, n))
        for targets, p in self.probs:
            idx = list(targets)
            x[np.ix_(idx, idx)] += p
        return PairwiseMarginals(x)

    def entropy(self) -> float:
        return -sum(p * math.log(p) for _, p in self.probs if p > 0)

    def to_mixed_strategy(self) -> MixedStrategy:
        return MixedStrategy.from_pairs(self.probs)


def _clean_marginals(x, k: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < -_MARGINAL_SUM_TOL) or np.any(x > 1.0 + _MARGINAL_SUM_TOL):
        raise InputError("marginals outside [0, 1]")
    if abs(float(x.sum()) - k) > _MARGINAL_SUM_TOL:
        raise InputError(f"marginal sum mismatch: sum(x) = {x.sum()!r}, expected {k}")
    return np.clip(x, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Comb sampling


@dataclass(frozen=True)
class BucketLayout:
    """Deterministic packing of target coverage into k unit buckets.

    Target ``t`` occupies ``segments[t]``, a tuple of ``(bucket, lo, hi)``
    half-open height intervals; a horizontal line at height ``h`` crosses
    exactly one target per bucket.  ``cuts`` are the distinct fractional
    boundary heights, so the induced mixed strategy has at most ``n + 1``
    atoms.
    """

    x: np.ndarray
    k: int
    segments: tuple[tuple[tuple[int, float, float], ...], ...]
    cuts: tuple[float, ...]
    cumulative: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _readonly(self.x))
        object.__setattr__(self, "cumulative", _readonly(self.cumulative))

    @property
    def n(self) -> int:
        return self.x.size


def comb_layout(x, k: int) -> BucketLayout:
    """Fill targets into k unit buckets in the given order.

    A bucket that overflows while a target is being filled passes the rest
    of that target to the next bucket, so target ``t`` occupies the height
    range ``[cum_{t-1}, cum_t)`` of the concatenated buckets.
    """
    x = _clean_marginals(x, k)
    n = x.size
    cum = np.concatenate([[0.0], np.cumsum(x)])
    cum[-1] = float(k)  # absorb roundoff in the final boundary
    segments: list[tuple[tuple[int, float, float], ...]] = []
    for t in range(n):
        lo, hi = float(cum[t]), float(cum[t + 1])
        segs = []
        while hi - lo > 0.0:
            b = int(math.floor(lo))
            if b >= k:  # lo == k exactly: zero tail
                break
            top = min(hi, float(b + 1))
            segs.append((b, lo - b, top - b))
            lo = top
        segments.append(tuple(segs))

    cuts: list[float] = [0.0]
    for t in range(n + 1):
        f = float(cum[t] - math.floor(cum[t]))
        if f >= 1.0:
            f = 0.0
        if all(abs(f - c) > _CUT_DEDUP_TOL for c in cuts):
            cuts.append(f)
    return BucketLayout(
        x=x, k=k, segments=tuple(segments), cuts=tuple(sorted(cuts)), cumulative=cum
    )


def _targets_at_height(layout: BucketLayout, h: float) -> tuple[int, ...]:
    cum = layout.cumulative
    picked = []
    for j in range(layout.k):
        t = int(np.searchsorted(cum, j + h, side="right")) - 1
        picked.append(min(t, layout.n - 1))
    out = tuple(sorted(set(picked)))
    if len(out) != layout.k:
        raise AssertionError(f"comb selection returned {len(out)} targets, wanted {layout.k}")
    return out


def comb_support(layout: BucketLayout) -> MixedStrategy:
    """The exact mixed strategy induced by the layout (at most n+1 atoms)."""
    cuts = list(layout.cuts) + [1.0]
    atoms: dict[tuple[int, ...], float] = {}
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi - lo <= 0.0:
            continue
        targets = _targets_at_height(layout, (lo + hi) / 2.0)
        atoms[targets] = atoms.get(targets, 0.0) + (hi - lo)
    return MixedStrategy.from_pairs(atoms.items(), drop_tol=0.0)


def comb_sample(layout: BucketLayout, rng: np.random.Generator) -> PureStrategy:
    """One draw: a uniform height h and the k targets whose segments contain it."""
    h = float(rng.random())
    picked = [
        t
        for t, segs in enumerate(layout.segments)
        if any(lo <= h < hi for _, lo, hi in segs)
    ]
    if len(picked) != layout.k:
        raise AssertionError("horizontal line crossed an unexpected number of targets")
    return PureStrategy(picked)


def uniform_comb_sample(x, k: int, rng: np.random.Generator) -> PureStrategy:
    """Comb sampling after a fresh uniform random ordering of the targets."""
    x = _clean_marginals(x, k)
    perm = rng.permutation(x.size)
    layout = comb_layout(x[perm], k)
    picked = comb_sample(layout, rng)
    return PureStrategy(perm[list(picked.targets)])


def unics_sample_batch(x, k: int, rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` uniform-comb draws as a 0/1 indicator matrix (count, n).

    Vectorized over draws: a lattice of k horizontal cut points per draw is
    intersected with the per-permutation cumulative coverage profile.
    """
    x = _clean_marginals(x, k)
    n = x.size
    perms = np.argsort(rng.random((count, n)), axis=1)
    cum = np.cumsum(x[perms], axis=1)
    cum[:, -1] = float(k)
    h = rng.random((count, 1))
    upper = np.ceil(cum - h)
    lower = np.hstack([np.ceil(-h), upper[:, :-1]])
    sel = (upper - lower).astype(np.int8)
    out = np.zeros((count, n), dtype=np.int8)
    np.put_along_axis(out, perms, sel, axis=1)
    if not np.all(out.sum(axis=1) == k):
        raise AssertionError("uniform comb batch produced a wrong-size strategy")
    return out


def exact_unics_distribution(x, k: int) -> SetDistribution:
    """Exact uniform-comb distribution by enumerating all n! orders (n <= 8)."""
    x = _clean_marginals(x, k)
    n = x.size
    if n > 8:
        raise SizeGuardError(f"uniform-comb enumeration needs n <= 8, got {n}")
    acc: dict[tuple[int, ...], float] = {}
    weight = 1.0 / math.factorial(n)
    for perm in itertools.permutations(range(n)):
        layout = comb_layout(x[list(perm)], k)
        for strat, prob in comb_support(layout).atoms:
            actual = tuple(sorted(perm[t] for t in strat.targets))
            acc[actual] = acc.get(actual, 0.0) + prob * weight
    return SetDistribution.from_dict(acc)


# ---------------------------------------------------------------------------
# Independent sampling without replacement


def _draw_probabilities(x, k: int) -> np.ndarray:
    x = _clean_marginals(x, k)
    if int(np.count_nonzero(x > 0)) < k:
        raise InputError("fewer than k targets with positive mass")
    q = x / float(k)
    return q / q.sum()


def indep_sample_without_replacement(x, k: int, rng: np.random.Generator) -> PureStrategy:
    """Repeat i.i.d. draws from ``x / k`` until k distinct targets appear."""
    q = _draw_probabilities(x, k)
    chosen: set[int] = set()
    while len(chosen) < k:
        chosen.add(int(rng.choice(q.size, p=q)))
    return PureStrategy(chosen)


def indep_sample_batch(x, k: int, rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` independent-sampling draws as a 0/1 indicator matrix."""
    q = _draw_probabilities(x, k)
    n = q.size
    seen = np.zeros((count, n), dtype=bool)
    filled = np.zeros(count, dtype=np.int64)
    while True:
        live = np.nonzero(filled < k)[0]
        if live.size == 0:
            break
        draws = rng.choice(n, size=live.size, p=q)
        fresh = ~seen[live, draws]
        seen[live[fresh], draws[fresh]] = True
        filled[live] += fresh
    return seen.astype(np.int8)


def exact_indep_distribution(x, k: int) -> SetDistribution:
    """Exact distribution of independent sampling without replacement.

    The set probability is the ordered-product sum
    ``P(s) = sum over orderings (i_1..i_k) of prod_t q_{i_t} / (1 - sum_{u<t} q_{i_u})``,
    i.e. successive sampling over the order of first appearance.  Gated to
    n <= 10, k <= 5 (k! orderings per subset).
    """
    q = _draw_probabilities(x, k)
    n = q.size
    if n > 10 or k > 5:
        raise SizeGuardError(f"exact enumeration needs n <= 10, k <= 5, got n={n}, k={k}")
    positive = [i for i in range(n) if q[i] > 0]
    acc: dict[tuple[int, ...], float] = {}
    for subset in itertools.combinations(positive, k):
        total = 0.0
        for order in itertools.permutations(subset):
            prob = 1.0
            rem = 1.0
            for i in order:
                prob *= q[i] / rem
                rem -= q[i]
            total += prob
        acc[subset] = total
    return SetDistribution.from_dict(acc)


# ---------------------------------------------------------------------------
# Weighted elementary symmetric polynomials (log-space dynamic program)


def _log_esp_forward(log_alpha: np.ndarray, k: int) -> np.ndarray:
    """T[i, j] = log sum over size-i subsets of the first j weights."""
    n = log_alpha.size
    t = np.full((k + 1, n + 1), -np.inf)
    t[0, :] = 0.0
    for j in range(1, n + 1):
        t[1:, j] = np.logaddexp(t[1:, j - 1], log_alpha[j - 1] + t[:-1, j - 1])
    return t


def _log_esp_backward(log_alpha: np.ndarray, k: int) -> np.ndarray:
    """B[i, j] = log sum over size-i subsets of the weights from index j on."""
    n = log_alpha.size
    b = np.full((k + 1, n + 1), -np.inf)
    b[0, :] = 0.0
    for j in range(n - 1, -1, -1):
        b[1:, j] = np.logaddexp(b[1:, j + 1], log_alpha[j] + b[:-1, j + 1])
    return b


def _log_leave_one_out(log_alpha: np.ndarray, order: int) -> np.ndarray:
    """Per index i: log esp_order of all weights except i."""
    n = log_alpha.size
    if order < 0:
        return np.full(n, -np.inf)
    f = _log_esp_forward(log_alpha, order)
    b = _log_esp_backward(log_alpha, order)
    terms = f[0 : order + 1, 0:n] + b[order::-1, 1 : n + 1]
    return np.logaddexp.reduce(terms, axis=0)


def _log_marginals(log_alpha: np.ndarray, k: int) -> np.ndarray:
    """Log coverage probability per target under weights alpha and size k."""
    log_z = _log_esp_forward(log_alpha, k)[k, -1]
    return log_alpha + _log_leave_one_out(log_alpha, k - 1) - log_z


def _log_pair_weights(log_alpha: np.ndarray, k: int) -> np.ndarray:
    """Matrix of log esp_{k-2} over all weights except i and j (i != j)."""
    n = log_alpha.size
    out = np.full((n, n), -np.inf)
    if k < 2:
        return out
    for i in range(n):
        reduced = np.delete(log_alpha, i)
        los = _log_leave_one_out(reduced, k - 2)
        out[i, np.arange(n) != i] = los
    return out


@dataclass(frozen=True)
class EspTable:
    """Dynamic-programming table of weighted elementary symmetric polynomials.

    ``value(i, j)`` is the sum over size-i subsets of the first j weights of
    the product of their weights; the log-space array ``log_t`` is the
    authoritative store so huge weights cannot overflow.
    """

    alpha: np.ndarray
    k: int
    n: int
    log_t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", _readonly(self.alpha))
        object.__setattr__(self, "log_t", _readonly(self.log_t))

    def value(self, i: int, j: int) -> float:
        return float(np.exp(self.log_t[i, j]))

    def log_value(self, i: int, j: int) -> float:
        return float(self.log_t[i, j])

    @property
    def total(self) -> float:
        """Sum over all size-k subsets of their weight products."""
        return self.value(self.k, self.n)


def esp_table(alpha, k: int, n: int | None = None) -> EspTable:
    """Build the full (k+1) x (n+1) table from positive weights."""
    alpha = np.asarray(alpha, dtype=float)
    if n is None:
        n = alpha.size
    if alpha.shape != (n,):
        raise InputError("weight vector length differs from n")
    if np.any(alpha <= 0) or not np.all(np.isfinite(alpha)):
        raise InputError("weights must be positive and finite")
    if not 0 <= k <= n:
        raise InputError("subset size out of range")
    return EspTable(alpha=alpha, k=k, n=n, log_t=_log_esp_forward(np.log(alpha), k))


# ---------------------------------------------------------------------------
# Max-entropy sampling


@dataclass(frozen=True)
class MaxEntDual:
    """Solved weights of the max-entropy distribution for a marginal vector.

    Unpinned targets carry positive weights ``alpha`` (targets with marginal
    exactly 1 or 0 are pinned in or out and excluded from the weight
    problem).  ``residual`` is the achieved-vs-requested marginal error.
    """

    alpha: np.ndarray
    pinned_in: tuple[int, ...]
    pinned_out: tuple[int, ...]
    residual: np.ndarray
    x: np.ndarray
    k: int

    def __post_init__(self):
        object.__setattr__(self, "alpha", _readonly(self.alpha))
        object.__setattr__(self, "residual", _readonly(self.residual))
        object.__setattr__(self, "x", _readonly(self.x))

    @property
    def free(self) -> tuple[int, ...]:
        pinned = set(self.pinned_in) | set(self.pinned_out)
        return tuple(i for i in range(self.x.size) if i not in pinned)

    @property
    def free_slots(self) -> int:
        return self.k - len(self.pinned_in)


def _dual_objective(beta: np.ndarray, x_free: np.ndarray, slots: int):
    log_alpha = -beta
    log_z = _log_esp_forward(log_alpha, slots)[slots, -1]
    marg = np.exp(_log_marginals(log_alpha, slots))
    value = float(beta @ x_free + log_z)
    grad = x_free - marg
    return value, grad, marg


def maxent_solve_dual(x, k: int, max_iters: int = 10_000) -> MaxEntDual:
    """Fit per-target weights whose size-k distribution matches marginals x.

    Minimizes ``f(beta) = beta @ x + log Z(e^-beta)`` (an unconstrained
    smooth convex problem whose gradient is the marginal residual) with
    L-BFGS, then Newton-polishes if needed.  Convergence contract: every
    unpinned target's achieved marginal is within 1e-6 of ``x``; failure
    raises ConvergenceError with the residual.
    """
    x = _clean_marginals(x, k)
    n = x.size
    pinned_in = tuple(int(i) for i in np.nonzero(x >= 1.0 - _PIN_TOL)[0])
    pinned_out = tuple(int(i) for i in np.nonzero(x <= _PIN_TOL)[0])
    free = [i for i in range(n) if x[i] > _PIN_TOL and x[i] < 1.0 - _PIN_TOL]
    slots = k - len(pinned_in)
    alpha_full = np.ones(n)
    residual = np.zeros(n)

    if slots < 0 or slots > len(free):
        raise InputError("pinned targets are inconsistent with the budget k")
    if free and slots > 0:
        x_free = x[free]
        beta = -(np.log(x_free) - np.log1p(-x_free))  # logit warm start
        result = minimize(
            lambda b: _dual_objective(b, x_free, slots)[:2],
            beta,
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": max_iters, "maxfun": 5 * max_iters, "gtol": 1e-9, "ftol": 1e-16},
        )
        beta = result.x
        _, grad, marg = _dual_objective(beta, x_free, slots)
        if np.max(np.abs(grad)) > MAXENT_RESIDUAL_TOL:
            beta, grad, marg = _newton_polish(beta, x_free, slots, iters=min(60, max_iters))
        if np.max(np.abs(grad)) > MAXENT_RESIDUAL_TOL:
            raise ConvergenceError(
                f"max-entropy dual residual {np.max(np.abs(grad)):.3e} > {MAXENT_RESIDUAL_TOL}"
            )
        beta = beta - beta.mean()  # fix the gauge; the distribution is invariant
        alpha_full[free] = np.exp(-beta)
        residual[free] = grad
    elif free:
        residual[free] = x[free]  # no slots left: achieved marginal is 0

    return MaxEntDual(
        alpha=alpha_full,
        pinned_in=pinned_in,
        pinned_out=pinned_out,
        residual=residual,
        x=x,
        k=k,
    )


def _newton_polish(beta, x_free, slots, iters: int = 60):
    """Exact-Hessian Newton with backtracking; the Hessian is the indicator
    covariance (pair marginals minus the outer product of marginals)."""
    value, grad, marg = _dual_objective(beta, x_free, slots)
    for _ in range(iters):
        if np.max(np.abs(grad)) <= MAXENT_RESIDUAL_TOL / 4:
            break
        log_alpha = -beta
        log_z = _log_esp_forward(log_alpha, slots)[slots, -1]
        lp = _log_pair_weights(log_alpha, slots)
        pair = np.exp(log_alpha[:, None] + log_alpha[None, :] + lp - log_z)
        np.fill_diagonal(pair, marg)
        h = pair - np.outer(marg, marg)
        h += np.eye(beta.size) * 1e-12
        try:
            step = np.linalg.solve(h, grad)  # f(beta - step) decreases
        except np.linalg.LinAlgError:
            step = grad
        scale = 1.0
        for _ in range(40):
            cand = beta - scale * step
            cand_value, cand_grad, cand_marg = _dual_objective(cand, x_free, slots)
            if cand_value <= value:
                beta, value, grad, marg = cand, cand_value, cand_grad, cand_marg
                break
            scale /= 2.0
        else:
            break
    return beta, grad, marg


def maxent_sample(dual: MaxEntDual, k: int, rng: np.random.Generator) -> PureStrategy:
    """Walk targets high to low, keeping each with the table-ratio probability.

    Induces probability proportional to the product of the chosen targets'
    weights; terminates in at most n steps with exactly k targets.
    """
    if k != dual.k:
        raise InputError("sample size differs from the solved dual")
    free = list(dual.free)
    slots = dual.free_slots
    chosen = list(dual.pinned_in)
    if slots > 0:
        log_alpha = np.log(dual.alpha[free])
        t = _log_esp_forward(log_alpha, slots)
        i = slots
        for j in range(len(free), 0, -1):
            if i == 0:
                break
            p = math.exp(log_alpha[j - 1] + t[i - 1, j - 1] - t[i, j])
            if rng.random() < p:
                chosen.append(free[j - 1])
                i -= 1
        if i != 0:
            raise AssertionError("max-entropy walk ended with unfilled slots")
    out = PureStrategy(chosen)
    if len(out.targets) != k:
        raise AssertionError("max-entropy walk returned a wrong-size strategy")
    return out


def maxent_pair_marginals(dual: MaxEntDual, k: int, n: int) -> PairwiseMarginals:
    """Exact first and second moments of the max-entropy distribution.

    Diagonal entries are coverage marginals; off-diagonals use leave-two-out
    symmetric polynomials, so no sampling is involved.
    """
    if k != dual.k or n != dual.x.size:
        raise InputError("dual was solved for different dimensions")
    free = list(dual.free)
    slots = dual.free_slots
    x = np.zeros((n, n))
    for i in dual.pinned_in:
        x[i, i] = 1.0
    if len(dual.pinned_in) >= 2:
        for i, j in itertools.combinations(dual.pinned_in, 2):
            x[i, j] = x[j, i] = 1.0
    if free and slots > 0:
        log_alpha = np.log(dual.alpha[free])
        log_z = _log_esp_forward(log_alpha, slots)[slots, -1]
        marg = np.exp(_log_marginals(log_alpha, slots))
        lp = _log_pair_weights(log_alpha, slots)
        pair = np.exp(log_alpha[:, None] + log_alpha[None, :] + lp - log_z)
        for a, i in enumerate(free):
            x[i, i] = marg[a]
            for b, j in enumerate(free):
                if a != b:
                    x[i, j] = pair[a, b]
        for i in dual.pinned_in:
            for a, j in enumerate(free):
                x[i, j] = x[j, i] = marg[a]
    return PairwiseMarginals(x)


def maxent_distribution(dual: MaxEntDual) -> SetDistribution:
    """Explicit max-entropy set distribution (small n only; testing oracle)."""
    n = dual.x.size
    if n > 12:
        raise SizeGuardError("explicit max-entropy distribution needs n <= 12")
    free = list(dual.free)
    slots = dual.free_slots
    base = tuple(dual.pinned_in)
    acc: dict[tuple[int, ...], float] = {}
    if slots == 0:
        acc[base] = 1.0
    else:
        log_alpha = np.log(dual.alpha[free])
        log_z = _log_esp_forward(log_alpha, slots)[slots, -1]
        for combo in itertools.combinations(range(len(free)), slots):
            lw = float(sum(log_alpha[c] for c in combo) - log_z)
            targets = tuple(sorted(base + tuple(free[c] for c in combo)))
            acc[targets] = math.exp(lw)
    return SetDistribution.from_dict(acc)


# ---------------------------------------------------------------------------
# Test and benchmark support


def random_feasible_marginals(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """A random vector with components in (0, 1] summing exactly to k.

    Water-filling of random weights: x = min(1, lam * w) with lam chosen by
    bisection so the total is k.
    """
    if not 1 <= k <= n:
        raise InputError("need 1 <= k <= n")
    w = rng.uniform(0.05, 1.0, size=n)

    def covered(lam):
        return float(np.minimum(1.0, lam * w).sum())

    lo, hi = 0.0, 1.0
    while covered(hi) < k and hi < 1e9:
        hi *= 2.0
    for _ in range(80):
        mid = (lo + hi) / 2.0
        if covered(mid) < k:
            lo = mid
        else:
            hi = mid
    x = np.minimum(1.0, hi * w)
    interior = (x > 1e-9) & (x < 1.0 - 1e-9)
    gap = k - float(x.sum())
    if np.any(interior):
        x[interior] += gap / int(interior.sum())
    return np.clip(x, 0.0, 1.0)
