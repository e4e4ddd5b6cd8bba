"""Sampler correctness against exact distributions and brute-force oracles."""

import itertools
import math

import numpy as np
import pytest

from leakygames.errors import ConvergenceError, InputError, SizeGuardError
from leakygames.game import pairwise_marginals
from leakygames.sampling import (
    MaxEntDual,
    comb_layout,
    comb_sample,
    comb_support,
    esp_table,
    exact_indep_distribution,
    exact_unics_distribution,
    indep_sample_batch,
    indep_sample_without_replacement,
    maxent_distribution,
    maxent_pair_marginals,
    maxent_sample,
    maxent_solve_dual,
    random_feasible_marginals,
    unics_sample_batch,
    uniform_comb_sample,
)

BASELINE_X = np.array([2 / 3, 2 / 3, 1 / 3, 1 / 3])


class _FixedHeight:
    """Duck-typed generator returning a preset uniform height."""

    def __init__(self, h):
        self.h = h

    def random(self):
        return self.h


def brute_esp(alpha, k):
    """Independent oracle: explicit sum over all size-k products."""
    return sum(
        math.prod(alpha[i] for i in combo)
        for combo in itertools.combinations(range(len(alpha)), k)
    )


def walk_probability(alpha, k, subset):
    """Independent oracle: probability that the high-to-low walk emits subset."""
    n = len(alpha)
    table = np.zeros((k + 1, n + 1))
    table[0, :] = 1.0
    for i in range(1, k + 1):
        for j in range(1, n + 1):
            table[i, j] = table[i, j - 1] + alpha[j - 1] * table[i - 1, j - 1]
    prob = 1.0
    i = k
    for j in range(n, 0, -1):
        if i == 0:
            break
        p_take = alpha[j - 1] * table[i - 1, j - 1] / table[i, j]
        if (j - 1) in subset:
            prob *= p_take
            i -= 1
        else:
            prob *= 1.0 - p_take
    return prob if i == 0 else 0.0


class TestCombLayout:
    def test_baseline_example_cuts_and_support(self):
        layout = comb_layout(BASELINE_X, 2)
        assert layout.cuts == pytest.approx((0.0, 1 / 3, 2 / 3), abs=1e-12)
        support = comb_support(layout)
        atoms = {s.targets: p for s, p in support.atoms}
        assert atoms.keys() == {(0, 1), (0, 2), (1, 3)}
        for p in atoms.values():
            assert p == pytest.approx(1 / 3, abs=1e-12)

    def test_full_coverage_single_atom(self):
        layout = comb_layout(np.ones(3), 3)
        support = comb_support(layout)
        assert support.support_size() == 1
        assert support.atoms[0][0].targets == (0, 1, 2)
        assert support.atoms[0][1] == pytest.approx(1.0)

    def test_segment_lengths_conserve_marginals(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            n, k = 7, 3
            x = random_feasible_marginals(n, k, rng)
            layout = comb_layout(x, k)
            for t in range(n):
                total = sum(hi - lo for _, lo, hi in layout.segments[t])
                assert total == pytest.approx(x[t], abs=1e-12)
            for b in range(k):
                covered = sorted(
                    (lo, hi)
                    for segs in layout.segments
                    for bb, lo, hi in segs
                    if bb == b
                )
                assert covered[0][0] == pytest.approx(0.0, abs=1e-12)
                assert covered[-1][1] == pytest.approx(1.0, abs=1e-12)
                for (_, h1), (l2, _) in zip(covered[:-1], covered[1:]):
                    assert l2 == pytest.approx(h1, abs=1e-12)

    def test_marginal_sum_mismatch_rejected(self):
        with pytest.raises(InputError):
            comb_layout([0.5, 0.5], 2)


class TestCombSupport:
    def test_support_at_most_n_plus_one_with_exact_diag(self):
        rng = np.random.default_rng(77)
        for _ in range(100):
            x = random_feasible_marginals(10, 4, rng)
            support = comb_support(comb_layout(x, 4))
            assert support.support_size() <= 11
            diag = np.diag(pairwise_marginals(support, 10).matrix)
            assert np.max(np.abs(diag - x)) <= 1e-12


class TestCombSample:
    def test_preset_heights_pick_expected_sets(self):
        layout = comb_layout(BASELINE_X, 2)
        assert comb_sample(layout, _FixedHeight(0.2)).targets == (0, 1)
        assert comb_sample(layout, _FixedHeight(0.5)).targets == (0, 2)

    def test_empirical_frequencies_match_support(self):
        layout = comb_layout(BASELINE_X, 2)
        support = {s.targets: p for s, p in comb_support(layout).atoms}
        rng = np.random.default_rng(123)
        n_draws = 100_000
        counts: dict = {}
        for _ in range(n_draws):
            t = comb_sample(layout, rng).targets
            counts[t] = counts.get(t, 0) + 1
        assert counts.keys() == support.keys()
        for t, p in support.items():
            sigma = math.sqrt(p * (1 - p) / n_draws)
            assert abs(counts[t] / n_draws - p) <= 3 * sigma


class TestUniformComb:
    def test_two_targets_symmetric(self):
        dist = exact_unics_distribution(np.array([0.5, 0.5]), 1).as_dict()
        assert dist[(0,)] == pytest.approx(0.5, abs=1e-12)
        assert dist[(1,)] == pytest.approx(0.5, abs=1e-12)

    def test_coverage_matches_marginals(self):
        rng = np.random.default_rng(5)
        x = random_feasible_marginals(6, 3, rng)
        n_draws = 100_000
        draws = unics_sample_batch(x, 3, rng, n_draws)
        freq = draws.mean(axis=0)
        sigma = np.sqrt(x * (1 - x) / n_draws)
        assert np.all(np.abs(freq - x) <= 3 * sigma + 1e-9)

    def test_exact_distribution_spreads_beyond_comb(self):
        dist = exact_unics_distribution(BASELINE_X, 2)
        assert len(dist.probs) > 3
        pair01 = dist.as_dict().get((0, 1), 0.0)
        assert abs(pair01 - 1 / 3) > 0.01
        diag = np.diag(dist.pairwise(4).matrix)
        assert np.max(np.abs(diag - BASELINE_X)) <= 1e-12

    def test_batch_matches_exact_distribution(self):
        rng = np.random.default_rng(21)
        x = BASELINE_X
        exact = exact_unics_distribution(x, 2).as_dict()
        n_draws = 200_000
        draws = unics_sample_batch(x, 2, rng, n_draws)
        keys = [tuple(np.nonzero(row)[0]) for row in draws]
        for t, p in exact.items():
            freq = sum(1 for key in keys if key == t) / n_draws
            sigma = math.sqrt(p * (1 - p) / n_draws)
            assert abs(freq - p) <= 3.5 * sigma

    def test_single_draw_reproducible(self):
        a = uniform_comb_sample(BASELINE_X, 2, np.random.default_rng(3))
        b = uniform_comb_sample(BASELINE_X, 2, np.random.default_rng(3))
        assert a == b


class TestIndependentSampling:
    def test_symmetric_marginals_uniform_pairs(self):
        dist = exact_indep_distribution(np.array([2 / 3, 2 / 3, 2 / 3]), 2).as_dict()
        for pair in [(0, 1), (0, 2), (1, 2)]:
            assert dist[pair] == pytest.approx(1 / 3, abs=1e-12)

    def test_ordered_product_example(self):
        dist = exact_indep_distribution(np.array([1.0, 0.5, 0.5]), 2).as_dict()
        assert dist[(0, 1)] == pytest.approx(5 / 12, abs=1e-12)
        assert dist[(0, 2)] == pytest.approx(5 / 12, abs=1e-12)
        assert dist[(1, 2)] == pytest.approx(1 / 6, abs=1e-12)

    def test_monte_carlo_cross_check(self):
        rng = np.random.default_rng(99)
        x = np.array([1.0, 0.5, 0.5])
        exact = exact_indep_distribution(x, 2).as_dict()
        n_draws = 200_000
        draws = indep_sample_batch(x, 2, rng, n_draws)
        for pair, p in exact.items():
            mask = np.all(draws[:, list(pair)] == 1, axis=1) & (draws.sum(axis=1) == 2)
            freq = float(mask.mean())
            sigma = math.sqrt(p * (1 - p) / n_draws)
            assert abs(freq - p) <= 3.5 * sigma

    def test_uniform_marginals_uniform_distribution(self):
        x = np.full(5, 2 / 5)
        dist = exact_indep_distribution(x, 2).as_dict()
        want = 1 / math.comb(5, 2)
        for p in dist.values():
            assert p == pytest.approx(want, abs=1e-12)

    def test_diagonal_sums_to_k(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            x = random_feasible_marginals(7, 3, rng)
            y = exact_indep_distribution(x, 3).pairwise(7)
            assert abs(np.trace(y.matrix) - 3.0) <= 1e-10

    def test_coverage_lower_bound_monte_carlo(self):
        rng = np.random.default_rng(31)
        x = random_feasible_marginals(8, 4, rng)
        n_draws = 100_000
        draws = indep_sample_batch(x, 4, rng, n_draws)
        freq = draws.mean(axis=0)
        sigma = np.sqrt(freq * (1 - freq) / n_draws)
        assert np.all(freq >= (1 - 1 / math.e) * x - 3 * sigma)

    def test_single_draw_literal_process(self):
        rng = np.random.default_rng(4)
        s = indep_sample_without_replacement(np.array([1.0, 0.5, 0.5]), 2, rng)
        assert len(s.targets) == 2

    def test_too_few_positive_targets(self):
        with pytest.raises(InputError):
            indep_sample_without_replacement(np.array([2.0, 0.0, 0.0]), 2, np.random.default_rng(0))

    def test_size_guard(self):
        with pytest.raises(SizeGuardError):
            exact_indep_distribution(np.full(12, 0.5), 6)


class TestEspTable:
    def test_unit_weights_count_pairs(self):
        t = esp_table(np.ones(3), 2)
        assert t.value(2, 3) == pytest.approx(3.0, abs=1e-12)

    def test_weighted_example(self):
        t = esp_table(np.array([1.0, 2.0, 3.0]), 2)
        assert t.value(2, 3) == pytest.approx(11.0, abs=1e-12)

    def test_random_weights_match_bruteforce(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            alpha = rng.uniform(0.1, 5.0, size=8)
            t = esp_table(alpha, 3)
            want = brute_esp(alpha, 3)
            assert abs(t.total - want) <= 1e-10 * want

    def test_recurrence_and_boundary(self):
        alpha = np.array([0.5, 1.5, 2.5, 3.5])
        t = esp_table(alpha, 3)
        for j in range(5):
            assert t.value(0, j) == pytest.approx(1.0)
        for i in range(1, 4):
            for j in range(1, 5):
                want = t.value(i, j - 1) + alpha[j - 1] * t.value(i - 1, j - 1)
                assert t.value(i, j) == pytest.approx(want, rel=1e-12)

    def test_huge_weights_stay_finite_in_log_space(self):
        alpha = np.full(40, 1e300)
        t = esp_table(alpha, 20)
        assert np.isfinite(t.log_value(20, 40))


class TestMaxEntropy:
    def test_uniform_marginals_give_uniform_distribution(self):
        dual = maxent_solve_dual(np.full(4, 0.5), 2)
        alpha = dual.alpha[list(dual.free)]
        assert np.max(np.abs(alpha - alpha[0])) <= 1e-6
        dist = maxent_distribution(dual).as_dict()
        for p in dist.values():
            assert p == pytest.approx(1 / 6, abs=1e-6)

    def test_pinned_target_and_symmetric_rest(self):
        dual = maxent_solve_dual(np.array([1.0, 0.5, 0.5]), 2)
        assert dual.pinned_in == (0,)
        dist = maxent_distribution(dual).as_dict()
        assert dist[(0, 1)] == pytest.approx(0.5, abs=1e-6)
        assert dist[(0, 2)] == pytest.approx(0.5, abs=1e-6)

    def test_residual_contract_on_random_marginals(self):
        rng = np.random.default_rng(14)
        for _ in range(10):
            x = random_feasible_marginals(10, 4, rng)
            dual = maxent_solve_dual(x, 4)
            achieved = np.diag(maxent_pair_marginals(dual, 4, 10).matrix)
            assert np.max(np.abs(achieved - x)) <= 1e-6

    def test_sampler_distribution_is_weight_proportional(self):
        alpha = np.array([1.0, 2.0, 3.0])
        dual = MaxEntDual(
            alpha=alpha,
            pinned_in=(),
            pinned_out=(),
            residual=np.zeros(3),
            x=np.array([5 / 11, 7 / 11, 10 / 11]),
            k=2,
        )
        want = {(1, 2): 6 / 11, (0, 2): 3 / 11, (0, 1): 2 / 11}
        for subset, p in want.items():
            assert walk_probability(alpha, 2, subset) == pytest.approx(p, abs=1e-12)
        rng = np.random.default_rng(100)
        n_draws = 60_000
        counts: dict = {}
        for _ in range(n_draws):
            t = maxent_sample(dual, 2, rng).targets
            counts[t] = counts.get(t, 0) + 1
        for subset, p in want.items():
            sigma = math.sqrt(p * (1 - p) / n_draws)
            assert abs(counts[subset] / n_draws - p) <= 3.5 * sigma

    def test_walk_enumeration_matches_weight_ratios(self):
        """Exhaustive path probabilities equal alpha_s / total within 1e-12."""
        rng = np.random.default_rng(9)
        for n, k in [(5, 2), (6, 3), (8, 4)]:
            alpha = rng.uniform(0.2, 4.0, size=n)
            total = brute_esp(alpha, k)
            mass = 0.0
            for subset in itertools.combinations(range(n), k):
                want = math.prod(alpha[i] for i in subset) / total
                got = walk_probability(alpha, k, set(subset))
                assert got == pytest.approx(want, abs=1e-12)
                mass += got
            assert mass == pytest.approx(1.0, abs=1e-12)

    def test_pair_marginals_uniform_case(self):
        dual = MaxEntDual(
            alpha=np.ones(4), pinned_in=(), pinned_out=(),
            residual=np.zeros(4), x=np.full(4, 0.5), k=2,
        )
        x = maxent_pair_marginals(dual, 2, 4).matrix
        assert np.allclose(np.diag(x), 0.5, atol=1e-12)
        off = x[~np.eye(4, dtype=bool)]
        assert np.allclose(off, 1 / 6, atol=1e-12)

    def test_pair_marginals_weighted_case(self):
        dual = MaxEntDual(
            alpha=np.array([1.0, 2.0, 3.0]), pinned_in=(), pinned_out=(),
            residual=np.zeros(3), x=np.array([5 / 11, 7 / 11, 10 / 11]), k=2,
        )
        x = maxent_pair_marginals(dual, 2, 3).matrix
        assert x[0, 1] == pytest.approx(2 / 11, abs=1e-12)
        assert x[1, 2] == pytest.approx(6 / 11, abs=1e-12)
        assert x[0, 0] == pytest.approx(5 / 11, abs=1e-12)

    def test_pair_marginals_match_enumerated_distribution(self):
        rng = np.random.default_rng(15)
        for n, k in [(6, 2), (8, 3)]:
            x = random_feasible_marginals(n, k, rng)
            dual = maxent_solve_dual(x, k)
            via_moments = maxent_pair_marginals(dual, k, n).matrix
            via_enum = maxent_distribution(dual).pairwise(n).matrix
            assert np.max(np.abs(via_moments - via_enum)) <= 1e-10

    def test_sampler_handles_pins_and_terminates(self):
        rng = np.random.default_rng(2)
        x = np.array([1.0, 0.7, 0.6, 0.7, 0.0, 1.0])
        dual = maxent_solve_dual(x, 4)
        for _ in range(200):
            s = maxent_sample(dual, 4, rng)
            assert len(s.targets) == 4
            assert {0, 5} <= set(s.targets)
            assert 4 not in s.targets

    def test_nonconvergence_is_loud(self):
        with pytest.raises(ConvergenceError):
            maxent_solve_dual(np.array([0.9, 0.7, 0.4]), 2, max_iters=0)


class TestEntropyOrdering:
    def test_maxent_entropy_dominates_comb(self):
        for x, k in [(BASELINE_X, 2), (np.array([0.8, 0.6, 0.4, 0.2]), 2)]:
            comb_dist = {
                s.targets: p for s, p in comb_support(comb_layout(x, k)).atoms
            }
            comb_entropy = -sum(p * math.log(p) for p in comb_dist.values())
            dual = maxent_solve_dual(x, k)
            maxent_entropy = maxent_distribution(dual).entropy()
            assert maxent_entropy >= comb_entropy - 1e-9

    def test_strictly_larger_on_worked_example(self):
        comb_dist = comb_support(comb_layout(BASELINE_X, 2))
        comb_entropy = -sum(p * math.log(p) for _, p in comb_dist.atoms)
        dual = maxent_solve_dual(BASELINE_X, 2)
        assert maxent_distribution(dual).entropy() > comb_entropy + 0.05


class TestRandomMarginals:
    def test_feasible_by_construction(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(3, 12))
            k = int(rng.integers(1, n + 1))
            x = random_feasible_marginals(n, k, rng)
            assert np.all(x >= 0) and np.all(x <= 1)
            assert abs(x.sum() - k) <= 1e-12
