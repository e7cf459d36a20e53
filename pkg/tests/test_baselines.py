import math

import numpy as np
import pytest

from dpkpca.baselines import (
    ClipThresholds,
    clip_matrix_general,
    clip_vector_l2_l1,
    clipped_sum,
    dp_gauss_1,
    dp_gauss_2,
    dp_power_method,
    trace_clip_factors,
)
from dpkpca.datagen import SampleBatch, spiked_rankk
from dpkpca.dp_primitives import PrivacyBudget
from dpkpca.errors import GapFailure, InvalidInput
from dpkpca.linalg import check_orthobasis, principal_sine, sym_eig
from dpkpca.metrics import zeta_utility
from dpkpca.rng import substream

BUDGET = PrivacyBudget(1.0, 0.01)


def loose_clips(beta=100.0) -> ClipThresholds:
    return ClipThresholds(beta=beta, alpha_l1=10.0 * beta)


class TestClipThresholds:
    def test_formula(self):
        d, lam1, sigma, n = 50, 10.0, 0.1, 1000
        clips = ClipThresholds.for_stream(d, lam1, sigma, n, confidence=0.01)
        tail = sigma * math.sqrt(d * math.log(n / 0.01))
        assert clips.beta == pytest.approx(math.sqrt(lam1) + tail)
        assert clips.alpha_l1 == pytest.approx(sigma * d + math.sqrt(lam1 * d) + tail)

    def test_invariants_enforced(self):
        with pytest.raises(InvalidInput):
            ClipThresholds(beta=0.0, alpha_l1=1.0)
        with pytest.raises(InvalidInput):
            ClipThresholds(beta=2.0, alpha_l1=1.0)

    def test_l1_dominates_l2_on_grids(self):
        for d in (50, 100, 200, 400):
            for sigma in (0.001, 0.025, 0.25):
                clips = ClipThresholds.for_stream(d, 10.0, sigma, 64000)
                assert clips.alpha_l1 >= clips.beta


class TestTraceClipping:
    def test_identity_when_under_threshold(self):
        rng = np.random.default_rng(0)
        x = 0.1 * rng.standard_normal((20, 5))
        samples = SampleBatch(x)
        assert np.allclose(trace_clip_factors(samples, 10.0), 1.0)
        assert np.allclose(clipped_sum(samples, 10.0), x.T @ x)

    def test_clipped_trace_at_threshold(self):
        x = np.array([[10.0, 0.0]])
        s = clipped_sum(SampleBatch(x), beta=1.0)
        assert np.trace(s) == pytest.approx(1.0)

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        samples = SampleBatch(rng.standard_normal((30, 4)) * 5.0)
        beta = 1.5
        factors = trace_clip_factors(samples, beta)
        once = samples.x * np.sqrt(factors)[:, None]
        again = trace_clip_factors(SampleBatch(once), beta)
        assert np.allclose(again, 1.0)


class TestVectorClipping:
    def test_under_both_thresholds_unchanged(self):
        x = np.array([0.3, 0.4])
        out = clip_vector_l2_l1(x, beta=1.0, alpha=1.0)[0]
        assert np.array_equal(out, x)

    def test_l2_clip_formula(self):
        out = clip_vector_l2_l1(np.array([3.0, 4.0]), beta=1.0, alpha=10.0)[0]
        assert np.allclose(out, [0.6, 0.8])

    def test_l1_clip_applies_after_l2(self):
        out = clip_vector_l2_l1(np.array([1.0, 1.0]), beta=10.0, alpha=1.0)[0]
        assert np.abs(out).sum() == pytest.approx(1.0)

    def test_idempotent(self):
        rng = np.random.default_rng(2)
        x = 10.0 * rng.standard_normal((50, 6))
        once = clip_vector_l2_l1(x, beta=1.2, alpha=2.0)
        twice = clip_vector_l2_l1(once, beta=1.2, alpha=2.0)
        assert np.allclose(once, twice, atol=1e-14)


class TestMatrixClipping:
    def test_bounds_enforced(self):
        rng = np.random.default_rng(3)
        g = rng.standard_normal((6, 6))
        a = g @ g.T
        out = clip_matrix_general(a, beta=1.0, alpha=2.0)
        assert np.trace(out) <= 1.0 + 1e-12
        assert np.abs(out).sum(axis=1).max() <= 2.0 + 1e-12

    def test_idempotent(self):
        rng = np.random.default_rng(4)
        g = rng.standard_normal((5, 5))
        a = g @ g.T
        once = clip_matrix_general(a, beta=1.0, alpha=2.0)
        twice = clip_matrix_general(once, beta=1.0, alpha=2.0)
        assert np.array_equal(once, twice)


class TestDpGauss1:
    def test_delta1_formula(self):
        # beta=1, eps=1, delta = 1.25/e gives Delta_1 = sqrt(2).
        budget = PrivacyBudget(1.0, 1.25 * math.exp(-1.0))
        delta1 = 1.0 * math.sqrt(2.0 * math.log(1.25 / budget.delta)) / budget.epsilon
        assert delta1 == pytest.approx(math.sqrt(2.0))

    def test_zero_noise_equals_exact_pca_of_clipped_sum(self):
        stream = spiked_rankk(d=12, k=2, eigenvalues=(6.0, 3.0), sigma=0.05, seed=0)
        samples = stream.sample(500)
        clips = loose_clips()
        u = dp_gauss_1(samples, 2, BUDGET, clips, substream(0, "g1"), noise_scale=0.0)
        v = sym_eig(clipped_sum(samples, clips.beta)).eigenvectors[:, :2]
        assert np.max(np.abs(u @ u.T - v @ v.T)) <= 1e-10

    def test_orthobasis_and_accuracy_at_scale(self):
        stream = spiked_rankk(d=30, k=2, eigenvalues=(10.0, 5.0), sigma=0.025, seed=1)
        clips = ClipThresholds.for_stream(30, 10.0, 0.025, 20000)
        u = dp_gauss_1(stream.sample(20000), 2, BUDGET, clips, substream(1, "g1"))
        assert check_orthobasis(u)
        assert zeta_utility(u, stream.params.sigma_matrix, 2).zeta2 <= 1e-3

    def test_k_bound(self):
        with pytest.raises(InvalidInput):
            dp_gauss_1(SampleBatch(np.zeros((5, 3))), 3, BUDGET, loose_clips(), substream(2, "g1"))


class TestDpGauss2:
    def test_zero_noise_limit(self):
        stream = spiked_rankk(d=10, k=2, eigenvalues=(8.0, 4.0), sigma=0.05, seed=2)
        samples = stream.sample(2000)
        clips = loose_clips()
        u = dp_gauss_2(samples, 2, PrivacyBudget(1e9, 0.01), clips, substream(3, "g2"),
                       noise_scale=0.0)
        v = sym_eig(clipped_sum(samples, clips.beta)).eigenvectors[:, :2]
        assert np.max(np.abs(u @ u.T - v @ v.T)) <= 1e-10

    def test_huge_gap_accurate(self):
        stream = spiked_rankk(d=5, k=1, eigenvalues=(50.0,), sigma=0.01, seed=3)
        clips = ClipThresholds.for_stream(5, 50.0, 0.01, 10 ** 5)
        u = dp_gauss_2(stream.sample(10 ** 5), 1, BUDGET, clips, substream(4, "g2"))
        v = sym_eig(stream.params.sigma_matrix).eigenvectors[:, 0]
        assert principal_sine(u[:, 0], v) <= 0.05

    def test_retry_exhaustion(self):
        # Tied top eigenvalues leave a zero gap; this seed's first Laplace
        # draws are all nonpositive, so the retry budget runs out.
        samples = SampleBatch(np.zeros((100, 4)), base=np.diag([1.0, 1.0, 0.0, 0.0]))
        with pytest.raises(GapFailure):
            dp_gauss_2(samples, 1, PrivacyBudget(1.0, 0.01), loose_clips(), substream(75, "g2"),
                       max_retries=5)

    def test_retry_count_surfaced(self):
        samples = SampleBatch(np.zeros((100, 4)), base=np.diag([2.0, 1.0, 0.5, 0.1]))
        diag = {}
        dp_gauss_2(samples, 1, BUDGET, loose_clips(), substream(6, "g2"), diag=diag)
        assert diag.get("retries", 0) >= 0

    def test_orthobasis(self):
        stream = spiked_rankk(d=15, k=3, eigenvalues=(9.0, 6.0, 3.0), sigma=0.05, seed=4)
        u = dp_gauss_2(stream.sample(3000), 3, BUDGET,
                       ClipThresholds.for_stream(15, 9.0, 0.05, 3000), substream(7, "g2"))
        assert check_orthobasis(u)


class TestDpPowerMethod:
    def test_zero_noise_power_iteration(self):
        samples = SampleBatch(np.zeros((10, 3)), base=np.diag([5.0, 3.0, 1.0]))
        u = dp_power_method(samples, 2, BUDGET, loose_clips(), substream(8, "pw"),
                            iterations=50, noise_scale=0.0)
        p = u @ u.T
        want = np.diag([1.0, 1.0, 0.0])
        assert np.max(np.abs(p - want)) <= 1e-6

    def test_rank_one_and_general_paths_agree_when_unclipped(self):
        rng = np.random.default_rng(5)
        x = 0.1 * rng.standard_normal((40, 6))
        clips = loose_clips()
        rank_one = SampleBatch(x)
        with_base = SampleBatch(x, base=np.zeros((6, 6)))
        a = dp_power_method(rank_one, 2, BUDGET, clips, substream(9, "pw"), noise_scale=0.0)
        b = dp_power_method(with_base, 2, BUDGET, clips, substream(9, "pw"), noise_scale=0.0)
        assert np.max(np.abs(a @ a.T - b @ b.T)) <= 1e-10

    def test_orthobasis_and_reasonable_accuracy(self):
        stream = spiked_rankk(d=20, k=2, eigenvalues=(10.0, 5.0), sigma=0.025, seed=6)
        clips = ClipThresholds.for_stream(20, 10.0, 0.025, 30000)
        u = dp_power_method(stream.sample(30000), 2, BUDGET, clips, substream(10, "pw"))
        assert check_orthobasis(u)
        assert zeta_utility(u, stream.params.sigma_matrix, 2).zeta2 <= 0.2

    def test_iterations_bound(self):
        with pytest.raises(InvalidInput):
            dp_power_method(SampleBatch(np.zeros((5, 3))), 1, BUDGET, loose_clips(),
                            substream(11, "pw"), iterations=0)


def test_all_baselines_return_orthobases():
    stream = spiked_rankk(d=12, k=2, eigenvalues=(6.0, 3.0), sigma=0.05, seed=7)
    samples = stream.sample(1000)
    clips = ClipThresholds.for_stream(12, 6.0, 0.05, 1000)
    for s in range(10):
        for fn in (dp_gauss_1, dp_gauss_2, dp_power_method):
            u = fn(samples, 2, BUDGET, clips, substream(s, "all", fn.__name__))
            assert u.shape == (12, 2)
            assert check_orthobasis(u)
