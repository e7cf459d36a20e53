import math

import numpy as np
import pytest

from dpkpca.datagen import SampleBatch, spiked_rank1, spiked_rankk
from dpkpca.dp_pca import (
    OracleConfig,
    dp_ojas,
    exact_epca_oracle,
    k_dp_pca,
    modified_dp_pca,
    priv_mean,
    priv_mean_sensitivity,
    priv_range,
    subset_count,
)
from dpkpca.dp_primitives import GeometricBins, PrivacyBudget
from dpkpca.errors import InsufficientData, InvalidInput, RangeFailure
from dpkpca.linalg import Projector, orthonormalize, principal_sine, project_unit, sym_eig
from dpkpca.metrics import zeta_utility
from dpkpca.oja import LrSchedule, run_oja
from dpkpca.rng import substream

BIG_EPS = PrivacyBudget(1e9, 0.5)  # effectively noiseless mechanisms


class TestPrivRange:
    def test_identical_gradients_underflow_to_zero(self):
        grads = np.tile(np.arange(5.0), (200, 1))
        lam = priv_range(grads, BIG_EPS, 0.1, substream(0, "pr"))
        assert lam == 0.0

    def test_alternating_gradients_hand_gram(self):
        # Pairs difference to -2c e1, so every subset's Gram eigenvalue is 4c^2.
        c = 3.0
        grads = np.zeros((400, 6))
        grads[0::2, 0] = c
        grads[1::2, 0] = -c
        lam = priv_range(grads, BIG_EPS, 0.1, substream(1, "pr"))
        true = 4.0 * c * c
        assert lam <= true <= lam * 2.0 ** 0.25

    def test_odd_gradient_count_drops_last(self):
        grads = np.zeros((401, 6))
        grads[0::2, 0] = 1.0
        grads[1::2, 0] = -1.0
        lam = priv_range(grads, BIG_EPS, 0.1, substream(2, "pr"))
        assert lam is not None and lam > 0

    def test_too_few_gradients(self):
        budget = PrivacyBudget(1.0, 0.01)
        k_sub = subset_count(budget, 0.01, 1.0)
        with pytest.raises(InsufficientData):
            priv_range(np.zeros((2 * k_sub - 2, 3)), budget, 0.01, substream(3, "pr"))

    def test_spiked_gradient_concentration(self):
        # Oracle: recompute the exact per-subset Gram eigenvalues; the released
        # left edge must mark a bin holding one of them on almost every seed.
        budget = PrivacyBudget(2.0, 0.01)
        hits = 0
        for s in range(200):
            stream = spiked_rank1(d=20, lambda1=10.0, sigma=0.025, seed=s)
            batch = stream.sample(600)
            omega = project_unit(Projector.identity(20), substream(s, "pr-omega").standard_normal(20))
            grads = batch.gradients(omega)
            m = grads.shape[0] - grads.shape[0] % 2
            diffs = grads[1:m:2] - grads[0:m:2]
            k_sub = subset_count(budget, 0.01, 1.0)
            values = []
            for g in np.array_split(diffs, k_sub):
                sv = np.linalg.svd(g, compute_uv=False)[0]
                values.append(sv * sv / g.shape[0])
            lam = priv_range(grads, budget, 0.01, substream(s, "pr-mc"))
            if lam is not None and min(values) / 2.0 ** 0.25 <= lam <= max(values):
                if any(lam <= v <= lam * 2.0 ** 0.25 * (1 + 1e-12) for v in values):
                    hits += 1
        assert hits >= 190

    def test_strict_mode_suppresses_scattered_values(self):
        # Values spread over many bins cannot clear the stability threshold.
        rng = np.random.default_rng(0)
        grads = rng.standard_normal((60, 4)) * np.exp(rng.uniform(-20, 20, size=(60, 1)))
        lam = priv_range(grads, PrivacyBudget(1.0, 1e-6), 0.01, substream(4, "pr"), strict=True)
        assert lam is None


class TestPrivMean:
    def test_constant_gradients_recovered(self):
        g = np.array([1.5, -0.25, 3.0])
        grads = np.tile(g, (50, 1))
        out = priv_mean(grads, 1.0, BIG_EPS, 0.1, substream(0, "pm"))
        assert np.max(np.abs(out - g)) <= 1e-6

    def test_unbiased_within_window(self):
        rng = np.random.default_rng(1)
        grads = 0.05 * rng.standard_normal((64, 3)) + np.array([1.0, -2.0, 0.5])
        budget = PrivacyBudget(2.0, 0.01)
        b, d = grads.shape
        noise_std = (12.0 * math.sqrt(1.0) * math.log(b * d / 0.1)
                     * math.sqrt(2.0 * d * math.log(2.5 / budget.delta))
                     / (budget.epsilon * b))
        outs = np.stack([priv_mean(grads, 1.0, budget, 0.1, substream(s, "pm-mc"))
                         for s in range(10 ** 4)])
        err = np.linalg.norm(outs.mean(axis=0) - grads.mean(axis=0))
        assert err <= 3.0 * noise_std / 100.0

    def test_outlier_is_truncated(self):
        rng = np.random.default_rng(2)
        grads = 0.01 * rng.standard_normal((100, 3))
        grads[0, 0] = 1e6
        lam_hat, tau = 1.0, 0.1
        b, d = grads.shape
        window = 3.0 * math.sqrt(lam_hat) * math.log(b * d / tau)
        noise_std = (12.0 * math.sqrt(lam_hat) * math.log(b * d / tau)
                     * math.sqrt(2.0 * d * math.log(2.5 / 0.01)) / (1.0 * b))
        out = priv_mean(grads, lam_hat, PrivacyBudget(1.0, 0.01), tau, substream(3, "pm"))
        # The winning bucket sits near zero, so the output cannot exceed the
        # truncation window plus a few noise standard deviations.
        width = 2.0 ** 0.25 * math.sqrt(lam_hat) * math.log(2.0 * b / tau)
        assert np.max(np.abs(out)) <= width + window + 5.0 * noise_std

    def test_zero_lambda_hat_window_floor(self):
        grads = np.tile(np.array([2.0, -1.0]), (30, 1))
        out = priv_mean(grads, 0.0, BIG_EPS, 0.1, substream(4, "pm"))
        # Zero range estimate collapses the window onto the bucket edge.
        assert np.all(np.isfinite(out))

    def test_negative_lambda_hat_rejected(self):
        with pytest.raises(InvalidInput):
            priv_mean(np.zeros((4, 2)), -1.0, BIG_EPS, 0.1, substream(5, "pm"))

    def test_strict_mode_small_batch_fails(self):
        # The per-coordinate threshold dwarfs any small batch in strict mode.
        grads = np.tile(np.array([1.0, 2.0]), (20, 1))
        with pytest.raises(RangeFailure):
            priv_mean(grads, 1.0, PrivacyBudget(1.0, 0.01), 0.1, substream(6, "pm"), strict=True)


class TestPrivMeanSensitivity:
    def test_worst_case_neighbors_within_bound(self):
        # Fixed histogram centers: removing the bottom-edge point from a batch
        # otherwise at the top edge moves the truncated mean the most.
        rng = np.random.default_rng(7)
        for _ in range(100):
            b = int(rng.integers(5, 200))
            d = int(rng.integers(1, 30))
            lam_hat = float(rng.uniform(0.0, 25.0))
            tau = float(rng.uniform(1e-4, 0.5))
            k_const = float(rng.uniform(1.0, 4.0))
            a_const = float(rng.uniform(1.0, 2.0))
            center = rng.standard_normal(d)
            h = 3.0 * k_const * max(math.sqrt(lam_hat), 2.0 ** -50) * math.log(b * d / tau) ** a_const
            lo, hi = center - h, center + h
            full = np.vstack([np.tile(hi, (b - 1, 1)), lo[None, :]])
            smaller = full[: b - 1]

            def truncated_mean(g):
                return np.clip(g, lo, hi).mean(axis=0)

            change = np.linalg.norm(truncated_mean(full) - truncated_mean(smaller))
            bound = priv_mean_sensitivity(lam_hat, b, d, tau, k_const, a_const)
            assert change <= bound + 1e-9

    def test_bound_matches_noise_calibration_shape(self):
        # The Gaussian noise std equals the sensitivity bound scaled by the
        # analytic per-coordinate budget factor sqrt(2 d ln(2.5/delta)) / eps
        # (with the 2/eps-per-half accounting folded into the constant).
        lam_hat, b, d, tau = 4.0, 50, 10, 0.05
        bound = priv_mean_sensitivity(lam_hat, b, d, tau)
        assert bound == pytest.approx(math.sqrt(d) * 6.0 * 2.0 * math.log(b * d / tau) / b)


def tracking_batch(batch: SampleBatch):
    """Wrap a batch so every gradient computation logs its global row indices."""
    log = []

    class Tracking(SampleBatch):
        def __init__(self, x, base, idx):
            super().__init__(x, base)
            self.idx = idx

        def __getitem__(self, sl):
            return Tracking(self.x[sl], self.base, self.idx[sl])

        def projected_gradients(self, p_matrix, omega):
            log.append(tuple(self.idx.tolist()))
            return super().projected_gradients(p_matrix, omega)

    return Tracking(batch.x, batch.base, np.arange(len(batch))), log


class TestModifiedDpPca:
    def test_noiseless_matches_run_oja_on_batch_means(self):
        # Every half-batch holds copies of one one-hot vector, so its mean
        # matrix is the rank-one outer product run_oja sees as a single stream
        # element, and every dot product has a single term (bitwise equality
        # regardless of BLAS kernel differences between batch shapes).
        d, b, t_steps = 6, 4, 30
        rng = np.random.default_rng(0)
        w = np.zeros((t_steps, d))
        w[np.arange(t_steps), rng.integers(0, d, size=t_steps)] = rng.uniform(0.5, 2.0, size=t_steps)
        x = np.repeat(w, b, axis=0)
        samples = SampleBatch(x)
        cfg = OracleConfig(B=b, noiseless=True, schedule=LrSchedule.harmonic())
        p = Projector.identity(d)
        got = modified_dp_pca(samples, p, PrivacyBudget(1.0, 0.01), cfg, substream(1, "eq"))
        want = run_oja(SampleBatch(w), p, LrSchedule.harmonic(), substream(1, "eq"))
        assert np.array_equal(got, want)

    def test_noiseless_matches_run_oja_under_projection(self):
        d, b, t_steps = 5, 4, 25
        rng = np.random.default_rng(1)
        w = rng.standard_normal((t_steps, d))
        q = orthonormalize(rng.standard_normal((d, 3)))
        p = Projector(q @ q.T, 3)
        cfg = OracleConfig(B=b, noiseless=True, schedule=LrSchedule.harmonic())
        got = modified_dp_pca(SampleBatch(np.repeat(w, b, axis=0)), p,
                              PrivacyBudget(1.0, 0.01), cfg, substream(2, "eq"))
        want = run_oja(SampleBatch(w), p, LrSchedule.harmonic(), substream(2, "eq"))
        assert np.max(np.abs(got - want)) <= 1e-12

    def test_huge_epsilon_noiseless_spike(self):
        stream = spiked_rank1(d=10, lambda1=5.0, sigma=0.0, seed=3)
        v = sym_eig(stream.params.sigma_matrix).eigenvectors[:, 0]
        cfg = OracleConfig(model=stream.params)
        omega = modified_dp_pca(stream.sample(4000), Projector.identity(10),
                                PrivacyBudget(1e6, 0.01), cfg, substream(3, "mdp"))
        assert principal_sine(omega, v) <= 1e-3

    def test_deflated_projector_finds_second_eigenvector(self):
        stream = spiked_rankk(d=12, k=2, eigenvalues=(6.0, 3.0), sigma=0.01, seed=4)
        pairs = sym_eig(stream.params.sigma_matrix)
        p = Projector(np.eye(12) - np.outer(pairs.eigenvectors[:, 0], pairs.eigenvectors[:, 0]), 11)
        omega = modified_dp_pca(stream.sample(10 ** 5), p, PrivacyBudget(1e6, 0.01),
                                OracleConfig(model=stream.params), substream(4, "mdp"))
        assert principal_sine(omega, pairs.eigenvectors[:, 1]) <= 0.1

    def test_insufficient_samples(self):
        samples = SampleBatch(np.zeros((6, 3)))
        with pytest.raises(InsufficientData):
            modified_dp_pca(samples, Projector.identity(3), PrivacyBudget(1.0, 0.01),
                            OracleConfig(B=4), substream(5, "mdp"))

    def test_output_unit_in_image(self):
        stream = spiked_rankk(d=8, k=2, eigenvalues=(4.0, 2.0), sigma=0.05, seed=6)
        q = orthonormalize(np.random.default_rng(6).standard_normal((8, 5)))
        p = Projector(q @ q.T, 5)
        omega = modified_dp_pca(stream.sample(2000), p, PrivacyBudget(1.0, 0.01),
                                OracleConfig(model=stream.params), substream(6, "mdp"))
        assert abs(np.linalg.norm(omega) - 1.0) <= 1e-10
        assert np.linalg.norm(p.matrix @ omega - omega) <= 1e-8


class TestDpOjas:
    def test_noiseless_matches_run_oja(self):
        stream = spiked_rank1(d=8, lambda1=3.0, sigma=0.1, seed=0)
        samples = stream.sample(500)
        p = Projector.identity(8)
        cfg = OracleConfig(noiseless=True, schedule=LrSchedule.harmonic(), model=stream.params)
        got = dp_ojas(samples, p, PrivacyBudget(1.0, 0.01), cfg, substream(7, "ojas"))
        want = run_oja(samples, p, LrSchedule.harmonic(), substream(7, "ojas"))
        assert np.max(np.abs(got - want)) <= 1e-12

    def test_private_run_converges_on_easy_spike(self):
        sines = []
        for s in range(10):
            stream = spiked_rank1(d=20, lambda1=5.0, sigma=0.01, seed=s)
            v = sym_eig(stream.params.sigma_matrix).eigenvectors[:, 0]
            cfg = OracleConfig(model=stream.params, schedule=LrSchedule.harmonic())
            omega = dp_ojas(stream.sample(10 ** 5), Projector.identity(20),
                            PrivacyBudget(1.0, 0.01), cfg, substream(s, "ojas-mc"))
            sines.append(principal_sine(omega, v))
        assert float(np.median(sines)) <= 0.2

    def test_empty_rejected(self):
        with pytest.raises(InvalidInput):
            dp_ojas(SampleBatch(np.zeros((0, 3))), Projector.identity(3),
                    PrivacyBudget(1.0, 0.01), OracleConfig(), substream(8, "ojas"))


class TestKDpPca:
    def test_exact_oracle_diagonal(self):
        sigma = np.diag([5.0, 3.0, 1.0])
        samples = SampleBatch(np.zeros((10, 3)), base=sigma)
        u = k_dp_pca(samples, 2, PrivacyBudget(1.0, 0.01), OracleConfig(),
                     exact_epca_oracle(sigma), substream(0, "kpca"))
        rep = zeta_utility(u, sigma, 2)
        assert rep.zeta2 <= 1e-10
        assert rep.captured_energy == pytest.approx(8.0, abs=1e-8)

    def test_exact_oracle_random_psd(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            d = int(rng.integers(3, 21))
            k = int(rng.integers(1, min(d, 6)))
            g = rng.standard_normal((d, d))
            sigma = g @ g.T / d
            samples = SampleBatch(np.zeros((2 * k, d)), base=sigma)
            u = k_dp_pca(samples, k, PrivacyBudget(1.0, 0.01), OracleConfig(),
                         exact_epca_oracle(sigma), substream(int(rng.integers(2 ** 31)), "kpca"))
            rep = zeta_utility(u, sigma, k)
            assert rep.zeta2 <= 1e-10
            assert abs(rep.captured_energy - rep.optimal_energy) <= 1e-8

    def test_deflation_monotonicity(self):
        rng = np.random.default_rng(2)
        g = rng.standard_normal((10, 10))
        sigma = g @ g.T / 10
        lam = sym_eig(sigma).eigenvalues
        samples = SampleBatch(np.zeros((10, 10)), base=sigma)
        prev = 0.0
        for k in range(1, 6):
            u = k_dp_pca(samples, k, PrivacyBudget(1.0, 0.01), OracleConfig(),
                         exact_epca_oracle(sigma), substream(2, "kpca"))
            captured = float(np.trace(u.T @ sigma @ u))
            assert captured >= prev - 1e-12
            assert captured - prev >= lam[k - 1] - 1e-8
            prev = captured

    def test_oracle_contract_both_oracles(self):
        rng = np.random.default_rng(3)
        stream = spiked_rankk(d=8, k=2, eigenvalues=(4.0, 2.0), sigma=0.05, seed=3)
        samples = stream.sample(800)
        budget = PrivacyBudget(1.0, 0.01)
        cfg = OracleConfig(model=stream.params)
        for trial in range(100):
            r = int(rng.integers(2, 9))
            q = orthonormalize(rng.standard_normal((8, r)))
            p = Projector(q @ q.T, r)
            oracle = modified_dp_pca if trial % 2 == 0 else dp_ojas
            u = oracle(samples, p, budget, cfg, substream(trial, "contract"))
            assert abs(np.linalg.norm(u) - 1.0) <= 1e-8
            assert np.linalg.norm(p.matrix @ u - u) <= 1e-8

    def test_budget_disjointness(self):
        # Every sample row feeds exactly one (round, step, half) gradient batch.
        stream = spiked_rankk(d=6, k=2, eigenvalues=(4.0, 2.0), sigma=0.05, seed=4)
        n = 2000
        batch, log = tracking_batch(stream.sample(n))
        cfg = OracleConfig(model=stream.params)
        k_dp_pca(batch, 2, PrivacyBudget(1.0, 0.01), cfg, modified_dp_pca, substream(4, "disjoint"))
        seen = set()
        for indices in log:
            assert not (seen & set(indices))
            seen |= set(indices)
        assert seen <= set(range(n))

    def test_orthonormal_output(self):
        stream = spiked_rankk(d=10, k=3, eigenvalues=(6.0, 4.0, 2.0), sigma=0.05, seed=5)
        u = k_dp_pca(stream.sample(3000), 3, PrivacyBudget(1.0, 0.01),
                     OracleConfig(model=stream.params), modified_dp_pca, substream(5, "kpca"))
        assert u.shape == (10, 3)
        assert np.max(np.abs(u.T @ u - np.eye(3))) <= 1e-10

    def test_invalid_k(self):
        samples = SampleBatch(np.zeros((10, 4)), base=np.eye(4))
        with pytest.raises(InvalidInput):
            k_dp_pca(samples, 4, PrivacyBudget(1.0, 0.01), OracleConfig(),
                     exact_epca_oracle(np.eye(4)), substream(6, "kpca"))

    def test_oracle_failure_reports_round(self):
        def bad_oracle(samples, p, budget, cfg, rng):
            raise RangeFailure("no estimate")

        samples = SampleBatch(np.zeros((10, 4)), base=np.eye(4))
        with pytest.raises(RuntimeError, match="round 1"):
            k_dp_pca(samples, 2, PrivacyBudget(1.0, 0.01), OracleConfig(),
                     bad_oracle, substream(7, "kpca"))
