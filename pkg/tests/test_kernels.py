import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fd_green
from piml.fourier import DomainSpec
from piml.kernels import (
    KernelConfig,
    KernelDomainError,
    KernelPSDError,
    _gauss_nodes,
    closed_form_kernel,
    gram_matrix,
    kernel_eval,
    kernel_matrix,
    repair_psd,
    weak_form_residual,
)
from piml.operators import MultiIndexOperator, Poly, RegularizationParams

CLOSED = KernelConfig.one_d(1.0, 1.0, 1.0)


def factored(x, y, lam, mu, L):
    g = np.sqrt(lam / (lam + mu))
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    return g * np.cosh(g * (lo + L)) * np.cosh(g * (L - hi)) / (lam * np.sinh(2 * g * L))


class TestClosedForm:
    def test_origin_value(self):
        g = np.sqrt(0.5)
        expect = g * (np.cosh(2 * g) + 1) / (2 * np.sinh(2 * g))
        assert kernel_eval(CLOSED, 0.0, 0.0) == pytest.approx(expect, rel=1e-14)
        assert expect == pytest.approx(0.5807, abs=1e-4)

    @pytest.mark.parametrize("lam, mu, L", [(1.0, 1.0, 1.0), (0.01, 0.1, 1.0), (2.0, 0.0, 0.5)])
    def test_finite_difference_oracle(self, lam, mu, L):
        for x0 in np.linspace(-L, L, 7):
            grid, f = fd_green(x0, lam, mu, L)
            assert np.max(np.abs(f - closed_form_kernel(x0, grid, lam, mu, L))) < 1e-3

    @given(st.floats(1e-3, 10), st.floats(0, 10), st.floats(0.1, 3))
    def test_matches_factored_form(self, lam, mu, L):
        x = np.linspace(-L, L, 9)
        k = closed_form_kernel(x[:, None], x[None, :], lam, mu, L)
        assert np.allclose(k, factored(x[:, None], x[None, :], lam, mu, L), rtol=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        x, y = rng.uniform(-1, 1, (2, 1000))
        for lam, mu in [(1.0, 1.0), (1e-3, 1.0), (5.0, 0.1)]:
            assert np.allclose(closed_form_kernel(x, y, lam, mu, 1.0), closed_form_kernel(y, x, lam, mu, 1.0),
                               rtol=0, atol=1e-12)

    def test_diagonal_bound(self):
        x = np.linspace(-1, 1, 201)
        assert np.all(closed_form_kernel(x, x, 1.0, 1.0, 1.0) <= 1.0)

    @given(st.floats(1e-3, 10), st.floats(0, 10), st.floats(0.1, 3))
    def test_diagonal_at_the_ends(self, lam, mu, L):
        # K(L, L) = gamma coth(2 gamma L) / lam, which exceeds 1/lam when gamma is near 1
        g = np.sqrt(lam / (lam + mu))
        assert closed_form_kernel(L, L, lam, mu, L) == pytest.approx(g / (lam * np.tanh(2 * g * L)), rel=1e-10)

    def test_log_space_branch(self):
        # gamma * L just above the threshold: both forms are representable
        lam, mu, L = 1.0, 0.0, 31.0
        x = np.linspace(-L, L, 11)
        k = closed_form_kernel(x[:, None], x[None, :], lam, mu, L)
        assert np.allclose(k, factored(x[:, None], x[None, :], lam, mu, L), rtol=1e-12)

    def test_log_space_no_overflow(self):
        k = closed_form_kernel(np.array([-500.0, 0.0, 499.0]), 0.0, 1.0, 0.0, 500.0)
        assert np.all(np.isfinite(k))
        assert k[1] == pytest.approx(0.5, rel=1e-12)

    def test_outside_omega_rejected(self):
        with pytest.raises(KernelDomainError):
            kernel_eval(CLOSED, 1.5, 0.0)

    def test_config_validation(self):
        op = MultiIndexOperator(1, 1, (((1,), Poly.from_dict({(1,): 1.0})),))
        with pytest.raises(ValueError):
            KernelConfig(op, RegularizationParams(1, 1), DomainSpec.centered(1, 1.0))
        with pytest.raises(ValueError):
            KernelConfig.one_d(backend="nope")
        assert 0 < KernelConfig.one_d(1, 0.3, 5.0).gamma <= 1


class TestSpectral:
    def test_symmetry_and_bound(self, spectral_unit):
        rng = np.random.default_rng(1)
        x = rng.uniform(-2, 2, 200)
        k = kernel_matrix(spectral_unit, x, x)
        assert np.abs(k - k.T).max() < 1e-12
        assert np.all(np.diag(k) <= 1 / spectral_unit.reg.lam)

    def test_truncation_convergence(self, spectral_unit):
        coarse = KernelConfig.one_d(1.0, 1.0, 1.0, "spectral", 256)
        x = np.linspace(-1, 1, 9)
        assert np.abs(kernel_matrix(coarse, x, x) - kernel_matrix(spectral_unit, x, x)).max() < 5e-3

    def test_reproducing_property(self, spectral_unit):
        sys = spectral_unit.system
        rng = np.random.default_rng(2)
        theta = rng.normal(size=len(sys.basis)) / (1 + np.arange(len(sys.basis)))
        x = rng.uniform(-2, 2, 25)
        f = spectral_unit.features(x) @ theta
        # coefficients of K(x, .) are W r(x); the RKHS inner product is the B form
        inner = theta @ sys.b_real @ (sys.kernel_matrix @ spectral_unit.features(x).T)
        assert np.allclose(inner, f, rtol=1e-8, atol=1e-8 * np.abs(f).max())

    def test_rkhs_norm_identity(self):
        cfg = KernelConfig.one_d(1.0, 0.3, 2.0, "spectral", 64)
        sys = cfg.system
        rng = np.random.default_rng(4)
        theta = rng.normal(size=len(sys.basis))
        box, wb = _gauss_nodes(np.array([-2.0, -1.0, 1.0, 2.0]), 60.0)
        om, wo = _gauss_nodes(np.array([-1.0, 1.0]), 60.0)
        f = cfg.features(box) @ theta
        df = cfg.features(box, (1,)) @ theta
        dfo = cfg.features(om, (1,)) @ theta
        direct = 0.3 * (wb @ f**2 + wb @ df**2) + 2.0 * (wo @ dfo**2)
        assert theta @ sys.b_real @ theta == pytest.approx(direct, rel=1e-8)

    def test_outside_box_rejected(self, spectral_unit):
        with pytest.raises(KernelDomainError):
            kernel_eval(spectral_unit, 2.5, 0.0)

    def test_two_dimensional(self):
        op = MultiIndexOperator.derivative(axis=0, d=2, s=2)
        cfg = KernelConfig(op, RegularizationParams(1.0, 1.0), DomainSpec.centered(2, 1.0), "spectral", 200)
        pts = np.random.default_rng(5).uniform(-1, 1, (30, 2))
        g = gram_matrix(cfg, pts)
        assert np.allclose(g, g.T) and np.linalg.eigvalsh(g).min() > -1e-10


class TestGram:
    def test_single_point(self):
        g = gram_matrix(CLOSED, [0.2])
        assert g.shape == (1, 1) and g[0, 0] == pytest.approx(kernel_eval(CLOSED, 0.2, 0.2))

    def test_duplicates(self):
        raw = gram_matrix(CLOSED, [0.1, -0.4, 0.1], repair=False)
        assert np.array_equal(raw[0], raw[2])
        # clipping the roundoff-level null eigenvalue perturbs entries at machine precision
        g = gram_matrix(CLOSED, [0.1, -0.4, 0.1])
        assert np.allclose(g[0], g[2], rtol=0, atol=1e-14)

    def test_psd_50_points(self):
        x = np.random.default_rng(0).uniform(-1, 1, 50)
        assert np.linalg.eigvalsh(gram_matrix(CLOSED, x)).min() >= -1e-8

    def test_repair(self):
        g = np.diag([1.0, 1.0, -1e-10])
        assert np.linalg.eigvalsh(repair_psd(g)).min() >= 0
        with pytest.raises(KernelPSDError):
            repair_psd(np.diag([1.0, 1.0, -1e-3]))


class TestWeakForm:
    @pytest.mark.parametrize("lam, mu", [(1.0, 1.0), (0.01, 0.1)])
    def test_closed_form(self, lam, mu):
        cfg = KernelConfig.one_d(1.0, lam, mu)
        assert weak_form_residual(cfg, 0.3, 10) < 1e-6

    def test_spectral_sweep(self):
        residuals = [weak_form_residual(KernelConfig.one_d(1.0, 1.0, 1.0, "spectral", n), 0.3, 10)
                     for n in (64, 128, 256)]
        assert max(residuals) < 1e-9
        # non-increasing up to roundoff
        assert all(b <= a + 1e-10 for a, b in zip(residuals, residuals[1:]))

    @pytest.mark.parametrize("backend", ["closed_form_1d", "spectral"])
    def test_constant_test_function(self, backend):
        cfg = KernelConfig.one_d(1.0, 0.4, 2.0, backend, 256)
        L = cfg.dom.L
        lo = -L if backend == "closed_form_1d" else -2 * L
        nodes, w = _gauss_nodes(np.array([lo, 0.3, -lo]), 300.0)
        assert cfg.reg.lam * (w @ kernel_matrix(cfg, [0.3], nodes)[0]) == pytest.approx(1.0, abs=1e-9)

    @settings(max_examples=10, deadline=None)
    @given(st.floats(-1, 1))
    def test_closed_form_any_point(self, x):
        assert weak_form_residual(CLOSED, x, 6) < 1e-6
