import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from piml.fourier import (
    DomainSpec,
    exp_moment,
    frequencies,
    index_map,
    mass_matrix_omega,
    mode_eval,
    mode_inner_omega,
    multi_indices,
    sobolev_weight,
    symmetric_frequencies,
)


def brute_order(n, d, radius=12):
    """All of Z^d in a cube, sorted by (l1 norm, lexicographic)."""
    pts = itertools.product(range(-radius, radius + 1), repeat=d)
    return sorted(pts, key=lambda k: (sum(abs(v) for v in k), k))[:n]


class TestIndexMap:
    def test_first_1d(self):
        assert [index_map(j)[0] for j in range(5)] == [0, -1, 1, -2, 2]

    def test_first_level_2d(self):
        assert [index_map(j, 2) for j in range(1, 5)] == [(-1, 0), (0, -1), (0, 1), (1, 0)]

    def test_j100(self):
        assert index_map(100) == (50,)
        assert brute_order(101, 1, radius=60)[100] == (50,)

    @pytest.mark.parametrize("d, radius", [(1, 200), (2, 15), (3, 8)])
    def test_matches_brute_force(self, d, radius):
        # the cube holds every l1 level up to ``radius``, enough for 300 entries
        n = 300
        assert [index_map(j, d) for j in range(n)] == brute_order(n, d, radius)

    def test_injective_and_monotone(self):
        ks = frequencies(10_001, 2)
        assert len({tuple(k) for k in ks}) == len(ks)
        assert np.all(np.diff(np.abs(ks).sum(axis=1)) >= 0)

    def test_deterministic(self):
        assert np.array_equal(frequencies(500, 3), frequencies(500, 3))

    def test_symmetric_set_closed_under_negation(self):
        for d, n in [(1, 10), (2, 50), (3, 100)]:
            ks = symmetric_frequencies(n, d)
            keys = {tuple(k) for k in ks}
            assert all(tuple(-k) in keys for k in ks)
            assert len(ks) <= n


class TestSobolevWeight:
    def test_examples(self):
        assert sobolev_weight([3], 1, np.pi / 2) == pytest.approx(10.0)
        for d, s in [(1, 0), (2, 3), (3, 2)]:
            assert sobolev_weight([0] * d, s, 0.7) == 1.0

    def test_2d_bruteforce(self):
        alphas = [a for a in itertools.product(range(3), repeat=2) if sum(a) <= 2]
        assert len(alphas) == 6
        k = (1, 2)
        expect = sum(np.prod([kj ** (2 * aj) for kj, aj in zip(k, a)]) for a in alphas)
        assert sobolev_weight(k, 2, np.pi / 2) == pytest.approx(expect)

    def test_multi_indices_count(self):
        from math import comb

        for s, d in [(0, 1), (1, 1), (2, 2), (3, 3)]:
            assert len(multi_indices(s, d)) == comb(s + d, d)

    def test_growth(self):
        L = 1.3
        k = np.arange(100, 400)[:, None]
        ratio = sobolev_weight(k, 1, L) / k[:, 0] ** 2
        assert np.allclose(ratio, (np.pi / (2 * L)) ** 2, rtol=0.01)

    @given(st.lists(st.integers(-50, 50), min_size=1, max_size=3), st.integers(0, 3))
    def test_at_least_one(self, k, s):
        assert sobolev_weight(k, s, 1.0) >= 1.0


class TestModes:
    def test_examples(self):
        assert mode_eval([0], [0.37], 1.0) == 1
        assert mode_eval([1], [np.pi / 2], np.pi / 2) == pytest.approx(1j)

    @given(st.lists(st.integers(-20, 20), min_size=2, max_size=2),
           st.lists(st.floats(-2, 2), min_size=2, max_size=2))
    def test_conjugate_symmetry_and_modulus(self, k, x):
        v = mode_eval(k, x, 1.0)
        assert abs(abs(v) - 1) < 1e-14
        assert mode_eval([-kj for kj in k], x, 1.0) == pytest.approx(np.conj(v), abs=1e-14)

    def test_batch(self):
        x = np.linspace(-2, 2, 7)
        assert np.allclose(mode_eval([2], x[:, None], 1.0), np.exp(1j * np.pi / 2 * 2 * x))


def quad_inner(k, l, lo, hi, L, m=0):
    w = np.pi / (2 * L) * (k - l)
    re = quad(lambda x: x**m * np.cos(w * x), lo, hi, limit=400, epsabs=0, epsrel=1e-13)[0]
    im = quad(lambda x: x**m * np.sin(w * x), lo, hi, limit=400, epsabs=0, epsrel=1e-13)[0]
    return re + 1j * im


class TestInnerOmega:
    def test_diagonal_is_volume(self):
        assert mode_inner_omega([3], [3], DomainSpec.centered(1, 0.8)) == pytest.approx(1.6)
        dom = DomainSpec.centered(2, 1.0)
        assert mode_inner_omega([1, -2], [1, -2], dom) == pytest.approx(4.0)

    def test_example(self):
        dom = DomainSpec(1, np.pi / 2, ((-np.pi / 2, np.pi / 2),))
        assert mode_inner_omega([1], [0], dom) == pytest.approx(2.0, abs=1e-15)

    @pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
    @settings(max_examples=100, deadline=None)
    @given(st.integers(-40, 40), st.integers(-40, 40), st.floats(0.2, 3.0),
           st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.integers(0, 3))
    def test_against_quadrature(self, k, l, L, u, v, m):
        lo, hi = sorted((-L + 2 * L * u, -L + 2 * L * v))
        if hi - lo < 1e-3:
            hi = lo + 1e-3
        dom = DomainSpec(1, L, ((lo, hi),))
        got = mode_inner_omega([k], [l], dom, (m,))
        want = quad_inner(k, l, lo, hi, L, m)
        assert abs(got - want) <= 1e-10 * max(abs(want), (hi - lo) ** (m + 1) * 1e-3, 1e-12)

    @given(st.lists(st.integers(-9, 9), min_size=2, max_size=2),
           st.lists(st.integers(-9, 9), min_size=2, max_size=2))
    def test_hermitian(self, k, l):
        dom = DomainSpec(2, 1.0, ((-0.7, 1.0), (-1.0, 0.2)))
        assert mode_inner_omega(k, l, dom) == pytest.approx(np.conj(mode_inner_omega(l, k, dom)), abs=1e-14)

    def test_full_box_orthogonality_is_exact(self):
        dom = DomainSpec.full_box(1, 1.0)
        m = mass_matrix_omega(symmetric_frequencies(257, 1), dom)
        off = m - np.diag(np.diag(m))
        assert np.all(off == 0)
        assert np.allclose(np.diag(m), 4.0)

    def test_mass_matrix_psd(self):
        dom = DomainSpec(2, 1.0, ((-1.0, 0.5), (-0.3, 1.0)))
        m = mass_matrix_omega(symmetric_frequencies(60, 2), dom)
        assert np.allclose(m, m.conj().T)
        assert np.linalg.eigvalsh(m).min() > -1e-12

    def test_exp_moment_zero_frequency(self):
        assert exp_moment(2, [0.0], -1.0, 2.0)[0] == pytest.approx(3.0)


class TestDomainSpec:
    def test_defaults(self):
        dom = DomainSpec.centered(1, 2.0)
        assert dom.kappa == pytest.approx(0.25)
        assert dom.volume == 4.0 and dom.box_volume == 8.0

    @pytest.mark.parametrize("bad", [
        dict(d=1, L=0.0, omega=((-1, 1),)),
        dict(d=1, L=1.0, omega=((-3, 1),)),
        dict(d=1, L=1.0, omega=((0.5, 0.2),)),
        dict(d=2, L=1.0, omega=((-1, 1),)),
        dict(d=1, L=1.0, omega=((-1, 1),), kappa=-1.0),
    ])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            DomainSpec(**bad)

    def test_contains_flat_input(self):
        dom = DomainSpec.centered(1, 1.0)
        assert dom.contains([0.0, 1.0, 1.5]).tolist() == [True, True, False]
