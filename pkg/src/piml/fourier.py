"""Fourier representation of periodic Sobolev spaces on the box [-2L, 2L]^d.

Modes are e_k(x) = exp(i * (pi / 2L) * <k, x>) for integer frequencies k.
All L2 inner products are unnormalized integrals (no 1/|domain| factor).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class DomainSpec:
    """Ambient box [-2L, 2L]^d and an axis-aligned observation box omega.

    ``omega`` is a tuple of ``(lo, hi)`` pairs, one per dimension. ``kappa``
    bounds the density of the input law; it defaults to the uniform density
    ``1 / |omega|``.
    """

    d: int
    L: float
    omega: tuple[tuple[float, float], ...]
    kappa: float | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension d must be >= 1, got {self.d}")
        if not self.L > 0:
            raise ValueError(f"L must be > 0, got {self.L}")
        omega = tuple((float(lo), float(hi)) for lo, hi in self.omega)
        if len(omega) != self.d:
            raise ValueError("omega must have one (lo, hi) pair per dimension")
        for lo, hi in omega:
            if not lo < hi:
                raise ValueError(f"empty omega interval ({lo}, {hi})")
            if lo < -2 * self.L - 1e-12 or hi > 2 * self.L + 1e-12:
                raise ValueError("omega must lie inside the box [-2L, 2L]^d")
        object.__setattr__(self, "omega", omega)
        if self.kappa is None:
            object.__setattr__(self, "kappa", 1.0 / self.volume)
        elif not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")

    @classmethod
    def centered(cls, d: int = 1, L: float = 1.0, kappa: float | None = None) -> "DomainSpec":
        """Omega = [-L, L]^d."""
        return cls(d, L, tuple((-L, L) for _ in range(d)), kappa)

    @classmethod
    def full_box(cls, d: int = 1, L: float = 1.0, kappa: float | None = None) -> "DomainSpec":
        """Omega = [-2L, 2L]^d, the setting where constant-coefficient operators are diagonal."""
        return cls(d, L, tuple((-2 * L, 2 * L) for _ in range(d)), kappa)

    @property
    def volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.omega]))

    @property
    def box_volume(self) -> float:
        return (4 * self.L) ** self.d

    @property
    def is_full_box(self) -> bool:
        return all(np.isclose(lo, -2 * self.L) and np.isclose(hi, 2 * self.L) for lo, hi in self.omega)

    def contains(self, x, tol: float = 1e-12) -> np.ndarray:
        """Boolean mask over points; x is reshaped to (-1, d)."""
        x = np.asarray(x, dtype=float).reshape(-1, self.d)
        lo = np.array([a for a, _ in self.omega])
        hi = np.array([b for _, b in self.omega])
        return np.all((x >= lo - tol) & (x <= hi + tol), axis=1)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Uniform draws on omega, shape (n, d)."""
        lo = np.array([a for a, _ in self.omega])
        hi = np.array([b for _, b in self.omega])
        return lo + (hi - lo) * rng.random((n, self.d))


def _level(level: int, d: int) -> list[tuple[int, ...]]:
    # all k in Z^d with |k|_1 == level, sorted lexicographically
    if d == 1:
        return [(-level,), (level,)] if level else [(0,)]
    out = []
    for first in range(-level, level + 1):
        for rest in _level(level - abs(first), d - 1):
            out.append((first,) + rest)
    return out


class _Ordering:
    def __init__(self, d: int):
        self.d = d
        self.items: list[tuple[int, ...]] = []
        self.next_level = 0

    def get(self, j: int) -> tuple[int, ...]:
        while len(self.items) <= j:
            self.items.extend(_level(self.next_level, self.d))
            self.next_level += 1
        return self.items[j]


@lru_cache(maxsize=None)
def _ordering(d: int) -> _Ordering:
    return _Ordering(d)


def index_map(j: int, d: int = 1) -> tuple[int, ...]:
    """Frequency k(j) of the j-th mode.

    Frequencies are listed by increasing ``|k|_1``; ties are broken
    lexicographically. For d=1 this gives 0, -1, 1, -2, 2, ...
    """
    if j < 0:
        raise ValueError(f"index must be >= 0, got {j}")
    return _ordering(d).get(int(j))


def frequencies(n: int, d: int = 1) -> np.ndarray:
    """First ``n`` frequencies of the ordering, shape (n, d)."""
    if n < 1:
        return np.zeros((0, d), dtype=int)
    index_map(n - 1, d)
    return np.array(_ordering(d).items[:n], dtype=int).reshape(n, d)


def symmetric_frequencies(n_max: int, d: int = 1) -> np.ndarray:
    """First ``n_max`` frequencies with unpaired members (k kept but -k cut off) dropped.

    The result is closed under negation, so real-valued functions stay
    representable. Its length is at most ``n_max``.
    """
    ks = frequencies(n_max, d)
    present = {tuple(k) for k in ks}
    keep = [k for k in ks if tuple(-k) in present]
    return np.array(keep, dtype=int).reshape(-1, d)


def multi_indices(s: int, d: int) -> list[tuple[int, ...]]:
    """All alpha in N^d with |alpha| <= s, graded then lexicographic."""
    out = [a for a in itertools.product(range(s + 1), repeat=d) if sum(a) <= s]
    return sorted(out, key=lambda a: (sum(a), a))


def sobolev_weight(k, s: int, L: float) -> np.ndarray | float:
    """Sum over |alpha| <= s of (pi/2L)^(2|alpha|) * prod_j k_j^(2 alpha_j).

    ``k`` may be a single frequency or an array of shape (m, d).
    """
    if s < 0:
        raise ValueError(f"order s must be >= 0, got {s}")
    k = np.asarray(k, dtype=float)
    single = k.ndim <= 1
    k = np.atleast_2d(k) if k.ndim else k.reshape(1, 1)
    scale = np.pi / (2 * L)
    total = np.zeros(k.shape[0])
    for alpha in multi_indices(s, k.shape[1]):
        a = np.array(alpha)
        total += scale ** (2 * a.sum()) * np.prod(k ** (2 * a), axis=1)
    return float(total[0]) if single else total


def mode_eval(k, x, L: float) -> np.ndarray | complex:
    """exp(i * (pi/2L) * <k, x>); ``x`` may be a batch of points of shape (n, d)."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    x = np.asarray(x, dtype=float)
    if x.ndim <= 1 and x.size == k.size:
        return complex(np.exp(1j * np.pi / (2 * L) * np.dot(k, x)))
    x = x.reshape(-1, k.size)
    return np.exp(1j * np.pi / (2 * L) * (x @ k))


def _sinpi(t):
    """sin(pi t), exactly zero at integers and exactly +-1 at half-integers."""
    t = np.asarray(t, dtype=float)
    r = t - 2.0 * np.round(t / 2.0)  # reduce to [-1, 1]
    r = np.where(r > 0.5, 1.0 - r, np.where(r < -0.5, -1.0 - r, r))
    return np.sin(np.pi * r)


def _cispi(t):
    """exp(i pi t) with exact reduction of the argument."""
    return _sinpi(np.asarray(t, dtype=float) + 0.5) + 1j * _sinpi(t)


def exp_moment(m: int, omega, a: float, b: float, L: float | None = None) -> np.ndarray:
    """Integral of x^m exp(i w x) over [a, b], elementwise in ``omega``.

    With ``L`` given, ``omega`` holds integer frequency differences k and
    w = (pi/2L) k; the phases k x / 2L are then reduced exactly, so full
    periods integrate to exactly zero. Without ``L``, ``omega`` is w itself.
    Closed form by the integration-by-parts recursion; exact for w == 0.
    Intended for low polynomial degree m.
    """
    omega = np.asarray(omega, dtype=float)
    out = np.empty(omega.shape, dtype=complex)
    zero = omega == 0
    out[zero] = (b ** (m + 1) - a ** (m + 1)) / (m + 1)
    k = omega[~zero]
    if k.size:
        if L is None:
            w = k
            ea, eb = np.exp(1j * w * a), np.exp(1j * w * b)
        else:
            w = np.pi / (2 * L) * k
            ea, eb = _cispi(k * (a / (2 * L))), _cispi(k * (b / (2 * L)))
        val = (eb - ea) / (1j * w)
        for p in range(1, m + 1):
            val = (b**p * eb - a**p * ea) / (1j * w) - p / (1j * w) * val
        out[~zero] = val
    return out


def mode_inner_omega(k, l, dom: DomainSpec, monomial=None) -> complex:
    """Integral over omega of x^monomial * e_k * conj(e_l).

    ``monomial`` is an optional exponent tuple (defaults to all zeros). The
    result is a product of one-dimensional closed-form integrals.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    l = np.atleast_1d(np.asarray(l, dtype=float))
    if k.size != dom.d or l.size != dom.d:
        raise ValueError("frequency dimension does not match the domain")
    monomial = (0,) * dom.d if monomial is None else monomial
    val = 1.0 + 0j
    for j, (lo, hi) in enumerate(dom.omega):
        val *= exp_moment(monomial[j], np.array([k[j] - l[j]]), lo, hi, dom.L)[0]
    return complex(val)


def mass_matrix_omega(ks: np.ndarray, dom: DomainSpec, monomial=None) -> np.ndarray:
    """Matrix of mode_inner_omega(k_j, k_l) over a frequency list, vectorized."""
    ks = np.asarray(ks, dtype=float).reshape(-1, dom.d)
    monomial = (0,) * dom.d if monomial is None else monomial
    out = np.ones((len(ks), len(ks)), dtype=complex)
    for j, (lo, hi) in enumerate(dom.omega):
        diff = ks[:, j][:, None] - ks[:, j][None, :]
        out *= exp_moment(monomial[j], diff, lo, hi, dom.L)
    return out
