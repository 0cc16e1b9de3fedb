"""Exact positive spectrum of C O_n C for d = 1, s = 1, D = d/dx, omega = [-L, L].

Eigenfunctions are symmetric or antisymmetric. Inside omega they solve
lam*w - (lam+mu)*w'' = a^{-1} w, so w is cos(xi x) or sin(xi x) with

    a^{-1} = lam + (lam + mu) * xi^2.

Outside omega (the rest of the periodic box) w - w'' = 0, so w is a cosh or
sinh centred at the far point 2L. Matching values at +-L and the flux jump
(lam+mu) w'(inside) = lam w'(outside) quantizes xi:

    symmetric:      xi L tan(xi L)   =  L lam/(lam+mu) tanh(L)
    antisymmetric:  tan(xi L)/(xi L) = -(1 + mu/lam) tanh(L)/L

Each equation has exactly one root per interval ((k-1/2)pi/L, (k+1/2)pi/L);
the antisymmetric one has no root for k = 0 because tan(x)/x >= 1 there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import RegularizationParams
from .spectrum import Spectrum

POLE_GAP = 1e-9


class BracketViolation(RuntimeError):
    pass


def _bisect(func, lo: np.ndarray, hi: np.ndarray, xtol: float) -> np.ndarray:
    """Vectorized bisection; ``func(lo) < 0 < func(hi)`` is assumed elementwise."""
    lo, hi = lo.astype(float).copy(), hi.astype(float).copy()
    n_iter = int(np.ceil(np.log2(max(np.max(hi - lo), xtol) / xtol))) + 2
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        neg = func(mid) < 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    return 0.5 * (lo + hi)


def symmetric_rhs(reg: RegularizationParams, L: float) -> float:
    return L * reg.lam / (reg.lam + reg.mu) * np.tanh(L)


def antisymmetric_rhs(reg: RegularizationParams, L: float) -> float:
    return -(1.0 + reg.mu / reg.lam) * np.tanh(L) / L


def quantization_roots_symmetric(reg: RegularizationParams, L: float, count: int) -> np.ndarray:
    """Roots xi of xi L tan(xi L) = L lam/(lam+mu) tanh(L), one per k = 0..count-1."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    c = symmetric_rhs(reg, L)
    k = np.arange(count)
    if c == 0.0:
        return k * np.pi / L
    lo = np.where(k == 0, 0.0, (k - 0.5) * np.pi + POLE_GAP)
    hi = (k + 0.5) * np.pi - POLE_GAP

    def f(x):
        return x * np.tan(x) - c

    # d/dx (x tan x) = (x + sin x cos x) / cos^2 x > 0: one crossing per branch
    x = _bisect(f, lo, hi, 1e-12 * np.pi)
    return x / L


def quantization_roots_antisymmetric(reg: RegularizationParams, L: float, count: int) -> np.ndarray:
    """Roots xi of tan(xi L)/(xi L) = -(1 + mu/lam) tanh(L)/L, one per k = 1..count."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    c = antisymmetric_rhs(reg, L)
    k = np.arange(1, count + 1)
    lo = (k - 0.5) * np.pi + POLE_GAP
    hi = (k + 0.5) * np.pi - POLE_GAP

    def f(x):
        return np.tan(x) / x - c

    x = _bisect(f, lo, hi, 1e-12 * np.pi)
    return x / L


def eigenvalue_from_root(xi, reg: RegularizationParams) -> np.ndarray:
    return 1.0 / (reg.lam + (reg.lam + reg.mu) * np.asarray(xi) ** 2)


def eigenvalue_brackets(m, reg: RegularizationParams, L: float) -> tuple[np.ndarray, np.ndarray]:
    """Analytic lower/upper bounds on a_m, valid for m >= 3."""
    m = np.asarray(m, dtype=float)
    t = reg.lam + reg.mu
    lower = 4 * L**2 / (t * (m + 4) ** 2 * np.pi**2)
    upper = 4 * L**2 / (t * (m - 2) ** 2 * np.pi**2)
    return lower, upper


def exact_spectrum_1d(reg: RegularizationParams, L: float, count: int, validate: bool = True) -> Spectrum:
    """Leading ``count`` eigenvalues of C O_n C, non-increasing, indexed from m = 0.

    Raises BracketViolation if any a_m with m >= 3 leaves its bracket.
    """
    if count < 6:
        raise ValueError(f"count must be >= 6, got {count}")
    sym = quantization_roots_symmetric(reg, L, count)
    anti = quantization_roots_antisymmetric(reg, L, count)
    xi = np.concatenate([sym, anti])
    labels = [f"symmetric:{k}" for k in range(count)] + [f"antisymmetric:{k}" for k in range(1, count + 1)]
    order = np.argsort(xi, kind="stable")[:count]
    a = eigenvalue_from_root(xi[order], reg)
    prov = tuple(labels[i] for i in order)
    if validate and count > 3:
        m = np.arange(3, count)
        lower, upper = eigenvalue_brackets(m, reg, L)
        bad = np.nonzero((a[3:] < lower) | (a[3:] > upper))[0]
        if bad.size:
            j = int(m[bad[0]])
            raise BracketViolation(f"a_{j} = {a[j]:.6e} outside [{lower[bad[0]]:.6e}, {upper[bad[0]]:.6e}]")
    return Spectrum(a, prov, dict(lam=reg.lam, mu=reg.mu, L=L, s=1, d=1))


@dataclass(frozen=True)
class EigenFunction1D:
    """Piecewise eigenfunction: trigonometric inside [-L, L], hyperbolic outside.

    Symmetric:      cos(xi x) inside, ``outer * cosh(|x| - 2L)`` outside.
    Antisymmetric:  sin(xi x) inside, ``outer * sinh(x -+ 2L)`` outside.
    """

    parity: str
    xi: float
    outer: float
    L: float

    @classmethod
    def from_root(cls, parity: str, xi: float, L: float) -> "EigenFunction1D":
        if parity == "symmetric":
            outer = np.cos(xi * L) / np.cosh(L)
        elif parity == "antisymmetric":
            # continuity at x = L: outer * sinh(-L) = sin(xi L)
            outer = -np.sin(xi * L) / np.sinh(L)
        else:
            raise ValueError(f"unknown parity {parity!r}")
        return cls(parity, float(xi), float(outer), float(L))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        L, xi = self.L, self.xi
        inside = np.abs(x) <= L
        shift = np.where(x >= 0, x - 2 * L, x + 2 * L)
        if self.parity == "symmetric":
            return np.where(inside, np.cos(xi * x), self.outer * np.cosh(shift))
        return np.where(inside, np.sin(xi * x), self.outer * np.sinh(shift))

    def one_sided(self, x0: float, side: str) -> tuple[float, float]:
        """(value, derivative) at x0 from the inside (``"in"``) or outside (``"out"``) branch."""
        L, xi = self.L, self.xi
        if side == "in":
            if self.parity == "symmetric":
                return np.cos(xi * x0), -xi * np.sin(xi * x0)
            return np.sin(xi * x0), xi * np.cos(xi * x0)
        shift = x0 - 2 * L if x0 > 0 else x0 + 2 * L
        if self.parity == "symmetric":
            return self.outer * np.cosh(shift), self.outer * np.sinh(shift)
        return self.outer * np.sinh(shift), self.outer * np.cosh(shift)


def boundary_matching_check(w: EigenFunction1D, reg: RegularizationParams, L: float | None = None) -> float:
    """Largest violation of continuity and of the flux jump at x = -L and x = L.

    The flux condition is (lam+mu) w'(inside) = lam w'(outside).
    """
    L = w.L if L is None else L
    worst = 0.0
    for x0 in (-L, L):
        v_in, d_in = w.one_sided(x0, "in")
        v_out, d_out = w.one_sided(x0, "out")
        worst = max(worst, abs(v_in - v_out), abs((reg.lam + reg.mu) * d_in - reg.lam * d_out))
    return float(worst)


def eigenfunctions(reg: RegularizationParams, L: float, spectrum: Spectrum) -> list[EigenFunction1D]:
    """Eigenfunction descriptors matching the provenance of an exact spectrum."""
    count = len(spectrum)
    sym = quantization_roots_symmetric(reg, L, count)
    anti = quantization_roots_antisymmetric(reg, L, count)
    out = []
    for label in spectrum.provenance:
        parity, k = label.split(":")
        k = int(k)
        xi = sym[k] if parity == "symmetric" else anti[k - 1]
        out.append(EigenFunction1D.from_root(parity, xi, L))
    return out
