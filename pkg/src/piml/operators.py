"""Linear differential operators and the Galerkin form of the regularized operator.

The bilinear form is

    B[u, v] = lam * sum_{|alpha|<=s} int_box d^alpha u conj(d^alpha v)
              + mu * int_omega D(u) conj(D(v)),

and the regularized operator O_n is its inverse on L2(box). Coefficients of
D are polynomials, so every matrix entry is an analytic integral of
exponentials against monomials.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .fourier import (
    DomainSpec,
    index_map,
    mass_matrix_omega,
    sobolev_weight,
    symmetric_frequencies,
)
from .spectrum import Spectrum

DEFAULT_MEMORY_BUDGET = 2 * 1024**3


class UnsupportedConfiguration(ValueError):
    pass


class GalerkinBudgetError(MemoryError):
    pass


class EigensolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Poly:
    """Real polynomial in d variables, stored as (exponent tuple, coefficient) pairs."""

    terms: tuple[tuple[tuple[int, ...], float], ...]

    @classmethod
    def constant(cls, c: float, d: int) -> "Poly":
        return cls((((0,) * d, float(c)),))

    @classmethod
    def from_dict(cls, mapping: dict) -> "Poly":
        merged = defaultdict(float)
        for e, c in mapping.items():
            merged[tuple(int(v) for v in e)] += float(c)
        return cls(tuple(sorted((e, c) for e, c in merged.items() if c != 0.0)))

    @property
    def d(self) -> int:
        return len(self.terms[0][0]) if self.terms else 0

    @property
    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e, _ in self.terms)

    @property
    def constant_value(self) -> float:
        return sum(c for e, c in self.terms if sum(e) == 0)

    def __mul__(self, other: "Poly") -> "Poly":
        out = defaultdict(float)
        for e1, c1 in self.terms:
            for e2, c2 in other.terms:
                out[tuple(a + b for a, b in zip(e1, e2))] += c1 * c2
        return Poly.from_dict(out)

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        val = np.zeros(x.shape[0])
        for e, c in self.terms:
            val += c * np.prod(x ** np.array(e), axis=1)
        return val

    def sup_bound(self, dom: DomainSpec) -> float:
        """Upper bound of |p| on omega from the triangle inequality."""
        reach = np.array([max(abs(lo), abs(hi)) for lo, hi in dom.omega])
        return float(sum(abs(c) * np.prod(reach ** np.array(e)) for e, c in self.terms))


@dataclass(frozen=True)
class MultiIndexOperator:
    """D(f) = sum_alpha p_alpha * d^alpha f with |alpha| <= s."""

    d: int
    s: int
    terms: tuple[tuple[tuple[int, ...], Poly], ...]

    def __post_init__(self):
        norm = []
        for alpha, coeff in self.terms:
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.d:
                raise ValueError(f"multi-index {alpha} has wrong dimension (d={self.d})")
            if sum(alpha) > self.s or min(alpha) < 0:
                raise ValueError(f"multi-index {alpha} exceeds order s={self.s}")
            if not isinstance(coeff, Poly):
                coeff = Poly.constant(coeff, self.d)
            norm.append((alpha, coeff))
        object.__setattr__(self, "terms", tuple(norm))

    @classmethod
    def derivative(cls, axis: int = 0, d: int = 1, s: int = 1) -> "MultiIndexOperator":
        """The single partial derivative d/dx_axis."""
        alpha = tuple(1 if j == axis else 0 for j in range(d))
        return cls(d, s, ((alpha, Poly.constant(1.0, d)),))

    @property
    def is_constant(self) -> bool:
        return all(p.is_constant for _, p in self.terms)

    @property
    def is_plain_derivative_1d(self) -> bool:
        return (
            self.d == 1
            and self.s == 1
            and len(self.terms) == 1
            and self.terms[0][0] == (1,)
            and self.terms[0][1].is_constant
            and self.terms[0][1].constant_value == 1.0
        )

    def coeff_sup(self, dom: DomainSpec) -> float:
        return max((p.sup_bound(dom) for _, p in self.terms), default=0.0)

    def symbol(self, k, L: float) -> np.ndarray:
        """sum_alpha p_alpha (i pi/2L)^|alpha| prod k^alpha for constant coefficients."""
        if not self.is_constant:
            raise UnsupportedConfiguration(
                "operator symbol needs constant coefficients; use assemble_galerkin"
            )
        k = np.atleast_2d(np.asarray(k, dtype=float))
        out = np.zeros(k.shape[0], dtype=complex)
        for alpha, p in self.terms:
            out += p.constant_value * derivative_factor(k, alpha, L)
        return out


@dataclass(frozen=True)
class RegularizationParams:
    lam: float
    mu: float = 0.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if not self.mu >= 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")

    @property
    def gamma(self) -> float:
        return float(np.sqrt(self.lam / (self.lam + self.mu)))


def derivative_factor(ks, alpha, L: float) -> np.ndarray:
    """(i pi/2L)^|alpha| prod_j k_j^alpha_j, the multiplier of d^alpha on e_k."""
    ks = np.atleast_2d(np.asarray(ks, dtype=float))
    alpha = np.asarray(alpha)
    return (1j * np.pi / (2 * L)) ** int(alpha.sum()) * np.prod(ks**alpha, axis=1)


def spectral_eigenvalue(k, op: MultiIndexOperator, reg: RegularizationParams, L: float) -> float:
    """Eigenvalue of O_n on the mode e_k when omega is the whole box.

    a_k = 1 / (lam * sobolev_weight(k) + mu * |symbol(k)|^2).
    """
    if not op.is_constant:
        raise UnsupportedConfiguration("spectral_eigenvalue needs constant coefficients")
    k = np.atleast_1d(np.asarray(k, dtype=float))
    w = sobolev_weight(k, op.s, L)
    sym = op.symbol(k, L)[0]
    return float(1.0 / (reg.lam * w + reg.mu * abs(sym) ** 2))


class RealBasis:
    """Real cosine/sine basis spanned by a negation-closed frequency set.

    Basis function p is ``sum_j T[j, p] e_{k_j}``: the constant for k = 0,
    then cos(w_k . x) and sin(w_k . x) for each pair {k, -k}.
    """

    def __init__(self, ks: np.ndarray, L: float):
        self.ks = np.asarray(ks, dtype=int)
        self.L = L
        n, d = self.ks.shape
        pos = {tuple(k): j for j, k in enumerate(self.ks)}
        kinds, freqs, cols = [], [], []
        seen = set()
        for j, k in enumerate(self.ks):
            key = tuple(k)
            if key in seen:
                continue
            neg = tuple(-k)
            seen.update((key, neg))
            if not any(key):
                kinds.append(0)
                freqs.append(k)
                col = np.zeros(n, dtype=complex)
                col[j] = 1.0
                cols.append(col)
                continue
            rep = np.array(key if _lex_positive(key) else neg)
            jp, jn = pos[tuple(rep)], pos[tuple(-rep)]
            c = np.zeros(n, dtype=complex)
            c[jp] = c[jn] = 0.5
            sn = np.zeros(n, dtype=complex)
            sn[jp], sn[jn] = -0.5j, 0.5j
            kinds += [1, 2]
            freqs += [rep, rep]
            cols += [c, sn]
        self.kinds = np.array(kinds)  # 0 constant, 1 cosine, 2 sine
        self.freqs = np.array(freqs, dtype=float).reshape(-1, d)
        self.T = np.array(cols).T

    def __len__(self):
        return len(self.kinds)

    def to_real(self, mat: np.ndarray) -> np.ndarray:
        """Matrix of a sesquilinear form in the real basis: T^T mat conj(T)."""
        out = self.T.T @ mat @ self.T.conj()
        return out.real

    def eval(self, x, alpha=None) -> np.ndarray:
        """d^alpha of every basis function at points x, shape (n_points, n_basis)."""
        d = self.freqs.shape[1]
        x = np.asarray(x, dtype=float).reshape(-1, d)
        alpha = np.zeros(d, dtype=int) if alpha is None else np.asarray(alpha, dtype=int)
        w = np.pi / (2 * self.L) * self.freqs
        theta = x @ w.T
        order = int(alpha.sum())
        scale = np.prod(w**alpha, axis=1)
        shift = order * np.pi / 2
        vals = np.where(self.kinds == 2, np.sin(theta + shift), np.cos(theta + shift))
        if order:
            vals = np.where(self.kinds == 0, 0.0, vals)
        return vals * scale


def _lex_positive(k) -> bool:
    for v in k:
        if v:
            return v > 0
    return False


def default_n_max(op: MultiIndexOperator, reg: RegularizationParams, L: float, limit: int = 10**6) -> int:
    """Smallest N with lam * sobolev_weight(k(N)) > 1e6 * (lam + mu)."""
    target = 1e6 * (reg.lam + reg.mu)
    for n in range(1, limit):
        if reg.lam * sobolev_weight(index_map(n, op.d), op.s, L) > target:
            return n
    raise GalerkinBudgetError(f"default truncation exceeds {limit} modes")


@dataclass(frozen=True, eq=False)
class GalerkinSystem:
    """Galerkin matrices of B and of the omega mass form over retained modes.

    ``b_matrix[j, l] = B[e_{k_j}, e_{k_l}]`` and
    ``mass_omega[j, l] = int_omega e_{k_j} conj(e_{k_l})`` with unnormalized
    modes, so the box Gram matrix is ``box_mass * I`` with
    ``box_mass = (4L)^d``.
    """

    op: MultiIndexOperator
    reg: RegularizationParams
    dom: DomainSpec
    frequencies: np.ndarray
    b_matrix: np.ndarray
    mass_omega: np.ndarray
    sobolev_diag: np.ndarray = field(repr=False)

    @property
    def n_modes(self) -> int:
        return len(self.frequencies)

    @property
    def box_mass(self) -> float:
        return self.dom.box_volume

    def normalized_b(self) -> np.ndarray:
        """b_matrix in the L2(box)-orthonormal modes e_k / (4L)^(d/2)."""
        return self.b_matrix / self.box_mass

    @cached_property
    def basis(self) -> RealBasis:
        return RealBasis(self.frequencies, self.dom.L)

    @cached_property
    def b_real(self) -> np.ndarray:
        b = self.basis.to_real(self.b_matrix)
        return 0.5 * (b + b.T)

    @cached_property
    def mass_real(self) -> np.ndarray:
        m = self.basis.to_real(self.mass_omega)
        return 0.5 * (m + m.T)

    @cached_property
    def gram_box_real(self) -> np.ndarray:
        return self.basis.to_real(self.box_mass * np.eye(self.n_modes, dtype=complex))

    @cached_property
    def kernel_eigenpairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenpairs (a_m, V) of the truncated O_n, V orthonormal in L2(box)."""
        spec = truncated_spectrum(self, which="full", keep_vectors=True)
        return spec.eigenvalues, spec.vectors

    @cached_property
    def kernel_matrix(self) -> np.ndarray:
        """W = V diag(a) V^T, so K(x, y) = r(x)^T W r(y) for the real basis r."""
        a, v = self.kernel_eigenpairs
        w = (v * a) @ v.T
        return 0.5 * (w + w.T)


def assemble_galerkin(
    op: MultiIndexOperator,
    reg: RegularizationParams,
    dom: DomainSpec,
    n_max: int | None = None,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> GalerkinSystem:
    """Assemble B and the omega mass matrix on the first ``n_max`` frequencies.

    Unpaired trailing frequencies are dropped so the retained set is closed
    under negation.
    """
    if op.d != dom.d:
        raise ValueError(f"operator dimension {op.d} does not match domain dimension {dom.d}")
    if n_max is None:
        n_max = default_n_max(op, reg, dom.L)
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    # complex b, mass, per-monomial scratch and the real copies
    need = 6 * 16 * n_max**2
    if need > memory_budget:
        raise GalerkinBudgetError(
            f"n_max={n_max} needs about {need / 2**20:.0f} MiB, budget is {memory_budget / 2**20:.0f} MiB"
        )
    ks = symmetric_frequencies(n_max, op.d)
    L = dom.L
    sob = sobolev_weight(ks, op.s, L)
    mass = mass_matrix_omega(ks, dom)
    b = np.diag(reg.lam * dom.box_volume * sob).astype(complex)
    if reg.mu > 0 and op.terms:
        facs = {alpha: derivative_factor(ks, alpha, L) for alpha, _ in op.terms}
        if op.is_constant:
            sym = sum(p.constant_value * facs[alpha] for alpha, p in op.terms)
            b += reg.mu * np.outer(sym, sym.conj()) * mass
        else:
            # group the double sum over (alpha, beta) by monomials of p_alpha * p_beta
            weights = defaultdict(lambda: np.zeros((len(ks), len(ks)), dtype=complex))
            for a1, p1 in op.terms:
                for a2, p2 in op.terms:
                    outer = np.outer(facs[a1], facs[a2].conj())
                    for mono, c in (p1 * p2).terms:
                        weights[mono] += c * outer
            for mono, wmat in weights.items():
                b += reg.mu * wmat * mass_matrix_omega(ks, dom, mono)
    b = 0.5 * (b + b.conj().T)
    return GalerkinSystem(op, reg, dom, ks, b, mass, sob)


def truncated_spectrum(
    sys: GalerkinSystem,
    which: str = "restricted",
    keep_vectors: bool = False,
    rtol: float = 1e-12,
) -> Spectrum:
    """Eigenvalues of the truncated C O_n C (``which="restricted"``) or O_n (``"full"``).

    Solves the generalized problem B v = a^{-1} M v in the real basis with
    M the omega mass matrix (restricted) or the box Gram matrix (full).
    Near-null eigenvalues of the restricted problem (functions living
    outside omega) below ``rtol * max`` are dropped.
    """
    if which not in ("restricted", "full"):
        raise ValueError(f"unknown operator {which!r}")
    b = sys.b_real
    m = sys.mass_real if which == "restricted" else sys.gram_box_real
    try:
        if which == "full":
            inv, vecs = sla.eigh(b, m)
            a = 1.0 / inv
        else:
            a, vecs = sla.eigh(m, b)
            # normalize eigenvectors in the omega mass instead of B
            norms = np.sqrt(np.abs(np.einsum("ij,ij->j", vecs, m @ vecs)))
            vecs = vecs / np.where(norms > 0, norms, 1.0)
    except (np.linalg.LinAlgError, ValueError) as exc:
        cond = np.linalg.cond(b)
        raise EigensolverError(f"eigensolver failed (cond(B) ~ {cond:.3e}): {exc}") from exc
    order = np.argsort(a)[::-1]
    a, vecs = a[order], vecs[:, order]
    keep = a > rtol * a[0]
    a, vecs = a[keep], vecs[:, keep]
    params = dict(lam=sys.reg.lam, mu=sys.reg.mu, L=sys.dom.L, s=sys.op.s, d=sys.op.d)
    return Spectrum(a, ("galerkin",) * len(a), params, vecs if keep_vectors else None)


def diagonal_spectrum(op: MultiIndexOperator, reg: RegularizationParams, L: float, n_max: int) -> Spectrum:
    """Closed-form spectrum on the whole box: spectral_eigenvalue over retained frequencies, sorted."""
    ks = symmetric_frequencies(n_max, op.d)
    a = 1.0 / (reg.lam * sobolev_weight(ks, op.s, L) + reg.mu * np.abs(op.symbol(ks, L)) ** 2)
    a = np.sort(a)[::-1]
    params = dict(lam=reg.lam, mu=reg.mu, L=L, s=op.s, d=op.d)
    return Spectrum(a, ("closed_form",) * len(a), params)
