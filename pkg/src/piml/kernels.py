"""Reproducing kernels of the physics-informed penalty.

Two backends:

``closed_form_1d``
    d = 1, s = 1, D = d/dx, omega = [-L, L]. The Green's function of
    lam f - (lam+mu) f'' = delta_x with Neumann ends, i.e. the kernel of the
    norm lam ||f||^2_{H^1(omega)} + mu ||f'||^2_{L^2(omega)}. Defined on omega only.

``spectral``
    Truncated Galerkin kernel of the periodic penalty
    lam ||f||^2_{H^s_per(box)} + mu ||D f||^2_{L^2(omega)} on the box [-2L, 2L]^d,
    K(x, y) = sum_m a_m v_m(x) v_m(y) over the eigenpairs of the truncated O_n.

The two backends describe different (equivalent-norm) RKHSs and do not
coincide pointwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .fourier import DomainSpec, multi_indices, symmetric_frequencies
from .operators import (
    GalerkinSystem,
    MultiIndexOperator,
    RealBasis,
    RegularizationParams,
    assemble_galerkin,
)

BACKENDS = ("closed_form_1d", "spectral")
LOG_SPACE_THRESHOLD = 30.0
PSD_TOL = 1e-8


class KernelDomainError(ValueError):
    pass


class KernelPSDError(ValueError):
    pass


@dataclass(frozen=True)
class KernelConfig:
    op: MultiIndexOperator
    reg: RegularizationParams
    dom: DomainSpec
    backend: str = "closed_form_1d"
    n_max: int | None = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.op.d != self.dom.d:
            raise ValueError("operator and domain dimensions differ")
        if self.backend == "closed_form_1d":
            lo, hi = self.dom.omega[0]
            if not (self.op.is_plain_derivative_1d and np.isclose(lo, -self.dom.L) and np.isclose(hi, self.dom.L)):
                raise ValueError("closed_form_1d requires d=1, s=1, D=d/dx and omega=[-L, L]")

    @classmethod
    def one_d(cls, L: float = 1.0, lam: float = 1.0, mu: float = 1.0, backend: str = "closed_form_1d",
              n_max: int | None = None) -> "KernelConfig":
        """The d/dx setting on omega = [-L, L]."""
        return cls(MultiIndexOperator.derivative(), RegularizationParams(lam, mu),
                   DomainSpec.centered(1, L), backend, n_max)

    @property
    def gamma(self) -> float:
        return self.reg.gamma

    @cached_property
    def system(self) -> GalerkinSystem:
        if self.backend != "spectral":
            raise ValueError("Galerkin system only exists for the spectral backend")
        return assemble_galerkin(self.op, self.reg, self.dom, self.n_max)

    def features(self, x, alpha=None) -> np.ndarray:
        """Real basis functions (or their alpha-derivatives) at x, spectral backend only."""
        return self.system.basis.eval(x, alpha)


def closed_form_kernel(x, y, lam: float, mu: float, L: float) -> np.ndarray:
    """The one-dimensional closed-form kernel on [-L, L]^2, broadcasting over x and y.

    Written as in the derivation, with the (1 - 2 * 1{x > y}) sign term; at
    x == y both branches agree and the x <= y branch is used. For
    gamma * L > 30 the equivalent factored form
    (gamma/lam) cosh(g(min+L)) cosh(g(L-max)) / sinh(2gL) is evaluated in log space.
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    g = np.sqrt(lam / (lam + mu))
    if g * L > LOG_SPACE_THRESHOLD:
        lo, hi = np.minimum(x, y), np.maximum(x, y)
        a, b, c = g * (lo + L), g * (L - hi), 2 * g * L
        log_val = (a + b - c) + np.log1p(np.exp(-2 * a)) + np.log1p(np.exp(-2 * b)) - np.log(2.0) - np.log1p(-np.exp(-2 * c))
        return g / lam * np.exp(log_val)
    s2 = np.sinh(2 * g * L)
    sign = 1.0 - 2.0 * (x > y)
    return g / (2 * lam * s2) * (
        (np.cosh(2 * g * L) + np.cosh(2 * g * x)) * np.cosh(g * (x - y))
        + (sign * s2 - np.sinh(2 * g * x)) * np.sinh(g * (x - y))
    )


def closed_form_kernel_dy(x, y, lam: float, mu: float, L: float) -> np.ndarray:
    """Derivative of the closed-form kernel in its second argument (one-sided at y == x)."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    g = np.sqrt(lam / (lam + mu))
    s2 = np.sinh(2 * g * L)
    sign = 1.0 - 2.0 * (x > y)
    return -(g**2) / (2 * lam * s2) * (
        (np.cosh(2 * g * L) + np.cosh(2 * g * x)) * np.sinh(g * (x - y))
        + (sign * s2 - np.sinh(2 * g * x)) * np.cosh(g * (x - y))
    )


def _as_points(x, d: int) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(-1, d)


def _check_points(cfg: KernelConfig, pts: np.ndarray) -> None:
    if cfg.backend == "closed_form_1d":
        ok = cfg.dom.contains(pts)
        if not np.all(ok):
            bad = pts[~ok][0]
            raise KernelDomainError(
                f"point {bad.tolist()} lies outside omega; the closed form is only valid on [-L, L]"
            )
    else:
        L = cfg.dom.L
        if np.any(np.abs(pts) > 2 * L + 1e-12):
            raise KernelDomainError("points must lie in the box [-2L, 2L]^d")


def kernel_matrix(cfg: KernelConfig, xs, ys) -> np.ndarray:
    """K(x_i, y_j) for point sets xs (n, d) and ys (m, d)."""
    xs, ys = _as_points(xs, cfg.dom.d), _as_points(ys, cfg.dom.d)
    _check_points(cfg, xs)
    _check_points(cfg, ys)
    if cfg.backend == "closed_form_1d":
        return closed_form_kernel(xs[:, 0][:, None], ys[:, 0][None, :], cfg.reg.lam, cfg.reg.mu, cfg.dom.L)
    w = cfg.system.kernel_matrix
    fx = cfg.features(xs)
    fy = fx if ys is xs else cfg.features(ys)
    return fx @ w @ fy.T


def kernel_eval(cfg: KernelConfig, x, y) -> float:
    return float(kernel_matrix(cfg, x, y)[0, 0])


def gram_matrix(cfg: KernelConfig, points, repair: bool = True) -> np.ndarray:
    """Symmetric Gram matrix G[i, j] = K(x_i, x_j).

    With ``repair``, eigenvalues in [-1e-8 * trace, 0) are clipped to zero;
    anything more negative raises KernelPSDError.
    """
    pts = _as_points(points, cfg.dom.d)
    g = kernel_matrix(cfg, pts, pts)
    g = 0.5 * (g + g.T)
    if repair:
        g = repair_psd(g)
    return g


def repair_psd(g: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    vals, vecs = np.linalg.eigh(g)
    floor = -tol * max(np.trace(g), 0.0)
    if vals.min() < floor:
        raise KernelPSDError(f"Gram matrix has eigenvalue {vals.min():.3e} below {floor:.3e}")
    if vals.min() >= 0:
        return g
    vals = np.clip(vals, 0.0, None)
    out = (vecs * vals) @ vecs.T
    return 0.5 * (out + out.T)


def _gauss_nodes(breaks, max_freq: float, order: int = 32):
    """Composite Gauss-Legendre nodes/weights over consecutive breakpoints."""
    t, w = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b - a <= 0:
            continue
        pieces = max(1, int(np.ceil(max_freq * (b - a) / 24.0)))
        edges = np.linspace(a, b, pieces + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            nodes.append(0.5 * (hi - lo) * t + 0.5 * (hi + lo))
            weights.append(0.5 * (hi - lo) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _tensor_grid(per_dim):
    nodes = np.stack(np.meshgrid(*[n for n, _ in per_dim], indexing="ij"), -1).reshape(-1, len(per_dim))
    weights = np.prod(np.stack(np.meshgrid(*[w for _, w in per_dim], indexing="ij"), -1), axis=-1).ravel()
    return nodes, weights


def weak_form_residual(cfg: KernelConfig, x, test_order: int) -> float:
    """Largest residual of the weak equation solved by K(x, .), over Fourier test modes.

    Test functions are the real cosine/sine modes of the box built from the
    first ``test_order`` frequencies. Integrals use composite Gauss
    quadrature with panels split at x and at the edges of omega.

    Spectral backend: the periodic weak form
        lam sum_alpha int_box d^a K(x,.) d^a phi + mu int_omega D K(x,.) D phi = phi(x).
    Closed-form backend: its own defining weak form on omega,
        lam int_omega K(x,.) phi + (lam+mu) int_omega d/dy K(x,.) phi' = phi(x).
    """
    d, L = cfg.dom.d, cfg.dom.L
    x = _as_points(x, d)[0]
    _check_points(cfg, x[None, :])
    test = RealBasis(symmetric_frequencies(max(test_order, 1), d), L)
    test_freq = np.pi / (2 * L) * np.abs(test.freqs).max()
    lam, mu = cfg.reg.lam, cfg.reg.mu
    phi_x = test.eval(x)[0]

    if cfg.backend == "closed_form_1d":
        breaks = np.unique([-L, x[0], L])
        nodes, w = _gauss_nodes(breaks, test_freq + 1.0)
        # evaluate on the side of x that each node lies on
        k = closed_form_kernel(x[0], nodes, lam, mu, L)
        dk = closed_form_kernel_dy(x[0], nodes, lam, mu, L)
        phi = test.eval(nodes)
        dphi = test.eval(nodes, (1,))
        lhs = lam * (w * k) @ phi + (lam + mu) * (w * dk) @ dphi
        return float(np.max(np.abs(lhs - phi_x)))

    sys = cfg.system
    kern_freq = np.pi / (2 * L) * np.abs(sys.basis.freqs).max()
    coeff = sys.kernel_matrix @ sys.basis.eval(x)[0]  # K(x, .) in the real basis
    max_freq = kern_freq + test_freq + 1.0

    box_dims, om_dims = [], []
    for j in range(d):
        lo, hi = cfg.dom.omega[j]
        box_dims.append(_gauss_nodes(np.unique([-2 * L, lo, x[j], hi, 2 * L]), max_freq))
        om_dims.append(_gauss_nodes(np.unique([lo, min(max(x[j], lo), hi), hi]), max_freq))
    box_nodes, box_w = _tensor_grid(box_dims)
    om_nodes, om_w = _tensor_grid(om_dims)

    lhs = np.zeros(len(test))
    for alpha in multi_indices(cfg.op.s, d):
        dk = sys.basis.eval(box_nodes, alpha) @ coeff
        lhs += lam * (box_w * dk) @ test.eval(box_nodes, alpha)
    if mu > 0:
        dk = np.zeros(len(om_nodes))
        dphi = np.zeros((len(om_nodes), len(test)))
        for alpha, p in cfg.op.terms:
            pv = p(om_nodes)
            dk += pv * (sys.basis.eval(om_nodes, alpha) @ coeff)
            dphi += pv[:, None] * test.eval(om_nodes, alpha)
        lhs += mu * (om_w * dk) @ dphi
    return float(np.max(np.abs(lhs - phi_x)))
