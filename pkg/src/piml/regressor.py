"""Kernel ridge form of the physics-informed estimator.

The estimator minimizes

    (1/n) sum_i |f(X_i) - Y_i|^2 + lam ||f||^2_{H^s} + mu ||D f||^2_{L2(omega)},

whose penalty is the squared RKHS norm of the kernel K. By the representer
theorem f = sum_i c_i K(X_i, .), and the objective becomes
(1/n) ||G c - Y||^2 + c^T G c, minimized by (G + n I) c = Y.

The low-rank solver expands f in a finite real basis r instead,
f = r^T theta, and solves (Phi^T Phi / n + S) theta = Phi^T Y / n with S the
penalty matrix in that basis. For the spectral backend S is the Galerkin
matrix of B and both solvers give the same function. For the closed-form
backend the basis is the Neumann cosine family on omega, in which the
penalty lam ||f||^2 + (lam+mu) ||f'||^2 is diagonal; truncation then makes
the low-rank fit an approximation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .fourier import DomainSpec
from .io import atomic_write_text
from .kernels import KernelConfig, KernelPSDError, gram_matrix, kernel_matrix, repair_psd
from .operators import MultiIndexOperator, Poly, RegularizationParams

LOWRANK_THRESHOLD = 3000
DEFAULT_COSINE_MODES = 512


class FitError(RuntimeError):
    """Factorization failed; ``min_eigenvalue`` is the most negative Gram eigenvalue."""

    def __init__(self, message: str, min_eigenvalue: float):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


@dataclass(frozen=True, eq=False)
class Dataset:
    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        ys = np.asarray(self.ys, dtype=float).ravel()
        xs = np.asarray(self.xs, dtype=float)
        xs = xs.reshape(len(ys), -1) if xs.size else xs.reshape(0, 1)
        if len(ys) < 1:
            raise ValueError("dataset needs at least one sample")
        if len(xs) != len(ys):
            raise ValueError(f"{len(xs)} inputs but {len(ys)} targets")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise ValueError("dataset contains non-finite values")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __len__(self):
        return len(self.ys)

    def check_domain(self, dom: DomainSpec) -> None:
        if self.xs.shape[1] != dom.d:
            raise ValueError(f"inputs have dimension {self.xs.shape[1]}, domain has {dom.d}")
        inside = dom.contains(self.xs)
        if not np.all(inside):
            raise ValueError(f"training point {self.xs[~inside][0].tolist()} lies outside omega")


@dataclass(frozen=True)
class FitDiagnostics:
    solver: str
    residual: float
    condition_bound: float
    n_modes: int | None = None


@dataclass(frozen=True, eq=False)
class KernelModel:
    """Fitted estimator f(x) = sum_i c_i K(X_i, x).

    Low-rank fits also carry ``theta`` (coefficients in ``basis``) and
    predict through it, which is the same function for the spectral backend.
    """

    cfg: KernelConfig
    xs: np.ndarray
    dual_coeffs: np.ndarray
    diagnostics: FitDiagnostics
    theta: np.ndarray | None = field(default=None, repr=False)
    basis: "CosineBasis | None" = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.dual_coeffs)


class CosineBasis:
    """L2(omega)-orthonormal Neumann cosines on [lo, hi] with the diagonal H1 penalty."""

    def __init__(self, lo: float, hi: float, n_modes: int, reg: RegularizationParams):
        self.lo, self.hi, self.n_modes = float(lo), float(hi), int(n_modes)
        width = self.hi - self.lo
        k = np.arange(self.n_modes)
        self.freqs = k * np.pi / width
        self.scale = np.where(k == 0, np.sqrt(1 / width), np.sqrt(2 / width))
        self.penalty = reg.lam + (reg.lam + reg.mu) * self.freqs**2

    def eval(self, x, deriv: int = 0) -> np.ndarray:
        t = np.asarray(x, dtype=float).reshape(-1, 1) - self.lo
        if deriv == 0:
            return self.scale * np.cos(self.freqs * t)
        return -self.scale * self.freqs * np.sin(self.freqs * t)


def _lowrank_basis(cfg: KernelConfig, n_modes: int | None):
    """Design-matrix builder and penalty matrix for the low-rank solver."""
    if cfg.backend == "spectral":
        sys = cfg.system
        if n_modes is not None and n_modes != len(sys.basis):
            raise ValueError("spectral low-rank solver uses every retained mode; set n_max instead")
        return sys.basis.eval, sys.b_real, None
    lo, hi = cfg.dom.omega[0]
    basis = CosineBasis(lo, hi, n_modes or DEFAULT_COSINE_MODES, cfg.reg)
    return basis.eval, np.diag(basis.penalty), basis


def fit(cfg: KernelConfig, data: Dataset, solver: str = "auto", n_modes: int | None = None) -> KernelModel:
    """Fit the estimator; ``solver`` is ``"dual"``, ``"lowrank"`` or ``"auto"``.

    ``auto`` picks the dual Cholesky solve up to 3000 samples and the
    low-rank solve above.
    """
    if solver not in ("auto", "dual", "lowrank"):
        raise ValueError(f"unknown solver {solver!r}")
    data.check_domain(cfg.dom)
    n = len(data)
    if solver == "auto":
        solver = "dual" if n <= LOWRANK_THRESHOLD else "lowrank"
    if solver == "dual":
        return _fit_dual(cfg, data)
    return _fit_lowrank(cfg, data, n_modes)


def _fit_dual(cfg: KernelConfig, data: Dataset) -> KernelModel:
    n, y = len(data), data.ys
    g = gram_matrix(cfg, data.xs, repair=False)
    a = g + n * np.eye(n)
    try:
        factor = sla.cho_factor(a, lower=True)
    except np.linalg.LinAlgError:
        # the ridge shift hides roundoff, so only a failed factorization pays for an eigensolve
        try:
            g = repair_psd(g)
            a = g + n * np.eye(n)
            factor = sla.cho_factor(a, lower=True)
        except (KernelPSDError, np.linalg.LinAlgError) as exc:
            raise FitError(f"Cholesky factorization of G + nI failed: {exc}",
                           float(np.linalg.eigvalsh(g).min())) from exc
    c = sla.cho_solve(factor, y)
    resid = float(np.linalg.norm(a @ c - y))
    # eigenvalues of G + nI lie in [n, trace(G) + n]
    cond = float((np.trace(g) + n) / n)
    return KernelModel(cfg, data.xs, c, FitDiagnostics("dual", resid, cond))


def _fit_lowrank(cfg: KernelConfig, data: Dataset, n_modes: int | None) -> KernelModel:
    n, y = len(data), data.ys
    design, penalty, basis = _lowrank_basis(cfg, n_modes)
    phi = design(data.xs)
    a = phi.T @ phi / n + penalty
    a = 0.5 * (a + a.T)
    rhs = phi.T @ y / n
    try:
        factor = sla.cho_factor(a, lower=True)
    except np.linalg.LinAlgError as exc:
        raise FitError(f"low-rank normal equations are not positive definite: {exc}", float("nan")) from exc
    theta = sla.cho_solve(factor, rhs)
    resid = float(np.linalg.norm(a @ theta - rhs))
    c = (y - phi @ theta) / n
    cond = float(np.linalg.cond(a))
    diag = FitDiagnostics("lowrank", resid, cond, phi.shape[1])
    return KernelModel(cfg, data.xs, c, diag, theta, basis)


def predict(model: KernelModel, x) -> np.ndarray:
    """f(x) at one or many points; a scalar input gives a length-1 array."""
    pts = np.asarray(x, dtype=float).reshape(-1, model.cfg.dom.d)
    if model.theta is not None:
        if model.cfg.backend == "spectral":
            if np.any(np.abs(pts) > 2 * model.cfg.dom.L + 1e-12):
                raise ValueError("points must lie in the box [-2L, 2L]^d")
            return model.cfg.features(pts) @ model.theta
        if not np.all(model.cfg.dom.contains(pts)):
            raise ValueError("points must lie in omega for the closed-form backend")
        return model.basis.eval(pts) @ model.theta
    return kernel_matrix(model.cfg, pts, model.xs) @ model.dual_coeffs


def predict_derivative(model: KernelModel, x) -> np.ndarray:
    """D f at points x (spectral backend, or the cosine low-rank fit)."""
    pts = np.asarray(x, dtype=float).reshape(-1, model.cfg.dom.d)
    if model.cfg.backend == "spectral":
        return _operator_features(model.cfg, pts) @ primal_coefficients(model)
    if model.basis is None:
        raise ValueError("closed-form dual models have no derivative evaluator; fit with solver='lowrank'")
    return model.basis.eval(pts, deriv=1) @ model.theta


def _operator_features(cfg: KernelConfig, pts: np.ndarray) -> np.ndarray:
    out = 0.0
    for alpha, p in cfg.op.terms:
        out = out + p(pts)[:, None] * cfg.features(pts, alpha)
    return out


def primal_coefficients(model: KernelModel) -> np.ndarray:
    """Coefficients of f in the real Fourier basis (spectral backend)."""
    if model.cfg.backend != "spectral":
        raise ValueError("primal coefficients exist for the spectral backend only")
    if model.theta is not None:
        return model.theta
    return model.cfg.system.kernel_matrix @ (model.cfg.features(model.xs).T @ model.dual_coeffs)


def objective(cfg: KernelConfig, gram: np.ndarray, ys: np.ndarray, c: np.ndarray) -> float:
    """(1/n) ||G c - Y||^2 + c^T G c."""
    r = gram @ c - ys
    return float(r @ r / len(ys) + c @ gram @ c)


def l2_error(model: KernelModel, target: Callable, dom: DomainSpec, n_eval: int, rng_seed) -> float:
    """Monte Carlo estimate of int_omega |f - f*|^2 dP_X with n_eval uniform draws."""
    if n_eval < 1:
        raise ValueError(f"n_eval must be >= 1, got {n_eval}")
    rng = np.random.default_rng(rng_seed)
    u = dom.sample(rng, n_eval)
    diff = predict(model, u) - np.asarray(target(u), dtype=float).reshape(-1)
    return float(np.mean(diff**2))


# --- serialization -----------------------------------------------------------

def _poly_to_json(p: Poly):
    return [[list(e), c] for e, c in p.terms]


def config_to_dict(cfg: KernelConfig) -> dict:
    return dict(
        backend=cfg.backend,
        n_max=cfg.n_max,
        lam=cfg.reg.lam,
        mu=cfg.reg.mu,
        L=cfg.dom.L,
        d=cfg.dom.d,
        omega=[list(b) for b in cfg.dom.omega],
        kappa=cfg.dom.kappa,
        operator=dict(s=cfg.op.s, terms=[[list(a), _poly_to_json(p)] for a, p in cfg.op.terms]),
    )


def config_from_dict(d: dict) -> KernelConfig:
    op_d = d["operator"]
    terms = tuple((tuple(a), Poly(tuple((tuple(e), float(c)) for e, c in poly))) for a, poly in op_d["terms"])
    op = MultiIndexOperator(d["d"], op_d["s"], terms)
    dom = DomainSpec(d["d"], d["L"], tuple(tuple(b) for b in d["omega"]), d.get("kappa"))
    return KernelConfig(op, RegularizationParams(d["lam"], d["mu"]), dom, d["backend"], d["n_max"])


def model_to_dict(model: KernelModel) -> dict:
    out = dict(
        cfg=config_to_dict(model.cfg),
        xs=model.xs.tolist(),
        dual_coeffs=model.dual_coeffs.tolist(),
        diagnostics=dict(model.diagnostics.__dict__),
    )
    if model.theta is not None:
        out["theta"] = model.theta.tolist()
    if model.basis is not None:
        out["cosine_modes"] = model.basis.n_modes
    return out


def model_from_dict(d: dict) -> KernelModel:
    cfg = config_from_dict(d["cfg"])
    theta = np.asarray(d["theta"]) if "theta" in d else None
    basis = None
    if "cosine_modes" in d:
        lo, hi = cfg.dom.omega[0]
        basis = CosineBasis(lo, hi, d["cosine_modes"], cfg.reg)
    return KernelModel(cfg, np.asarray(d["xs"], dtype=float), np.asarray(d["dual_coeffs"], dtype=float),
                       FitDiagnostics(**d["diagnostics"]), theta, basis)


def save_model(model: KernelModel, path) -> None:
    """Write JSON atomically; Python floats serialize as shortest round-trip reprs."""
    text = json.dumps(model_to_dict(model), indent=1, sort_keys=True)
    atomic_write_text(path, text + "\n")


def load_model(path) -> KernelModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
