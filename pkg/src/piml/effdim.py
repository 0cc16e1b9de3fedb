"""Effective dimension bounds and regularization schedules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import RegularizationParams
from .spectrum import Spectrum


@dataclass(frozen=True)
class EffDimReport:
    value: float
    kappa: float
    truncation_tail_bound: float
    tail_source: str

    def as_dict(self) -> dict:
        return dict(value=self.value, kappa=self.kappa,
                    truncation_tail_bound=self.truncation_tail_bound, tail_source=self.tail_source)


def _tail_exact_1d(count: int, kappa: float, lam: float, mu: float, L: float) -> float:
    # summand <= kappa * a_m <= kappa * 4L^2 / ((lam+mu) pi^2 (m-2)^2); integrate from count-1
    start = count - 1 - 2
    if start <= 0:
        return np.inf
    return kappa * 4 * L**2 / ((lam + mu) * np.pi**2 * start)


def _decay_constant(a: np.ndarray, p: float, lam: float) -> float:
    # smallest C2 with a_m <= C2 / lam * m^(-p) over the upper half of the listed modes
    m = np.arange(len(a))
    sel = m >= max(1, len(a) // 2)
    return float(np.max(a[sel] * lam * m[sel] ** p))


def _tail_power_law(count: int, kappa: float, c: float, p: float) -> float:
    # kappa * c * int_{count-1}^inf m^-p dm
    if p <= 1:
        return np.inf
    return kappa * c * (count - 1) ** (1 - p) / (p - 1)


def effective_dimension(spec: Spectrum, kappa: float, params: dict | None = None) -> EffDimReport:
    """sum_m 1 / (1 + (kappa a_m)^-1) over the listed eigenvalues, with a tail bound.

    The tail bound covers all omitted modes. For exact 1D spectra it
    integrates the analytic upper bracket (needs lam, mu, L); for Galerkin
    spectra it integrates a_m <= C2 lam^-1 m^(-2s/d) with C2 fitted on the
    listed modes (needs lam, s, d). Without parameters a power law is fitted
    to the upper half of the spectrum.
    """
    if len(spec) == 0:
        raise ValueError("spectrum is empty")
    if not kappa > 0:
        raise ValueError(f"kappa must be > 0, got {kappa}")
    a = spec.eigenvalues
    value = float(np.sum(1.0 / (1.0 + 1.0 / (kappa * a))))
    p = dict(spec.params)
    if params:
        p.update(params)
    count = len(a)

    if spec.kind == "exact_1d" and {"lam", "mu", "L"} <= p.keys():
        tail, source = _tail_exact_1d(count, kappa, p["lam"], p["mu"], p["L"]), "bracket"
    elif {"lam", "s", "d"} <= p.keys() and count >= 4:
        power = 2 * p["s"] / p["d"]
        c2 = _decay_constant(a, power, p["lam"])
        tail, source = _tail_power_law(count, kappa, c2 / p["lam"], power), "decay"
    elif count >= 8:
        m = np.arange(count // 2, count)
        slope, icpt = np.polyfit(np.log(m), np.log(a[m]), 1)
        power = -slope
        c = float(np.max(a[m] * m**power))
        tail, source = _tail_power_law(count, kappa, c, power), "fitted"
    else:
        tail, source = np.inf, "none"
    return EffDimReport(value, float(kappa), float(tail), source)


def minimax_schedule(n: int, s: int = 1, d: int = 1) -> RegularizationParams:
    """lam = n^(-2s/(2s+d)) sqrt(log n), mu = lam sqrt(log n)."""
    if n < 2:
        raise ValueError(f"sample count must be >= 2, got {n}")
    root_log = np.sqrt(np.log(n))
    lam = n ** (-2 * s / (2 * s + d)) * root_log
    return RegularizationParams(lam, lam * root_log)


def speedup_schedule(n: int, model_error: float) -> RegularizationParams:
    """lam = log(n)/n; mu = n^(-2/3)/model_error, or 1/log(n) when the model is exact."""
    if n < 2:
        raise ValueError(f"sample count must be >= 2, got {n}")
    if model_error < 0:
        raise ValueError(f"model_error must be >= 0, got {model_error}")
    lam = np.log(n) / n
    mu = n ** (-2 / 3) / model_error if model_error > 0 else 1.0 / np.log(n)
    return RegularizationParams(float(lam), float(mu))
