"""Monte Carlo convergence-rate study of the physics-informed estimator.

Two built-in scenarios on omega = [-1, 1] with D = d/dx: a perfect model
(f* = 1, D f* = 0) and an imperfect one (f* = 1 + 0.1 |x|, whose derivative
has L2(omega) norm sqrt(2/300)). For each sample size n the harness draws
a noisy dataset, applies the speed-up schedule, fits, and estimates the L2
error by Monte Carlo.

Seeds: replicate r at sample size n uses
``SeedSequence([seed, n, r]).generate_state(1, uint64)[0]`` as its child
seed. Training data come from ``default_rng([child, 0])`` and the Monte
Carlo evaluation points from ``default_rng([child, 1])``. The scenario is
not part of the key, so the perfect and imperfect runs share inputs and
noise (common random numbers).
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .effdim import speedup_schedule
from .fourier import DomainSpec
from .kernels import KernelConfig
from .operators import MultiIndexOperator
from .regressor import Dataset, FitError, fit, l2_error

log = logging.getLogger(__name__)

DEFAULT_N_MAX = 513
MAX_FAILURE_RATE = 0.10


def default_n_grid(count: int = 12, lo: float = 10, hi: float = 1e4) -> np.ndarray:
    """``count`` log-spaced integers in [lo, hi], rounded and deduplicated."""
    return np.unique(np.round(np.logspace(np.log10(lo), np.log10(hi), count)).astype(int))


class ExperimentAborted(RuntimeError):
    pass


@dataclass(frozen=True)
class NoiseModel:
    """Additive noise with sub-Gamma parameters (sigma, M).

    ``gaussian``: N(0, sigma^2), valid with M = sigma.
    ``bounded``: uniform on [-M, M], valid with sigma = M.
    ``custom``: ``sampler(rng, n)`` supplied by the caller.
    """

    kind: str = "gaussian"
    sigma: float = 1.0
    M: float | None = None
    sampler: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind == "gaussian":
            if not self.sigma >= 0:
                raise ValueError(f"gaussian noise needs sigma >= 0, got {self.sigma}")
            if self.M is None:
                object.__setattr__(self, "M", self.sigma)
        elif self.kind == "bounded":
            if self.M is None or not self.M >= 0:
                raise ValueError("bounded noise needs M >= 0")
            object.__setattr__(self, "sigma", self.M)
        elif self.kind == "custom":
            if self.sampler is None:
                raise ValueError("custom noise needs a sampler")
        else:
            raise ValueError(f"unknown noise kind {self.kind!r}")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "gaussian":
            return self.sigma * rng.standard_normal(n)
        if self.kind == "bounded":
            return rng.uniform(-self.M, self.M, n)
        return np.asarray(self.sampler(rng, n), dtype=float).reshape(n)


def _one(x):
    return np.ones(np.asarray(x).reshape(-1).shape)


def _tent(x):
    return 1.0 + 0.1 * np.abs(np.asarray(x, dtype=float).reshape(-1))


@dataclass(frozen=True)
class Scenario:
    name: str
    target: Callable
    noise: NoiseModel
    model_error: float
    dom: DomainSpec = field(default_factory=lambda: DomainSpec.centered(1, 1.0))
    op: MultiIndexOperator = field(default_factory=MultiIndexOperator.derivative)

    @classmethod
    def perfect(cls, sigma: float = 1.0) -> "Scenario":
        return cls("perfect", _one, NoiseModel("gaussian", sigma), 0.0)

    @classmethod
    def imperfect(cls, sigma: float = 1.0) -> "Scenario":
        return cls("imperfect", _tent, NoiseModel("gaussian", sigma), float(np.sqrt(2 / 300)))

    @classmethod
    def named(cls, name: str, sigma: float = 1.0) -> "Scenario":
        if name == "perfect":
            return cls.perfect(sigma)
        if name == "imperfect":
            return cls.imperfect(sigma)
        raise ValueError(f"unknown scenario {name!r}; expected 'perfect' or 'imperfect'")

    def draw(self, rng: np.random.Generator, n: int) -> Dataset:
        xs = self.dom.sample(rng, n)
        ys = np.asarray(self.target(xs), dtype=float).reshape(n) + self.noise.sample(rng, n)
        return Dataset(xs, ys)


def child_seed(seed: int, n: int, replicate: int) -> int:
    return int(np.random.SeedSequence([seed, n, replicate]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class Record:
    n: int
    replicate: int
    err: float
    lam: float
    mu: float
    seed: int


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    scenario: str
    n_grid: np.ndarray
    err_mean: np.ndarray
    err_std: np.ndarray
    records: tuple[Record, ...]
    slope: float
    intercept: float
    r2: float
    seed: int
    failures: int
    wall_time: float
    mean_of_logs: bool = False

    def summary(self) -> dict:
        return dict(
            scenario=self.scenario,
            seed=self.seed,
            slope=self.slope,
            intercept=self.intercept,
            r2=self.r2,
            failures=self.failures,
            mean_of_logs=self.mean_of_logs,
            n_grid=[int(n) for n in self.n_grid],
            err_mean=[float(e) for e in self.err_mean],
            err_std=[float(e) for e in self.err_std],
        )


def fit_rate(result, err=None, mean_of_logs: bool = False) -> tuple[float, float, float]:
    """OLS of log(err) on log(n); returns (slope, intercept, r2).

    Accepts an ExperimentResult or the pair (n_grid, err). Non-positive
    errors are dropped; fewer than three survivors raise ValueError. With
    ``mean_of_logs`` on a result, replicate errors are log-averaged first.
    """
    if isinstance(result, ExperimentResult):
        n = np.asarray(result.n_grid, dtype=float)
        if mean_of_logs:
            err = np.array([_log_mean([r.err for r in result.records if r.n == k]) for k in result.n_grid])
        else:
            err = result.err_mean
    else:
        n = np.asarray(result, dtype=float)
    err = np.asarray(err, dtype=float)
    keep = np.isfinite(err) & (err > 0)
    if keep.sum() < 3:
        raise ValueError(f"need at least 3 positive errors for a rate fit, got {int(keep.sum())}")
    x, y = np.log(n[keep]), np.log(err[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def _log_mean(errs) -> float:
    errs = np.asarray([e for e in errs if e > 0])
    return float(np.exp(np.mean(np.log(errs)))) if errs.size else np.nan


def _run_size(scenario: Scenario, n: int, replicates: int, mc_eval: int, seed: int,
              backend: str, n_max: int) -> list:
    reg = speedup_schedule(n, scenario.model_error)
    cfg = KernelConfig(scenario.op, reg, scenario.dom, backend, n_max)
    out = []
    for r in range(replicates):
        cs = child_seed(seed, n, r)
        data = scenario.draw(np.random.default_rng([cs, 0]), n)
        try:
            model = fit(cfg, data)
        except FitError as exc:
            out.append((n, r, None, reg.lam, reg.mu, cs, str(exc)))
            continue
        err = l2_error(model, scenario.target, scenario.dom, mc_eval, [cs, 1])
        out.append((n, r, err, reg.lam, reg.mu, cs, None))
    return out


def run_experiment(
    scenario: Scenario,
    n_grid=None,
    replicates: int = 10,
    mc_eval: int = 500,
    seed: int = 0,
    workers: int = 1,
    backend: str = "closed_form_1d",
    n_max: int = DEFAULT_N_MAX,
    mean_of_logs: bool = False,
    max_failure_rate: float = MAX_FAILURE_RATE,
) -> ExperimentResult:
    """Error curve err(n) over ``n_grid`` with ``replicates`` datasets per size.

    The default backend is the closed-form kernel on omega; ``n_max``
    only applies to the spectral backend. Failed fits are logged, counted
    and excluded; more than ``max_failure_rate`` of them aborts the run.
    Output is independent of ``workers``.
    """
    grid = default_n_grid() if n_grid is None else np.asarray(n_grid, dtype=int)
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("n_grid must be non-empty and strictly increasing")
    if grid[0] < 2:
        raise ValueError("sample sizes must be >= 2")
    if replicates < 1 or mc_eval < 1:
        raise ValueError("replicates and mc_eval must be >= 1")
    start = time.perf_counter()
    args = [(scenario, int(n), replicates, mc_eval, seed, backend, n_max) for n in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_size, *zip(*args)))
    else:
        chunks = [_run_size(*a) for a in args]
    rows = sorted((row for chunk in chunks for row in chunk), key=lambda t: (t[0], t[1]))

    failed = [row for row in rows if row[2] is None]
    for n, r, _, _, _, _, msg in failed:
        log.warning("fit failed at n=%d replicate=%d: %s", n, r, msg)
    if len(failed) > max_failure_rate * len(rows):
        raise ExperimentAborted(f"{len(failed)} of {len(rows)} fits failed")

    records = tuple(Record(n, r, err, lam, mu, cs) for n, r, err, lam, mu, cs, _ in rows if err is not None)
    means, stds = [], []
    for n in grid:
        errs = np.array([rec.err for rec in records if rec.n == n])
        means.append(errs.mean() if errs.size else np.nan)
        stds.append(errs.std() if errs.size else np.nan)
    partial = ExperimentResult(scenario.name, grid, np.array(means), np.array(stds), records,
                               np.nan, np.nan, np.nan, seed, len(failed), 0.0, mean_of_logs)
    try:
        slope, intercept, r2 = fit_rate(partial, mean_of_logs=mean_of_logs)
    except ValueError:
        slope = intercept = r2 = np.nan
    return ExperimentResult(scenario.name, grid, partial.err_mean, partial.err_std, records,
                            slope, intercept, r2, seed, len(failed), time.perf_counter() - start, mean_of_logs)
