"""Physics-informed machine learning as a kernel method.

Kernels, operator spectra, effective dimensions and kernel ridge fits for
the penalty lam ||f||^2_{H^s} + mu ||D f||^2_{L2(omega)}.
"""

from .effdim import EffDimReport, effective_dimension, minimax_schedule, speedup_schedule
from .eigen1d import BracketViolation, exact_spectrum_1d, eigenvalue_brackets
from .fourier import DomainSpec, index_map, mode_eval, sobolev_weight
from .kernels import KernelConfig, closed_form_kernel, gram_matrix, kernel_eval, kernel_matrix, weak_form_residual
from .operators import (
    GalerkinSystem,
    MultiIndexOperator,
    Poly,
    RegularizationParams,
    assemble_galerkin,
    spectral_eigenvalue,
    truncated_spectrum,
)
from .regressor import Dataset, FitError, KernelModel, fit, l2_error, predict
from .spectrum import Spectrum

__version__ = "0.1.0"

__all__ = [
    "BracketViolation", "Dataset", "DomainSpec", "EffDimReport", "FitError", "GalerkinSystem",
    "KernelConfig", "KernelModel", "MultiIndexOperator", "Poly", "RegularizationParams", "Spectrum",
    "assemble_galerkin", "closed_form_kernel", "effective_dimension", "exact_spectrum_1d", "fit",
    "gram_matrix", "index_map", "kernel_eval", "kernel_matrix", "l2_error", "minimax_schedule",
    "mode_eval", "predict", "eigenvalue_brackets", "sobolev_weight", "spectral_eigenvalue",
    "speedup_schedule", "truncated_spectrum", "weak_form_residual",
]
