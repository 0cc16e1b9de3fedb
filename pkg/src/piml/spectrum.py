"""Ordered positive spectra with per-eigenvalue provenance."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Non-increasing positive eigenvalues a_0 >= a_1 >= ... > 0.

    ``provenance[m]`` records where a_m came from: ``"symmetric:k"`` or
    ``"antisymmetric:k"`` for roots of the 1D quantization equations,
    ``"galerkin"`` for truncated Galerkin eigenvalues, ``"closed_form"`` for
    the diagonal constant-coefficient formula, ``"file"`` when read back.
    ``params`` holds whatever regularization data produced the spectrum
    (keys ``lam``, ``mu``, ``L``, ``s``, ``d`` when known).
    """

    eigenvalues: np.ndarray
    provenance: tuple[str, ...]
    params: dict = field(default_factory=dict)
    vectors: np.ndarray | None = None

    def __post_init__(self):
        a = np.asarray(self.eigenvalues, dtype=float)
        if a.ndim != 1:
            raise ValueError("eigenvalues must be one-dimensional")
        if len(self.provenance) != len(a):
            raise ValueError("one provenance entry per eigenvalue is required")
        if np.any(a <= 0):
            raise ValueError("spectrum eigenvalues must be strictly positive")
        if np.any(np.diff(a) > 0):
            raise ValueError("spectrum eigenvalues must be non-increasing")
        object.__setattr__(self, "eigenvalues", a)

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def kind(self) -> str:
        """``"exact_1d"``, ``"galerkin"``, ``"closed_form"`` or ``"file"``."""
        if not self.provenance:
            return "empty"
        head = self.provenance[0].split(":")[0]
        return "exact_1d" if head in ("symmetric", "antisymmetric") else head

    def rows(self):
        """(m, a_m, provenance) triples, m starting at 0."""
        return [(m, float(a), p) for m, (a, p) in enumerate(zip(self.eigenvalues, self.provenance))]
