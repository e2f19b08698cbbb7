"""Two-point correlators of a static perturbation, the correlation sum and
scaling fits.

Time ``t`` (1-based) labels the perturbation that precedes gate ``t``.  In
the Heisenberg picture it is ``V~(t) = U^dagger(t-1,0) V U(t-1,0)`` and

    C(t, t') = tr(V~(t) V~(t')) / N.

Its GUE average is ``|tr U(t-1, t'-1) / N|^2``.  The fidelity to second order
is ``1 - delta^2 * chi`` with ``chi = sum(C) / 2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import Circuit, partial_products, partial_trace_table
from .numkernel import HermitianPerturbation

__all__ = [
    'CorrelatorMatrix', 'ChiSummary', 'ScalingFit', 'DegenerateFitError',
    'correlator_gue', 'correlator_fixed', 'chi_sum', 'fidelity_model',
    'fit_scaling',
]


class DegenerateFitError(ValueError):
    """The design matrix of a scaling fit does not have full column rank."""


@dataclass(frozen=True)
class CorrelatorMatrix:
    values: np.ndarray
    kind: str
    label: str = ''
    n: int | None = None

    @property
    def T(self) -> int:
        return self.values.shape[0]

    def rows(self):
        """``(t, t', C)`` triples with 1-based times, row-major."""
        T = self.T
        for t in range(T):
            for tp in range(T):
                yield t + 1, tp + 1, float(self.values[t, tp])


@dataclass(frozen=True)
class ChiSummary:
    algorithm: str
    n: int | None
    T: int
    chi: float


@dataclass(frozen=True)
class ScalingFit:
    basis: tuple[int, ...]
    coefficients: tuple[float, ...]
    residual_rms: float

    def __call__(self, n):
        n = np.asarray(n, dtype=float)
        return sum(c * n ** e for e, c in zip(self.basis, self.coefficients))

    def coefficient(self, exponent: int) -> float:
        return self.coefficients[self.basis.index(exponent)]


def correlator_gue(c: Circuit, threads: int = 1) -> CorrelatorMatrix:
    """GUE-averaged correlator from the partial trace table; no sampling."""
    tr = partial_trace_table(c, threads).values[:-1, :-1]
    lower = np.abs(tr / c.dim) ** 2
    values = np.tril(lower) + np.tril(lower, -1).T
    np.fill_diagonal(values, 1.0)
    return CorrelatorMatrix(values, 'gue_averaged', c.label, c.n)


def correlator_fixed(c: Circuit, v: HermitianPerturbation) -> CorrelatorMatrix:
    """Correlator of one fixed ``V``.

    Caches all ``V~(t)``; memory is ``T * N^2`` complex numbers, so keep
    ``n <= 8``.
    """
    if v.dim != c.dim:
        raise ValueError(f'perturbation dimension {v.dim} does not match register {c.dim}')
    heis = np.empty((len(c), c.dim, c.dim), dtype=complex)
    for t, w in enumerate(partial_products(c)):
        if t == len(c):
            break
        heis[t] = w.conj().T @ v.matrix @ w
    flat = heis.reshape(len(c), -1)
    # tr(A B) = sum_ij A_ij B_ji
    flat_t = heis.transpose(0, 2, 1).reshape(len(c), -1)
    values = np.real(flat @ flat_t.T) / c.dim
    values = (values + values.T) / 2
    return CorrelatorMatrix(values, 'fixed_v', c.label, c.n)


def chi_sum(m: CorrelatorMatrix) -> ChiSummary:
    """Half the sum of all ``T^2`` entries, diagonal included."""
    return ChiSummary(m.label, m.n, m.T, float(m.values.sum()) / 2)


def fidelity_model(chi: float, delta: float) -> float:
    if chi < 0:
        raise ValueError(f'chi must be non-negative, got {chi}')
    return math.exp(-chi * delta ** 2)


def fit_scaling(points: Sequence[tuple[float, float]],
                basis: Sequence[int] = (3, 2, 1)) -> ScalingFit:
    """Unweighted least squares ``chi(n) ~ sum_e coeff_e * n**e``.

    ``basis`` lists the exponents; a constant term is not allowed since
    ``chi(0) = 0``.

    Raises
    ------
    DegenerateFitError
        Fewer distinct points than basis terms, or a repeated exponent.
    """
    basis = tuple(int(e) for e in basis)
    if not basis or any(e < 1 for e in basis):
        raise ValueError(f'basis exponents must be positive, got {basis}')
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    ns, chis = pts[:, 0], pts[:, 1]
    design = np.stack([ns ** e for e in basis], axis=1)
    if len(pts) < len(basis) or np.linalg.matrix_rank(design) < len(basis):
        raise DegenerateFitError(
            f'{len(pts)} points cannot determine the {len(basis)}-term basis {basis}')
    coef, *_ = np.linalg.lstsq(design, chis, rcond=None)
    resid = chis - design @ coef
    return ScalingFit(basis, tuple(float(x) for x in coef),
                      float(np.sqrt(np.mean(resid ** 2))))
