"""Perturbed propagation and fidelity of a gate sequence.

Every step of the perturbed algorithm is ``U(t) exp(-i delta V(t))``: the
perturbation acts first, then the gate.  Fidelity is the normalized trace
overlap ``tr(U_delta^dagger U) / N`` with the exact algorithm, computed either
from full operators, from random register states, or as the product of
conjugated exponentials (used as an algebraic cross-check).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .circuit import Circuit, apply_gate, circuit_unitary, partial_products
from .numkernel import (HermitianPerturbation, SeededRng, derive_seed,
                        expm_phase, random_register_state, sample_gue,
                        trace_inner)

__all__ = [
    'PerturbationMode', 'FidelityRunConfig', 'FidelityEnsemble',
    'realize_perturbation', 'fidelity_exact', 'fidelity_stochastic',
    'fidelity_heisenberg', 'fidelity_ensemble', 'noise_baseline',
    'load_matrix', 'save_matrix', 'DEFAULT_STATES', 'STOCHASTIC_FROM_N',
]

DEFAULT_STATES = 200
#: qubit count from which ``trace='auto'`` switches to random register states
STOCHASTIC_FROM_N = 10

# sub-stream ids below a realization's stream
_PURPOSE_PERTURBATION = 0
_PURPOSE_STATES = 1

MODES = ('static', 'noise', 'fixed')


@dataclass(frozen=True)
class PerturbationMode:
    """How ``V(t)`` is chosen.

    ``static``: one GUE sample shared by all gates.  ``noise``: a fresh GUE
    sample per gate.  ``fixed``: the given ``matrix`` at every gate.
    ``normalize`` rescales each GUE sample to ``tr(V^2)/N = 1``.
    """

    variant: str = 'static'
    matrix: HermitianPerturbation | None = None
    normalize: bool = False

    def __post_init__(self):
        if self.variant not in MODES:
            raise ValueError(f'unknown perturbation mode {self.variant!r}')
        if (self.variant == 'fixed') != (self.matrix is not None):
            raise ValueError('a matrix is required for, and only for, fixed mode')

    @classmethod
    def fixed(cls, v: HermitianPerturbation | np.ndarray) -> PerturbationMode:
        if not isinstance(v, HermitianPerturbation):
            v = HermitianPerturbation(v, 'fixed')
        return cls('fixed', v)

    @property
    def is_static(self) -> bool:
        return self.variant != 'noise'

    def __str__(self):
        return self.variant


@dataclass(frozen=True)
class FidelityRunConfig:
    delta: float
    realizations: int = 50
    states: int | None = None
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if not self.delta >= 0:
            raise ValueError(f'delta must be >= 0, got {self.delta}')
        if self.realizations < 1:
            raise ValueError('need at least one realization')
        if self.states is not None and self.states < 1:
            raise ValueError('need at least one register state')


@dataclass(frozen=True)
class FidelityEnsemble:
    seeds: tuple[SeededRng, ...]
    values: np.ndarray

    @property
    def mean_complex(self) -> complex:
        # fixed left-to-right order so the sum does not depend on scheduling
        total = 0j
        for f in self.values:
            total += f
        return total / len(self.values)

    @property
    def abs_mean(self) -> float:
        return abs(self.mean_complex)

    @property
    def mean_abs(self) -> float:
        return float(sum(abs(f) for f in self.values) / len(self.values))

    @property
    def std_error(self) -> float:
        """Standard error of ``|F|`` over realizations (0 for a single run)."""
        if len(self.values) < 2:
            return 0.0
        return float(np.std(np.abs(self.values), ddof=1) / math.sqrt(len(self.values)))

    @property
    def per_realization(self) -> list[tuple[SeededRng, complex]]:
        return list(zip(self.seeds, self.values.tolist()))


def realize_perturbation(mode: PerturbationMode, T: int, n_dim: int,
                         rng: SeededRng) -> list[HermitianPerturbation]:
    if T < 1:
        raise ValueError(f'need T >= 1, got {T}')
    if mode.variant == 'fixed':
        if mode.matrix.dim != n_dim:
            raise ValueError(f'fixed perturbation has dimension {mode.matrix.dim}, '
                             f'register needs {n_dim}')
        return [mode.matrix] * T
    if mode.variant == 'static':
        return [sample_gue(n_dim, rng, mode.normalize, label='static')] * T
    return [sample_gue(n_dim, rng, mode.normalize, label=f'noise {t}')
            for t in range(1, T + 1)]


def _phase_factors(mode, c, delta, rng):
    """``exp(-i delta V(t))`` for every gate, one exponential if static."""
    vs = realize_perturbation(mode, len(c), c.dim, rng.child(_PURPOSE_PERTURBATION))
    if mode.is_static:
        return [expm_phase(vs[0], delta)] * len(c)
    return [expm_phase(v, delta) for v in vs]


@lru_cache(maxsize=8)
def _exact_unitary(c: Circuit) -> np.ndarray:
    u = circuit_unitary(c)
    u.setflags(write=False)
    return u


def _propagate(state, c, factors):
    for g, e in zip(c.gates, factors):
        state = apply_gate(e @ state, g, c.n)
    return state


def fidelity_exact(c: Circuit, mode: PerturbationMode, delta: float,
                   rng: SeededRng) -> complex:
    """``tr(U_delta^dagger(T,0) U(T,0)) / N`` from full operators."""
    factors = _phase_factors(mode, c, delta, rng)
    u_delta = _propagate(np.eye(c.dim, dtype=complex), c, factors)
    return trace_inner(u_delta, _exact_unitary(c)) / c.dim


def fidelity_stochastic(c: Circuit, mode: PerturbationMode, delta: float,
                        M: int, rng: SeededRng) -> tuple[complex, float]:
    """Estimate the fidelity from ``M`` random register states.

    Returns the mean of ``<psi|U_delta^dagger U|psi>`` and its standard error
    over states (``nan`` when ``M == 1``).  The perturbation is drawn from
    the same sub-stream as in :func:`fidelity_exact`, so both see the same
    ``V`` for a given ``rng``.
    """
    if M < 1:
        raise ValueError(f'need M >= 1, got {M}')
    factors = _phase_factors(mode, c, delta, rng)
    psi = random_register_state(c.dim, rng.child(_PURPOSE_STATES), count=M)
    exact = psi
    for g in c.gates:
        exact = apply_gate(exact, g, c.n)
    perturbed = _propagate(psi, c, factors)
    overlaps = np.einsum('ij,ij->j', perturbed.conj(), exact)
    if M == 1:
        return complex(overlaps[0]), math.nan
    err = np.sqrt(np.sum(np.abs(overlaps - overlaps.mean()) ** 2) / (M - 1) / M)
    return complex(overlaps.mean()), float(err)


def fidelity_heisenberg(c: Circuit, v: HermitianPerturbation, delta: float) -> complex:
    """Fidelity as ``tr(prod_t exp(i delta V~(t))) / N`` for a static ``V``.

    ``V~(t) = U^dagger(t-1,0) V U(t-1,0)``, product ordered with ``t = 1``
    leftmost.  Each factor is evaluated as ``W^dagger exp(i delta V) W``.
    Cost is O(T N^3); meant for small registers.
    """
    e_dag = expm_phase(v, -delta)
    prod = np.eye(c.dim, dtype=complex)
    for t, w in enumerate(partial_products(c)):
        if t == len(c):
            break
        prod = prod @ (w.conj().T @ e_dag @ w)
    return complex(np.trace(prod)) / c.dim


def _run_one(c, mode, delta, states, rng):
    if states is None:
        return fidelity_exact(c, mode, delta, rng)
    return fidelity_stochastic(c, mode, delta, states, rng)[0]


def fidelity_ensemble(c: Circuit, mode: PerturbationMode,
                      cfg: FidelityRunConfig) -> FidelityEnsemble:
    """Independent runs with streams ``derive_seed(cfg.seed, r)``.

    ``cfg.states=None`` uses the exact trace.  ``cfg.threads`` only changes
    wall time: each run owns its stream and results are stored by index.
    """
    seeds = tuple(derive_seed(cfg.seed, r) for r in range(cfg.realizations))

    def run(rng):
        return _run_one(c, mode, cfg.delta, cfg.states, rng)

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            values = list(pool.map(run, seeds))
    else:
        values = [run(s) for s in seeds]
    return FidelityEnsemble(seeds, np.array(values, dtype=complex))


def noise_baseline(T: int, delta: float) -> float:
    """Algorithm-independent fidelity under uncorrelated noise."""
    return math.exp(-delta ** 2 * T / 2)


def load_matrix(path: str | Path) -> HermitianPerturbation:
    """Read a fixed perturbation: first line ``N``, then ``N`` rows of
    whitespace-separated ``re,im`` entries."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f'{path}: empty matrix file')
    try:
        N = int(lines[0])
    except ValueError:
        raise ValueError(f'{path}:1: expected the dimension, got {lines[0]!r}') from None
    if len(lines) != N + 1:
        raise ValueError(f'{path}: expected {N} rows, found {len(lines) - 1}')
    m = np.empty((N, N), dtype=complex)
    for i, line in enumerate(lines[1:]):
        entries = line.split()
        if len(entries) != N:
            raise ValueError(f'{path}:{i + 2}: expected {N} entries, found {len(entries)}')
        for j, entry in enumerate(entries):
            try:
                re, im = entry.split(',')
                m[i, j] = complex(float(re), float(im))
            except ValueError:
                raise ValueError(f'{path}:{i + 2}: bad entry {entry!r}') from None
    return HermitianPerturbation(m, label=str(path))


def save_matrix(path: str | Path, v: HermitianPerturbation | np.ndarray) -> None:
    m = v.matrix if isinstance(v, HermitianPerturbation) else np.asarray(v)
    rows = [' '.join(f'{z.real:.17g},{z.imag:.17g}' for z in row) for row in m]
    Path(path).write_text(f'{m.shape[0]}\n' + '\n'.join(rows) + '\n')
