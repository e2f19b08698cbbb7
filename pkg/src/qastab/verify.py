"""Invariant suite behind ``qastab verify``."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .circuit import (R_MATRIX, Gate, build_iqft, build_qft, circuit_unitary,
                      dft_matrix, embed_gate, gate_local_matrix)

__all__ = ['Check', 'run_checks', 'gate_algebra_checks', 'oracle_checks']

ORACLE_TOL = 1e-10
ALGEBRA_TOL = 1e-12
UNITARY_TOL = 1e-14


@dataclass(frozen=True)
class Check:
    name: str
    error: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.error < self.tol)

    def __str__(self):
        status = 'PASS' if self.passed else 'FAIL'
        return f'{status} {self.name}: max error {self.error:.3e} (tol {self.tol:.0e})'


def _maxabs(a):
    return float(np.max(np.abs(a)))


def oracle_checks(n: int) -> list[Check]:
    u_qft = circuit_unitary(build_qft(n))
    u_iqft = circuit_unitary(build_iqft(n))
    eye = np.eye(2 ** n)
    return [
        Check(f'n={n} QFT equals DFT', _maxabs(u_qft - dft_matrix(n)), ORACLE_TOL),
        Check(f'n={n} IQFT equals QFT', _maxabs(u_iqft - u_qft), ORACLE_TOL),
        Check(f'n={n} QFT unitary', _maxabs(u_qft.conj().T @ u_qft - eye), 1e-11),
    ]


def _commutator(a, b):
    return a @ b - b @ a


def gate_algebra_checks(n: int, r_matrix: np.ndarray = R_MATRIX) -> list[Check]:
    """Unitarity, tracelessness, commutation and block identities on ``n`` qubits."""
    pairs = list(combinations(range(n), 2))
    kinds = [Gate('A', j) for j in range(n)]
    kinds += [Gate(kind, j, k) for kind in 'BTRG' for j, k in pairs]
    unit = max(_maxabs(m.conj().T @ m - np.eye(len(m)))
               for m in (gate_local_matrix(g, r_matrix) for g in kinds))
    trace = max(abs(np.trace(gate_local_matrix(Gate('A', 0)))),
                abs(np.trace(gate_local_matrix(Gate('R', 0, 1), r_matrix))))
    checks = [Check(f'n={n} gates unitary', unit, UNITARY_TOL),
              Check(f'n={n} tr A = tr R = 0', trace, ALGEBRA_TOL)]

    embedded = {}

    def emb(kind, j, k):
        key = (kind, j, k)
        if key not in embedded:
            embedded[key] = embed_gate(Gate(kind, j, k), n, r_matrix)
        return embedded[key]

    rb = rr = 0.0
    for j in range(n):
        for k in range(j + 1, n):
            for l in range(j + 1, n):
                rb = max(rb, _maxabs(_commutator(emb('R', j, k), emb('B', j, l))))
                rr = max(rr, _maxabs(_commutator(emb('R', j, k), emb('R', j, l))))
    checks += [Check(f'n={n} [R_jk, B_jl] = 0', rb, ALGEBRA_TOL),
               Check(f'n={n} [R_jk, R_jl] = 0', rr, ALGEBRA_TOL)]

    block = 0.0
    eye = np.eye(2 ** n, dtype=complex)
    for j in range(n - 1):
        ks = range(j + 1, n)
        # operator products written left to right as in R..R G..G = B..B
        lhs, rhs = eye, eye
        for k in ks:
            lhs = lhs @ emb('R', j, k)
        for k in ks:
            lhs = lhs @ emb('G', j, k)
            rhs = rhs @ emb('B', j, k)
        block = max(block, _maxabs(lhs - rhs))
    checks.append(Check(f'n={n} block identity R..R G..G = B..B', block, ALGEBRA_TOL))
    return checks


def run_checks(n_max: int, r_matrix: np.ndarray = R_MATRIX) -> list[Check]:
    if not 2 <= n_max <= 8:
        raise ValueError(f'n_max must be in 2..8, got {n_max}')
    checks = []
    for n in range(2, n_max + 1):
        checks += oracle_checks(n)
        checks += gate_algebra_checks(n, r_matrix)
    return checks
