"""Gate records, QFT/IQFT builders and register-space propagation.

Bit convention: basis index ``m`` stores qubit ``j`` in bit ``(m >> j) & 1``,
so qubit 0 is least significant.  Two-qubit gates act on the pair
``(j, k)`` with ``j < k`` in the local basis ``2*q_k + q_j``.

Circuits are listed in execution order: ``gates[0]`` is applied first.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    'Gate', 'Circuit', 'PartialTraceTable', 'HADAMARD', 'R_MATRIX', 'SWAP',
    'gate_local_matrix', 'apply_gate', 'apply_circuit', 'embed_gate',
    'build_qft', 'build_iqft', 'circuit_unitary', 'partial_trace_table',
    'partial_products', 'dft_matrix', 'qft_length', 'iqft_length',
]

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

# traceless, commutes with every B_jl and with R_jl in the 2*q_k + q_j basis
R_MATRIX = np.array([[0, 0, -1, 0],
                     [0, 1, 0, 0],
                     [1, 0, 0, 0],
                     [0, 0, 0, -1]], dtype=complex)

SWAP = np.array([[1, 0, 0, 0],
                 [0, 0, 1, 0],
                 [0, 1, 0, 0],
                 [0, 0, 0, 1]], dtype=complex)

for _m in (HADAMARD, R_MATRIX, SWAP):
    _m.setflags(write=False)

ONE_QUBIT_KINDS = frozenset('A')
TWO_QUBIT_KINDS = frozenset('BTRG')


@dataclass(frozen=True)
class Gate:
    kind: str
    j: int
    k: int | None = None

    def __post_init__(self):
        if self.kind in ONE_QUBIT_KINDS:
            if self.k is not None:
                raise ValueError(f'{self.kind} is a one-qubit gate')
            if self.j < 0:
                raise ValueError(f'negative qubit index in {self}')
        elif self.kind in TWO_QUBIT_KINDS:
            if self.k is None or not 0 <= self.j < self.k:
                raise ValueError(f'two-qubit gate needs 0 <= j < k, got {self}')
        else:
            raise ValueError(f'unknown gate kind {self.kind!r}')

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.j,) if self.k is None else (self.j, self.k)

    def __str__(self):
        return f'{self.kind} {self.j}' if self.k is None else f'{self.kind} {self.j} {self.k}'

    @classmethod
    def parse(cls, line: str) -> Gate:
        """Inverse of ``str``: ``'<kind> <j> [<k>]'``."""
        parts = line.split()
        if len(parts) not in (2, 3):
            raise ValueError(f'malformed gate line {line!r}')
        return cls(parts[0], *(int(p) for p in parts[1:]))


@dataclass(frozen=True)
class Circuit:
    n: int
    gates: tuple[Gate, ...]
    label: str = 'custom'

    def __post_init__(self):
        object.__setattr__(self, 'gates', tuple(self.gates))
        for g in self.gates:
            if max(g.qubits) >= self.n:
                raise ValueError(f'gate {g} out of range for n={self.n}')

    def __len__(self):
        return len(self.gates)

    @property
    def dim(self) -> int:
        return 2 ** self.n

    def listing(self) -> str:
        return ''.join(f'{g}\n' for g in self.gates)


@dataclass(frozen=True)
class PartialTraceTable:
    """``values[t, t'] = tr U(t, t')`` for ``0 <= t' <= t <= T``.

    Entries with ``t < t'`` are left at zero.
    """

    T: int
    values: np.ndarray


def qft_length(n: int) -> int:
    return n * (n + 2) // 2


def iqft_length(n: int) -> int:
    return n * (2 * n + 1) // 2


@lru_cache(maxsize=None)
def _phase_gate(distance: int) -> np.ndarray:
    m = np.diag([1, 1, 1, np.exp(1j * np.pi / 2 ** distance)]).astype(complex)
    m.setflags(write=False)
    return m


def gate_local_matrix(g: Gate, r_matrix: np.ndarray = R_MATRIX) -> np.ndarray:
    """2x2 (A) or 4x4 matrix of ``g`` in its local basis.

    ``r_matrix`` replaces the R factor everywhere it appears (R and G); it
    exists so negative controls can inject a broken R.
    """
    if g.kind == 'A':
        return HADAMARD
    if g.kind == 'B':
        return _phase_gate(g.k - g.j)
    if g.kind == 'T':
        return SWAP
    if g.kind == 'R':
        return r_matrix
    return r_matrix.conj().T @ _phase_gate(g.k - g.j)


def _check_state(state: np.ndarray, n: int) -> None:
    if state.shape[0] != 2 ** n:
        raise ValueError(f'state has leading dimension {state.shape[0]}, expected {2 ** n}')


def apply_gate(state: np.ndarray, g: Gate, n: int,
               r_matrix: np.ndarray = R_MATRIX) -> np.ndarray:
    """Apply ``g`` to a state of shape ``(N,)`` or to the columns of ``(N, M)``.

    Cost is O(N) per column; the input is not modified.
    """
    state = np.asarray(state)
    _check_state(state, n)
    if max(g.qubits) >= n:
        raise ValueError(f'gate {g} out of range for n={n}')
    rest = state.shape[1:]
    # tensor axis of qubit q is n-1-q (C order puts the high bit first)
    psi = state.reshape((2,) * n + rest)
    if g.kind == 'A':
        ax = n - 1 - g.j
        out = np.moveaxis(np.tensordot(HADAMARD, psi, axes=([1], [ax])), 0, ax)
        return out.reshape(state.shape)
    ak, aj = n - 1 - g.k, n - 1 - g.j
    if g.kind == 'T':
        return np.swapaxes(psi, ak, aj).reshape(state.shape).copy()
    if g.kind == 'B':
        out = state.astype(complex, copy=True).reshape(psi.shape)
        idx = [slice(None)] * out.ndim
        idx[ak] = idx[aj] = 1
        out[tuple(idx)] *= np.exp(1j * np.pi / 2 ** (g.k - g.j))
        return out.reshape(state.shape)
    local = gate_local_matrix(g, r_matrix).reshape(2, 2, 2, 2)
    out = np.tensordot(local, psi, axes=([2, 3], [ak, aj]))
    return np.moveaxis(out, (0, 1), (ak, aj)).reshape(state.shape)


def apply_circuit(state: np.ndarray, c: Circuit, start: int = 0,
                  stop: int | None = None) -> np.ndarray:
    """Apply gates ``start+1 .. stop`` (1-based), i.e. ``U(stop, start)``."""
    for g in c.gates[start:stop]:
        state = apply_gate(state, g, c.n)
    return state


def embed_gate(g: Gate, n: int, r_matrix: np.ndarray = R_MATRIX) -> np.ndarray:
    """Full ``N x N`` matrix of ``g`` acting on ``n`` qubits."""
    return apply_gate(np.eye(2 ** n, dtype=complex), g, n, r_matrix)


def _build(n: int, improved: bool) -> Circuit:
    if n < 2:
        raise ValueError(f'need n >= 2 qubits, got {n}')
    gates = []
    for j in range(n - 1, -1, -1):
        block = range(n - 1, j, -1)
        if improved:
            gates += [Gate('G', j, k) for k in block]
            gates += [Gate('R', j, k) for k in block]
        else:
            gates += [Gate('B', j, k) for k in block]
        gates.append(Gate('A', j))
    gates += [Gate('T', j, n - 1 - j) for j in range(n // 2 - 1, -1, -1)]
    return Circuit(n, tuple(gates), 'IQFT' if improved else 'QFT')


def build_qft(n: int) -> Circuit:
    """Textbook QFT: per qubit ``j`` from the top, its B-block then ``A_j``;
    transpositions last."""
    return _build(n, improved=False)


def build_iqft(n: int) -> Circuit:
    """QFT with every B-block ``B_{j,n-1}..B_{j,j+1}`` replaced by
    ``G_{j,n-1}..G_{j,j+1}`` followed by ``R_{j,n-1}..R_{j,j+1}``."""
    return _build(n, improved=True)


def circuit_unitary(c: Circuit, start: int = 0, stop: int | None = None) -> np.ndarray:
    """``U(stop, start)``; the full algorithm ``U(T, 0)`` by default."""
    return apply_circuit(np.eye(c.dim, dtype=complex), c, start, stop)


def partial_products(c: Circuit):
    """Yield ``U(t, 0)`` for ``t = 0..T``."""
    w = np.eye(c.dim, dtype=complex)
    yield w
    for g in c.gates:
        w = apply_gate(w, g, c.n)
        yield w


# bytes of cached U(t', 0) operators held at once by partial_trace_table
CACHE_BYTES = 1 << 28


def _trace_block(c: Circuit, lo: int, hi: int) -> np.ndarray:
    """Columns ``t' = lo..hi-1`` of the trace table from one forward sweep."""
    T = len(c)
    out = np.zeros((T + 1, hi - lo), dtype=complex)
    cached = []
    for t, w in enumerate(partial_products(c)):
        if lo <= t < hi:
            cached.append(w)
        for i, wp in enumerate(cached):
            out[t, i] = np.vdot(wp, w)
    return out


def partial_trace_table(c: Circuit, threads: int = 1) -> PartialTraceTable:
    """All ``tr U(t, t')`` via ``tr U(t, t') = tr(U(t', 0)^dagger U(t, 0))``.

    Start points ``t'`` are processed in blocks small enough that their
    cached ``U(t', 0)`` fit in ``CACHE_BYTES``; each block costs one sweep
    through the circuit.  Blocks are independent, so ``threads > 1`` runs
    them concurrently with identical results.  The diagonal is set to ``N``
    exactly.
    """
    T = len(c)
    per_block = max(1, CACHE_BYTES // (16 * c.dim ** 2 * max(1, threads)))
    bounds = [(lo, min(lo + per_block, T + 1)) for lo in range(0, T + 1, per_block)]
    if threads > 1 and len(bounds) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as pool:
            blocks = list(pool.map(lambda b: _trace_block(c, *b), bounds))
    else:
        blocks = [_trace_block(c, *b) for b in bounds]
    values = np.concatenate(blocks, axis=1)
    values[np.triu_indices(T + 1, 1)] = 0
    np.fill_diagonal(values, c.dim)
    return PartialTraceTable(T, values)


def dft_matrix(n: int) -> np.ndarray:
    """Entry ``(k, j) = exp(2 pi i j k / N) / sqrt(N)``, built from the formula."""
    if n < 1:
        raise ValueError(f'need n >= 1, got {n}')
    N = 2 ** n
    jk = np.outer(np.arange(N), np.arange(N)) % N
    return np.exp(2j * np.pi * jk / N) / np.sqrt(N)
