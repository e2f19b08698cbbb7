"""Dense complex kernels, GUE sampling and reproducible random streams.

Operators are plain ``numpy`` complex arrays.  The only wrapped type is
:class:`HermitianPerturbation`, which carries a realization label next to
the matrix so ensembles can be traced back to their seeds.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    'SeededRng', 'HermitianPerturbation', 'derive_seed', 'matmul', 'adjoint',
    'trace_inner', 'sample_gue', 'expm_phase', 'random_register_state',
    'is_hermitian', 'HERMITIAN_ATOL',
]

#: Per-entry tolerance for accepting a matrix as Hermitian.
HERMITIAN_ATOL = 1e-12


@dataclass(frozen=True)
class SeededRng:
    """Counter-style random stream identified by ``(master_seed, stream_id)``.

    The generator is ``numpy.random.Generator(PCG64(SeedSequence(master_seed,
    spawn_key=stream_id)))``.  ``SeedSequence`` hashes its entropy and spawn
    key through a fixed avalanche mixer, and ``PCG64`` output is bit-identical
    across platforms, so a stream id always yields the same draws.

    ``stream_id`` is a tuple of non-negative ints; :meth:`child` appends one
    element to it.  Streams are never shared between realizations, which is
    what keeps results independent of worker count.
    """

    master_seed: int
    stream_id: tuple[int, ...] = ()
    _generator: np.random.Generator | None = field(default=None, init=False,
                                                   repr=False, compare=False)

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(self.master_seed, spawn_key=self.stream_id)
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, purpose: int) -> SeededRng:
        return SeededRng(self.master_seed, self.stream_id + (int(purpose),))

    @property
    def draws(self) -> np.random.Generator:
        """Stateful generator shared by consecutive draws on this object."""
        if self._generator is None:
            object.__setattr__(self, '_generator', self.generator())
        return self._generator


def derive_seed(master: int, stream: int) -> SeededRng:
    """Return the stream ``stream`` of master seed ``master``.

    ``master`` is reduced modulo 2**64 so any Python int is accepted.
    """
    if stream < 0:
        raise ValueError(f'stream must be non-negative, got {stream}')
    return SeededRng(int(master) % 2**64, (int(stream),))


@dataclass(frozen=True)
class HermitianPerturbation:
    matrix: np.ndarray
    label: str = ''

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f'perturbation must be square, got shape {m.shape}')
        if not np.all(np.isfinite(m)):
            raise ValueError('perturbation has non-finite entries')
        if not is_hermitian(m):
            raise ValueError('perturbation is not Hermitian')
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, 'matrix', m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def second_moment(self) -> float:
        """``tr(V^2) / N``."""
        return float(np.real(trace_inner(self.matrix, self.matrix))) / self.dim

    def normalized(self) -> HermitianPerturbation:
        """Copy rescaled so that ``tr(V^2) / N == 1``."""
        return HermitianPerturbation(self.matrix / np.sqrt(self.second_moment()),
                                     self.label)

    def traceless(self) -> HermitianPerturbation:
        """Copy with the trace part ``tr(V)/N * I`` removed."""
        shift = np.trace(self.matrix).real / self.dim
        return HermitianPerturbation(self.matrix - shift * np.eye(self.dim), self.label)


def is_hermitian(a: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= atol * scale)


def _require_2d(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError(f'{name} must be a matrix, got shape {a.shape}')
    return a


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = _require_2d(a, 'a'), _require_2d(b, 'b')
    if a.shape[1] != b.shape[0]:
        raise ValueError(f'dimension mismatch: {a.shape} @ {b.shape}')
    return a @ b


def adjoint(a: np.ndarray) -> np.ndarray:
    return np.asarray(a).conj().T


def trace_inner(a: np.ndarray, b: np.ndarray) -> complex:
    """``tr(a^dagger b)`` in O(N^2) without forming the product."""
    a, b = _require_2d(a, 'a'), _require_2d(b, 'b')
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ValueError(f'trace_inner needs equal square shapes, got {a.shape}, {b.shape}')
    return complex(np.vdot(a, b))


def sample_gue(n_dim: int, rng: SeededRng | np.random.Generator,
               normalize: bool = False, label: str = '') -> HermitianPerturbation:
    """Draw a GUE matrix with ``<V_jk V_lm> = delta_jm delta_kl / N``.

    Diagonal entries are real with variance ``1/N``; off-diagonal real and
    imaginary parts each have variance ``1/(2N)``.  With ``normalize`` the
    sample is rescaled to ``tr(V^2)/N = 1`` exactly.
    """
    if n_dim < 2:
        raise ValueError(f'n_dim must be >= 2, got {n_dim}')
    gen = rng.draws if isinstance(rng, SeededRng) else rng
    a = gen.standard_normal((n_dim, n_dim)) + 1j * gen.standard_normal((n_dim, n_dim))
    v = HermitianPerturbation((a + a.conj().T) / (2.0 * np.sqrt(n_dim)), label)
    return v.normalized() if normalize else v


def expm_phase(v: HermitianPerturbation | np.ndarray, delta: float) -> np.ndarray:
    """``exp(-i delta V)`` by Hermitian eigendecomposition."""
    if not np.isfinite(delta):
        raise ValueError(f'delta must be finite, got {delta}')
    m = v.matrix if isinstance(v, HermitianPerturbation) else np.asarray(v, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or not is_hermitian(m):
        raise ValueError('expm_phase needs a square Hermitian matrix')
    if delta == 0:
        return np.eye(m.shape[0], dtype=complex)
    w, q = np.linalg.eigh(m)
    return (q * np.exp(-1j * delta * w)) @ q.conj().T


def random_register_state(n_dim: int, rng: SeededRng | np.random.Generator,
                          count: int | None = None) -> np.ndarray:
    """Haar-random unit vector(s): complex Gaussian amplitudes, normalized.

    With ``count`` given, returns an ``(n_dim, count)`` array of columns.
    """
    if n_dim < 2:
        raise ValueError(f'n_dim must be >= 2, got {n_dim}')
    gen = rng.draws if isinstance(rng, SeededRng) else rng
    shape = (n_dim,) if count is None else (n_dim, count)
    psi = gen.standard_normal(shape) + 1j * gen.standard_normal(shape)
    return psi / np.linalg.norm(psi, axis=0)
