"""Dense vectors, sparse matrices, weighted norms and seeded randomness.

Dense vectors are float64 numpy arrays and sparse matrices are scipy CSR
matrices. Randomness comes from a SplitMix64 stream so that identical seeds
give identical sequences on every platform.
"""

import numpy as np
import scipy.sparse as sp

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_TWO_POW_M53 = 2.0**-53


def _mix64(z: int) -> int:
    """SplitMix64 output function on a Python int."""
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


class Rng:
    """Portable SplitMix64 generator.

    Every draw is derived from 64-bit words of the stream, so results depend
    only on the seed and on the order of calls. Not thread-safe: give each
    worker its own stream via ``split``.
    """

    def __init__(self, seed: int):
        self._state = seed & MASK64

    @property
    def state(self) -> int:
        return self._state

    def next_u64(self) -> int:
        """Draw a single 64-bit word."""
        self._state = (self._state + GOLDEN_GAMMA) & MASK64
        return _mix64(self._state)

    def words(self, count: int) -> np.ndarray:
        """Draw ``count`` consecutive words as a uint64 array."""
        if count <= 0:
            return np.zeros(0, dtype=np.uint64)
        steps = np.arange(1, count + 1, dtype=np.uint64)
        # uint64 arithmetic wraps modulo 2**64, which is what SplitMix64 needs
        z = np.uint64(self._state) + steps * np.uint64(GOLDEN_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
        self._state = (self._state + count * GOLDEN_GAMMA) & MASK64
        return z

    def uniform(self, size: int) -> np.ndarray:
        """Uniform floats in [0, 1) with 53 random bits each."""
        return (self.words(size) >> np.uint64(11)).astype(np.float64) * _TWO_POW_M53

    def normal(self, size: int) -> np.ndarray:
        """Standard normal draws via Box-Muller."""
        pairs = (size + 1) // 2
        u = self.uniform(2 * pairs)
        radius = np.sqrt(-2.0 * np.log1p(-u[:pairs]))
        angle = 2.0 * np.pi * u[pairs:]
        return np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:size]

    def permutation(self, n: int) -> np.ndarray:
        """Uniformly random permutation of range(n)."""
        return np.argsort(self.uniform(n), kind="stable")

    def split(self, sub_seed: int) -> "Rng":
        """Independent child stream; does not advance this generator."""
        return Rng(_mix64((self._state ^ _mix64((sub_seed + 1) * GOLDEN_GAMMA & MASK64)) & MASK64))


def _check_same_dim(x: np.ndarray, d: np.ndarray) -> None:
    if x.shape != d.shape:
        raise ValueError(f"Dimension mismatch: vector has {x.shape}, weights have {d.shape}")


def weighted_norm(x: np.ndarray, d: np.ndarray) -> float:
    """Weighted Euclidean norm sqrt(sum_i d_i x_i^2) for a positive diagonal d."""
    _check_same_dim(x, d)
    return float(np.sqrt(np.dot(d, x * x)))


def weighted_dual_norm(x: np.ndarray, d: np.ndarray) -> float:
    """Dual of ``weighted_norm``: sqrt(sum_i x_i^2 / d_i)."""
    _check_same_dim(x, d)
    return float(np.sqrt(np.dot(x, x / d)))


def rademacher_block(dim: int, count: int, rng: Rng) -> np.ndarray:
    """Draw ``count`` Rademacher vectors as the rows of a (count, dim) array.

    Each vector consumes ceil(dim/64) words and takes its signs from the bits
    of those words, least significant bit first (1 -> +1, 0 -> -1). The result
    equals ``count`` consecutive calls to ``rademacher`` on the same stream.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    per_vector = (dim + 63) // 64
    words = rng.words(per_vector * count).reshape(count, per_vector)
    shifts = np.arange(64, dtype=np.uint64)
    bits = (words[:, :, None] >> shifts) & np.uint64(1)
    bits = bits.reshape(count, per_vector * 64)[:, :dim]
    return 2.0 * bits.astype(np.float64) - 1.0


def rademacher(dim: int, rng: Rng) -> np.ndarray:
    """Random vector with independent +1/-1 entries."""
    return rademacher_block(dim, 1, rng)[0]


def spmv(a: sp.csr_matrix, v: np.ndarray) -> np.ndarray:
    """Sparse matrix-vector product A v."""
    if a.shape[1] != v.shape[0]:
        raise ValueError(f"Dimension mismatch: matrix is {a.shape}, vector has {v.shape[0]}")
    return np.asarray(a @ v, dtype=np.float64)


def spmv_t(a: sp.csr_matrix, v: np.ndarray) -> np.ndarray:
    """Transposed product A^T v without materializing A^T."""
    if a.shape[0] != v.shape[0]:
        raise ValueError(f"Dimension mismatch: matrix is {a.shape}, vector has {v.shape[0]}")
    return np.asarray(a.T @ v, dtype=np.float64)


def csr_from_rows(rows: list[dict[int, float]], n_cols: int) -> sp.csr_matrix:
    """Build a CSR matrix from per-row {column: value} maps (0-based columns)."""
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for row in rows:
        for col in sorted(row):
            indices.append(col)
            data.append(row[col])
        indptr.append(len(indices))
    return sp.csr_matrix(
        (
            np.asarray(data, dtype=np.float64),
            np.asarray(indices, dtype=np.int64),
            np.asarray(indptr, dtype=np.int64),
        ),
        shape=(len(rows), n_cols),
    )
