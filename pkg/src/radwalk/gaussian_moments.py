"""Matrix-variate normal distributions on q x q matrices: exact sampling,
exact even-order moments via the pair-partition (Wick) sum, and moments of
sums of independent variables via the Hadamard-split expansion.

Conventions
-----------
A spec with covariance ``cov`` describes the law of a random matrix ``Z``
whose row-stacked vector ``vec(Z)`` is multivariate normal with covariance
``cov``; the entry ``cov[i*q + j, l*q + k]`` is Cov(Z_ij, Z_lk).  Moment
indices are tuples of 0-based (row, col) pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from math import factorial

import numpy as np

from .combinatorics import multiset_perms, pair_blocks
from .errors import BadArity, NotPSD, SizeOverflow
from .kron_algebra import unvec, vec
from .matrix_core import DEFAULT_PSD_TOL, sym_eig, symmetrize

__all__ = [
    "DENSE_AXIS_CAP",
    "MatrixNormalSpec",
    "MomentTensor",
    "sample_matrix_normal",
    "word_pair_product",
    "wick_moment",
    "moment_tensor",
    "sum_moment",
]

# Dense moment tensors are materialized only up to this many entries per
# axis; larger orders fall back to the indexed accessor.
DENSE_AXIS_CAP = 4096


@dataclass(frozen=True)
class MatrixNormalSpec:
    """Mean matrix and q^2 x q^2 covariance defining a normal law on q x q matrices."""

    q: int
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        q = int(self.q)
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if q < 1:
            raise BadArity(f"q must be >= 1, got {q}")
        if mean.shape != (q, q):
            raise BadArity(f"mean must be {q}x{q}, got {mean.shape}")
        if cov.shape != (q * q, q * q):
            raise BadArity(f"cov must be {q * q}x{q * q}, got {cov.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("spec entries must be finite")
        cov = symmetrize(cov)
        mean = mean.copy()
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def centered(self) -> bool:
        return bool(np.all(self.mean == 0.0))


def _covariance_factor(cov: np.ndarray, tol: float = DEFAULT_PSD_TOL) -> np.ndarray:
    """Matrix L with L L' = cov: Cholesky when possible, eigenvalue clamping otherwise."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    w, v = sym_eig(cov)
    floor = -tol * float(np.linalg.norm(cov))
    if w[-1] < floor:
        raise NotPSD(f"covariance eigenvalue {w[-1]:.3e} below tolerance floor {floor:.3e}")
    return v * np.sqrt(np.clip(w, 0.0, None))


def sample_matrix_normal(spec: MatrixNormalSpec, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw from the law: mean + unvec(L g) with L L' = cov.

    Returns a (q, q) matrix, or a (size, q, q) batch when ``size`` is given.
    """
    q = spec.q
    lfac = _covariance_factor(spec.cov)
    m = 1 if size is None else int(size)
    g = rng.standard_normal((m, q * q))
    z = g @ lfac.T + vec(spec.mean)
    return unvec(z[0], q, q) if size is None else z.reshape(m, q, q)


def _flat(pair: tuple[int, int], q: int) -> int:
    i, j = pair
    if not (0 <= i < q and 0 <= j < q):
        raise BadArity(f"index pair {pair} outside 0..{q - 1}")
    return i * q + j


def word_pair_product(cov: np.ndarray, index_pairs, word) -> float:
    """Contribution of one pairing word to the Wick sum.

    The word groups the k positions of ``index_pairs`` into two-element
    blocks; the contribution is the product over blocks of the covariance
    entry picked out by the block's two (row, col) pairs.
    """
    q2 = cov.shape[0]
    q = int(round(q2 ** 0.5))
    pairs = tuple((int(i), int(j)) for i, j in index_pairs)
    if len(word) != len(pairs):
        raise BadArity("word length and index length differ")
    out = 1.0
    for p1, p2 in pair_blocks(word):
        out *= cov[_flat(pairs[p1], q), _flat(pairs[p2], q)]
    return float(out)


_PAIR_WORDS_CACHE: dict[int, tuple[tuple[int, ...], ...]] = {}


def _pair_words(u: int) -> tuple[tuple[int, ...], ...]:
    if u not in _PAIR_WORDS_CACHE:
        _PAIR_WORDS_CACHE[u] = tuple(multiset_perms((2,) * u))
    return _PAIR_WORDS_CACHE[u]


def _require_centered(spec: MatrixNormalSpec) -> None:
    if not spec.centered:
        raise ValueError("moment formulas require a centered spec (mean 0)")


def wick_moment(spec: MatrixNormalSpec, index_pairs) -> float:
    """E[Z_{i1 j1} * ... * Z_{ik jk}] for a centered spec.

    Zero for odd k; for k = 2u the pairing words over (2,...,2) are summed
    and divided by u! (each pairing is hit once per block relabeling).
    """
    _require_centered(spec)
    pairs = tuple((int(i), int(j)) for i, j in index_pairs)
    k = len(pairs)
    if k == 0:
        return 1.0
    if k % 2 == 1:
        return 0.0
    u = k // 2
    total = 0.0
    for word in _pair_words(u):
        total += word_pair_product(spec.cov, pairs, word)
    return total / factorial(u)


@dataclass
class MomentTensor:
    """Order-k moment of a centered q x q matrix law.

    Dense storage (q^k x q^k) is kept when small enough; the indexed
    accessor works either way and agrees with the dense entries.
    """

    q: int
    k: int
    _spec: MatrixNormalSpec = field(repr=False)
    dense: np.ndarray | None = None

    def __getitem__(self, index_pairs) -> float:
        pairs = tuple((int(i), int(j)) for i, j in index_pairs)
        if len(pairs) != self.k:
            raise BadArity(f"index must have {self.k} pairs, got {len(pairs)}")
        if self.dense is not None:
            row = self._pack([i for i, _ in pairs])
            col = self._pack([j for _, j in pairs])
            return float(self.dense[row, col])
        return wick_moment(self._spec, pairs)

    def _pack(self, digits) -> int:
        out = 0
        for d in digits:
            if not 0 <= d < self.q:
                raise BadArity(f"index digit {d} outside 0..{self.q - 1}")
            out = out * self.q + d
        return out

    def as_matrix(self) -> np.ndarray:
        if self.dense is None:
            raise SizeOverflow(
                f"moment tensor with q^k = {self.q ** self.k} per axis exceeds the dense cap {DENSE_AXIS_CAP}"
            )
        return self.dense


def _dense_from_entry(q: int, k: int, entry) -> np.ndarray:
    side = q**k
    out = np.empty((side, side))
    rows = list(product(range(q), repeat=k))
    for r, ridx in enumerate(rows):
        for c, cidx in enumerate(rows):
            out[r, c] = entry(tuple(zip(ridx, cidx)))
    return out


def moment_tensor(spec: MatrixNormalSpec, k: int) -> MomentTensor:
    """Order-k moment tensor of a centered spec, entrywise through the Wick sum."""
    _require_centered(spec)
    if k < 1:
        raise BadArity(f"k must be >= 1, got {k}")
    q = spec.q
    if q**k > DENSE_AXIS_CAP:
        return MomentTensor(q=q, k=k, _spec=spec, dense=None)
    if k % 2 == 1:
        return MomentTensor(q=q, k=k, _spec=spec, dense=np.zeros((q**k, q**k)))
    # identical pair multisets share one Wick value
    memo: dict[tuple, float] = {}

    def entry(pairs) -> float:
        key = tuple(sorted(pairs))
        if key not in memo:
            memo[key] = wick_moment(spec, pairs)
        return memo[key]

    return MomentTensor(q=q, k=k, _spec=spec, dense=_dense_from_entry(q, k, entry))


def sum_moment(spec1: MatrixNormalSpec, spec2: MatrixNormalSpec, k: int) -> MomentTensor:
    """Order-k moment of Z1 + Z2 for independent centered variables.

    Computed as the Hadamard-split double sum over split sizes l and words
    mixing the two variables: each word contributes (moments of Z1 at its
    slots) entrywise-times (moments of Z2 at the rest).  Equals the moment
    tensor of the summed covariances.
    """
    _require_centered(spec1)
    _require_centered(spec2)
    if spec1.q != spec2.q:
        raise BadArity("specs must share q")
    q = spec1.q
    if q**k > DENSE_AXIS_CAP:
        raise SizeOverflow(f"q^k = {q ** k} per axis exceeds the dense cap {DENSE_AXIS_CAP}")
    side = q**k
    acc = np.zeros((side, side))
    rows = list(product(range(q), repeat=k))
    memo1: dict[tuple, float] = {}
    memo2: dict[tuple, float] = {}

    def part_moment(spec, memo, pairs) -> float:
        key = tuple(sorted(pairs))
        if key not in memo:
            memo[key] = wick_moment(spec, pairs)
        return memo[key]

    for split in range(k + 1):
        for word in multiset_perms((split, k - split)):
            slots1 = [t for t, sym in enumerate(word) if sym == 1]
            slots2 = [t for t, sym in enumerate(word) if sym == 2]
            for r, ridx in enumerate(rows):
                for c, cidx in enumerate(rows):
                    pairs = tuple(zip(ridx, cidx))
                    f1 = part_moment(spec1, memo1, tuple(pairs[t] for t in slots1))
                    if f1 == 0.0:
                        continue
                    f2 = part_moment(spec2, memo2, tuple(pairs[t] for t in slots2))
                    acc[r, c] += f1 * f2
    return MomentTensor(q=q, k=k, _spec=MatrixNormalSpec(q, np.zeros((q, q)), spec1.cov + spec2.cov), dense=acc)
