"""Radial laws on the PSD cone, their exact moment functionals, and
samplers for the lifted laws on p x q matrices.

A law is either a finite mixture of PSD "radius" atoms (any q) or, for
q = 1, a named parametric family with closed-form moments.  Both carry
exact second and fourth moments by construction, so every covariance
prediction downstream is exact rather than estimated.

Sampling the lift draws a radius r from the law and then a uniform point
on the orbit {x : sqrt(x'x) = r} via the Gaussian polar construction
Y = G (G'G)^{-1/2}, X = Y r, which inherits orthogonal invariance from G
and needs only q x q eigenwork per draw.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadArity, NotPSD, RankDeficient
from .matrix_core import gram, psd_sqrt, symmetrize

__all__ = [
    "RadialLaw",
    "RadialSampleBatch",
    "r2",
    "r4_scalar",
    "sigma_nu",
    "t_nu",
    "phi",
    "uniform_sphere_cosine",
    "sample_uniform_orbit",
    "sample_radial",
    "sample_radial_batch",
    "normalize_kappa",
    "kappa_weight",
    "kappa_all_rows_even",
    "radial_moment_mc",
]

_WEIGHT_TOL = 1e-12
_RADIUS_EIG_FLOOR = -1e-10


class RadialLaw:
    """Probability law on the PSD cone of q x q matrices.

    Use the classmethod constructors.  Discrete laws store ``weights`` and
    ``radii``; the continuous q = 1 family ``uniform_interval`` stores its
    endpoints and exposes the same exact moment interface.  All supported
    laws are bounded, so fourth moments are finite by construction.
    """

    def __init__(self, q, family, weights=None, radii=None, params=None):
        self.q = int(q)
        self.family = family
        self.params = dict(params) if params else {}
        if weights is not None:
            weights = np.asarray(weights, dtype=np.float64)
            radii = np.asarray(radii, dtype=np.float64)
            if radii.shape != (weights.size, self.q, self.q):
                raise BadArity(f"radii must have shape (n, {self.q}, {self.q}), got {radii.shape}")
            if np.any(weights <= 0):
                raise ValueError("atom weights must be positive")
            if abs(weights.sum() - 1.0) > _WEIGHT_TOL:
                raise ValueError(f"atom weights sum to {weights.sum()!r}, not 1")
            for a, r in enumerate(radii):
                if not np.array_equal(r, r.T):
                    raise NotPSD(f"atom {a}: radius is not symmetric")
                if np.linalg.eigvalsh(r).min() < _RADIUS_EIG_FLOOR:
                    raise NotPSD(f"atom {a}: radius has a negative eigenvalue")
            weights.flags.writeable = False
            radii.flags.writeable = False
        self.weights = weights
        self.radii = radii
        self._cum = None if weights is None else np.cumsum(weights)

    @classmethod
    def from_atoms(cls, radii, weights) -> "RadialLaw":
        """Finite discrete law with PSD matrix radii."""
        radii = np.asarray(radii, dtype=np.float64)
        if radii.ndim == 1:  # scalar radii for q = 1
            radii = radii.reshape(-1, 1, 1)
        return cls(radii.shape[1], "atoms", weights=weights, radii=radii)

    @classmethod
    def point_mass(cls, radius: float) -> "RadialLaw":
        """q = 1 point mass at a single nonnegative radius."""
        return cls(1, "point_mass", weights=[1.0], radii=np.array([[[float(radius)]]]),
                   params={"radius": float(radius)})

    @classmethod
    def two_point(cls, r_a: float, p_a: float, r_b: float) -> "RadialLaw":
        """q = 1 two-point law: radius r_a with probability p_a, else r_b."""
        return cls(1, "two_point", weights=[p_a, 1.0 - p_a],
                   radii=np.array([[[float(r_a)]], [[float(r_b)]]]),
                   params={"r_a": float(r_a), "p_a": float(p_a), "r_b": float(r_b)})

    @classmethod
    def uniform_interval(cls, a: float, b: float) -> "RadialLaw":
        """q = 1 radius uniform on [a, b], 0 <= a < b, with closed-form moments."""
        a, b = float(a), float(b)
        if not 0.0 <= a < b:
            raise ValueError(f"need 0 <= a < b, got a={a}, b={b}")
        return cls(1, "uniform_interval", params={"a": a, "b": b})

    def moment_scalar(self, k: int) -> float:
        """E[r^k] for q = 1 laws."""
        if self.q != 1:
            raise BadArity("scalar moments only exist for q = 1")
        if self.weights is not None:
            return float(np.sum(self.weights * self.radii[:, 0, 0] ** k))
        a, b = self.params["a"], self.params["b"]
        return float((b ** (k + 1) - a ** (k + 1)) / ((k + 1) * (b - a)))

    def draw_radii(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """(size, q, q) radii drawn by inverse CDF over atoms (or the closed form)."""
        if self.weights is not None:
            idx = np.searchsorted(self._cum, rng.random(size), side="right")
            idx = np.minimum(idx, self.weights.size - 1)
            return self.radii[idx]
        a, b = self.params["a"], self.params["b"]
        return rng.uniform(a, b, size).reshape(size, 1, 1)

    def to_config(self) -> dict:
        """Plain serializable record; radii as row-major entry lists."""
        if self.family == "atoms":
            return {
                "q": self.q,
                "atoms": [
                    {"weight": float(w), "radius": [float(v) for v in r.reshape(-1)]}
                    for w, r in zip(self.weights, self.radii)
                ],
            }
        return {"family": self.family, "params": dict(self.params)}

    @classmethod
    def from_config(cls, cfg: dict) -> "RadialLaw":
        if "family" in cfg:
            family = cfg["family"]
            params = cfg.get("params", {})
            makers = {
                "point_mass": cls.point_mass,
                "two_point": cls.two_point,
                "uniform_interval": cls.uniform_interval,
            }
            if family not in makers:
                raise ValueError(f"unknown law family {family!r}")
            return makers[family](**params)
        q = int(cfg["q"])
        atoms = cfg["atoms"]
        if not atoms:
            raise ValueError("atoms list is empty")
        weights, radii = [], []
        for a, atom in enumerate(atoms):
            entries = np.asarray(atom["radius"], dtype=np.float64)
            if entries.size != q * q:
                raise ValueError(f"atoms[{a}].radius: expected {q * q} entries, got {entries.size}")
            r = entries.reshape(q, q)
            if np.abs(r - r.T).max() > 1e-12 * max(1.0, np.abs(r).max()):
                raise ValueError(f"atoms[{a}].radius: matrix is not symmetric")
            weights.append(float(atom["weight"]))
            radii.append(r)
        return cls.from_atoms(np.array(radii), weights)

    def __repr__(self):
        if self.family == "atoms":
            return f"RadialLaw(atoms, q={self.q}, n={self.weights.size})"
        return f"RadialLaw({self.family}, {self.params})"


@dataclass(frozen=True)
class RadialSampleBatch:
    """A batch of lifted samples with the radii that generated them."""

    p: int
    q: int
    count: int
    samples: np.ndarray  # (count, p, q)
    radii: np.ndarray  # (count, q, q)
    seed: object = None


def r2(nu: RadialLaw) -> np.ndarray:
    """Second-moment matrix E[r^2] of the law, exact from atoms or closed form."""
    if nu.weights is not None:
        return symmetrize(np.einsum("a,aij,ajk->ik", nu.weights, nu.radii, nu.radii))
    return np.array([[nu.moment_scalar(2)]])


def r4_scalar(nu: RadialLaw) -> float:
    """E[r^4] for q = 1 laws."""
    return nu.moment_scalar(4)


def _squared_vecs(nu: RadialLaw) -> np.ndarray:
    return np.einsum("aij,ajk->aik", nu.radii, nu.radii).reshape(nu.weights.size, nu.q * nu.q)


def sigma_nu(nu: RadialLaw) -> np.ndarray:
    """Covariance of vec(r^2) under the law, a q^2 x q^2 PSD matrix.

    Independent of the lift dimension by construction.
    """
    if nu.weights is None:
        return np.array([[nu.moment_scalar(4) - nu.moment_scalar(2) ** 2]])
    vecs = _squared_vecs(nu)
    mean = nu.weights @ vecs
    second = np.einsum("a,ai,aj->ij", nu.weights, vecs, vecs)
    return symmetrize(second - np.outer(mean, mean))


def t_nu(nu: RadialLaw) -> np.ndarray:
    """Gaussian limit covariance T = T1 + T2 built entrywise from E[r^2].

    T1[(i,j),(k,l)] = r2[i,k] r2[j,l] and T2[(i,j),(k,l)] = r2[i,l] r2[j,k],
    with (i,j) flattened row-major.
    """
    m = r2(nu)
    q = nu.q
    t1 = np.einsum("ik,jl->ijkl", m, m).reshape(q * q, q * q)
    t2 = np.einsum("il,jk->ijkl", m, m).reshape(q * q, q * q)
    return symmetrize(t1 + t2)


def phi(x) -> np.ndarray:
    """Radial part sqrt(x'x) of a p x q matrix."""
    return psd_sqrt(gram(x))


def uniform_sphere_cosine(p: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """First coordinate of a uniform point on the unit sphere in R^p.

    For p >= 2, (u + 1)/2 follows Beta((p-1)/2, (p-1)/2); for p = 1 the
    sphere is {-1, +1}.
    """
    if p < 1:
        raise BadArity(f"p must be >= 1, got {p}")
    if p == 1:
        return np.where(rng.random(size) < 0.5, -1.0, 1.0)
    return 2.0 * rng.beta((p - 1) / 2.0, (p - 1) / 2.0, size) - 1.0


_RANK_TOL = 1e-12
_MAX_RESAMPLES = 5


def _orbit_batch(p: int, radii: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """(m, p, q) uniform draws on the orbits of the given radii."""
    m, q, _ = radii.shape
    if p < q:
        raise BadArity(f"need p >= q, got p={p}, q={q}")
    g = rng.standard_normal((m, p, q))
    for _ in range(_MAX_RESAMPLES):
        gm = np.einsum("mpi,mpj->mij", g, g)
        w, v = np.linalg.eigh(gm)
        bad = w[:, 0] <= _RANK_TOL * w[:, -1]
        if not bad.any():
            break
        g[bad] = rng.standard_normal((int(bad.sum()), p, q))
    else:
        raise RankDeficient(f"Gram matrix stayed singular after {_MAX_RESAMPLES} resamples (p={p}, q={q})")
    inv_sqrt = np.einsum("mij,mj,mkj->mik", v, 1.0 / np.sqrt(w), v)
    y = g @ inv_sqrt
    return y @ radii


def sample_uniform_orbit(p: int, r, rng: np.random.Generator) -> np.ndarray:
    """One uniform draw on the orbit {x : sqrt(x'x) = r}."""
    r = np.atleast_2d(np.asarray(r, dtype=np.float64))
    return _orbit_batch(p, r[None, :, :], rng)[0]


def sample_radial(p: int, nu: RadialLaw, rng: np.random.Generator) -> np.ndarray:
    """One draw from the unique radial lift of the law to p x q matrices."""
    radii = nu.draw_radii(1, rng)
    return _orbit_batch(p, radii, rng)[0]


def sample_radial_batch(p: int, nu: RadialLaw, count: int, rng: np.random.Generator,
                        seed=None) -> RadialSampleBatch:
    """Batch of lifted draws, keeping the radii for exact per-sample checks."""
    radii = nu.draw_radii(count, rng)
    samples = _orbit_batch(p, radii, rng)
    return RadialSampleBatch(p=p, q=nu.q, count=count, samples=samples, radii=radii, seed=seed)


def normalize_kappa(kappa) -> dict[tuple[int, int], int]:
    """Canonicalize a sparse matrix multi-index to {(row, col): exponent}."""
    items = kappa.items() if isinstance(kappa, dict) else kappa
    out: dict[tuple[int, int], int] = {}
    for key, e in items:
        i, j = (int(key[0]), int(key[1]))
        e = int(e)
        if e < 0:
            raise BadArity("exponents must be nonnegative")
        if e == 0:
            continue
        if i < 0 or j < 0:
            raise BadArity("index entries must be nonnegative")
        out[(i, j)] = out.get((i, j), 0) + e
    return out


def kappa_weight(kappa) -> int:
    return sum(normalize_kappa(kappa).values())


def kappa_all_rows_even(kappa) -> bool:
    """True when every row sum of the multi-index is even."""
    rows: dict[int, int] = {}
    for (i, _), e in normalize_kappa(kappa).items():
        rows[i] = rows.get(i, 0) + e
    return all(s % 2 == 0 for s in rows.values())


def radial_moment_mc(p: int, nu: RadialLaw, kappa, trials: int, rng: np.random.Generator,
                     chunk_size: int = 32768) -> tuple[float, float]:
    """Monte Carlo estimate of the monomial moment E[prod X_ij^kappa_ij]
    under the lifted law, with its standard error."""
    kap = normalize_kappa(kappa)
    weight = sum(kap.values())
    if weight == 0 or weight > 8:
        raise BadArity(f"need 1 <= |kappa| <= 8, got {weight}")
    if trials < 1000:
        raise BadArity(f"need trials >= 1000, got {trials}")
    for i, j in kap:
        if i >= p or j >= nu.q:
            raise BadArity(f"kappa index ({i},{j}) outside {p}x{nu.q}")
    vals = np.empty(trials)
    done = 0
    while done < trials:
        m = min(chunk_size, trials - done)
        x = sample_radial_batch(p, nu, m, rng).samples
        mono = np.ones(m)
        for (i, j), e in kap.items():
            mono *= x[:, i, j] ** e
        vals[done : done + m] = mono
        done += m
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(trials))
    return est, se
