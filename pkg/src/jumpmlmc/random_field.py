"""Gaussian random fields with Matérn covariance on regular lattices.

Sampling uses circulant embedding: the covariance matrix on a periodically
padded lattice is diagonalized by the 2-D FFT, so one field draw costs one
FFT of the padded grid.  Lattices are nested across levels (spacing halves),
which makes coarse fields exact restrictions of fine ones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import kv

from . import _kernels
from .streams import RandomStream

__all__ = [
    "CovarianceSpec",
    "SampleGrid",
    "GridField",
    "CirculantEmbedding",
    "EmbeddingError",
    "matern_cov",
    "build_embedding",
    "get_embedding",
    "sample_grf",
    "interpolate",
    "coarsen_nested",
]


class EmbeddingError(RuntimeError):
    """Raised when the padded covariance embedding stays indefinite."""


@dataclass(frozen=True)
class CovarianceSpec:
    """Matérn covariance parameters: smoothness, variance, correlation length."""

    nu: float
    sigma2: float
    chi: float

    def __post_init__(self):
        for name in ("nu", "sigma2", "chi"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0.0):
                raise ValueError(f"CovarianceSpec.{name} must be finite and > 0, got {v}")


@dataclass(frozen=True)
class SampleGrid:
    """Uniform (m+1) x (m+1) lattice on the closed unit square.

    ``m`` is the number of cells per side, so the spacing is ``1/m``.  With
    the requested maximum point distance ``eps``, ``m = ceil(1/eps)`` and the
    spacing never exceeds ``eps``.
    """

    m: int
    level_tag: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("SampleGrid.m must be >= 1")

    @classmethod
    def from_spacing(cls, eps: float, level_tag: int = 0) -> "SampleGrid":
        if not (eps > 0.0):
            raise ValueError("grid spacing must be positive")
        m = max(1, math.ceil(1.0 / eps - 1e-12))
        return cls(m=m, level_tag=level_tag)

    @property
    def spacing(self) -> float:
        return 1.0 / self.m

    @property
    def n(self) -> int:
        return self.m + 1

    def points(self) -> np.ndarray:
        """Lattice points, shape ((m+1)**2, 2), x varying slowest."""
        ax = np.linspace(0.0, 1.0, self.n)
        xx, yy = np.meshgrid(ax, ax, indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel()])


@dataclass(frozen=True)
class GridField:
    """Lattice samples of a field; value layout ``values[i, j] = W(i/m, j/m)``."""

    grid: SampleGrid
    values: np.ndarray

    def __post_init__(self):
        n = self.grid.n
        if self.values.shape != (n, n):
            raise ValueError(f"values shape {self.values.shape} != lattice ({n}, {n})")

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return interpolate(self, pts)


def matern_cov(r, spec: CovarianceSpec):
    """Matérn covariance at distance(s) ``r``.

    ``sigma2 * 2^(1-nu)/Gamma(nu) * (sqrt(2 nu) r / chi)^nu K_nu(sqrt(2 nu) r / chi)``,
    continuously extended by ``sigma2`` at ``r = 0``.
    """
    r_arr = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r_arr)) or np.any(r_arr < 0.0):
        raise ValueError("distances must be finite and non-negative")
    x = (math.sqrt(2.0 * spec.nu) / spec.chi) * r_arr
    out = np.full(r_arr.shape, spec.sigma2, dtype=float)
    pos = x > 0.0
    if np.any(pos):
        xp = x[pos]
        scale = spec.sigma2 * 2.0 ** (1.0 - spec.nu) / gamma_fn(spec.nu)
        with np.errstate(under="ignore"):
            out[pos] = scale * xp**spec.nu * kv(spec.nu, xp)
    # K_nu underflows to 0 for large arguments, which is the correct limit
    np.nan_to_num(out, copy=False, nan=0.0)
    if np.ndim(r) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class CirculantEmbedding:
    """Eigen-decomposition of the padded covariance circulant for one lattice."""

    grid: SampleGrid
    spec: CovarianceSpec
    padding: int
    sqrt_eigs: np.ndarray = field(repr=False)
    min_eig: float
    n_clipped: int

    @property
    def size(self) -> int:
        return self.sqrt_eigs.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return self.sqrt_eigs**2


_NEG_EIG_REL_TOL = 1e-8
_PADDINGS = (2, 4, 8)


def build_embedding(grid: SampleGrid, spec: CovarianceSpec) -> CirculantEmbedding:
    """Eigenvalues of the block-circulant extension of the lattice covariance.

    Starts at padding factor 2 and doubles up to 8.  Negative eigenvalues
    smaller in magnitude than ``1e-8 * max`` are clipped to zero; if larger
    ones persist at maximum padding the embedding is rejected.
    """
    last_min = None
    for pad in _PADDINGS:
        size = pad * grid.m
        idx = np.arange(size)
        d = np.minimum(idx, size - idx) * grid.spacing
        row = matern_cov(np.hypot(d[:, None], d[None, :]), spec)
        lam = np.fft.fft2(row).real
        lam_max = float(lam.max())
        lam_min = float(lam.min())
        last_min = lam_min
        if lam_min >= -_NEG_EIG_REL_TOL * lam_max:
            n_clipped = int(np.count_nonzero(lam < 0.0))
            return CirculantEmbedding(
                grid=grid,
                spec=spec,
                padding=pad,
                sqrt_eigs=np.sqrt(np.clip(lam, 0.0, None)),
                min_eig=lam_min,
                n_clipped=n_clipped,
            )
    raise EmbeddingError(
        f"covariance embedding not positive semi-definite after padding {_PADDINGS[-1]}: "
        f"min eigenvalue {last_min:.3e}"
    )


_EMBEDDING_CACHE: dict[tuple, CirculantEmbedding] = {}


def get_embedding(grid: SampleGrid, spec: CovarianceSpec) -> CirculantEmbedding:
    """Per-process cache of embeddings keyed by lattice size and parameters."""
    key = (grid.m, spec.nu, spec.sigma2, spec.chi)
    emb = _EMBEDDING_CACHE.get(key)
    if emb is None:
        emb = build_embedding(grid, spec)
        _EMBEDDING_CACHE[key] = emb
    if emb.grid.level_tag != grid.level_tag:
        emb = CirculantEmbedding(
            grid=grid,
            spec=emb.spec,
            padding=emb.padding,
            sqrt_eigs=emb.sqrt_eigs,
            min_eig=emb.min_eig,
            n_clipped=emb.n_clipped,
        )
    return emb


def sample_grf(embedding: CirculantEmbedding, rng: RandomStream | np.random.Generator) -> GridField:
    """One zero-mean Gaussian field realization on the embedding's lattice.

    Deterministic given the stream state: the (real, imaginary) white-noise
    pair is drawn in one call and only the real branch of the FFT sample is
    kept.
    """
    gen = rng.generator() if isinstance(rng, RandomStream) else rng
    size = embedding.size
    noise = gen.standard_normal((2, size, size))
    xi = noise[0] + 1j * noise[1]
    z = np.fft.ifft2(embedding.sqrt_eigs * xi) * size
    n = embedding.grid.n
    return GridField(grid=embedding.grid, values=np.ascontiguousarray(z.real[:n, :n]))


def interpolate(field: GridField, x) -> np.ndarray | float:
    """Piecewise-linear interpolation on the lattice triangulation.

    Each cell is split by its lower-left to upper-right diagonal; values are
    exact at lattice points.  Points outside the closed unit square are
    rejected.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if pts.shape[-1] != 2:
        raise ValueError("points must have two coordinates")
    if np.any(pts < -1e-12) or np.any(pts > 1.0 + 1e-12):
        raise ValueError("point outside the closed unit square")
    out = _kernels.interp_lattice(field.values, pts)
    if np.ndim(x) == 1:
        return float(out[0])
    return out


def coarsen_nested(fine: GridField) -> GridField:
    """Restriction of a field to the 2-eps sub-lattice (every other point)."""
    m = fine.grid.m
    if m % 2 != 0 or m < 2:
        raise ValueError(f"lattice with m={m} cells admits no 2x-coarser sub-lattice")
    coarse_grid = SampleGrid(m=m // 2, level_tag=fine.grid.level_tag - 1)
    return GridField(grid=coarse_grid, values=np.ascontiguousarray(fine.values[::2, ::2]))
