"""Exact-covariance fractional Brownian motion on a uniform grid.

Sampling uses a Cholesky factor of the increment covariance matrix (better
conditioned than the value covariance for H < 1/2), cached per (T, n, H).
Randomness comes from counter-based Philox streams with one stream per
(seed, stream tag, coordinate), so coordinate j of a path is unchanged when
the number of coordinates grows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "Grid",
    "GridPath",
    "HurstParams",
    "fbm_covariance",
    "inner_product_rect",
    "increment_gram",
    "sample_fbm",
    "sample_fbm_pair",
    "cameron_martin_direction",
]

# stream tags for the Philox key layout (seed, tag, coordinate)
STREAM_X = 0
STREAM_B = 1


@dataclass(frozen=True)
class Grid:
    """Uniform time grid t_k = k*T/n, k = 0..n."""

    T: float
    n: int

    def __post_init__(self):
        if not (self.T > 0 and np.isfinite(self.T)):
            raise ValueError(f"horizon T must be positive and finite, got {self.T}")
        if self.n < 1:
            raise ValueError(f"steps n must be >= 1, got {self.n}")

    @property
    def dt(self) -> float:
        return self.T / self.n

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) * (self.T / self.n)

    def restrict(self, factor: int) -> "Grid":
        if self.n % factor:
            raise ValueError(f"factor {factor} does not divide n={self.n}")
        return Grid(self.T, self.n // factor)


@dataclass
class GridPath:
    """Vector-valued path sampled at the grid points (shape (n+1, dims))."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.values.shape[0] != self.grid.n + 1:
            raise ValueError(
                f"values has {self.values.shape[0]} rows, grid needs {self.grid.n + 1}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("path values must be finite")

    @property
    def dims(self) -> int:
        return self.values.shape[1]

    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    def restrict(self, factor: int) -> "GridPath":
        """Subsample to a grid coarsened by ``factor`` (values, not re-sampled)."""
        return GridPath(self.grid.restrict(factor), self.values[::factor].copy())


@dataclass(frozen=True)
class HurstParams:
    """Hurst index H in (1/3, 1/2) with a variation exponent p > 1/H."""

    H: float
    p: float

    def __post_init__(self):
        if not (1.0 / 3.0 < self.H < 0.5):
            raise ValueError(f"H must lie in (1/3, 1/2), got {self.H}")
        if not self.p * self.H > 1.0:
            raise ValueError(f"need p*H > 1, got p={self.p}, H={self.H}")

    @classmethod
    def default(cls, H: float) -> "HurstParams":
        # midpoint of the admissible window (1/H, 3); p < 3 keeps 3/p > 1
        return cls(H, 0.5 * (1.0 / H + 3.0))


def fbm_covariance(s: float, t: float, H: float) -> float:
    """Covariance R(s, t) of one fBm coordinate."""
    if s < 0 or t < 0:
        raise ValueError(f"times must be nonnegative, got ({s}, {t})")
    return 0.5 * (abs(s) ** (2 * H) + abs(t) ** (2 * H) - abs(t - s) ** (2 * H))


def inner_product_rect(u: float, v: float, s: float, t: float, H: float) -> float:
    """Rectangular increment of R: equals E[dx_{uv} dx_{st}] for one coordinate."""
    if not (0 <= u <= v) or not (0 <= s <= t):
        raise ValueError(f"interval endpoints must be ordered, got [{u},{v}], [{s},{t}]")
    return (
        fbm_covariance(v, t, H)
        - fbm_covariance(v, s, H)
        - fbm_covariance(u, t, H)
        + fbm_covariance(u, s, H)
    )


@lru_cache(maxsize=16)
def increment_gram(T: float, n: int, H: float) -> np.ndarray:
    """Gram matrix of the n grid increments of one fBm coordinate."""
    dt = T / n
    # stationarity: E[dx_k dx_l] depends only on |k - l|
    lag = np.arange(n, dtype=np.float64)
    row = 0.5 * dt ** (2 * H) * (
        np.abs(lag + 1) ** (2 * H) - 2 * np.abs(lag) ** (2 * H) + np.abs(lag - 1) ** (2 * H)
    )
    idx = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
    return row[idx]


@lru_cache(maxsize=16)
def _increment_cholesky(T: float, n: int, H: float) -> np.ndarray:
    # lru_cache gives atomic-enough initialization under the GIL; concurrent
    # readers only ever see a fully built factor.
    gram = increment_gram(T, n, H)
    try:
        return np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"increment covariance not positive definite for H={H}"
        ) from exc


def _philox(seed: int, tag: int, coord: int) -> np.random.Generator:
    key = (int(seed) % (1 << 64)) * (1 << 64) + tag * (1 << 32) + coord
    return np.random.Generator(np.random.Philox(key=key))


def _sample(grid: Grid, H: float, dims: int, seed: int, tag: int) -> GridPath:
    chol = _increment_cholesky(grid.T, grid.n, H)
    values = np.zeros((grid.n + 1, dims))
    for j in range(dims):
        z = _philox(seed, tag, j).standard_normal(grid.n)
        values[1:, j] = np.cumsum(chol @ z)
    return GridPath(grid, values)


def sample_fbm(grid: Grid, hurst, dims: int = 1, seed: int = 0) -> GridPath:
    """Sample a ``dims``-coordinate fBm path with exact grid covariance.

    ``hurst`` may be a HurstParams or a bare H value.  Identical seeds give
    bit-identical paths; coordinate streams are independent.
    """
    H = hurst.H if isinstance(hurst, HurstParams) else float(hurst)
    if dims < 1:
        raise ValueError(f"dims must be >= 1, got {dims}")
    return _sample(grid, H, dims, seed, STREAM_X)


def sample_fbm_pair(grid: Grid, hurst, dims: int = 1, seed: int = 0):
    """Sample the driving path x and an independent copy b from one seed.

    The copy uses a deterministic stream tag derived from the same seed, so a
    single seed reproduces the joint (x, b) experiment.
    """
    H = hurst.H if isinstance(hurst, HurstParams) else float(hurst)
    x = _sample(grid, H, dims, seed, STREAM_X)
    b = _sample(grid, H, dims, seed, STREAM_B)
    return x, b


def cameron_martin_direction(anchor: float, grid: Grid, H: float) -> GridPath:
    """Scalar Cameron-Martin direction t -> R(anchor, t) on the grid."""
    if not (0 <= anchor <= grid.T):
        raise ValueError(f"anchor {anchor} outside [0, {grid.T}]")
    vals = np.array([fbm_covariance(anchor, t, H) for t in grid.times])
    return GridPath(grid, vals[:, None])
