"""Second-order lift of grid paths, p-variation, and the control function.

Level-2 values over arbitrary grid pairs come from prefix sums of the
one-step values plus the algebraic consistency relation, so a pair query is
O(1) and the relation holds to rounding by construction.

Norms are entrywise max throughout, so constants stay comparable across
levels and dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import pvar_row, pvar_table
from .fbm import Grid, GridPath, HurstParams

__all__ = [
    "RoughLift",
    "QProcess",
    "CrossLevel2",
    "lift_piecewise_linear",
    "check_chen",
    "build_q",
    "build_cross",
    "p_variation",
    "ControlTable",
    "control_omega",
]


def maxabs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a)))


@dataclass
class RoughLift:
    """Level-1 increments plus level-2 iterated integrals of a grid path."""

    base: GridPath
    one_step: np.ndarray = field(repr=False)  # (n, D, D)

    def __post_init__(self):
        W = self.base.values
        d = self.base.dims
        incr = np.diff(W, axis=0)
        self._cum2 = np.zeros((self.base.grid.n + 1, d, d))
        np.cumsum(self.one_step, axis=0, out=self._cum2[1:])
        self._cumS = np.zeros_like(self._cum2)
        np.cumsum(W[:-1, :, None] * incr[:, None, :], axis=0, out=self._cumS[1:])

    @property
    def dims(self) -> int:
        return self.base.dims

    def level1(self, j: int, k: int) -> np.ndarray:
        return self.base.values[k] - self.base.values[j]

    def level2(self, j: int, k: int) -> np.ndarray:
        """Iterated integral over (t_j, t_k), j <= k."""
        if j > k:
            raise ValueError(f"need j <= k, got ({j}, {k})")
        W = self.base.values
        return (self._cum2[k] - self._cum2[j]) + (self._cumS[k] - self._cumS[j]) \
            - np.outer(W[j], W[k] - W[j])

    def level2_pairs(self, anchors, ends) -> np.ndarray:
        """Vectorized level2 for index arrays (broadcast against each other)."""
        a = np.asarray(anchors)
        b = np.asarray(ends)
        W = self.base.values
        return (self._cum2[b] - self._cum2[a]) + (self._cumS[b] - self._cumS[a]) \
            - W[a][..., :, None] * (W[b] - W[a])[..., None, :]


def lift_piecewise_linear(path: GridPath, refine: int = 1) -> RoughLift:
    """Lift of the piecewise-linear interpolation of ``path``.

    ``path`` lives on a grid refine-times finer than the lift: the returned
    object sits on the coarsened grid with level-2 accumulated in closed form
    over the fine segments (no quadrature error).  ``refine=1`` is the
    one-step convention used by the scheme, where level2 = 0.5 * dx (x) dx.
    """
    if refine < 1:
        raise ValueError(f"refine must be >= 1, got {refine}")
    if path.grid.n % refine:
        raise ValueError(f"refine {refine} does not divide n={path.grid.n}")
    fine = RoughLift(path, _linear_one_step(path))
    if refine == 1:
        return fine
    coarse_path = path.restrict(refine)
    n = coarse_path.grid.n
    one = np.stack([fine.level2(k * refine, (k + 1) * refine) for k in range(n)])
    return RoughLift(coarse_path, one)


def _linear_one_step(path: GridPath) -> np.ndarray:
    incr = path.increments()
    return 0.5 * incr[:, :, None] * incr[:, None, :]


def check_chen(lift: RoughLift, samples: int | None = None, seed: int = 0) -> float:
    """Max residual of the level-2 consistency relation over grid triples.

    Exhaustive when ``samples`` is None (quadratic memory in n); otherwise
    checks that many uniformly drawn triples.
    """
    n = lift.base.grid.n
    W = lift.base.values
    if samples is None:
        worst = 0.0
        idx = np.arange(n + 1)
        for u in range(n + 1):
            s = idx[: u + 1]
            t = idx[u:]
            x_su = lift.level2_pairs(s, u)  # (u+1, d, d)
            x_ut = lift.level2_pairs(u, t)  # (n-u+1, d, d)
            x_st = lift.level2_pairs(s[:, None], t[None, :])
            d_su = W[u] - W[s]  # (u+1, d)
            d_ut = W[t] - W[u]  # (n-u+1, d)
            res = x_st - x_su[:, None] - x_ut[None, :] \
                - d_su[:, None, :, None] * d_ut[None, :, None, :]
            worst = max(worst, maxabs(res))
        return worst
    rng = np.random.default_rng(seed)
    s = rng.integers(0, n + 1, size=samples)
    u = rng.integers(0, n + 1, size=samples)
    t = rng.integers(0, n + 1, size=samples)
    s, u, t = np.sort(np.stack([s, u, t]), axis=0)
    res = lift.level2_pairs(s, t) - lift.level2_pairs(s, u) - lift.level2_pairs(u, t) \
        - (W[u] - W[s])[:, :, None] * (W[t] - W[u])[:, None, :]
    return maxabs(res)


@dataclass
class QProcess:
    """Additive pair map built from partial sums of one-step terms."""

    grid: Grid
    cumulative: np.ndarray = field(repr=False)  # (n+1, d, d), zero at index 0

    def pair(self, j: int, k: int) -> np.ndarray:
        return self.cumulative[k] - self.cumulative[j]

    def pairs(self, anchors, ends) -> np.ndarray:
        return self.cumulative[np.asarray(ends)] - self.cumulative[np.asarray(anchors)]


def build_q(lift: RoughLift, hurst: HurstParams) -> QProcess:
    """Centered second-chaos sums: one-step level2 minus its diagonal mean."""
    n = lift.base.grid.n
    d = lift.dims
    h2h = lift.base.grid.dt ** (2 * hurst.H)
    one = lift.one_step - 0.5 * h2h * np.eye(d)[None, :, :]
    cum = np.zeros((n + 1, d, d))
    np.cumsum(one, axis=0, out=cum[1:])
    return QProcess(lift.base.grid, cum)


@dataclass
class CrossLevel2:
    """The (copy, driver) block of the level-2 lift of the stacked path."""

    joint: RoughLift
    d: int

    def pair(self, j: int, k: int) -> np.ndarray:
        return self.joint.level2(j, k)[self.d:, : self.d]

    def pairs(self, anchors, ends) -> np.ndarray:
        return self.joint.level2_pairs(anchors, ends)[..., self.d:, : self.d]


def build_cross(w_path: GridPath, hurst: HurstParams):
    """Cross-block level-2 process of the stacked path w = (x, b) and its
    one-step partial-sum companion (they agree on single steps)."""
    if w_path.dims % 2:
        raise ValueError("stacked path must have an even number of coordinates")
    d = w_path.dims // 2
    joint = lift_piecewise_linear(w_path, refine=1)
    wt = CrossLevel2(joint, d)
    one = joint.one_step[:, d:, :d]
    cum = np.zeros((w_path.grid.n + 1, d, d))
    np.cumsum(one, axis=0, out=cum[1:])
    return wt, QProcess(w_path.grid, cum)


# ---------------------------------------------------------------------------
# p-variation and the control
# ---------------------------------------------------------------------------


def p_variation(increments, p_exp: float, i: int, j: int) -> float:
    """Discrete p-variation power sup over partitions of sum |increment|^p.

    ``increments`` is either a dense matrix A with A[a, b] = |increment over
    (t_a, t_b)| or a callable (a, b) -> scalar.  Returns the value raised to
    power 1 (i.e. the sum of p-th powers; callers take the 1/p root).
    """
    if p_exp < 1:
        raise ValueError(f"p exponent must be >= 1, got {p_exp}")
    if i > j:
        raise ValueError(f"need i <= j, got ({i}, {j})")
    if i == j:
        return 0.0
    if callable(increments):
        size = j - i + 1
        A = np.zeros((size, size))
        for a in range(size):
            for b in range(a + 1, size):
                A[a, b] = abs(increments(i + a, i + b)) ** p_exp
        return float(pvar_row(A, 0)[-1])
    A = np.abs(np.asarray(increments, dtype=np.float64)[i:j + 1, i:j + 1]) ** p_exp
    return float(pvar_row(A, 0)[-1])


def _abs_pair_matrix_additive(cumulative: np.ndarray) -> np.ndarray:
    """|pair increment| matrix (maxabs over entries) of an additive process."""
    flat = cumulative.reshape(cumulative.shape[0], -1)
    out = np.zeros((flat.shape[0], flat.shape[0]))
    for c in range(flat.shape[1]):
        np.maximum(out, np.abs(flat[None, :, c] - flat[:, None, c]), out=out)
    return out


def _abs_pair_matrix_level2(lift: RoughLift) -> np.ndarray:
    n1 = lift.base.grid.n + 1
    W = lift.base.values
    out = np.zeros((n1, n1))
    for i in range(lift.dims):
        for j in range(lift.dims):
            pair = (lift._cum2[None, :, i, j] - lift._cum2[:, None, i, j]) \
                + (lift._cumS[None, :, i, j] - lift._cumS[:, None, i, j]) \
                - W[:, None, i] * (W[None, :, j] - W[:, None, j])
            np.maximum(out, np.abs(pair), out=out)
    return np.triu(out)


class ControlTable:
    """Superadditive control built from the stacked-path lift and the two
    centered second-chaos processes.

    omega(s, t) sums four variation powers: level-1 at exponent p, level-2 at
    p/2, and the two centered sums at p/2.  Values are exposed per grid-index
    pair; rows from a fixed anchor and the full table reuse one DP kernel.
    """

    MAX_DENSE = 2048

    def __init__(self, lift_w: RoughLift, q: QProcess, q_b: QProcess,
                 hurst: HurstParams):
        n = lift_w.base.grid.n
        if n > self.MAX_DENSE:
            raise ValueError(
                f"control table needs dense pair matrices; n={n} exceeds "
                f"{self.MAX_DENSE}"
            )
        self.grid = lift_w.base.grid
        self.p = hurst.p
        self._mats = [
            _abs_pair_matrix_additive(lift_w.base.values) ** hurst.p,
            _abs_pair_matrix_level2(lift_w) ** (hurst.p / 2.0),
            _abs_pair_matrix_additive(q.cumulative) ** (hurst.p / 2.0),
            _abs_pair_matrix_additive(q_b.cumulative) ** (hurst.p / 2.0),
        ]
        self._rows: dict[int, np.ndarray] = {}
        self._table = None

    def row(self, anchor: int) -> np.ndarray:
        """omega(anchor, k) for every k >= anchor (zeros below the anchor)."""
        if anchor not in self._rows:
            if self._table is not None:
                self._rows[anchor] = self._table[anchor]
            else:
                total = np.zeros(self.grid.n + 1)
                for A in self._mats:
                    total += pvar_row(A, anchor)
                total[:anchor] = 0.0
                self._rows[anchor] = total
        return self._rows[anchor]

    def table(self) -> np.ndarray:
        """Dense omega over all grid pairs (upper triangle)."""
        if self._table is None:
            tot = np.zeros((self.grid.n + 1, self.grid.n + 1))
            for A in self._mats:
                tot += pvar_table(A)
            self._table = np.triu(tot)
        return self._table

    def value(self, j: int, k: int) -> float:
        if j > k:
            raise ValueError(f"need j <= k, got ({j}, {k})")
        return float(self.row(j)[k])


def control_omega(lift_w: RoughLift, q: QProcess, q_b: QProcess,
                  hurst: HurstParams, s: int, t: int) -> float:
    """The control omega(s, t) over grid indices s <= t (see ControlTable)."""
    return ControlTable(lift_w, q, q_b, hurst).value(s, t)
