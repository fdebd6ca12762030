"""Tree-driven variational recursions attached to the scheme.

``xi_run`` evolves the stacked processes whose directional derivatives along
the independent copy reproduce the iterated derivatives of the scheme;
``directional_derivative_run`` evolves those derivatives directly for orders
one and two, and ``fd_oracle`` certifies them by rerunning the scheme on
shifted noise.  ``point_derivative_run`` gives the pointwise derivative
processes with their jump initial values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .calculus import lemma_coeffs, op_L, op_Lbar, op_Ltilde, unit_coeffs, zero_coeffs
from .errors import CapabilityError
from .fbm import GridPath
from .fields import SmoothMap
from .scheme import SchemeConfig, euler_run

__all__ = [
    "XiProcess",
    "PointDerivative",
    "xi_run",
    "directional_derivative_run",
    "fd_oracle",
    "point_derivative_run",
    "p_process",
]


class _Memo:
    """Per-step cache of value/derivative tensors of a map at a fixed point."""

    def __init__(self, inner: SmoothMap):
        self.inner = inner
        self.out_shape = inner.out_shape
        self.in_dim = inner.in_dim
        self.order = inner.order
        self._key = None
        self._cache: dict = {}

    def _reset(self, y):
        if self._key is not y:
            self._key = y
            self._cache = {}

    def value(self, y):
        self._reset(y)
        if "v" not in self._cache:
            self._cache["v"] = self.inner.value(y)
        return self._cache["v"]

    def derivative(self, y, k):
        self._reset(y)
        if k not in self._cache:
            self._cache[k] = self.inner.derivative(y, k)
        return self._cache[k]


@dataclass
class XiProcess:
    """Stacked level processes (levels 1..depth) on the scheme grid."""

    y: GridPath                      # level-0 alias
    levels: np.ndarray = field(repr=False)  # (depth, n+1, m)
    t0_index: int = 0
    coeffs: object = lemma_coeffs
    coeffs_tilde: object = lemma_coeffs

    @property
    def depth(self) -> int:
        return self.levels.shape[0]

    @property
    def grid(self):
        return self.y.grid

    def level(self, L: int) -> np.ndarray:
        if L == 0:
            return self.y.values
        if not 1 <= L <= self.depth:
            raise ValueError(f"level {L} outside 0..{self.depth}")
        return self.levels[L - 1]


def _require_order(vf: SmoothMap, needed: int):
    if vf.order < needed:
        raise CapabilityError(
            f"field provides derivatives to order {vf.order}, recursion needs {needed}"
        )


def xi_run(depth: int, cfg: SchemeConfig, y: GridPath, x: GridPath, b: GridPath,
           coeffs=lemma_coeffs, coeffs_tilde=lemma_coeffs, t0_index: int = 0,
           initial: np.ndarray | None = None) -> XiProcess:
    """Evolve levels 1..depth of the stacked recursion driven by (x, b).

    The level-L increment over one step combines the level-L contraction
    against dx, the level-(L-1) contraction against db, and the two companion
    operators scaled by dt^{2H}; conventions at levels 0/-1 make the L = 1
    equation carry a bare V(y) db forcing term.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    _require_order(cfg.vf, max(depth + 2, 3))
    n, m, d = cfg.grid.n, cfg.m, cfg.d
    if y.grid != cfg.grid or x.grid != cfg.grid or b.grid != cfg.grid:
        raise ValueError("y, x, b must live on the config grid")
    h2h = cfg.grid.dt ** (2 * cfg.hurst.H)
    dx = x.increments()
    db = b.increments()
    levels = np.zeros((depth, n + 1, m))
    if initial is not None:
        initial = np.asarray(initial, dtype=np.float64).reshape(depth, m)
        levels[:, : t0_index + 1, :] = initial[:, None, :]
    vmemo = _Memo(cfg.vf)
    cols = [_Memo(cfg.vf.column(j)) for j in range(d)]
    for k in range(t0_index, n):
        yk = y.values[k]
        xi = [None] + [levels[L - 1, k] for L in range(1, depth + 1)]
        for L in range(1, depth + 1):
            inc = op_L(L, vmemo, yk, xi, coeffs) @ dx[k]
            inc = inc + op_L(L - 1, vmemo, yk, xi, coeffs_tilde) @ db[k]
            corr = np.zeros(m)
            for j in range(d):
                corr = corr + op_Lbar(L, cols[j], cols[j], yk, xi, coeffs)
                corr = corr + op_Ltilde(L - 1, cols[j], cols[j], yk, xi,
                                        coeffs, coeffs_tilde)
            levels[L - 1, k + 1] = levels[L - 1, k] + inc + 0.5 * h2h * corr
    return XiProcess(y=y, levels=levels, t0_index=t0_index,
                     coeffs=coeffs, coeffs_tilde=coeffs_tilde)


# ---------------------------------------------------------------------------
# Directional derivatives along a Cameron-Martin direction
# ---------------------------------------------------------------------------


def _dvv_sum_deriv(vf, y, order: int) -> np.ndarray:
    """Derivative tensors of G(y) = sum_j (dV_j V_j)(y) for order in {1, 2}."""
    v = vf.value(y)
    dv = vf.derivative(y, 1)
    d2v = vf.derivative(y, 2)
    if order == 1:
        return np.einsum("kjlq,lj->kq", d2v, v) + np.einsum("kjl,ljq->kq", dv, dv)
    d3v = vf.derivative(y, 3)
    return (
        np.einsum("kjlqr,lj->kqr", d3v, v)
        + np.einsum("kjlq,ljr->kqr", d2v, dv)
        + np.einsum("kjlr,ljq->kqr", d2v, dv)
        + np.einsum("kjl,ljqr->kqr", dv, d2v)
    )


def _assemble_direction(hbar: GridPath, d: int) -> np.ndarray:
    if hbar.dims == d:
        return hbar.values
    if hbar.dims == 1:
        return np.repeat(hbar.values, d, axis=1)
    raise ValueError(f"direction has {hbar.dims} coordinates, need 1 or {d}")


def directional_derivative_run(order: int, cfg: SchemeConfig, y: GridPath,
                               x: GridPath, hbar: GridPath):
    """First (and second) derivative of the scheme along the direction hbar.

    Returns a list of per-level arrays [z1] or [z1, z2], each (n+1, m).  The
    recursions are the db-differentiated form of the stacked recursion, under
    which the level-L output equals the L-th iterated derivative of the
    scheme output in the hbar direction.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    _require_order(cfg.vf, order + 2)
    n, m = cfg.grid.n, cfg.m
    h2h = cfg.grid.dt ** (2 * cfg.hurst.H)
    dx = x.increments()
    dh = np.diff(_assemble_direction(hbar, cfg.d), axis=0)
    vmemo = _Memo(cfg.vf)
    z1 = np.zeros((n + 1, m))
    z2 = np.zeros((n + 1, m))
    for k in range(n):
        yk = y.values[k]
        v = vmemo.value(yk)
        dv = vmemo.derivative(yk, 1)           # (m, d, m)
        g1 = _dvv_sum_deriv(vmemo, yk, 1)      # (m, m)
        a = z1[k]
        z1[k + 1] = a + (dv @ a) @ dx[k] + v @ dh[k] + 0.5 * h2h * (g1 @ a)
        if order == 2:
            d2v = vmemo.derivative(yk, 2)      # (m, d, m, m)
            g2 = _dvv_sum_deriv(vmemo, yk, 2)  # (m, m, m)
            bsec = z2[k]
            inc = ((dv @ bsec) + (d2v @ a) @ a) @ dx[k]
            inc = inc + 2.0 * (dv @ a) @ dh[k]
            inc = inc + 0.5 * h2h * (g1 @ bsec + (g2 @ a) @ a)
            z2[k + 1] = bsec + inc
    return [z1] if order == 1 else [z1, z2]


def fd_oracle(order: int, cfg: SchemeConfig, x: GridPath, hbar: GridPath,
              eps: float):
    """Central finite differences of the scheme output along hbar.

    Order 1 returns (y(x + eps h) - y(x - eps h)) / (2 eps); order 2 the
    three-point second difference.  Shapes match the directional runs.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    direction = _assemble_direction(hbar, cfg.d)
    up = euler_run(cfg, GridPath(cfg.grid, x.values + eps * direction)).values
    dn = euler_run(cfg, GridPath(cfg.grid, x.values - eps * direction)).values
    if order == 1:
        return (up - dn) / (2.0 * eps)
    if order == 2:
        mid = euler_run(cfg, x).values
        return (up - 2.0 * mid + dn) / eps**2
    raise ValueError("order must be 1 or 2")


# ---------------------------------------------------------------------------
# Pointwise derivative processes
# ---------------------------------------------------------------------------


@dataclass
class PointDerivative:
    r: float
    j: int
    k0: int
    xi1: np.ndarray = field(repr=False)   # (n+1, m)
    rprime: float | None = None
    jprime: int | None = None
    k0prime: int | None = None
    xi2: np.ndarray | None = field(default=None, repr=False)
    a1: np.ndarray | None = None
    a2: np.ndarray | None = None


def _jump_index(r: float, grid) -> int:
    # r in (t_k, t_{k+1}]  <=>  k = ceil(r / dt) - 1
    k0 = int(np.ceil(r / grid.dt - 1e-12)) - 1
    return min(max(k0, 0), grid.n - 1)


def _xi1_evolve(cfg, y, x, k0: int, a1: np.ndarray) -> np.ndarray:
    n, m = cfg.grid.n, cfg.m
    h2h = cfg.grid.dt ** (2 * cfg.hurst.H)
    dx = x.increments()
    vmemo = _Memo(cfg.vf)
    xi = np.zeros((n + 1, m))
    for k in range(k0, n):
        yk = y.values[k]
        dv = vmemo.derivative(yk, 1)
        g1 = _dvv_sum_deriv(vmemo, yk, 1)
        a = xi[k]
        inc = (dv @ a) @ dx[k] + 0.5 * h2h * (g1 @ a)
        if k == k0:
            inc = inc + a1
        xi[k + 1] = a + inc
    return xi


def point_derivative_run(cfg: SchemeConfig, y: GridPath, x: GridPath, r: float,
                         j: int, rprime: float | None = None,
                         jprime: int | None = None,
                         summed_jump: bool = False) -> PointDerivative:
    """Pointwise derivative processes of the scheme at kernel times r (, r').

    The first-order process vanishes up to the step containing r, jumps by
    the j-th diffusion column there (or the column sum when ``summed_jump``),
    then follows the linear first-order recursion.  With ``rprime`` the mixed
    second-order process is evolved as well, with its jump assembled from the
    first-order processes.
    """
    if not (0 < r <= cfg.grid.T):
        raise ValueError(f"r = {r} outside (0, {cfg.grid.T}]")
    if not 0 <= j < cfg.d:
        raise ValueError(f"coordinate {j} outside 0..{cfg.d - 1}")
    _require_order(cfg.vf, 3 if rprime is None else 4)
    k0 = _jump_index(r, cfg.grid)
    v0 = cfg.vf.value(y.values[k0])
    a1 = v0.sum(axis=1) if summed_jump else v0[:, j]
    xi1 = _xi1_evolve(cfg, y, x, k0, a1)
    out = PointDerivative(r=r, j=j, k0=k0, xi1=xi1, a1=a1)
    if rprime is None:
        return out
    if not (0 < rprime <= cfg.grid.T):
        raise ValueError(f"r' = {rprime} outside (0, {cfg.grid.T}]")
    jp = j if jprime is None else jprime
    if not 0 <= jp < cfg.d:
        raise ValueError(f"coordinate {jp} outside 0..{cfg.d - 1}")
    k0p = _jump_index(rprime, cfg.grid)
    v0p = cfg.vf.value(y.values[k0p])
    a1p = v0p.sum(axis=1) if summed_jump else v0p[:, jp]
    xi1p = _xi1_evolve(cfg, y, x, k0p, a1p)

    n, m = cfg.grid.n, cfg.m
    h2h = cfg.grid.dt ** (2 * cfg.hurst.H)
    dx = x.increments()
    vmemo = _Memo(cfg.vf)
    kk = max(k0, k0p)
    dvk = cfg.vf.derivative(y.values[kk], 1)  # (m, d, m)
    a2 = np.zeros(m)
    if k0 >= k0p:
        col = dvk.sum(axis=1) if summed_jump else dvk[:, j, :]
        a2 = a2 + col @ xi1p[kk]
    if k0p >= k0:
        colp = dvk.sum(axis=1) if summed_jump else dvk[:, jp, :]
        a2 = a2 + colp @ xi1[kk]
    xi2 = np.zeros((n + 1, m))
    for k in range(kk, n):
        yk = y.values[k]
        dv = vmemo.derivative(yk, 1)
        d2v = vmemo.derivative(yk, 2)
        g1 = _dvv_sum_deriv(vmemo, yk, 1)
        g2 = _dvv_sum_deriv(vmemo, yk, 2)
        a = xi1[k]
        ap = xi1p[k]
        b2 = xi2[k]
        inc = ((dv @ b2) + (d2v @ ap) @ a) @ dx[k]
        inc = inc + 0.5 * h2h * (g1 @ b2 + (g2 @ ap) @ a)
        if k == kk:
            inc = inc + a2
        xi2[k + 1] = b2 + inc
    out.rprime, out.jprime, out.k0prime = rprime, jp, k0p
    out.xi2, out.a2 = xi2, a2
    return out


# ---------------------------------------------------------------------------
# Level-product envelope
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _partitions_upto(L: int) -> tuple:
    """All multisets of positive parts with sum <= L, as sorted tuples."""
    out = set()

    def rec(remaining, largest, acc):
        for part in range(1, min(remaining, largest) + 1):
            nxt = acc + (part,)
            out.add(tuple(sorted(nxt)))
            rec(remaining - part, part, nxt)

    rec(L, L, ())
    return tuple(sorted(out))


def p_process(xi: XiProcess, s_index: int, L: int) -> float:
    """Envelope max(1, products of level norms over part multisets <= L).

    The bare maximum over products can drop below one; clamping restores the
    monotonicity properties the estimates rely on.
    """
    if L < 0:
        if L == -1:
            return 0.0
        raise ValueError(f"L must be >= -1, got {L}")
    if L == 0:
        return 1.0
    if L > xi.depth:
        raise ValueError(f"L={L} exceeds process depth {xi.depth}")
    norms = {ell: float(np.max(np.abs(xi.level(ell)[s_index])))
             for ell in range(1, L + 1)}
    best = 1.0
    for parts in _partitions_upto(L):
        prod = 1.0
        for p in parts:
            prod *= norms[p]
        best = max(best, prod)
    return best
