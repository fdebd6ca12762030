"""The modified Euler recursion and its strong-convergence harness.

One step advances the state by the drift, the diffusion against the driving
increment, and the deterministic correction 0.5 * sum_j (dV_j V_j) * dt^{2H}
that replaces the unavailable iterated integrals.  Sine-bank fields run
through the compiled kernel; any other SmoothMap takes the generic path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import euler_sine
from .errors import SchemeOverflowError
from .fbm import Grid, GridPath, HurstParams, sample_fbm
from .fields import SineField, SmoothMap

__all__ = [
    "SchemeConfig",
    "euler_run",
    "dvv_sum",
    "coupled_refinement_errors",
    "davie_defect",
]


@dataclass
class SchemeConfig:
    vf: SmoothMap               # diffusion, out_shape (m, d)
    a: np.ndarray               # initial state, length m
    hurst: HurstParams
    grid: Grid
    vf0: SmoothMap | None = None  # optional drift, out_shape (m,)

    def __post_init__(self):
        self.a = np.atleast_1d(np.asarray(self.a, dtype=np.float64))
        if len(self.vf.out_shape) != 2:
            raise ValueError("diffusion field must be matrix-valued (m, d)")
        m = self.vf.out_shape[0]
        if self.vf.in_dim != m or self.a.shape[0] != m:
            raise ValueError(
                f"dimension mismatch: field maps R^{self.vf.in_dim} -> "
                f"{self.vf.out_shape}, initial state has length {self.a.shape[0]}"
            )
        if self.vf.order < 3:
            raise ValueError("diffusion field must provide derivatives to order 3")
        if self.vf0 is not None and self.vf0.out_shape != (m,):
            raise ValueError("drift field must be vector-valued (m,)")

    @property
    def m(self) -> int:
        return self.vf.out_shape[0]

    @property
    def d(self) -> int:
        return self.vf.out_shape[1]


def dvv_sum(vf: SmoothMap, y: np.ndarray) -> np.ndarray:
    """sum_j (dV_j V_j)(y), the vector driving the step correction."""
    v = vf.value(y)                    # (m, d)
    dv = vf.derivative(y, 1)           # (m, d, m)
    return np.einsum("ijl,lj->i", dv, v)


def dvv_pair(vf: SmoothMap, y: np.ndarray) -> np.ndarray:
    """(dV_i V_j)(y) for all pairs, shape (m, d, d): entry [:, i, j]."""
    v = vf.value(y)
    dv = vf.derivative(y, 1)
    return np.einsum("kil,lj->kij", dv, v)


def _euler_generic(cfg: SchemeConfig, incr: np.ndarray) -> np.ndarray:
    n = incr.shape[0]
    h2h = cfg.grid.dt ** (2 * cfg.hurst.H)
    dt = cfg.grid.dt
    out = np.empty((n + 1, cfg.m))
    y = cfg.a.copy()
    out[0] = y
    for k in range(n):
        step = cfg.vf.value(y) @ incr[k] + 0.5 * dvv_sum(cfg.vf, y) * h2h
        if cfg.vf0 is not None:
            step = step + cfg.vf0.value(y) * dt
        y = y + step
        out[k + 1] = y
        if not np.all(np.isfinite(y)):
            raise SchemeOverflowError(k)
    return out


def euler_run(cfg: SchemeConfig, x: GridPath) -> GridPath:
    """Run the scheme along a driving path on the config grid."""
    if x.grid != cfg.grid:
        raise ValueError("driving path grid does not match the config grid")
    if x.dims != cfg.d:
        raise ValueError(f"driving path has {x.dims} coordinates, field wants {cfg.d}")
    incr = x.increments()
    h2h = cfg.grid.dt ** (2 * cfg.hurst.H)
    drift_ok = cfg.vf0 is None or isinstance(cfg.vf0, SineField)
    if isinstance(cfg.vf, SineField) and drift_ok:
        drift = cfg.vf0.sine_params() if cfg.vf0 is not None else None
        values, bad = euler_sine(cfg.a, incr, h2h, cfg.grid.dt,
                                 cfg.vf.sine_params(), drift)
        if bad >= 0:
            raise SchemeOverflowError(bad)
        return GridPath(cfg.grid, values)
    return GridPath(cfg.grid, _euler_generic(cfg, incr))


def coupled_refinement_errors(cfg: SchemeConfig, levels, mc: int, seed: int):
    """Strong-error sweep on refinement-coupled noise.

    One fBm path per seed is sampled at the finest level and restricted to
    the coarser levels, so all runs share the same noise.  Returns per-seed
    rows (seed, n, err_vs_finest, diff_to_next) and a summary with the rate
    fitted on consecutive-level differences (the difference between levels n
    and 2n decays like the strong rate without the shared-limit bias that
    errors against the finest run carry).
    """
    levels = sorted(int(n) for n in levels)
    finest = levels[-1]
    for n in levels:
        if finest % n:
            raise ValueError(f"levels must be nested divisors of {finest}, got {n}")
    if mc < 1:
        raise ValueError("mc must be >= 1")
    fine_grid = Grid(cfg.grid.T, finest)
    rows = []
    errs = {n: [] for n in levels[:-1]}
    diffs = {n: [] for n in levels[:-1]}
    for s in range(mc):
        x_fine = sample_fbm(fine_grid, cfg.hurst, cfg.d, seed=seed + s)
        runs = {}
        for n in levels:
            xr = x_fine.restrict(finest // n)
            c = SchemeConfig(cfg.vf, cfg.a, cfg.hurst, Grid(cfg.grid.T, n), cfg.vf0)
            runs[n] = euler_run(c, xr).values[-1]
        for i, n in enumerate(levels[:-1]):
            err = float(np.max(np.abs(runs[n] - runs[finest])))
            dif = float(np.max(np.abs(runs[n] - runs[levels[i + 1]])))
            errs[n].append(err)
            diffs[n].append(dif)
            rows.append({"seed": seed + s, "n": n, "err_vs_finest": err,
                         "diff_to_next": dif})
    fit_n = np.array(levels[:-1], dtype=float)
    rms_diff = np.array([np.sqrt(np.mean(np.square(diffs[n]))) for n in levels[:-1]])
    rms_err = np.array([np.sqrt(np.mean(np.square(errs[n]))) for n in levels[:-1]])
    slope, intercept, stderr = _loglog_fit(fit_n, rms_diff)
    summary = {
        "levels": levels,
        "rms_err_vs_finest": rms_err.tolist(),
        "rms_diff_consecutive": rms_diff.tolist(),
        "slope": -slope,
        "slope_stderr": stderr,
        "intercept": intercept,
        "mc": mc,
    }
    return rows, summary


def _loglog_fit(n_values: np.ndarray, errors: np.ndarray):
    lx = np.log2(n_values)
    ly = np.log2(errors)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    dof = max(len(lx) - 2, 1)
    resid = ly - A @ coef
    var = float(resid @ resid) / dof
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    stderr = float(np.sqrt(var / sxx)) if sxx > 0 else float("nan")
    return float(coef[0]), float(coef[1]), stderr


def davie_defect(y: GridPath, lift, cfg: SchemeConfig, mu: float,
                 max_pairs: int = 4000, seed: int = 0):
    """Diagnostic: max over sampled grid pairs of defect / |t-s|^mu for the
    expansion of dy against the level-1/level-2 terms (drift integral taken
    as its left-point Riemann sum).  Informational, no pass/fail."""
    if mu <= 1:
        raise ValueError(f"mu must be > 1, got {mu}")
    n = y.grid.n
    dt = y.grid.dt
    yv = y.values
    v_at = np.stack([cfg.vf.value(yv[k]) for k in range(n + 1)])
    p_at = np.stack([dvv_pair(cfg.vf, yv[k]) for k in range(n + 1)])
    drift_at = None
    if cfg.vf0 is not None:
        drift_at = np.stack([cfg.vf0.value(yv[k]) for k in range(n + 1)])
        drift_cum = np.zeros((n + 1, cfg.m))
        drift_cum[1:] = np.cumsum(drift_at[:-1] * dt, axis=0)
    rng = np.random.default_rng(seed)
    total = n * (n + 1) // 2
    if total <= max_pairs:
        pairs = [(j, k) for j in range(n + 1) for k in range(j + 1, n + 1)]
    else:
        js = rng.integers(0, n, size=max_pairs)
        ks = rng.integers(1, n + 1, size=max_pairs)
        pairs = [(min(j, k), max(j, k)) for j, k in zip(js, ks) if j != k]
    worst = 0.0
    for j, k in pairs:
        expect = v_at[j] @ lift.level1(j, k)
        expect = expect + np.einsum("kij,ij->k", p_at[j], lift.level2(j, k))
        if drift_at is not None:
            expect = expect + (drift_cum[k] - drift_cum[j])
        defect = np.max(np.abs(yv[k] - yv[j] - expect))
        worst = max(worst, float(defect / (dt * (k - j)) ** mu))
    return worst
