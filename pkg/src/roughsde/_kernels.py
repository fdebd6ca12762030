"""Hot numeric kernels: numba-compiled with a pure-numpy fallback.

The fallback path is selected automatically when numba is missing, or
explicitly with the environment variable ``ROUGHSDE_DISABLE_NUMBA=1``
(read once at import time).  ``scripts/bench_kernels.py`` compares both
backends on representative workloads.
"""

from __future__ import annotations

import math
import os

import numpy as np

_DISABLED = os.environ.get("ROUGHSDE_DISABLE_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
)

try:
    if _DISABLED:
        raise ImportError("numba disabled via ROUGHSDE_DISABLE_NUMBA")
    from numba import njit  # type: ignore

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment

    def njit(*args, **kwargs):
        """No-op decorator stand-in when numba is unavailable or disabled."""

        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap

    HAVE_NUMBA = False


def backend() -> str:
    """Name of the active kernel backend: ``"numba"`` or ``"numpy"``."""
    return "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# Euler step kernel for sine-superposition vector fields.
#
# Field layout (see fields.SineField): entry (i, j) of the (m, d) diffusion
# matrix is  base[i,j] + sum_q amp[i,j,q] * sin(<freq[i,j,q,:], y> + phase[i,j,q]).
# The drift (m,) field uses the analogous layout with a leading axis of size m.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _euler_sine_loop(y0, incr, half_h2h, dt, base, amp, freq, phase, has_drift,
                     base0, amp0, freq0, phase0, out):  # pragma: no cover - jit
    n, d = incr.shape
    m = y0.shape[0]
    q = amp.shape[2]
    q0 = amp0.shape[1]
    y = y0.copy()
    out[0] = y
    vmat = np.empty((m, d))
    dvv = np.empty(m)
    for k in range(n):
        for i in range(m):
            for j in range(d):
                acc = base[i, j]
                for s in range(q):
                    arg = phase[i, j, s]
                    for l in range(m):
                        arg += freq[i, j, s, l] * y[l]
                    acc += amp[i, j, s] * math.sin(arg)
                vmat[i, j] = acc
        # sum_j (dV_j V_j)_i = sum_j sum_l dV[i,j]/dy_l * V[l,j]
        for i in range(m):
            acc2 = 0.0
            for j in range(d):
                for s in range(q):
                    arg = phase[i, j, s]
                    for l in range(m):
                        arg += freq[i, j, s, l] * y[l]
                    c = amp[i, j, s] * math.cos(arg)
                    for l in range(m):
                        acc2 += c * freq[i, j, s, l] * vmat[l, j]
            dvv[i] = acc2
        for i in range(m):
            step = 0.5 * dvv[i] * half_h2h
            for j in range(d):
                step += vmat[i, j] * incr[k, j]
            if has_drift:
                acc = base0[i]
                for s in range(q0):
                    arg = phase0[i, s]
                    for l in range(m):
                        arg += freq0[i, s, l] * y[l]
                    acc += amp0[i, s] * math.sin(arg)
                step += acc * dt
            y[i] += step
        out[k + 1] = y
        for i in range(m):
            if not np.isfinite(y[i]):
                return k
    return -1


def _euler_sine_np(y0, incr, half_h2h, dt, base, amp, freq, phase, has_drift,
                   base0, amp0, freq0, phase0, out):
    n = incr.shape[0]
    y = y0.copy()
    out[0] = y
    for k in range(n):
        args = np.einsum("ijql,l->ijq", freq, y) + phase
        vmat = base + np.sum(amp * np.sin(args), axis=2)
        dv = np.einsum("ijq,ijql->ijl", amp * np.cos(args), freq)
        dvv = np.einsum("ijl,lj->i", dv, vmat)
        step = vmat @ incr[k] + 0.5 * dvv * half_h2h
        if has_drift:
            args0 = np.einsum("iql,l->iq", freq0, y) + phase0
            step = step + (base0 + np.sum(amp0 * np.sin(args0), axis=1)) * dt
        y = y + step
        out[k + 1] = y
        if not np.all(np.isfinite(y)):
            return k
    return -1


def euler_sine(y0, incr, half_h2h, dt, diff_params, drift_params=None):
    """Run the modified Euler recursion for a sine-superposition field.

    Returns ``(values, bad_step)`` where ``values`` has shape (n+1, m) and
    ``bad_step`` is -1 on success or the index of the first step that
    produced a non-finite state.
    """
    base, amp, freq, phase = (np.ascontiguousarray(a, dtype=np.float64)
                              for a in diff_params)
    m = base.shape[0]
    if drift_params is None:
        has_drift = False
        base0 = np.zeros(m)
        amp0 = np.zeros((m, 1))
        freq0 = np.zeros((m, 1, m))
        phase0 = np.zeros((m, 1))
    else:
        has_drift = True
        base0, amp0, freq0, phase0 = (np.ascontiguousarray(a, dtype=np.float64)
                                      for a in drift_params)
    incr = np.ascontiguousarray(incr, dtype=np.float64)
    out = np.empty((incr.shape[0] + 1, m))
    fn = _euler_sine_loop if HAVE_NUMBA else _euler_sine_np
    bad = fn(np.asarray(y0, dtype=np.float64), incr, float(half_h2h),
             float(dt), base, amp, freq, phase, has_drift,
             base0, amp0, freq0, phase0, out)
    return out, int(bad)


# ---------------------------------------------------------------------------
# Discrete p-variation dynamic programs.
#
# A is a dense matrix with A[j, k] = |increment over (t_j, t_k)|**p for j < k.
# The DP value V[k] = sup over grid partitions of [start, k] of the summed
# powers; V is exactly the p-variation raised to the power p.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _pvar_row_loop(A, start):  # pragma: no cover - jit
    n1 = A.shape[0]
    best = np.zeros(n1)
    for k in range(start + 1, n1):
        top = -np.inf
        for j in range(start, k):
            v = best[j] + A[j, k]
            if v > top:
                top = v
        best[k] = top
    return best


def _pvar_row_np(A, start):
    n1 = A.shape[0]
    best = np.zeros(n1)
    for k in range(start + 1, n1):
        best[k] = np.max(best[start:k] + A[start:k, k])
    return best


def pvar_row(A, start=0):
    """DP values of the running p-variation power from anchor ``start``."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    fn = _pvar_row_loop if HAVE_NUMBA else _pvar_row_np
    return fn(A, int(start))


@njit(cache=True)
def _pvar_table_loop(A):  # pragma: no cover - jit
    n1 = A.shape[0]
    table = np.zeros((n1, n1))
    for s in range(n1 - 1):
        for k in range(s + 1, n1):
            top = -np.inf
            for j in range(s, k):
                v = table[s, j] + A[j, k]
                if v > top:
                    top = v
            table[s, k] = top
    return table


def _pvar_table_np(A):
    n1 = A.shape[0]
    table = np.zeros((n1, n1))
    valid = np.tril(np.ones((n1, n1), dtype=bool)).T  # valid[s, j] == (j >= s)
    for k in range(1, n1):
        # all anchors advanced at once; partition points j must satisfy j >= s
        cand = np.where(valid[:k, :k], table[:k, :k] + A[:k, k][None, :], -np.inf)
        table[:k, k] = cand.max(axis=1)
    return table


def pvar_table(A):
    """Full anchor-by-endpoint table of p-variation powers."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    fn = _pvar_table_loop if HAVE_NUMBA else _pvar_table_np
    return fn(A)
