"""Smooth maps with analytic derivative tensors, and the built-in field bank.

Derivative tensors follow the convention ``derivative(y, k)[..., p1, ..., pk]
= d^k f / dy_{p1} ... dy_{pk}`` (trailing axes are derivative indices; mixed
partials are symmetric).  Bank fields are superpositions of sines, which keeps
every derivative order closed-form and gives exact sup-norm constants.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError

__all__ = [
    "SmoothMap",
    "SineField",
    "PolynomialMap",
    "FDMap",
    "vector_field_bank",
    "BANK_IDS",
]


class SmoothMap:
    """Base class: a C^k map R^m -> R^{out_shape} with derivative evaluators."""

    in_dim: int
    out_shape: tuple
    order: int  # highest derivative order the evaluator supports

    def value(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, y: np.ndarray, k: int) -> np.ndarray:
        raise NotImplementedError

    def c0(self, kmax: int) -> float:
        """Upper bound for sup_y max-abs of all derivative tensors of order <= kmax."""
        raise CapabilityError(f"{type(self).__name__} does not report a C0 bound")

    def _check_order(self, k: int) -> None:
        if k < 0:
            raise ValueError(f"derivative order must be >= 0, got {k}")
        if k > self.order:
            raise CapabilityError(
                f"derivative order {k} exceeds available order {self.order}"
            )


class SineField(SmoothMap):
    """Entrywise  base + sum_q amp_q * sin(<freq_q, y> + phase_q).

    Shapes: base out_shape, amp out_shape+(Q,), freq out_shape+(Q, m),
    phase out_shape+(Q,).  Covers constant, smoothly clipped linear, and
    sin/cos bank fields; every derivative order is closed form.
    """

    def __init__(self, base, amp, freq, phase, order: int = 8):
        self.base = np.asarray(base, dtype=np.float64)
        self.amp = np.asarray(amp, dtype=np.float64)
        self.freq = np.asarray(freq, dtype=np.float64)
        self.phase = np.asarray(phase, dtype=np.float64)
        self.out_shape = self.base.shape
        self.in_dim = self.freq.shape[-1]
        self.order = order
        if self.amp.shape != self.out_shape + (self.freq.shape[-2],):
            raise ValueError("amp shape mismatch")

    def value(self, y):
        args = self.freq @ np.asarray(y, dtype=np.float64) + self.phase
        return self.base + np.sum(self.amp * np.sin(args), axis=-1)

    def derivative(self, y, k):
        self._check_order(k)
        if k == 0:
            return self.value(y)
        args = self.freq @ np.asarray(y, dtype=np.float64) + self.phase
        coef = self.amp * np.sin(args + k * math.pi / 2.0)  # out_shape+(Q,)
        res = coef
        for i in range(k):
            f = self.freq.reshape(self.freq.shape[:-1] + (1,) * i + (self.in_dim,))
            res = res[..., None] * f
        return np.sum(res, axis=len(self.out_shape))

    def c0(self, kmax: int) -> float:
        absamp = np.abs(self.amp)
        best = np.max(np.abs(self.base) + np.sum(absamp, axis=-1), initial=0.0)
        fmax = np.max(np.abs(self.freq), axis=-1)  # out_shape+(Q,)
        for k in range(1, kmax + 1):
            best = max(best, np.max(np.sum(absamp * fmax**k, axis=-1), initial=0.0))
        return float(best)

    def column(self, j: int) -> "SineField":
        """View of column j of a matrix-valued field as an R^m-valued field."""
        if len(self.out_shape) != 2:
            raise ValueError("column() needs a matrix-valued field")
        return SineField(
            self.base[:, j], self.amp[:, j], self.freq[:, j], self.phase[:, j],
            order=self.order,
        )

    def sine_params(self):
        """Raw parameter arrays consumed by the numba Euler kernel."""
        return self.base, self.amp, self.freq, self.phase


class PolynomialMap(SmoothMap):
    """Multivariate polynomial with exact derivatives of every order.

    ``coeffs`` maps exponent tuples (length in_dim) to scalar or out_shape
    arrays.  Unbounded, so no C0 is reported; intended for tests and oracles.
    """

    def __init__(self, coeffs: dict, in_dim: int, out_shape: tuple = ()):
        self.in_dim = in_dim
        self.out_shape = tuple(out_shape)
        self.order = 12
        self.coeffs = {
            tuple(e): np.broadcast_to(np.asarray(c, dtype=np.float64), self.out_shape).copy()
            for e, c in coeffs.items()
        }
        for e in self.coeffs:
            if len(e) != in_dim:
                raise ValueError(f"exponent {e} does not match in_dim={in_dim}")

    def value(self, y):
        y = np.asarray(y, dtype=np.float64)
        out = np.zeros(self.out_shape)
        for e, c in self.coeffs.items():
            out += c * np.prod(y**np.array(e))
        return out

    def _diff(self, coeffs: dict, p: int) -> dict:
        out = {}
        for e, c in coeffs.items():
            if e[p] == 0:
                continue
            e2 = list(e)
            e2[p] -= 1
            key = tuple(e2)
            term = c * e[p]
            out[key] = out.get(key, 0) + term
        return out

    def derivative(self, y, k):
        self._check_order(k)
        if k == 0:
            return self.value(y)
        y = np.asarray(y, dtype=np.float64)
        out = np.zeros(self.out_shape + (self.in_dim,) * k)
        for idx in itertools.product(range(self.in_dim), repeat=k):
            coeffs = self.coeffs
            for p in idx:
                coeffs = self._diff(coeffs, p)
            val = np.zeros(self.out_shape)
            for e, c in coeffs.items():
                val += c * np.prod(y**np.array(e))
            out[(...,) + idx] = val
        return out


class FDMap(SmoothMap):
    """Derivatives of a user callable by nested central differences.

    A fallback for fields without analytic derivatives; accuracy drops with
    order, so keep ``order`` small.
    """

    def __init__(self, fn, in_dim: int, out_shape: tuple = (), step: float = 1e-3,
                 order: int = 3):
        self.fn = fn
        self.in_dim = in_dim
        self.out_shape = tuple(out_shape)
        self.step = step
        self.order = order

    def value(self, y):
        return np.asarray(self.fn(np.asarray(y, dtype=np.float64)), dtype=np.float64)

    def derivative(self, y, k):
        self._check_order(k)
        y = np.asarray(y, dtype=np.float64)
        if k == 0:
            return self.value(y)
        h = self.step * 10.0 ** (0.5 * (k - 1))  # widen steps for higher orders
        out = np.zeros(self.out_shape + (self.in_dim,) * k)
        for p in range(self.in_dim):
            e = np.zeros(self.in_dim)
            e[p] = h
            out[..., p] = (self.derivative(y + e, k - 1)
                           - self.derivative(y - e, k - 1)) / (2.0 * h)
        return out


# ---------------------------------------------------------------------------
# Field bank
# ---------------------------------------------------------------------------

BANK_IDS = ("const", "linear-clipped", "sincos-m2d2", "sincos-m2d2-gentle")

_CONST_V = np.array([[1.0, 0.3], [-0.2, 0.8]])

_SINCOS_A = np.array([[0.9, -0.4], [0.3, 0.7]])
_SINCOS_B = np.array([[0.5, 0.35], [-0.45, 0.4]])
_SINCOS_C = np.array(
    [
        [[0.9, -0.5], [0.6, 0.8]],
        [[-0.7, 0.4], [0.5, 0.9]],
    ]
)
_SINCOS_D = np.array([[0.3, -1.1], [2.0, 0.7]])


def _const_field() -> SineField:
    m, d = _CONST_V.shape
    return SineField(_CONST_V, np.zeros((m, d, 1)), np.zeros((m, d, 1, m)),
                     np.zeros((m, d, 1)))


def _linear_clipped(scale: float = 2.0) -> SineField:
    # entry (i,j): b_ij + sum_l A_ijl * scale * sin(y_l / scale); linear near 0
    m, d = 2, 2
    b = np.array([[0.2, -0.1], [0.0, 0.3]])
    A = np.array(
        [
            [[0.6, -0.2], [0.1, 0.4]],
            [[-0.3, 0.5], [0.2, -0.4]],
        ]
    )  # (m, d, m)
    amp = A * scale
    freq = np.zeros((m, d, m, m))
    for l in range(m):
        freq[:, :, l, l] = 1.0 / scale
    return SineField(b, amp, freq, np.zeros((m, d, m)))


def _sincos(scale: float = 1.0) -> SineField:
    return SineField(
        scale * _SINCOS_A,
        (scale * _SINCOS_B)[..., None],
        _SINCOS_C[:, :, None, :],
        _SINCOS_D[..., None],
    )


def vector_field_bank(bank_id: str) -> SineField:
    """Closed-form C_b-bounded vector fields (all m = d = 2)."""
    if bank_id == "const":
        return _const_field()
    if bank_id == "linear-clipped":
        return _linear_clipped()
    if bank_id == "sincos-m2d2":
        return _sincos(1.0)
    if bank_id == "sincos-m2d2-gentle":
        return _sincos(0.1)
    raise ValueError(f"unknown field bank id {bank_id!r}; known: {BANK_IDS}")
