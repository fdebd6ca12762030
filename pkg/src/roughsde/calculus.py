"""Higher-order chain/product rules over the branch family, and the three
tensor-contraction operators driving the variational recursions.

All contractions pair an order-k derivative tensor with exactly k vectors;
shape mismatches raise instead of broadcasting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .trees import branch_stats, coefficient, enumerate_tree

__all__ = [
    "DerivativeStack",
    "contract",
    "tree_chain_rule",
    "tree_product_rule",
    "op_L",
    "op_Lbar",
    "op_Ltilde",
    "lemma_coeffs",
    "unit_coeffs",
    "zero_coeffs",
]


def contract(tensor: np.ndarray, vectors, out_shape: tuple) -> np.ndarray:
    """Pair the trailing axes of a derivative tensor with the given vectors."""
    if tensor.shape != out_shape + tuple(v.shape[0] for v in vectors):
        raise ValueError(
            f"contraction mismatch: tensor {tensor.shape}, "
            f"slots {[v.shape for v in vectors]}, out {out_shape}"
        )
    res = tensor
    for v in reversed(vectors):
        res = res @ v
    return res


@dataclass
class DerivativeStack:
    """Directional derivatives D^1 F, ..., D^N F of a fixed R^m-valued F."""

    vectors: list

    def __post_init__(self):
        self.vectors = [np.atleast_1d(np.asarray(v, dtype=np.float64))
                        for v in self.vectors]
        if len({v.shape for v in self.vectors}) > 1:
            raise ValueError("stack entries must share one shape")

    @property
    def depth(self) -> int:
        return len(self.vectors)

    def level(self, ell: int) -> np.ndarray:
        if not 1 <= ell <= self.depth:
            raise ValueError(f"stack has depth {self.depth}, asked for level {ell}")
        return self.vectors[ell - 1]


def tree_chain_rule(f, F, stack: DerivativeStack, N: int):
    """N-th iterated directional derivative of f(F) from the stack of D^l F."""
    if stack.depth < N:
        raise ValueError(f"stack depth {stack.depth} < N={N}")
    F = np.asarray(F, dtype=np.float64)
    total = np.zeros(f.out_shape)
    for branch in enumerate_tree(N):
        st = branch_stats(branch)
        slots = [stack.level(e) for e in st.ell[1:]]
        total = total + contract(f.derivative(F, st.ell[0]), slots, f.out_shape)
    return total if f.out_shape else float(total)


def tree_product_rule(f, g, F, stack: DerivativeStack, g_derivative_table, N: int):
    """N-th derivative of (f*g)(F) for scalar f, g.

    ``g_derivative_table[l]`` must supply the directional derivative
    D^l g(F) (a scalar) for l = 1..N.
    """
    if f.out_shape != () or g.out_shape != ():
        raise ValueError("product rule applies to scalar-valued f and g")
    F = np.asarray(F, dtype=np.float64)
    gval = float(g.value(F))
    m1 = 0.0
    m2 = 0.0
    for branch in enumerate_tree(N):
        st = branch_stats(branch)
        slots = [stack.level(e) for e in st.ell[1:]]
        m1 += gval * contract(f.derivative(F, st.ell[0]), slots, ())
        for r in range(2, st.alpha + 1):
            rest = slots[: r - 2] + slots[r - 1:]
            m2 += g_derivative_table[st.ell[r - 1]] * contract(
                f.derivative(F, st.ell[0] - 1), rest, ()
            )
    return m1 + m2


# ---------------------------------------------------------------------------
# Coefficient families: callables (L, branch) -> float
# ---------------------------------------------------------------------------


def lemma_coeffs(L: int, branch) -> float:
    """ell_2! ... ell_alpha! / L!, the family under which the derivative
    identity for the scheme holds."""
    return float(coefficient(L, branch))


def unit_coeffs(L: int, branch) -> float:
    return 1.0


def zero_coeffs(L: int, branch) -> float:
    return 0.0


def _levels(xi, ells):
    # xi[l] is the level-l vector; xi[0] unused
    out = []
    for e in ells:
        v = xi[e]
        if v is None:
            raise ValueError(f"missing level {e} in the xi stack")
        out.append(np.asarray(v, dtype=np.float64))
    return out


def op_L(L: int, f, y, xi, coeffs=lemma_coeffs):
    """Tree contraction sum_{branches} c * <d^{l1} f(y), xi^{l2} x ... x xi^{l_alpha}>.

    Conventions: L = 0 is the identity (returns f(y)); L = -1 returns 0.
    """
    y = np.asarray(y, dtype=np.float64)
    if L == -1:
        return np.zeros(f.out_shape)
    if L == 0:
        return f.value(y)
    if L < -1:
        raise ValueError(f"operator level must be >= -1, got {L}")
    total = np.zeros(f.out_shape)
    for branch in enumerate_tree(L):
        st = branch_stats(branch)
        c = coeffs(L, branch)
        if c == 0.0:
            continue
        slots = _levels(xi, st.ell[1:])
        total = total + c * contract(f.derivative(y, st.ell[0]), slots, f.out_shape)
    return total


def op_Lbar(L: int, f, g, y, xi, coeffs=lemma_coeffs):
    """Companion operator for the products (df . g)(y).

    First block contracts the (l1+1)-st derivative of f against g(y) on the
    newest index; second block substitutes the level-(l_r) operator applied
    to g into slot r.  L = 0 gives (df . g)(y); L = -1 gives 0.
    """
    y = np.asarray(y, dtype=np.float64)
    if L == -1:
        return np.zeros(f.out_shape)
    if L < -1:
        raise ValueError(f"operator level must be >= -1, got {L}")
    gval = np.asarray(g.value(y), dtype=np.float64)
    if L == 0:
        return f.derivative(y, 1) @ gval
    total = np.zeros(f.out_shape)
    for branch in enumerate_tree(L):
        st = branch_stats(branch)
        c = coeffs(L, branch)
        if c == 0.0:
            continue
        slots = _levels(xi, st.ell[1:])
        dfg = f.derivative(y, st.ell[0] + 1) @ gval  # contract the new index
        total = total + c * contract(dfg, slots, f.out_shape)
        for r in range(2, st.alpha + 1):
            inner = op_L(st.ell[r - 1], g, y, xi, coeffs)
            repl = slots.copy()
            repl[r - 2] = inner
            total = total + c * contract(f.derivative(y, st.ell[0]), repl, f.out_shape)
    return total


def op_Ltilde(L: int, f, g, y, xi, coeffs=lemma_coeffs, coeffs_tilde=lemma_coeffs):
    """Variant with the inner operator at level l_r - 1 under the second
    coefficient family.  Levels 0 and -1 both give 0."""
    y = np.asarray(y, dtype=np.float64)
    if L <= 0:
        if L < -1:
            raise ValueError(f"operator level must be >= -1, got {L}")
        return np.zeros(f.out_shape)
    total = np.zeros(f.out_shape)
    for branch in enumerate_tree(L):
        st = branch_stats(branch)
        c = coeffs(L, branch)
        if c == 0.0:
            continue
        slots = _levels(xi, st.ell[1:])
        for r in range(2, st.alpha + 1):
            inner = op_L(st.ell[r - 1] - 1, g, y, xi, coeffs_tilde)
            repl = slots.copy()
            repl[r - 2] = inner
            total = total + c * contract(f.derivative(y, st.ell[0]), repl, f.out_shape)
    return total
