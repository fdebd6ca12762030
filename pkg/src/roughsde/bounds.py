"""Explicit constant ledger, greedy interval partition, remainder process,
discrete sewing verification, and the pathwise bound diagnostics.

Every constant is computed in dependency order from the field's sup-norm
bound and the branch coefficients.  Two constants whose closed forms the
source analysis leaves implicit (the increment bounds for the two companion
operators) are derived here by the same mechanism as the displayed one and
are tagged ``derived``; ``lemma_audit`` checks the inequalities they enter
empirically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._kernels import pvar_row
from .calculus import lemma_coeffs, op_L, op_Lbar, op_Ltilde
from .errors import CapabilityError
from .fbm import Grid, GridPath, HurstParams
from .lift import ControlTable, CrossLevel2, QProcess, RoughLift
from .scheme import SchemeConfig
from .trees import branch_stats, enumerate_tree
from .variational import XiProcess, _Memo, p_process

__all__ = [
    "kmu",
    "kmu_bracket",
    "ConstantLedger",
    "build_ledger",
    "GreedyPartition",
    "greedy_partition",
    "MProducts",
    "m_products",
    "remainder_R",
    "remainder_delta_via_E",
    "sewing_verify",
    "bound_check",
    "lemma_audit",
]

_KMU_TERMS = 1_000_000


def kmu_bracket(mu: float, terms: int = _KMU_TERMS):
    """Lower/upper bracket of 2^mu * zeta(mu) via partial sum plus tail integral."""
    if mu <= 1:
        raise ValueError(f"mu must be > 1, got {mu}")
    ls = np.arange(1, terms + 1, dtype=np.float64)
    partial = float(np.sum(ls**-mu))
    lo = partial + (terms + 1.0) ** (1.0 - mu) / (mu - 1.0)
    hi = partial + float(terms) ** (1.0 - mu) / (mu - 1.0)
    return 2.0**mu * lo, 2.0**mu * hi


def kmu(mu: float) -> float:
    """Sewing constant 2^mu * sum_l l^-mu (midpoint of the bracket)."""
    lo, hi = kmu_bracket(mu)
    return 0.5 * (lo + hi)


@lru_cache(maxsize=None)
def _partitions_exact(L: int) -> tuple:
    """Unordered positive-part multisets summing exactly to L."""
    out = set()

    def rec(remaining, largest, acc):
        if remaining == 0:
            out.add(acc)
            return
        for part in range(1, min(remaining, largest) + 1):
            rec(remaining - part, part, tuple(sorted(acc + (part,))))

    rec(L, L, ())
    return tuple(sorted(out))


@dataclass
class ConstantLedger:
    """All explicit constants, indexed by level (dicts keyed by L, -1..N)."""

    N: int
    p: float
    mu: float
    c0V: float
    C1: dict
    C2: dict
    C3: dict
    C4: dict
    C5V: dict
    C6: dict
    C7: dict
    C8: dict
    K1: dict
    K2: dict
    K3: dict
    K4: dict
    kmu: float
    alpha: float

    def as_dict(self) -> dict:
        def flat(d):
            return {str(k): v for k, v in sorted(d.items())}

        return {
            "N": self.N, "p": self.p, "mu": self.mu, "c0V": self.c0V,
            "kmu": self.kmu, "alpha": self.alpha,
            "C1": flat(self.C1), "C2": flat(self.C2), "C3": flat(self.C3),
            "C4": flat(self.C4), "C5V": flat(self.C5V), "C6": flat(self.C6),
            "C7": flat(self.C7), "C8": flat(self.C8),
            "K1": flat(self.K1), "K2": flat(self.K2), "K3": flat(self.K3),
            "K4": flat(self.K4),
        }


def _tree_data(L: int):
    return [(float(lemma_coeffs(L, b)), branch_stats(b)) for b in enumerate_tree(L)]


def build_ledger(vf, N: int, p: float) -> ConstantLedger:
    """Compute every constant in dependency order for derivative levels <= N."""
    if not 1 <= N <= 6:
        raise ValueError(f"N must be in 1..6, got {N}")
    if not 1 < 3.0 / p:
        raise ValueError(f"need p < 3 so the sewing exponent 3/p exceeds 1, got p={p}")
    try:
        c0 = float(vf.c0(N + 2))
    except CapabilityError as exc:
        raise CapabilityError(
            f"ledger needs a sup-norm bound to order {N + 2}"
        ) from exc

    C1 = {-1: 0.0, 0: c0}
    for L in range(1, N + 1):
        C1[L] = sum(c for c, _ in _tree_data(L)) * c0
    K1 = {L: C1[L] + C1[L - 1] + 1.0 for L in range(0, N + 1)}

    C2 = {-1: 0.0, 0: 2.0 * c0**2}
    C3 = {-1: 0.0, 0: 0.0}
    for L in range(1, N + 1):
        C2[L] = sum(
            c * c0 * (c0 + sum(C1[e] for e in st.ell[1:]))
            for c, st in _tree_data(L)
        )
        C3[L] = sum(
            c * c0 * C1[e - 1] for c, st in _tree_data(L) for e in st.ell[1:]
        )
    K2 = {L: C2[L] + C2[L - 1] + C3[L] + C3[L - 1] + 1.0 for L in range(0, N + 1)}

    C4 = {0: 2.0}
    for L in range(1, N + 1):
        C4[L] = 2.0 ** (L + 1) * max(
            math.prod(K1[part] for part in parts) for parts in _partitions_exact(L)
        )

    def c5(c0f: float, L: int) -> float:
        if L == 0:
            return c0f * K1[0]
        return 2.0 * sum(
            c * c0f * (K1[1] + sum(K1[e] for e in st.ell[1:])) * (1.0 + C4[L])
            for c, st in _tree_data(L)
        )

    C5V = {L: c5(c0, L) for L in range(0, N + 1)}

    # Derived: increment constants for the two companion operators, built by
    # the same J1/J2 mechanism with the slot budgets they actually carry.
    C6 = {-1: 0.0, 0: 2.0 * c0**2 * K1[0]}
    C7 = {-1: 0.0, 0: 0.0}
    for L in range(1, N + 1):
        first = c5(2.0 * c0**2, L)
        second = 2.0 * sum(
            c * c0 * (K1[1] + C5V[e] + C1[e]
                      + sum(K1[e2] for e2 in st.ell[1:]) - K1[e]) * (1.0 + C4[L])
            for c, st in _tree_data(L) for e in st.ell[1:]
        )
        C6[L] = first + second
        C7[L] = 2.0 * sum(
            c * c0 * (K1[1] + C5V[e - 1] + C1[e - 1]
                      + sum(K1[e2] for e2 in st.ell[1:]) - K1[e]) * (1.0 + C4[L])
            for c, st in _tree_data(L) for e in st.ell[1:]
        )

    C8 = {-1: 0.0, 0: c0 * (K1[0] ** 2 + K2[0])}
    for L in range(1, N + 1):
        C8[L] = 2.0 * sum(
            c * c0 * (K1[0] ** 2 + K2[0] + K1[0] * C4[L]
                      + sum(K2[e] + K1[e] * C4[L] for e in st.ell[1:]))
            for c, st in _tree_data(L)
        )

    mu = 3.0 / p
    km = kmu(mu)
    K4 = {L: max(C8[L] + C8[L - 1] + 4.0 * C6[L] + 4.0 * C7[L], 1.0)
          for L in range(0, N + 1)}
    K3 = {L: max(km * K4[L], 1.0) for L in range(0, N + 1)}

    root = min([0.5] + [1.0 / K2[L] for L in range(N + 1)]
               + [1.0 / K3[L] for L in range(N + 1)])
    return ConstantLedger(
        N=N, p=p, mu=mu, c0V=c0, C1=C1, C2=C2, C3=C3, C4=C4, C5V=C5V,
        C6=C6, C7=C7, C8=C8, K1=K1, K2=K2, K3=K3, K4=K4, kmu=km,
        alpha=root**p,
    )


# ---------------------------------------------------------------------------
# Greedy partition and the interval products
# ---------------------------------------------------------------------------


@dataclass
class GreedyPartition:
    anchors: list           # grid indices s_0 = 0 < s_1 < ... <= n
    classes: list           # per interval: "S0" | "S1" | "S2"
    alpha: float

    @property
    def intervals(self):
        return list(zip(self.anchors[:-1], self.anchors[1:], self.classes))

    def counts(self) -> dict:
        return {c: self.classes.count(c) for c in ("S0", "S1", "S2")}


def greedy_partition(omega: ControlTable, alpha: float, grid: Grid) -> GreedyPartition:
    """Maximal-step partition: advance one step when even that overshoots
    alpha, else to the last grid point with omega(s_j, u) <= alpha."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    n = grid.n
    anchors = [0]
    classes = []
    s = 0
    while s < n:
        row = omega.row(s)
        if row[s + 1] > alpha:
            nxt = s + 1
        else:
            nxt = s + int(np.searchsorted(row[s + 1:], alpha, side="right"))
        w = float(row[nxt])
        if w > alpha:
            classes.append("S2")
        elif w >= alpha / 2.0:
            classes.append("S0")
        else:
            classes.append("S1")
        anchors.append(nxt)
        s = nxt
    return GreedyPartition(anchors=anchors, classes=classes, alpha=alpha)


@dataclass
class MProducts:
    log0: float
    log1: float
    log2: float
    count: int
    small_step_flag: bool

    @property
    def m0(self) -> float:
        return math.exp(self.log0)

    @property
    def m1(self) -> float:
        return math.exp(self.log1)

    @property
    def m2(self) -> float:
        return math.exp(self.log2)


def m_products(part: GreedyPartition, omega: ControlTable, w_path: GridPath,
               dt: float, H: float, K: float) -> MProducts:
    """Per-class interval products, accumulated in log space.

    The flag records any large-step interval where |dw| + dt^{2H} exceeds
    omega^{1/p} (the step-smallness assumption used to absorb large steps)."""
    p = omega.p
    logs = {"S0": 0.0, "S1": 0.0, "S2": 0.0}
    flag = False
    for a, b, cls in part.intervals:
        w = omega.value(a, b)
        if cls in ("S0", "S1"):
            logs[cls] += math.log(K * w ** (1.0 / p) + 1.0)
        else:
            dw = float(np.max(np.abs(w_path.values[b] - w_path.values[a])))
            logs[cls] += math.log(K * dw + K * dt ** (2 * H) + 1.0)
            if dw + dt ** (2 * H) > w ** (1.0 / p):
                flag = True
    return MProducts(log0=logs["S0"], log1=logs["S1"], log2=logs["S2"],
                     count=len(part.classes), small_step_flag=flag)


# ---------------------------------------------------------------------------
# Remainder process
# ---------------------------------------------------------------------------


class _OpTables:
    """Operator values at every grid point for one level L (lists of arrays)."""

    def __init__(self, L: int, cfg: SchemeConfig, y: GridPath,
                 coeffs, coeffs_tilde, xi: XiProcess | None):
        n, m, d = y.grid.n, cfg.m, cfg.d
        vmemo = _Memo(cfg.vf)
        cols = [_Memo(cfg.vf.column(j)) for j in range(d)]

        def stack_at(k):
            if xi is None:
                return [None]
            return [None] + [xi.level(ell)[k] for ell in range(1, xi.depth + 1)]

        self.A = np.zeros((n + 1, m, d))        # level-L contraction of V
        self.Am1 = np.zeros((n + 1, m, d))      # level-(L-1), second family
        self.Cbar = np.zeros((n + 1, m, d, d))
        self.Cbar_m1 = np.zeros((n + 1, m, d, d))
        self.Ttilde = np.zeros((n + 1, m, d, d))
        self.Ttilde_m1 = np.zeros((n + 1, m, d, d))
        for k in range(n + 1):
            yk = y.values[k]
            st = stack_at(k)
            self.A[k] = op_L(L, vmemo, yk, st, coeffs)
            self.Am1[k] = op_L(L - 1, vmemo, yk, st, coeffs_tilde)
            for i in range(d):
                for j in range(d):
                    self.Cbar[k, :, i, j] = op_Lbar(L, cols[i], cols[j], yk, st, coeffs)
                    self.Cbar_m1[k, :, i, j] = op_Lbar(L - 1, cols[i], cols[j], yk,
                                                       st, coeffs)
                    self.Ttilde[k, :, i, j] = op_Ltilde(L, cols[i], cols[j], yk, st,
                                                        coeffs, coeffs_tilde)
                    self.Ttilde_m1[k, :, i, j] = op_Ltilde(L - 1, cols[i], cols[j],
                                                           yk, st, coeffs,
                                                           coeffs_tilde)


def remainder_R(L: int, xi: XiProcess, y: GridPath, lift_x: RoughLift,
                lift_b: RoughLift, q: QProcess, q_b: QProcess,
                wtilde: CrossLevel2, qtilde: QProcess, cfg: SchemeConfig,
                pairs=None, coeffs=lemma_coeffs, coeffs_tilde=lemma_coeffs):
    """Remainder of the level-L increment against its local expansion.

    Returns (pairs, values) with values[..., :] the remainder vector per
    requested pair; one-step pairs vanish identically up to rounding.  With
    ``pairs=None`` every one-step pair is evaluated.
    """
    n = y.grid.n
    if pairs is None:
        pairs = (np.arange(n), np.arange(1, n + 1))
    a_idx, b_idx = (np.asarray(pairs[0]), np.asarray(pairs[1]))
    tab = _OpTables(L, cfg, y, coeffs, coeffs_tilde, xi)
    xiL = xi.level(L) if L >= 1 else y.values
    dxi = xiL[b_idx] - xiL[a_idx]
    dx = lift_x.base.values[b_idx] - lift_x.base.values[a_idx]
    db = lift_b.base.values[b_idx] - lift_b.base.values[a_idx]
    x2q = lift_x.level2_pairs(a_idx, b_idx) - q.pairs(a_idx, b_idx)
    b2q = lift_b.level2_pairs(a_idx, b_idx) - q_b.pairs(a_idx, b_idx)
    wq = wtilde.pairs(a_idx, b_idx) - qtilde.pairs(a_idx, b_idx)
    out = -dxi
    out = out + np.einsum("sij,sj->si", tab.A[a_idx], dx)
    out = out + np.einsum("sij,sj->si", tab.Am1[a_idx], db)
    out = out + np.einsum("skij,sij->sk", tab.Cbar[a_idx], x2q)
    out = out + np.einsum("skij,sij->sk", tab.Ttilde_m1[a_idx], b2q)
    out = out + np.einsum("skij,sij->sk", tab.Ttilde[a_idx], wq)
    out = out + np.einsum("skij,sji->sk", tab.Cbar_m1[a_idx], wq)
    return (a_idx, b_idx), out


def remainder_delta_via_E(L: int, xi: XiProcess, y: GridPath, lift_x: RoughLift,
                          lift_b: RoughLift, q: QProcess, q_b: QProcess,
                          wtilde: CrossLevel2, qtilde: QProcess,
                          cfg: SchemeConfig, s: int, u: int, t: int,
                          coeffs=lemma_coeffs, coeffs_tilde=lemma_coeffs):
    """Second code path: the triple defect of the remainder assembled from
    its five-term decomposition (used to cross-check pair values)."""
    tab = _OpTables(L, cfg, y, coeffs, coeffs_tilde, xi)
    W = lift_x.base.values
    B = lift_b.base.values
    dx_su, dx_ut = W[u] - W[s], W[t] - W[u]
    db_su, db_ut = B[u] - B[s], B[t] - B[u]
    e1 = -np.einsum("ij,j->i", tab.A[u] - tab.A[s], dx_ut)
    e2 = -np.einsum("ij,j->i", tab.Am1[u] - tab.Am1[s], db_ut)
    e3 = np.einsum("kij,i,j->k", tab.Cbar[s], dx_su, dx_ut) \
        + np.einsum("kij,i,j->k", tab.Ttilde[s], db_su, dx_ut)
    # the transposed cross term: delta of (pair map)^T is (db_su x dx_ut)^T
    e4 = np.einsum("kij,i,j->k", tab.Ttilde_m1[s], db_su, db_ut) \
        + np.einsum("kij,i,j->k", tab.Cbar_m1[s], dx_ut, db_su)
    x2q_ut = lift_x.level2(u, t) - q.pair(u, t)
    b2q_ut = lift_b.level2(u, t) - q_b.pair(u, t)
    wq_ut = wtilde.pair(u, t) - qtilde.pair(u, t)
    e5 = -np.einsum("kij,ij->k", tab.Cbar[u] - tab.Cbar[s], x2q_ut) \
        - np.einsum("kij,ij->k", tab.Ttilde_m1[u] - tab.Ttilde_m1[s], b2q_ut) \
        - np.einsum("kij,ij->k", tab.Ttilde[u] - tab.Ttilde[s], wq_ut) \
        - np.einsum("kij,ji->k", tab.Cbar_m1[u] - tab.Cbar_m1[s], wq_ut)
    return e1 + e2 + e3 + e4 + e5


# ---------------------------------------------------------------------------
# Sewing verification and bound diagnostics
# ---------------------------------------------------------------------------


def sewing_verify(R: np.ndarray, omega: ControlTable, mu: float) -> dict:
    """Check the discrete sewing mechanism on a dense pair map R.

    R has shape (n+1, n+1, m) (upper triangle meaningful).  The hypotheses
    are rescaled by the smallest constant c* that makes them hold; the
    conclusion is then |R_st| <= kmu * c* * omega(s,t)^mu.
    """
    if mu <= 1:
        raise ValueError(f"mu must be > 1, got {mu}")
    n1 = R.shape[0]
    om = omega.table()
    with np.errstate(divide="ignore", invalid="ignore"):
        om_mu = np.where(om > 0, om**mu, np.inf)
    one_step = np.array([np.max(np.abs(R[k, k + 1])) for k in range(n1 - 1)])
    one_omega = np.array([om_mu[k, k + 1] for k in range(n1 - 1)])
    c_star = float(np.max(one_step / one_omega, initial=0.0))
    for u in range(1, n1 - 1):
        delta = R[:u, u + 1:, :] - R[:u, u:u + 1, :] - R[u:u + 1, u + 1:, :]
        ratios = np.max(np.abs(delta), axis=2) / om_mu[:u, u + 1:]
        c_star = max(c_star, float(np.max(ratios, initial=0.0)))
    km = kmu(mu)
    scale = c_star if c_star > 0 else 1.0
    ratio = 0.0
    for s in range(n1 - 1):
        vals = np.max(np.abs(R[s, s + 1:]), axis=1) / (scale * om_mu[s, s + 1:])
        ratio = max(ratio, float(np.max(vals, initial=0.0)))
    return {
        "c_star": c_star,
        "kmu": km,
        "mu": mu,
        "max_ratio": ratio,
        "passed": bool(ratio <= km * (1.0 + 1e-9)),
    }


def _pvar_of_path(values: np.ndarray, p: float, a: int, b: int) -> float:
    """p-variation (power 1) of a vector path between grid indices a..b."""
    seg = values[a:b + 1]
    n1 = seg.shape[0]
    A = np.zeros((n1, n1))
    for c in range(seg.shape[1]):
        np.maximum(A, np.abs(seg[None, :, c] - seg[:, None, c]), out=A)
    return float(pvar_row(A**p, 0)[-1])


def bound_check(L: int, xi: XiProcess, part: GreedyPartition, omega: ControlTable,
                ledger: ConstantLedger, K_config: float, cfg: SchemeConfig,
                x: GridPath, b: GridPath, coeffs=lemma_coeffs,
                coeffs_tilde=lemma_coeffs) -> dict:
    """Diagnostics for the two pathwise estimates.

    (a) the p-variation of the level-L process against
        omega^{1/p} * #intervals * (M0 M1 M2)^L, reported as the ratio rho
        with the generic constant divided out;
    (b) within every small/medium interval, the local-expansion defect
        against omega^{2/p} * level-product envelope, both the raw maximal
        ratio and its margin against the ledger constant K2[L].
    """
    p = ledger.p
    grid = xi.grid
    n = grid.n
    w_path = GridPath(grid, np.concatenate([x.values, b.values], axis=1))
    mp = m_products(part, omega, w_path, grid.dt, cfg.hurst.H, K_config)
    lhs = _pvar_of_path(xi.level(L), p, 0, n) ** (1.0 / p)
    om_total = omega.value(0, n)
    log_m = L * (mp.log0 + mp.log1 + mp.log2)
    rhs_over_K = om_total ** (1.0 / p) * mp.count * math.exp(log_m)
    rho = lhs / rhs_over_K if rhs_over_K > 0 else float("inf")

    vmemo = _Memo(cfg.vf)
    xiL = xi.level(L)
    defect_max = 0.0
    invariant1_max = 0.0
    for a_anchor, b_anchor, cls in part.intervals:
        if cls == "S2":
            continue
        ks = range(a_anchor, b_anchor + 1)
        opl = np.zeros((b_anchor - a_anchor + 1, cfg.m, cfg.d))
        oplm1 = np.zeros_like(opl)
        penv = np.zeros(b_anchor - a_anchor + 1)
        for off, k in enumerate(ks):
            yk = xi.y.values[k]
            st = [None] + [xi.level(e)[k] for e in range(1, xi.depth + 1)]
            opl[off] = op_L(L, vmemo, yk, st, coeffs)
            oplm1[off] = op_L(L - 1, vmemo, yk, st, coeffs_tilde)
            penv[off] = p_process(xi, k, L)
        row_cache = {}
        for off, ak in enumerate(range(a_anchor, b_anchor)):
            bs = np.arange(ak + 1, b_anchor + 1)
            dxi = xiL[bs] - xiL[ak]
            dx = x.values[bs] - x.values[ak]
            db = b.values[bs] - b.values[ak]
            defect = dxi - dx @ opl[off].T - db @ oplm1[off].T
            om_row = row_cache.get(ak)
            if om_row is None:
                om_row = omega.row(ak)
                row_cache[ak] = om_row
            om_vals = om_row[bs]
            dnorm = np.max(np.abs(defect), axis=1)
            xin = np.max(np.abs(dxi), axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                defect_max = max(defect_max, float(np.max(
                    np.where(om_vals > 0, dnorm / (om_vals ** (2.0 / p) * penv[off]),
                             0.0))))
                invariant1_max = max(invariant1_max, float(np.max(
                    np.where(om_vals > 0, xin / (om_vals ** (1.0 / p) * penv[off]),
                             0.0))))
    counts = part.counts()
    return {
        "n": n,
        "H": cfg.hurst.H,
        "L": L,
        "alpha": part.alpha,
        "S0": counts["S0"],
        "S1": counts["S1"],
        "S2": counts["S2"],
        "logM0": mp.log0,
        "logM1": mp.log1,
        "logM2": mp.log2,
        "lhs": lhs,
        "rhs_over_K": rhs_over_K,
        "rho": rho,
        "defect_max": defect_max,
        "defect_margin_K2": defect_max / ledger.K2[L],
        "invariant1_max": invariant1_max,
        "invariant1_margin_K1": invariant1_max / ledger.K1[L],
        "small_step_flag": mp.small_step_flag,
    }


def lemma_audit(L: int, xi: XiProcess, omega: ControlTable, ledger: ConstantLedger,
                cfg: SchemeConfig, pairs, coeffs=lemma_coeffs,
                coeffs_tilde=lemma_coeffs) -> dict:
    """Empirical check of the operator-increment inequalities with the
    ledger constants (including the two derived ones) on the given pairs."""
    vmemo = _Memo(cfg.vf)
    cols = [_Memo(cfg.vf.column(j)) for j in range(cfg.d)]
    p = ledger.p
    worst = {"C5": 0.0, "C6": 0.0, "C7": 0.0}
    for (a, b) in pairs:
        om = omega.value(a, b)
        if om <= 0:
            continue
        pa = p_process(xi, a, L)
        scale = pa * om ** (1.0 / p)

        def _ops(k):
            yk = xi.y.values[k]
            st = [None] + [xi.level(e)[k] for e in range(1, xi.depth + 1)]
            lv = op_L(L, vmemo, yk, st, coeffs)
            lb = np.zeros((cfg.m, cfg.d, cfg.d))
            lt = np.zeros((cfg.m, cfg.d, cfg.d))
            for i in range(cfg.d):
                for j in range(cfg.d):
                    lb[:, i, j] = op_Lbar(L, cols[i], cols[j], yk, st, coeffs)
                    lt[:, i, j] = op_Ltilde(L, cols[i], cols[j], yk, st,
                                            coeffs, coeffs_tilde)
            return lv, lb, lt

        lv_a, lb_a, lt_a = _ops(a)
        lv_b, lb_b, lt_b = _ops(b)
        worst["C5"] = max(worst["C5"],
                          float(np.max(np.abs(lv_b - lv_a))) / (ledger.C5V[L] * scale))
        worst["C6"] = max(worst["C6"],
                          float(np.max(np.abs(lb_b - lb_a))) / (ledger.C6[L] * scale))
        if L >= 1:
            worst["C7"] = max(worst["C7"],
                              float(np.max(np.abs(lt_b - lt_a))) / (ledger.C7[L] * scale))
    return worst
