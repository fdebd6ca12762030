"""Directed rooted branch family indexing the higher-order chain rule.

A depth-N branch is a label sequence (i_1, ..., i_N) with i_1 = 1 and each
subsequent label at most one more than the number of 1's seen so far.  The
number of depth-N branches is the N-th Bell number.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial

__all__ = [
    "MAX_DEPTH",
    "Branch",
    "BranchStats",
    "enumerate_tree",
    "branch_stats",
    "coefficient",
    "children",
]

MAX_DEPTH = 8  # Bell(8) = 4140 branches

Branch = tuple  # label sequences are plain tuples of ints


@dataclass(frozen=True)
class BranchStats:
    """Per-branch label counts ell = (ell_1, ..., ell_alpha) and alpha."""

    ell: tuple
    alpha: int


def validate_branch(branch) -> None:
    branch = tuple(branch)
    if not branch:
        raise ValueError("branch must be non-empty")
    if branch[0] != 1:
        raise ValueError(f"position 1: first label must be 1, got {branch[0]}")
    ones = 0
    for pos, label in enumerate(branch, start=1):
        if pos > 1 and not (1 <= label <= ones + 1):
            raise ValueError(
                f"position {pos}: label {label} exceeds allowed range 1..{ones + 1}"
            )
        if label == 1:
            ones += 1


def children(branch) -> list:
    """Admissible one-label extensions of a branch."""
    alpha = sum(1 for lab in branch if lab == 1) + 1
    return [branch + (r,) for r in range(1, alpha + 1)]


@lru_cache(maxsize=None)
def enumerate_tree(N: int) -> tuple:
    """All depth-N branches in lexicographic order."""
    if not (1 <= N <= MAX_DEPTH):
        raise ValueError(f"depth must be in 1..{MAX_DEPTH}, got {N}")
    if N == 1:
        return ((1,),)
    out = []
    for parent in enumerate_tree(N - 1):
        out.extend(children(parent))
    return tuple(sorted(out))


def branch_stats(branch) -> BranchStats:
    """Counts ell_r and alpha for one branch (validates the label sequence)."""
    branch = tuple(branch)
    validate_branch(branch)
    ell1 = sum(1 for lab in branch if lab == 1)
    alpha = ell1 + 1
    ell = [ell1]
    for r in range(2, alpha + 1):
        ell.append(sum(1 for lab in branch if lab == r) + 1)
    return BranchStats(ell=tuple(ell), alpha=alpha)


def coefficient(L: int, branch) -> Fraction:
    """Exact rational coefficient ell_2! ... ell_alpha! / L! of a depth-L branch."""
    branch = tuple(branch)
    if len(branch) != L:
        raise ValueError(f"branch depth {len(branch)} does not match L={L}")
    stats = branch_stats(branch)
    num = 1
    for e in stats.ell[1:]:
        num *= factorial(e)
    return Fraction(num, factorial(L))
