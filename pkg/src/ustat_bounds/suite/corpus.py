"""Seeded corpora of instances and empirical classes."""
from __future__ import annotations

import itertools
from typing import Sequence

from ..model import generate_empirical_class, generate_instance

ORDER2_ONLY = ("gaussian-chaos-analog", "bernoulli-product")


def member_seed(seed: int, k: int) -> int:
    return seed * 1_000_003 + k


def build_corpus(family: str, size: int, m: Sequence[int] = (1, 2), n: Sequence[int] = (2, 3),
                 atoms: Sequence[int] = (2, 3), seed: int = 0, **options) -> list:
    """``size`` instances cycling through the (m, n, atoms) grid; member k uses its own seed."""
    if family in ORDER2_ONLY:
        m = (2,)
    combos = list(itertools.product(m, n, atoms))
    out = []
    for k in range(size):
        mm, nn, aa = combos[k % len(combos)]
        if family == "symmetric-undecoupled" and mm > nn:
            mm = nn
        out.append(generate_instance(family, mm, nn, aa, member_seed(seed, k), **options))
    return out


def build_class_corpus(size: int, variables: Sequence[int] = (2, 3, 4, 5, 6),
                       functions: Sequence[int] = (1, 2, 4, 8), seed: int = 0,
                       atom_count: int = 2) -> list:
    combos = list(itertools.product(variables, functions))
    return [generate_empirical_class(combos[k % len(combos)][0], combos[k % len(combos)][1],
                                     member_seed(seed, k), atom_count)
            for k in range(size)]
