"""Independent brute-force oracles used to cross-check the package.

Everything here is deliberately naive (dict loops, plain sums) and shares no
code with the implementation under test.
"""

from __future__ import annotations

import math
from itertools import combinations


def naive_entropy(prob_by_key: dict) -> float:
    """H of a {outcome: probability} table, plain left-to-right sum."""
    total = 0.0
    for p in prob_by_key.values():
        if p > 0.0:
            total -= p * math.log2(p)
    return total


def project(p_by_cell: dict, keyfunc) -> dict:
    out: dict = {}
    for cell, p in p_by_cell.items():
        k = keyfunc(cell)
        out[k] = out.get(k, 0.0) + p
    return out


def naive_joint_entropy(p_by_cell: dict, keyfunc) -> float:
    return naive_entropy(project(p_by_cell, keyfunc))


def naive_mutual_information(p_by_cell: dict, f_a, f_b) -> float:
    return (
        naive_joint_entropy(p_by_cell, f_a)
        + naive_joint_entropy(p_by_cell, f_b)
        - naive_joint_entropy(p_by_cell, lambda c: (f_a(c), f_b(c)))
    )


def naive_conditional_mi(p_by_cell: dict, f_a, f_b, f_w) -> float:
    h = naive_joint_entropy
    return (
        h(p_by_cell, lambda c: (f_a(c), f_w(c)))
        + h(p_by_cell, lambda c: (f_b(c), f_w(c)))
        - h(p_by_cell, lambda c: (f_a(c), f_b(c), f_w(c)))
        - h(p_by_cell, f_w)
    )


def enumerate_all_boxes(n_rows: int, n_cols: int):
    """Every nonempty rectangle of a small grid as (row tuple, col tuple)."""
    rows = [c for k in range(1, n_rows + 1) for c in combinations(range(n_rows), k)]
    cols = [c for k in range(1, n_cols + 1) for c in combinations(range(n_cols), k)]
    for r in rows:
        for c in cols:
            yield r, c


def brute_maximal_monochromatic(colors) -> dict:
    """All maximal monochromatic rectangles per color by full enumeration."""
    n_rows = len(colors)
    n_cols = len(colors[0])
    mono: dict[int, list] = {}
    for r, c in enumerate_all_boxes(n_rows, n_cols):
        values = {colors[x][y] for x in r for y in c}
        if len(values) == 1:
            mono.setdefault(values.pop(), []).append((set(r), set(c)))
    out: dict[int, list] = {}
    for color, boxes in mono.items():
        maximal = []
        for r1, c1 in boxes:
            dominated = any(
                (r1 <= r2 and c1 <= c2) and (r1, c1) != (r2, c2) for r2, c2 in boxes
            )
            if not dominated:
                maximal.append((tuple(sorted(r1)), tuple(sorted(c1))))
        out[color] = sorted(set(maximal))
    return out
