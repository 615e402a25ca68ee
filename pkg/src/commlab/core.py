"""Index grids, boxes (combinatorial rectangles), covers, transcript selectors,
and deterministic protocol trees.

Factor sets are stored as int bitmasks so membership and intersection are
O(words). All types are immutable after construction; every operation here is
a pure function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidInputError,
    InvalidSelectorError,
    InvalidTreeError,
    UncoveredCellError,
)

MAX_CELLS = 1 << 24
MAX_DIM_SIZE = 1 << 12

_M64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One round of the splitmix64 output function (public-domain constants)."""
    x = (x + 0x9E3779B97F4A7C15) & _M64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def hash64(seed: int, value: int) -> int:
    """Portable 64-bit mix of (seed, value): splitmix64(splitmix64(seed) ^ value).

    This is the fixed hash behind the seeded-random selector; changing it
    changes every seeded selection, so it is pinned by tests.
    """
    return splitmix64(splitmix64(seed & _M64) ^ (value & _M64))


def mask_from_indices(indices, size: int) -> int:
    mask = 0
    for i in indices:
        i = int(i)
        if not 0 <= i < size:
            raise InvalidInputError(f"index {i} out of range for dimension of size {size}")
        mask |= 1 << i
    return mask


def indices_from_mask(mask: int) -> tuple[int, ...]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return tuple(out)


@dataclass(frozen=True)
class DomainShape:
    """Per-dimension cardinalities of the input grid (one entry per party)."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if len(sizes) < 2:
            raise InvalidInputError("domain needs at least 2 dimensions")
        total = 1
        for s in sizes:
            if s < 1:
                raise InvalidInputError(f"dimension size must be >= 1, got {s}")
            if s > MAX_DIM_SIZE:
                raise InvalidInputError(f"dimension size {s} exceeds cap {MAX_DIM_SIZE}")
            total *= s
        if total > MAX_CELLS:
            raise InvalidInputError(f"domain has {total} cells, cap is {MAX_CELLS}")

    @property
    def arity(self) -> int:
        return len(self.sizes)

    @property
    def num_cells(self) -> int:
        return int(np.prod(self.sizes, dtype=np.int64))

    def cells(self):
        """Iterate all cells in row-major order."""
        return np.ndindex(*self.sizes)

    def linear_index(self, cell) -> int:
        cell = tuple(int(c) for c in cell)
        if len(cell) != self.arity:
            raise InvalidInputError(f"cell {cell} has wrong arity for shape {self.sizes}")
        idx = 0
        for c, s in zip(cell, self.sizes):
            if not 0 <= c < s:
                raise InvalidInputError(f"cell {cell} out of range for shape {self.sizes}")
            idx = idx * s + c
        return idx

    def cell_of_linear(self, idx: int) -> tuple[int, ...]:
        out = []
        for s in reversed(self.sizes):
            out.append(idx % s)
            idx //= s
        return tuple(reversed(out))

    def coordinate_labels(self) -> list[np.ndarray]:
        """Flat per-dimension coordinate arrays in row-major cell order."""
        grids = np.indices(self.sizes)
        return [g.reshape(-1) for g in grids]


@dataclass(frozen=True)
class Box:
    """Product of index subsets, one bitmask per dimension. For two parties
    this is the combinatorial rectangle rows x columns."""

    masks: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "masks", tuple(int(m) for m in self.masks))

    @classmethod
    def from_factors(cls, factors, shape: DomainShape) -> "Box":
        if len(factors) != shape.arity:
            raise InvalidInputError("box arity does not match shape")
        return cls(tuple(mask_from_indices(f, s) for f, s in zip(factors, shape.sizes)))

    def factors(self) -> tuple[tuple[int, ...], ...]:
        return tuple(indices_from_mask(m) for m in self.masks)

    def contains(self, cell) -> bool:
        return all((m >> int(c)) & 1 for m, c in zip(self.masks, cell))

    @property
    def num_cells(self) -> int:
        n = 1
        for m in self.masks:
            n *= m.bit_count()
        return n

    def validate(self, shape: DomainShape) -> None:
        if len(self.masks) != shape.arity:
            raise InvalidInputError("box arity does not match shape")
        for m, s in zip(self.masks, shape.sizes):
            if m == 0:
                raise InvalidInputError("box has an empty factor")
            if m >> s:
                raise InvalidInputError(f"box factor has index >= dimension size {s}")

    def indicator(self, shape: DomainShape) -> np.ndarray:
        """Flat boolean membership array over the shape's cells."""
        self.validate(shape)
        ind = None
        for m, s in zip(self.masks, shape.sizes):
            vec = np.zeros(s, dtype=bool)
            vec[list(indices_from_mask(m))] = True
            ind = vec if ind is None else np.logical_and.outer(ind, vec)
        return ind.reshape(-1)


def box(shape: DomainShape, *factors) -> Box:
    """Convenience constructor from per-dimension index iterables."""
    b = Box.from_factors(factors, shape)
    b.validate(shape)
    return b


@dataclass(frozen=True)
class Cover:
    """An ordered list of boxes intended to cover the whole domain."""

    shape: DomainShape
    boxes: tuple[Box, ...]

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))
        if not self.boxes:
            raise InvalidInputError("cover needs at least one box")
        for b in self.boxes:
            b.validate(self.shape)

    @property
    def num_boxes(self) -> int:
        return len(self.boxes)


@dataclass(frozen=True)
class CoverageReport:
    covers_domain: bool
    uncovered: tuple[tuple[int, ...], ...]
    is_partition: bool


def thickness_table(cover: Cover) -> np.ndarray:
    """Per-cell count of covering boxes, flat row-major int array."""
    counts = np.zeros(cover.shape.num_cells, dtype=np.int64)
    for b in cover.boxes:
        counts[b.indicator(cover.shape)] += 1
    return counts


def validate_cover(cover: Cover) -> CoverageReport:
    counts = thickness_table(cover)
    missing = np.flatnonzero(counts == 0)
    uncovered = tuple(cover.shape.cell_of_linear(int(i)) for i in missing)
    return CoverageReport(
        covers_domain=len(uncovered) == 0,
        uncovered=uncovered,
        is_partition=bool(len(uncovered) == 0 and (counts == 1).all()),
    )


def thickness(cover: Cover, *, cell=None, box: int | None = None) -> int:
    """Thickness at a cell, of a box (max over its cells), or global (max over
    all cells). Pass at most one of cell/box; neither means global."""
    if cell is not None and box is not None:
        raise InvalidInputError("pass at most one of cell= and box=")
    counts = thickness_table(cover)
    if cell is not None:
        return int(counts[cover.shape.linear_index(cell)])
    if box is not None:
        if not 0 <= box < cover.num_boxes:
            raise InvalidInputError(f"box index {box} out of range")
        return int(counts[cover.boxes[box].indicator(cover.shape)].max())
    return int(counts.max())


def box_thickness_table(cover: Cover) -> np.ndarray:
    """Thickness of every box (max cell thickness inside it), index-aligned."""
    counts = thickness_table(cover)
    return np.array(
        [int(counts[b.indicator(cover.shape)].max()) for b in cover.boxes],
        dtype=np.int64,
    )


SELECTOR_KINDS = ("min-index", "seeded-random", "explicit")


@dataclass(frozen=True)
class TranscriptSelector:
    """Deterministic rule that names one covering box per cell."""

    kind: str
    seed: int | None = None
    table: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in SELECTOR_KINDS:
            raise InvalidInputError(f"unknown selector kind {self.kind!r}")
        if self.kind == "seeded-random" and self.seed is None:
            raise InvalidInputError("seeded-random selector needs a seed")
        if self.kind == "explicit":
            if self.table is None:
                raise InvalidInputError("explicit selector needs a table")
            object.__setattr__(self, "table", tuple(int(t) for t in self.table))

    @classmethod
    def min_index(cls) -> "TranscriptSelector":
        return cls("min-index")

    @classmethod
    def seeded(cls, seed: int) -> "TranscriptSelector":
        return cls("seeded-random", seed=int(seed))

    @classmethod
    def explicit(cls, table) -> "TranscriptSelector":
        return cls("explicit", table=tuple(table))


@dataclass(frozen=True)
class Protocol:
    """A cover plus a transcript selector; validated at construction."""

    cover: Cover
    selector: TranscriptSelector

    def __post_init__(self):
        sel = self.selector
        if sel.kind == "explicit":
            n = self.cover.shape.num_cells
            if len(sel.table) != n:
                raise InvalidSelectorError(
                    f"explicit selector table has {len(sel.table)} entries, domain has {n} cells"
                )
            table = np.asarray(sel.table, dtype=np.int64)
            if (table < 0).any() or (table >= self.cover.num_boxes).any():
                raise InvalidSelectorError("explicit selector entry is not a box index")
            for i, b in enumerate(self.cover.boxes):
                bad = np.flatnonzero((table == i) & ~b.indicator(self.cover.shape))
                if bad.size:
                    cell = self.cover.shape.cell_of_linear(int(bad[0]))
                    raise InvalidSelectorError(
                        f"explicit selector maps cell {cell} to box {i}, which does not contain it"
                    )

    @property
    def shape(self) -> DomainShape:
        return self.cover.shape


def select_transcript(protocol: Protocol, cell) -> int:
    """Index of the box the selector designates for one cell."""
    shape = protocol.shape
    lin = shape.linear_index(cell)
    sel = protocol.selector
    if sel.kind == "explicit":
        return int(sel.table[lin])
    containing = [i for i, b in enumerate(protocol.cover.boxes) if b.contains(cell)]
    if not containing:
        raise UncoveredCellError(f"cell {tuple(cell)} is covered by no box")
    if sel.kind == "min-index":
        return containing[0]
    return containing[hash64(sel.seed, lin) % len(containing)]


def selector_labels(protocol: Protocol) -> np.ndarray:
    """Selected box index for every cell, flat row-major."""
    shape = protocol.shape
    n = shape.num_cells
    sel = protocol.selector
    if sel.kind == "explicit":
        return np.asarray(sel.table, dtype=np.int64)
    out = np.full(n, -1, dtype=np.int64)
    if sel.kind == "min-index":
        for i in range(protocol.cover.num_boxes - 1, -1, -1):
            out[protocol.cover.boxes[i].indicator(shape)] = i
        if (out < 0).any():
            cell = shape.cell_of_linear(int(np.flatnonzero(out < 0)[0]))
            raise UncoveredCellError(f"cell {cell} is covered by no box")
        return out
    # seeded-random: pick position hash64(seed, linear) mod rho_cell among the
    # containing boxes in ascending index order.
    counts = thickness_table(protocol.cover)
    if (counts == 0).any():
        cell = shape.cell_of_linear(int(np.flatnonzero(counts == 0)[0]))
        raise UncoveredCellError(f"cell {cell} is covered by no box")
    picks = np.array([hash64(sel.seed, i) for i in range(n)], dtype=np.uint64)
    remaining = (picks % counts.astype(np.uint64)).astype(np.int64)
    for i, b in enumerate(protocol.cover.boxes):
        ind = b.indicator(shape)
        hit = ind & (out < 0) & (remaining == 0)
        out[hit] = i
        remaining[ind] -= 1
    return out


# ---------------------------------------------------------------------------
# Protocol trees


@dataclass(frozen=True)
class TreeLeaf:
    pass


@dataclass(frozen=True)
class TreeSplit:
    owner: int
    left_mask: int
    right_mask: int
    left: "TreeLeaf | TreeSplit"
    right: "TreeLeaf | TreeSplit"


@dataclass(frozen=True)
class ProtocolTree:
    """Binary tree of two-way index-set splits; leaves denote boxes."""

    shape: DomainShape
    root: TreeLeaf | TreeSplit


def compile_tree(tree: ProtocolTree) -> Protocol:
    """Flatten a protocol tree into a partition cover with an explicit
    selector mapping each cell to its unique leaf."""
    shape = tree.shape
    boxes: list[Box] = []

    def walk(node, masks: tuple[int, ...]):
        if isinstance(node, TreeLeaf):
            boxes.append(Box(masks))
            return
        if not isinstance(node, TreeSplit):
            raise InvalidTreeError(f"unexpected tree node {node!r}")
        if not 0 <= node.owner < shape.arity:
            raise InvalidTreeError(f"split owner {node.owner} out of range")
        current = masks[node.owner]
        left, right = int(node.left_mask), int(node.right_mask)
        if left == 0 or right == 0:
            raise InvalidTreeError("split side is empty")
        if (left & right) or (left | right) != current:
            raise InvalidTreeError("split sides do not partition the inherited index set")
        walk(node.left, masks[: node.owner] + (left,) + masks[node.owner + 1 :])
        walk(node.right, masks[: node.owner] + (right,) + masks[node.owner + 1 :])

    walk(tree.root, tuple((1 << s) - 1 for s in shape.sizes))
    cover = Cover(shape, tuple(boxes))
    table = np.full(shape.num_cells, -1, dtype=np.int64)
    for i, b in enumerate(cover.boxes):
        table[b.indicator(shape)] = i
    # leaves partition the domain by the split discipline, so every cell got
    # exactly one leaf
    return Protocol(cover, TranscriptSelector.explicit(table.tolist()))


def tree_depth(tree: ProtocolTree) -> int:
    def depth(node) -> int:
        if isinstance(node, TreeLeaf):
            return 0
        return 1 + max(depth(node.left), depth(node.right))

    return depth(tree.root)


def log2_int(value: int) -> float:
    """log base 2 of a positive integer (thickness statistics)."""
    if value < 1:
        raise InvalidInputError(f"log2 of non-positive count {value}")
    return math.log2(value)
