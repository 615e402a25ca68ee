"""Exact Shannon quantities over explicit finite joint distributions.

Everything is in bits (log base 2) with 0*log(0) = 0. Conditional quantities
are joint-entropy differences, never per-condition renormalizations, so
zero-probability branches cost nothing. All reductions are adjacent-pairwise
tree sums in a fixed index order, which makes results independent of any
parallel schedule.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DomainShape,
    Protocol,
    box_thickness_table,
    selector_labels,
    thickness_table,
)
from .errors import DegenerateInstanceError, InvalidInputError

NORMALIZATION_TOL = 1e-12


def pairwise_sum(values) -> float:
    """Adjacent-pairwise tree sum of a flat array, left to right."""
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    n = arr.size
    if n == 0:
        return 0.0
    while n > 1:
        half = n // 2
        head = arr[: 2 * half]
        combined = head[0::2] + head[1::2]
        if n % 2:
            arr = np.concatenate([combined, arr[2 * half :]])
        else:
            arr = combined
        n = arr.size
    return float(arr[0])


def grouped_pairwise_sums(values: np.ndarray, group_ids: np.ndarray) -> np.ndarray:
    """Per-group adjacent-pairwise sums. group_ids must be nondecreasing; the
    result is ordered by group id."""
    vals = np.asarray(values, dtype=np.float64).copy()
    ids = np.asarray(group_ids, dtype=np.int64)
    while vals.size:
        n = vals.size
        starts = np.flatnonzero(np.r_[True, ids[1:] != ids[:-1]])
        run_len = np.diff(np.append(starts, n))
        if (run_len == 1).all():
            return vals
        pos = np.arange(n) - np.repeat(starts, run_len)
        length_here = np.repeat(run_len, run_len)
        is_left = (pos % 2 == 0) & (pos + 1 < length_here)
        is_carry = (pos % 2 == 0) & (pos + 1 >= length_here)
        keep = np.flatnonzero(is_left | is_carry)
        add = np.zeros(keep.size, dtype=np.float64)
        left_slots = is_left[keep]
        add[left_slots] = vals[keep[left_slots] + 1]
        vals = vals[keep] + add
        ids = ids[keep]
    return vals


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Explicit probability table over the domain's cells (flat row-major)."""

    shape: DomainShape
    p: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.p, dtype=np.float64).reshape(-1)
        if arr.size != self.shape.num_cells:
            raise InvalidInputError("probability table length does not match domain")
        if (arr < 0).any():
            raise InvalidInputError("probabilities must be non-negative")
        total = pairwise_sum(arr)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise InvalidInputError(f"probabilities sum to {total!r}, not 1")
        arr.flags.writeable = False
        object.__setattr__(self, "p", arr)

    @classmethod
    def uniform(cls, shape: DomainShape) -> "JointDistribution":
        n = shape.num_cells
        return cls(shape, np.full(n, 1.0 / n))

    @classmethod
    def from_table(cls, shape: DomainShape, table) -> "JointDistribution":
        return cls(shape, np.asarray(table, dtype=np.float64).reshape(-1))

    @classmethod
    def from_cells(cls, shape: DomainShape, weights: dict) -> "JointDistribution":
        """Build from a {cell: probability} mapping; unmentioned cells get 0."""
        p = np.zeros(shape.num_cells)
        for cell, w in weights.items():
            p[shape.linear_index(cell)] = w
        return cls(shape, p)

    @classmethod
    def random_integer_weights(
        cls,
        shape: DomainShape,
        seed: int | None = None,
        rng: np.random.Generator | None = None,
        max_weight: int = 8,
        allow_zero: bool = True,
    ) -> "JointDistribution":
        """Random rational distribution w_i / sum(w) with small integer
        weights; reproducible and platform-stable."""
        if rng is None:
            rng = np.random.default_rng(seed)
        low = 0 if allow_zero else 1
        w = rng.integers(low, max_weight + 1, size=shape.num_cells).astype(np.float64)
        if w.sum() == 0:
            w[0] = 1.0
        return cls(shape, w / w.sum())

    def condition_on(self, keep: np.ndarray) -> tuple["JointDistribution", float]:
        """Restrict to the flat boolean mask and renormalize. Returns the
        conditioned distribution and the probability mass that was dropped."""
        keep = np.asarray(keep, dtype=bool).reshape(-1)
        if keep.size != self.p.size:
            raise InvalidInputError("condition mask length does not match domain")
        kept_mass = pairwise_sum(np.where(keep, self.p, 0.0))
        if kept_mass <= 0.0:
            raise DegenerateInstanceError("conditioning event has zero probability")
        p = np.where(keep, self.p, 0.0) / kept_mass
        return JointDistribution(self.shape, p / pairwise_sum(p)), 1.0 - kept_mass


@dataclass(frozen=True, eq=False)
class VariableSpec:
    """Named derived variables over cells: flat non-negative label arrays.

    Every variable is a deterministic function of the cell, so joint
    entropies of label groups are exact functionals of the distribution.
    """

    shape: DomainShape
    labels: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for name, arr in self.labels.items():
            arr = np.asarray(arr, dtype=np.int64).reshape(-1)
            if arr.size != self.shape.num_cells:
                raise InvalidInputError(f"variable {name!r} has wrong length")
            if arr.min() < 0:
                raise InvalidInputError(f"variable {name!r} has negative labels")
            arr.flags.writeable = False
            clean[name] = arr
        object.__setattr__(self, "labels", clean)

    @classmethod
    def coordinates(cls, shape: DomainShape) -> "VariableSpec":
        coords = shape.coordinate_labels()
        return cls(shape, {f"X{i}": c for i, c in enumerate(coords)})

    def with_variable(self, name: str, labels) -> "VariableSpec":
        merged = dict(self.labels)
        merged[name] = np.asarray(labels)
        return VariableSpec(self.shape, merged)

    def names(self) -> tuple[str, ...]:
        return tuple(self.labels)


def _combine_labels(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    radix = int(b.max()) + 1
    key = a.astype(np.int64) * radix + b
    _, inverse = np.unique(key, return_inverse=True)
    return inverse.reshape(-1)


class InfoEngine:
    """Caching evaluator of joint/conditional entropies over one distribution
    and one variable spec."""

    def __init__(self, dist: JointDistribution, variables: VariableSpec):
        if dist.shape.num_cells != variables.shape.num_cells:
            raise InvalidInputError("distribution and variables disagree on domain size")
        self.dist = dist
        self.variables = variables
        self._joint_cache: dict[frozenset, float] = {}

    def _group_labels(self, names: tuple[str, ...]) -> np.ndarray:
        combined = None
        for name in sorted(names):
            if name not in self.variables.labels:
                raise InvalidInputError(f"unknown variable {name!r}")
            arr = self.variables.labels[name]
            combined = arr if combined is None else _combine_labels(combined, arr)
        return combined

    def entropy(self, names) -> float:
        """Joint entropy H of a group of named variables, in bits."""
        names = _as_names(names)
        if not names:
            return 0.0
        key = frozenset(names)
        if key in self._joint_cache:
            return self._joint_cache[key]
        labels = self._group_labels(names)
        order = np.argsort(labels, kind="stable")
        q = grouped_pairwise_sums(self.dist.p[order], labels[order])
        safe = np.where(q > 0.0, q, 1.0)
        value = pairwise_sum(-q * np.log2(safe))
        self._joint_cache[key] = value
        return value

    def cond_entropy(self, names, given=()) -> float:
        names = _as_names(names)
        given = _as_names(given)
        if not given:
            return self.entropy(names)
        return self.entropy(names + given) - self.entropy(given)

    def mutual_information(self, a, b, given=()) -> float:
        a, b, given = _as_names(a), _as_names(b), _as_names(given)
        return (
            self.cond_entropy(a, given)
            + self.cond_entropy(b, given)
            - self.cond_entropy(a + b, given)
        )


def _as_names(value) -> tuple[str, ...]:
    if isinstance(value, str):
        return (value,)
    return tuple(value)


_EXPR_RE = re.compile(r"^\s*(H|I)\s*\((.*)\)\s*$", re.S)


def _parse_group(text: str) -> tuple[str, ...]:
    names = tuple(n.strip() for n in text.split(",") if n.strip())
    if not names:
        raise InvalidInputError(f"empty variable group in {text!r}")
    return names


def info_quantity(dist: JointDistribution, variables: VariableSpec, expr: str) -> float:
    """Evaluate an entropy expression over named variables.

    Supported forms: H(A), H(A|C), I(A:B), I(A:B|C), I(A:B:C); groups are
    comma-separated variable names.
    """
    m = _EXPR_RE.match(expr)
    if not m:
        raise InvalidInputError(f"cannot parse expression {expr!r}")
    kind, body = m.group(1), m.group(2)
    if "|" in body:
        main, cond = body.split("|", 1)
        given = _parse_group(cond)
    else:
        main, given = body, ()
    engine = InfoEngine(dist, variables)
    if kind == "H":
        return engine.cond_entropy(_parse_group(main), given)
    groups = [g for g in main.split(":")]
    if len(groups) == 2:
        return engine.mutual_information(_parse_group(groups[0]), _parse_group(groups[1]), given)
    if len(groups) == 3:
        if given:
            raise InvalidInputError("triple information does not take a condition here")
        a, b, w = (_parse_group(g) for g in groups)
        return engine.mutual_information(a, b) - engine.mutual_information(
            a, b, given=w
        )
    raise InvalidInputError(f"I takes 2 or 3 groups, got {len(groups)}")


def binary_entropy(delta: float) -> float:
    """h(delta) = delta*log2(1/delta) + (1-delta)*log2(1/(1-delta))."""
    if not 0.0 <= delta <= 1.0:
        raise InvalidInputError("binary entropy argument must lie in [0, 1]")
    total = 0.0
    for q in (delta, 1.0 - delta):
        if q > 0.0:
            total += q * math.log2(1.0 / q)
    return total


@dataclass(frozen=True)
class TripleInformation:
    value: float
    formula_gap: float


def triple_information(
    dist: JointDistribution, variables: VariableSpec, x_group, y_group, w_group
) -> TripleInformation:
    """I(X:Y:W) via I(X:Y) - I(X:Y|W), plus the absolute gap against the
    inclusion-exclusion form H(W) - H(W|X) - H(W|Y) + H(W|X,Y). Both are exact
    identities for Shannon entropy, so the gap is floating-point noise."""
    x, y, w = _as_names(x_group), _as_names(y_group), _as_names(w_group)
    engine = InfoEngine(dist, variables)
    first = engine.mutual_information(x, y) - engine.mutual_information(x, y, given=w)
    second = (
        engine.entropy(w)
        - engine.cond_entropy(w, x)
        - engine.cond_entropy(w, y)
        + engine.cond_entropy(w, x + y)
    )
    return TripleInformation(value=first, formula_gap=abs(first - second))


# ---------------------------------------------------------------------------
# Protocol-aware quantities


def _check_support_covered(dist: JointDistribution, protocol: Protocol) -> None:
    counts = thickness_table(protocol.cover)
    bad = np.flatnonzero((dist.p > 0.0) & (counts == 0))
    if bad.size:
        cell = protocol.shape.cell_of_linear(int(bad[0]))
        raise InvalidInputError(f"distribution puts mass on uncovered cell {cell}")


def protocol_variables(protocol: Protocol) -> VariableSpec:
    """Coordinates X0..X{l-1} plus the transcript variable T."""
    variables = VariableSpec.coordinates(protocol.shape)
    return variables.with_variable("T", selector_labels(protocol))


def internal_information_cost(dist: JointDistribution, protocol: Protocol) -> float:
    """Sum over parties of I(X_i : T | other coordinates). For two parties
    this is I(X:T|Y) + I(Y:T|X)."""
    if dist.shape.sizes != protocol.shape.sizes:
        raise InvalidInputError("distribution shape does not match protocol domain")
    _check_support_covered(dist, protocol)
    variables = protocol_variables(protocol)
    engine = InfoEngine(dist, variables)
    arity = protocol.shape.arity
    names = [f"X{i}" for i in range(arity)]
    total = 0.0
    for i in range(arity):
        rest = tuple(n for j, n in enumerate(names) if j != i)
        total += engine.mutual_information((names[i],), ("T",), given=rest)
    return total


@dataclass(frozen=True, eq=False)
class InfoProfile:
    """All entropic quantities of one (distribution, protocol[, target])
    instance, plus thickness statistics."""

    arity: int
    sizes: tuple[int, ...]
    num_boxes: int
    quantities: dict[str, float]
    rho_global: int
    rho_box_max: int
    expected_log_rho: float
    f_mode: str | None
    excluded_mass: float
    flags: tuple[str, ...]
    fingerprint: str

    def __getitem__(self, key: str) -> float:
        return self.quantities[key]


def _profile_fingerprint(
    dist: JointDistribution,
    protocol: Protocol,
    f_labels: np.ndarray | None,
    f_mode: str | None,
) -> str:
    h = hashlib.sha256()
    h.update(repr(protocol.shape.sizes).encode())
    for b in protocol.cover.boxes:
        h.update(repr(b.masks).encode())
    sel = protocol.selector
    h.update(sel.kind.encode())
    h.update(repr(sel.seed).encode())
    if sel.table is not None:
        h.update(np.asarray(sel.table, dtype=np.int64).tobytes())
    h.update(dist.p.tobytes())
    if f_labels is not None:
        h.update(np.asarray(f_labels, dtype=np.int64).tobytes())
    h.update(repr(f_mode).encode())
    return h.hexdigest()


def build_profile(
    dist: JointDistribution,
    protocol: Protocol,
    target=None,
    f_mode: str = "function",
    f_table=None,
) -> InfoProfile:
    """Assemble every quantity the inequality checkers consume.

    f_mode "function" reads per-cell colors from a ColoredFunction target;
    "box-color" colors each selected box (unique function color, or smallest
    common admissible relation color) and excludes cells whose selected box
    has no color, conditioning the distribution on the rest; an explicit
    f_table bypasses both.
    """
    from .functions import ColoredFunction, Relation, monochromatic_color

    if dist.shape.sizes != protocol.shape.sizes:
        raise InvalidInputError("distribution shape does not match protocol domain")
    _check_support_covered(dist, protocol)
    shape = protocol.shape
    arity = shape.arity
    t_labels = selector_labels(protocol)

    flags: list[str] = []
    excluded_mass = 0.0
    f_labels = None
    mode: str | None = None
    if f_table is not None:
        f_labels = np.asarray(f_table, dtype=np.int64).reshape(-1)
        if f_labels.size != shape.num_cells:
            raise InvalidInputError("explicit f table has wrong length")
        mode = "explicit"
    elif target is not None:
        if f_mode == "function":
            if not isinstance(target, ColoredFunction):
                raise InvalidInputError("function mode needs a ColoredFunction target")
            if target.shape.sizes != shape.sizes:
                raise InvalidInputError("target shape does not match protocol domain")
            f_labels = target.flat()
            mode = "function"
        elif f_mode == "box-color":
            if not isinstance(target, (ColoredFunction, Relation)):
                raise InvalidInputError("box-color mode needs a function or relation target")
            if target.shape.sizes != shape.sizes:
                raise InvalidInputError("target shape does not match protocol domain")
            selected = sorted(set(int(i) for i in np.unique(t_labels)))
            box_colors = {}
            colorless = []
            for i in selected:
                color = monochromatic_color(protocol.cover.boxes[i], target)
                if color is None:
                    colorless.append(i)
                else:
                    box_colors[i] = color
            sentinel = (
                max(box_colors.values()) + 1 if box_colors else 0
            )
            f_labels = np.array(
                [box_colors.get(int(t), sentinel) for t in t_labels], dtype=np.int64
            )
            if colorless:
                keep = ~np.isin(t_labels, colorless)
                dist, excluded_mass = dist.condition_on(keep)
                flags.append("non-monochromatic-boxes-excluded")
            mode = "box-color"
        else:
            raise InvalidInputError(f"unknown f mode {f_mode!r}")

    variables = VariableSpec.coordinates(shape).with_variable("T", t_labels)
    if f_labels is not None:
        variables = variables.with_variable("F", f_labels)
    engine = InfoEngine(dist, variables)

    counts = thickness_table(protocol.cover)
    rho_global = int(counts.max())
    box_rho = box_thickness_table(protocol.cover)
    selected_boxes = np.unique(t_labels)
    rho_box_max = int(box_rho[selected_boxes].max())
    expected_log_rho = pairwise_sum(dist.p * np.log2(box_rho[t_labels].astype(np.float64)))

    names = [f"X{i}" for i in range(arity)]
    q: dict[str, float] = {}
    q["H(T)"] = engine.entropy("T")
    for i, name in enumerate(names):
        q[f"H(X{i})"] = engine.entropy(name)
        q[f"H(T|X{i})"] = engine.cond_entropy("T", name)
    q["H(X0,X1)"] = engine.entropy(("X0", "X1"))
    q["H(X1|X0)"] = engine.cond_entropy("X1", "X0")
    q["chain_gap"] = abs(q["H(X0,X1)"] - q["H(X0)"] - q["H(X1|X0)"])

    if arity == 2:
        q["I(X0:X1)"] = engine.mutual_information("X0", "X1")
        q["I(X0:X1|T)"] = engine.mutual_information("X0", "X1", given="T")
        triple = triple_information(dist, variables, "X0", "X1", "T")
        q["I(X0:X1:T)"] = triple.value
        q["triple_gap"] = triple.formula_gap
    else:
        triple = triple_information(dist, variables, "X0", "X1", "T")
        q["triple_gap"] = triple.formula_gap

    ic = 0.0
    for i in range(arity):
        rest = tuple(n for j, n in enumerate(names) if j != i)
        ic += engine.mutual_information((names[i],), ("T",), given=rest)
    q["IC"] = ic

    if f_labels is not None:
        q["H(F)"] = engine.entropy("F")
        for i, name in enumerate(names):
            q[f"H(F|X{i})"] = engine.cond_entropy("F", name)
            q[f"H(T|X{i},F)"] = engine.cond_entropy("T", (name, "F"))
        q["H(F|X0,X1)"] = engine.cond_entropy("F", tuple(names))

    return InfoProfile(
        arity=arity,
        sizes=shape.sizes,
        num_boxes=protocol.cover.num_boxes,
        quantities=q,
        rho_global=rho_global,
        rho_box_max=rho_box_max,
        expected_log_rho=expected_log_rho,
        f_mode=mode,
        excluded_mass=excluded_mass,
        flags=tuple(flags),
        fingerprint=_profile_fingerprint(dist, protocol, f_labels, mode),
    )
