"""Exact arithmetic and direction enumeration for the Zometool geometric system.

All lattice coordinates live in the ring of numbers (a + b*PHI)/2 with integer
a, b and PHI the golden ratio.  Every strut end-to-end displacement is exactly
representable in this ring (componentwise), which gives drift-free node
identity during structure optimization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

PHI = (1.0 + math.sqrt(5.0)) / 2.0

# Components are bounded by structure extent; keep well inside int64.
_COMPONENT_LIMIT = 2**31


class StrutColor(Enum):
    BLUE = "blue"
    RED = "red"
    YELLOW = "yellow"


class StrutSize(Enum):
    S = "S"
    M = "M"
    L = "L"


class SlotFamily(Enum):
    RECT = "rect"
    PENT = "pent"
    TRI = "tri"


# Rectangular slots take blue struts, pentagonal red, triangular yellow.
FAMILY_FOR_COLOR = {
    StrutColor.BLUE: SlotFamily.RECT,
    StrutColor.RED: SlotFamily.PENT,
    StrutColor.YELLOW: SlotFamily.TRI,
}
COLOR_FOR_FAMILY = {v: k for k, v in FAMILY_FOR_COLOR.items()}


@dataclass(frozen=True)
class GoldenNumber:
    """Number (a + b*PHI)/2 with integer a, b.  The representation is unique."""

    a: int
    b: int

    def __post_init__(self):
        if abs(self.a) >= _COMPONENT_LIMIT or abs(self.b) >= _COMPONENT_LIMIT:
            raise OverflowError(f"golden component out of range: ({self.a}, {self.b})")

    def __add__(self, other: "GoldenNumber") -> "GoldenNumber":
        return GoldenNumber(self.a + other.a, self.b + other.b)

    def __sub__(self, other: "GoldenNumber") -> "GoldenNumber":
        return GoldenNumber(self.a - other.a, self.b - other.b)

    def __neg__(self) -> "GoldenNumber":
        return GoldenNumber(-self.a, -self.b)

    def __mul__(self, other: "GoldenNumber") -> "GoldenNumber":
        # (a1+b1*PHI)(a2+b2*PHI)/4 with PHI^2 = PHI+1 gives
        # (a1*a2 + b1*b2 + (a1*b2 + a2*b1 + b1*b2)*PHI)/4.
        na = self.a * other.a + self.b * other.b
        nb = self.a * other.b + other.a * self.b + self.b * other.b
        if na % 2 or nb % 2:
            raise ValueError(f"product {self} * {other} leaves the half-integer ring")
        return GoldenNumber(na // 2, nb // 2)

    def __float__(self) -> float:
        return (self.a + self.b * PHI) / 2.0


GOLDEN_ZERO = GoldenNumber(0, 0)
GOLDEN_ONE = GoldenNumber(2, 0)
GOLDEN_PHI = GoldenNumber(0, 2)
GOLDEN_PHI_SQ = GoldenNumber(2, 2)  # 1 + PHI


def golden_eval(g: GoldenNumber) -> float:
    return (g.a + g.b * PHI) / 2.0


@dataclass(frozen=True)
class GoldenVector:
    """3-vector of GoldenNumbers, in units of the shortest blue strut b0."""

    x: GoldenNumber
    y: GoldenNumber
    z: GoldenNumber

    def __add__(self, other: "GoldenVector") -> "GoldenVector":
        return GoldenVector(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "GoldenVector") -> "GoldenVector":
        return GoldenVector(self.x - other.x, self.y - other.y, self.z - other.z)

    def __neg__(self) -> "GoldenVector":
        return GoldenVector(-self.x, -self.y, -self.z)

    def scale(self, s: GoldenNumber) -> "GoldenVector":
        return GoldenVector(self.x * s, self.y * s, self.z * s)

    def to_floats(self) -> tuple[float, float, float]:
        return (golden_eval(self.x), golden_eval(self.y), golden_eval(self.z))

    def key(self) -> tuple[int, int, int, int, int, int]:
        return (self.x.a, self.x.b, self.y.a, self.y.b, self.z.a, self.z.b)


def golden_vector_from_ints(ix: int, iy: int, iz: int) -> GoldenVector:
    """Vector with plain integer components (lattice corners)."""
    return GoldenVector(
        GoldenNumber(2 * ix, 0), GoldenNumber(2 * iy, 0), GoldenNumber(2 * iz, 0)
    )


@dataclass(frozen=True)
class StrutSpec:
    color: StrutColor
    size: StrutSize


ALL_STRUT_SPECS = [StrutSpec(c, s) for c in StrutColor for s in StrutSize]

_SIZE_FACTOR = {
    StrutSize.S: GOLDEN_ONE,
    StrutSize.M: GOLDEN_PHI,
    StrutSize.L: GOLDEN_PHI_SQ,
}

_COLOR_SCALE = {
    StrutColor.BLUE: 1.0,
    StrutColor.YELLOW: math.sqrt(3.0) / 2.0,
    StrutColor.RED: math.sqrt(2.0 + PHI) / 2.0,
}


def strut_length(spec: StrutSpec) -> float:
    """Center-to-center length in units of b0."""
    return _COLOR_SCALE[spec.color] * golden_eval(_SIZE_FACTOR[spec.size])


@dataclass(frozen=True)
class SlotDirection:
    index: int
    family: SlotFamily
    unit_vector: tuple[float, float, float]
    # Exact displacement of the size-S strut in this direction, units of b0.
    step_s: GoldenVector

    def lattice_step(self, size: StrutSize) -> GoldenVector:
        return self.step_s.scale(_SIZE_FACTOR[size])


def _cyclic(v):
    (x, y, z) = v
    return [(x, y, z), (z, x, y), (y, z, x)]


def _signs(template, positions):
    """All sign choices applied to the listed component positions."""
    out = set()
    n = len(positions)
    for mask in range(1 << n):
        v = list(template)
        for i, pos in enumerate(positions):
            if mask >> i & 1:
                v[pos] = (-v[pos][0], -v[pos][1])
        out.add(tuple(v))
    return sorted(out)


def _enumerate_raw_directions():
    """Size-S steps per family, as exact component (a, b) pairs.

    Rectangular (blue): the 6 axis units plus (1/2)(+-1, +-PHI, +-(PHI-1))
    over cyclic permutations (24), total 30.
    Triangular (yellow): (1/2)(+-1, +-1, +-1) (8) plus
    (1/2)(0, +-(PHI-1), +-PHI) cyclic (12), total 20; these are the S-step
    vectors of length sqrt(3)/2.
    Pentagonal (red): (1/2)(0, +-1, +-PHI) cyclic (12), S-step length
    sqrt(2+PHI)/2.
    """
    one = (2, 0)
    phi = (0, 2)
    phim1 = (-2, 2)  # PHI - 1
    half = (1, 0)
    halfphi = (0, 1)  # PHI / 2
    halfphim1 = (-1, 1)  # (PHI - 1) / 2
    zero = (0, 0)

    raw = []
    # Rect: axis units
    for base in _cyclic((one, zero, zero)):
        for v in _signs(list(base), [0, 1, 2]):
            raw.append((SlotFamily.RECT, v))
    # Rect: half golden triples
    for base in _cyclic((half, halfphi, halfphim1)):
        for v in _signs(list(base), [0, 1, 2]):
            raw.append((SlotFamily.RECT, v))
    # Tri: half body diagonals
    for v in _signs([half, half, half], [0, 1, 2]):
        raw.append((SlotFamily.TRI, v))
    # Tri: (0, (PHI-1)/2, PHI/2) cyclic
    for base in _cyclic((zero, halfphim1, halfphi)):
        for v in _signs(list(base), [0, 1, 2]):
            raw.append((SlotFamily.TRI, v))
    # Pent: (0, 1/2, PHI/2) cyclic
    for base in _cyclic((zero, half, halfphi)):
        for v in _signs(list(base), [0, 1, 2]):
            raw.append((SlotFamily.PENT, v))
    return raw


def _negate_pair(p):
    return (-p[0], -p[1])


@lru_cache(maxsize=1)
def slot_directions() -> tuple[SlotDirection, ...]:
    """The 62 slot directions, indexed in a fixed reproducible order.

    Index order: sorted by the exact integer components of the size-S step,
    lexicographically over ((xa, xb), (ya, yb), (za, zb)).
    """
    raw = _enumerate_raw_directions()
    assert len(raw) == 62
    raw.sort(key=lambda fv: fv[1])
    dirs = []
    for idx, (family, comps) in enumerate(raw):
        step = GoldenVector(*(GoldenNumber(a, b) for (a, b) in comps))
        fx, fy, fz = step.to_floats()
        norm = math.sqrt(fx * fx + fy * fy + fz * fz)
        dirs.append(
            SlotDirection(
                index=idx,
                family=family,
                unit_vector=(fx / norm, fy / norm, fz / norm),
                step_s=step,
            )
        )
    return tuple(dirs)


@lru_cache(maxsize=1)
def _index_by_step_key():
    return {d.step_s.key(): d.index for d in slot_directions()}


def antipodal_index(index: int) -> int:
    d = slot_directions()[index]
    neg = (-d.step_s).key()
    return _index_by_step_key()[neg]


@lru_cache(maxsize=1)
def axis_direction_indices() -> dict[tuple[int, int, int], int]:
    """Map from signed axis triple, e.g. (1,0,0), to its rect slot index."""
    out = {}
    for d in slot_directions():
        fv = d.unit_vector
        ints = tuple(round(c) for c in fv)
        if sorted(abs(c) for c in ints) == [0, 0, 1] and all(
            abs(f - i) < 1e-12 for f, i in zip(fv, ints)
        ):
            out[ints] = d.index
    assert len(out) == 6
    return out


class FamilyMismatchError(ValueError):
    pass


def strut_displacement(direction: SlotDirection, spec: StrutSpec) -> GoldenVector:
    """Exact end-to-end displacement of a strut in the given slot direction."""
    if FAMILY_FOR_COLOR[spec.color] is not direction.family:
        raise FamilyMismatchError(
            f"{spec.color.value} strut cannot occupy a {direction.family.value} slot"
        )
    return direction.lattice_step(spec.size)


@lru_cache(maxsize=1)
def displacement_table() -> dict[tuple[int, int, int, int, int, int], tuple[int, StrutSpec]]:
    """Exact offset key -> (direction index, spec) over all direction/size pairs."""
    table = {}
    for d in slot_directions():
        color = COLOR_FOR_FAMILY[d.family]
        for size in StrutSize:
            spec = StrutSpec(color, size)
            table[strut_displacement(d, spec).key()] = (d.index, spec)
    return table


@lru_cache(maxsize=1)
def direction_angle_table():
    """62x62 matrix of angles between outgoing direction unit vectors."""
    import numpy as np

    units = np.array([d.unit_vector for d in slot_directions()])
    dots = np.clip(units @ units.T, -1.0, 1.0)
    return np.arccos(dots)
