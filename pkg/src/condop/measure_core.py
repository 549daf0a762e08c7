"""Finite measure spaces, partition sub-algebras, and dyadic refinement families.

A finite weighted point set stands in for a sigma-finite measure space: the
full power set plays Sigma, and a block partition generates the coarser
sub-algebra.  Points tagged ``cell`` are fragments of a modeled non-atomic
region; refinement families shrink those fragments so that non-atomic
phenomena appear as trends across levels rather than claims at one level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, TYPE_CHECKING

import numpy as np

from .errors import DomainError, ResourceError

if TYPE_CHECKING:  # pragma: no cover
    from .condexp import FunctionOnSpace

ATOM = "atom"
CELL = "cell"

#: Hard cap on dyadic refinement depth; level depth+1 has 2**(depth+1) cells.
MAX_DYADIC_DEPTH = 20


@dataclass(frozen=True)
class MeasureSpace:
    """Finite weighted point set.  Points are ids ``0..n-1``.

    ``weight[i]`` is the measure of point ``i`` (strictly positive, finite).
    ``kind[i]`` is ``"atom"`` or ``"cell"``; cells model a non-atomic part.
    """

    weight: np.ndarray
    kind: tuple[str, ...]

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=float)
        object.__setattr__(self, "weight", w)
        if w.ndim != 1 or len(w) == 0:
            raise DomainError("a space needs a one-dimensional, nonempty weight vector")
        bad = np.nonzero(~(np.isfinite(w) & (w > 0)))[0]
        if bad.size:
            raise DomainError(f"weight at index {bad[0]} must be positive and finite, got {w[bad[0]]}")
        if len(self.kind) != len(w):
            raise DomainError("kinds and weights must have equal length")
        for i, k in enumerate(self.kind):
            if k not in (ATOM, CELL):
                raise DomainError(f"kind at index {i} must be 'atom' or 'cell', got {k!r}")

    @property
    def n_points(self) -> int:
        return len(self.weight)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weight))

    @property
    def cell_mask(self) -> np.ndarray:
        return np.array([k == CELL for k in self.kind])

    def __eq__(self, other):
        return self is other

    def __hash__(self):
        return id(self)


def make_space(weights: Sequence[float], kinds: Sequence[str] | None = None) -> MeasureSpace:
    """Build a space from point weights; ``kinds`` defaults to all atoms."""
    weights = list(weights)
    if kinds is None:
        kinds = [ATOM] * len(weights)
    return MeasureSpace(np.asarray(weights, dtype=float), tuple(kinds))


@dataclass(frozen=True)
class PartitionAlgebra:
    """Block partition of a space; the blocks are the atoms of the sub-algebra.

    ``blocks[b]`` is a sorted index array, ``block_of[i]`` the block of point i.
    No block mixes atom-kind with cell-kind points.
    """

    space: MeasureSpace
    blocks: tuple[np.ndarray, ...]
    block_of: np.ndarray

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def block_measure(self) -> np.ndarray:
        """Measure of each block (sum of member weights)."""
        return np.bincount(self.block_of, weights=self.space.weight, minlength=self.n_blocks)

    def block_kind(self, b: int) -> str:
        return self.space.kind[self.blocks[b][0]]

    @property
    def is_trivial(self) -> bool:
        return self.n_blocks == 1

    @property
    def is_full(self) -> bool:
        return self.n_blocks == self.space.n_points


def make_partition(space: MeasureSpace, assignment: Sequence[int]) -> PartitionAlgebra:
    """Group points by block index.  Block labels must be ``0..m-1`` with no gaps."""
    a = np.asarray(assignment, dtype=int)
    if a.shape != (space.n_points,):
        raise DomainError("assignment must give a block index for every point")
    if a.min(initial=0) < 0:
        raise DomainError("block indices must be nonnegative")
    m = int(a.max()) + 1
    counts = np.bincount(a, minlength=m)
    empty = np.nonzero(counts == 0)[0]
    if empty.size:
        raise DomainError(f"block index {empty[0]} is empty")
    blocks = tuple(np.sort(np.nonzero(a == b)[0]) for b in range(m))
    for b, members in enumerate(blocks):
        kinds = {space.kind[i] for i in members}
        if len(kinds) > 1:
            raise DomainError(f"block {b} mixes atom and cell points")
    return PartitionAlgebra(space, blocks, a)


def singleton_partition(space: MeasureSpace) -> PartitionAlgebra:
    """The full algebra: every point its own block."""
    return make_partition(space, np.arange(space.n_points))


def trivial_partition(space: MeasureSpace) -> PartitionAlgebra:
    """The trivial algebra: one block containing everything."""
    return make_partition(space, np.zeros(space.n_points, dtype=int))


def atoms(partition: PartitionAlgebra, space: MeasureSpace | None = None) -> list[dict]:
    """One entry per block: members, measure, and whether it models part of B.

    ``measure`` is the sum of member weights; ``models_B`` flags cell-kind
    blocks (the finite stand-ins for the non-atomic component).
    """
    if space is None:
        space = partition.space
    if space is not partition.space:
        raise DomainError("partition was built on a different space")
    meas = partition.block_measure
    return [
        {
            "block": b,
            "members": partition.blocks[b],
            "measure": float(meas[b]),
            "models_B": partition.block_kind(b) == CELL,
        }
        for b in range(partition.n_blocks)
    ]


def is_A_measurable(partition: PartitionAlgebra, f: "FunctionOnSpace") -> bool:
    """True iff f is constant on every block (exact equality of stored values)."""
    if f.space is not partition.space:
        raise DomainError("function lives on a different space than the partition")
    v = f.values
    for members in partition.blocks:
        if not np.all(v[members] == v[members[0]]):
            return False
    return True


@dataclass(frozen=True)
class FamilyLevel:
    """One resolution level: 2**level cells over the modeled interval."""

    level: int
    space: MeasureSpace
    partition: PartitionAlgebra
    centers: np.ndarray  # cell centers in [0, interval_length]


@dataclass(frozen=True)
class RefinementFamily:
    """Increasing-resolution models of a non-atomic interval.

    Levels run ``1..depth+1``; level ``l`` has ``2**l`` equal cells.  Total
    mass is conserved level to level and the cell mesh strictly decreases.
    """

    levels: tuple[FamilyLevel, ...]
    parent_maps: tuple[np.ndarray, ...]  # level i+1 points -> level i points
    meshes: tuple[float, ...]

    def __post_init__(self):
        mass0 = self.levels[0].space.total_mass
        for i, lvl in enumerate(self.levels):
            if abs(lvl.space.total_mass - mass0) > 1e-12 * max(mass0, 1.0):
                raise DomainError(f"total mass changed at family level index {i}")
        for i, pm in enumerate(self.parent_maps):
            child_w = self.levels[i + 1].space.weight
            parent_sums = np.bincount(pm, weights=child_w, minlength=self.levels[i].space.n_points)
            if not np.allclose(parent_sums, self.levels[i].space.weight, rtol=1e-12, atol=0):
                raise DomainError(f"children of level {self.levels[i].level} do not sum to their parents")
        for a, b in zip(self.meshes, self.meshes[1:]):
            if not b < a:
                raise DomainError("cell mesh must strictly decrease across levels")

    def level(self, l: int) -> FamilyLevel:
        """The level with 2**l cells."""
        base = self.levels[0].level
        idx = l - base
        if not 0 <= idx < len(self.levels):
            raise DomainError(f"family has levels {base}..{self.levels[-1].level}, not {l}")
        return self.levels[idx]

    @property
    def min_level(self) -> int:
        return self.levels[0].level

    @property
    def max_level(self) -> int:
        return self.levels[-1].level


PairingRule = Callable[[int, int], np.ndarray]

_BLOCK_RULES = {
    "pairs": lambda level, n: np.repeat(np.arange(n // 2), 2) if n >= 2 else np.zeros(n, dtype=int),
    "singletons": lambda level, n: np.arange(n),
}


def dyadic_family(
    depth: int,
    base_interval_mass: float = 1.0,
    blocks_per_level: str | PairingRule = "pairs",
) -> RefinementFamily:
    """Dyadic refinement of an interval of the given mass into equal cells.

    Level ``l`` (for ``l = 1..depth+1``) has ``2**l`` cell points of weight
    ``mass / 2**l``; each parent cell splits into two children.  The partition
    at each level follows ``blocks_per_level``: ``"pairs"`` groups sibling
    cells (the default sub-algebra), ``"singletons"`` makes the partition the
    full algebra.  A callable rule ``(level, n_cells) -> assignment`` is also
    accepted.
    """
    if depth < 1:
        raise DomainError("depth must be at least 1")
    if depth > MAX_DYADIC_DEPTH:
        raise ResourceError(f"depth {depth} exceeds the cap of {MAX_DYADIC_DEPTH}")
    if not (base_interval_mass > 0 and np.isfinite(base_interval_mass)):
        raise DomainError("base interval mass must be positive and finite")
    rule = _BLOCK_RULES[blocks_per_level] if isinstance(blocks_per_level, str) else blocks_per_level

    levels: list[FamilyLevel] = []
    parent_maps: list[np.ndarray] = []
    meshes: list[float] = []
    for l in range(1, depth + 2):
        n = 2**l
        w = base_interval_mass / n
        space = make_space([w] * n, [CELL] * n)
        partition = make_partition(space, rule(l, n))
        centers = (np.arange(n) + 0.5) * (base_interval_mass / n)
        levels.append(FamilyLevel(l, space, partition, centers))
        meshes.append(w)
        if l > 1:
            parent_maps.append(np.arange(n) // 2)
    return RefinementFamily(tuple(levels), tuple(parent_maps), tuple(meshes))
