"""Functions on finite spaces and the conditional expectation operator.

``cond_exp`` is the mu-weighted block-averaging projection: on each block A,

    E(f)|_A = (sum_{y in A} f(y) mu(y)) / mu(A),

the unique blockwise-constant function whose integral matches f over every
block.  Scalars are complex throughout; real inputs embed canonically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .measure_core import MeasureSpace, PartitionAlgebra

#: Tolerance for reading a stored complex value as "real" in order comparisons.
REAL_TOL = 1e-14


@dataclass(frozen=True)
class FunctionOnSpace:
    """Complex-valued function given by its values on the points of a space."""

    space: MeasureSpace
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "values", v)
        if v.shape != (self.space.n_points,):
            raise DomainError("function must assign one value to every point")
        if not np.all(np.isfinite(v)):
            raise DomainError("function values must be finite")

    def __mul__(self, other: "FunctionOnSpace | complex") -> "FunctionOnSpace":
        if isinstance(other, FunctionOnSpace):
            if other.space is not self.space:
                raise DomainError("pointwise product requires functions on the same space")
            return FunctionOnSpace(self.space, self.values * other.values)
        return FunctionOnSpace(self.space, self.values * other)

    __rmul__ = __mul__

    def __add__(self, other: "FunctionOnSpace") -> "FunctionOnSpace":
        if other.space is not self.space:
            raise DomainError("sum requires functions on the same space")
        return FunctionOnSpace(self.space, self.values + other.values)

    def __sub__(self, other: "FunctionOnSpace") -> "FunctionOnSpace":
        if other.space is not self.space:
            raise DomainError("difference requires functions on the same space")
        return FunctionOnSpace(self.space, self.values - other.values)

    def __abs__(self) -> "FunctionOnSpace":
        return FunctionOnSpace(self.space, np.abs(self.values).astype(complex))

    def conj(self) -> "FunctionOnSpace":
        return FunctionOnSpace(self.space, np.conj(self.values))

    @property
    def support(self) -> np.ndarray:
        """Indices where the stored value is nonzero."""
        return np.nonzero(self.values != 0)[0]

    def is_nonneg(self, tol: float = REAL_TOL) -> bool:
        """Realizable 'f >= 0': imaginary part within tol, real part >= -tol."""
        return bool(np.all(np.abs(self.values.imag) <= tol) and np.all(self.values.real >= -tol))

    def is_positive(self, tol: float = REAL_TOL) -> bool:
        return bool(np.all(np.abs(self.values.imag) <= tol) and np.all(self.values.real > tol))


def function_on(space: MeasureSpace, values) -> FunctionOnSpace:
    return FunctionOnSpace(space, np.asarray(values, dtype=complex))


def constant(space: MeasureSpace, value: complex = 1.0) -> FunctionOnSpace:
    return FunctionOnSpace(space, np.full(space.n_points, value, dtype=complex))


def indicator(space: MeasureSpace, points) -> FunctionOnSpace:
    v = np.zeros(space.n_points, dtype=complex)
    v[np.asarray(points, dtype=int)] = 1.0
    return FunctionOnSpace(space, v)


def block_indicator(partition: PartitionAlgebra, b: int) -> FunctionOnSpace:
    return indicator(partition.space, partition.blocks[b])


def integral(f: FunctionOnSpace) -> complex:
    """Integral of f over the whole space."""
    return complex(np.sum(f.values * f.space.weight))


def block_averages(partition: PartitionAlgebra, values: np.ndarray) -> np.ndarray:
    """Weighted average of ``values`` over each block, as a length-n_blocks array."""
    w = partition.space.weight
    sums = np.bincount(partition.block_of, weights=(values * w).real, minlength=partition.n_blocks)
    if np.iscomplexobj(values):
        sums = sums + 1j * np.bincount(
            partition.block_of, weights=(values * w).imag, minlength=partition.n_blocks
        )
    return sums / partition.block_measure


def cond_exp(partition: PartitionAlgebra, f: FunctionOnSpace) -> FunctionOnSpace:
    """Conditional expectation of f with respect to the partition's algebra.

    The result is blockwise constant and satisfies the averaging identity
    ``integral(f, A) == integral(E f, A)`` on every block A.
    """
    if f.space is not partition.space:
        raise DomainError("function lives on a different space than the partition")
    avg = block_averages(partition, f.values)
    return FunctionOnSpace(f.space, avg[partition.block_of])
