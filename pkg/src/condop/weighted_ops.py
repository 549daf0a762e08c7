"""The multiplication conditional type operator f -> w E(uf) and its matrix.

An operator is specified by (space, partition, u, w, exponents, codomain).
With ``w == 1`` and codomain ``"algebra"`` it is the map E M_u from L^p(Sigma)
into L^q of the sub-algebra, the setting of the closed-range and Fredholm
classifiers; general (u, w) reduces to that case through ``reduce_to_EMv``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .condexp import FunctionOnSpace, cond_exp, constant, function_on
from .errors import CaseError, DomainError
from .measure_core import MeasureSpace, PartitionAlgebra, is_A_measurable

Codomain = Literal["sigma", "algebra"]


@dataclass(frozen=True)
class ExponentPair:
    """Domain exponent p and codomain exponent q, both in (1, inf).

    Carries the conjugates p' = p/(p-1), q' = q/(q-1) and, when defined, the
    auxiliary exponents r (1/r = 1/q - 1/p, for q < p) and s (1/s = 1/p - 1/q,
    for p < q).
    """

    p: float
    q: float

    def __post_init__(self):
        for name, e in (("p", self.p), ("q", self.q)):
            if not (1.0 < e < np.inf):
                raise DomainError(f"exponent {name} must lie in (1, inf), got {e}")

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def q_conj(self) -> float:
        return self.q / (self.q - 1.0)

    @property
    def case(self) -> str:
        """'same' (p=q), 'down' (q<p), or 'up' (p<q)."""
        if self.p == self.q:
            return "same"
        return "down" if self.q < self.p else "up"

    @property
    def r(self) -> float:
        """1/r = 1/q - 1/p; defined only when q < p."""
        if not self.q < self.p:
            raise CaseError("r is defined only for q < p")
        return 1.0 / (1.0 / self.q - 1.0 / self.p)

    @property
    def s(self) -> float:
        """1/s = 1/p - 1/q; defined only when p < q."""
        if not self.p < self.q:
            raise CaseError("s is defined only for p < q")
        return 1.0 / (1.0 / self.p - 1.0 / self.q)


@dataclass(frozen=True)
class CondOperator:
    """Specification of f -> w E(uf) from L^p(Sigma) into L^q (Sigma or algebra)."""

    space: MeasureSpace
    partition: PartitionAlgebra
    u: FunctionOnSpace
    w: FunctionOnSpace
    exponents: ExponentPair
    codomain: Codomain = "sigma"

    def __post_init__(self):
        if self.partition.space is not self.space:
            raise DomainError("partition was built on a different space")
        if self.u.space is not self.space or self.w.space is not self.space:
            raise DomainError("u and w must live on the operator's space")
        if self.codomain not in ("sigma", "algebra"):
            raise DomainError(f"codomain must be 'sigma' or 'algebra', got {self.codomain!r}")
        if self.codomain == "algebra" and not is_A_measurable(self.partition, self.w):
            raise DomainError("algebra codomain needs an algebra-measurable weight w")

    @property
    def w_is_one(self) -> bool:
        return bool(np.all(self.w.values == 1.0))

    @property
    def codomain_dim(self) -> int:
        return self.partition.n_blocks if self.codomain == "algebra" else self.space.n_points

    def with_codomain(self, codomain: Codomain) -> "CondOperator":
        return replace(self, codomain=codomain)


def em_u(
    partition: PartitionAlgebra,
    u: FunctionOnSpace,
    p: float,
    q: float | None = None,
    codomain: Codomain = "algebra",
) -> CondOperator:
    """The operator E M_u (w == 1), by default into L^q of the algebra."""
    space = partition.space
    return CondOperator(space, partition, u, constant(space), ExponentPair(p, q if q is not None else p), codomain)


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense matrix realization, indexed (output point, input point).

    ``entry(x, y) = w(x) u(y) mu(y) / mu(block(x))`` when x and y share a
    block, else 0.  Weight vectors of domain and codomain come along for norm
    computations; for an ``algebra`` codomain the rows can be collapsed to one
    per block via ``block_matrix``.
    """

    matrix: np.ndarray
    weights_in: np.ndarray
    weights_out: np.ndarray
    partition: PartitionAlgebra | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def weighted(self) -> np.ndarray:
        """D_out^{1/2} M D_in^{-1/2}: singular values match the L^2(mu) geometry."""
        return (
            np.sqrt(self.weights_out)[:, None] * self.matrix * (1.0 / np.sqrt(self.weights_in))[None, :]
        )

    def block_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """(blocks x points) representation and block-measure weights.

        Only meaningful when every row within a block is identical (w == 1);
        used for algebra-codomain rank/adjoint bookkeeping.
        """
        if self.partition is None:
            raise DomainError("no partition attached; cannot collapse rows to blocks")
        first = [members[0] for members in self.partition.blocks]
        return self.matrix[first, :], self.partition.block_measure


def apply(op: CondOperator, f: FunctionOnSpace) -> FunctionOnSpace:
    """Evaluate w E(uf); linear in f."""
    if f.space is not op.space:
        raise DomainError("probe function lives on a different space")
    return op.w * cond_exp(op.partition, op.u * f)


def matrix_of(op: CondOperator) -> OperatorMatrix:
    """Dense realization of the operator on the point basis."""
    part = op.partition
    mu = op.space.weight
    same_block = part.block_of[:, None] == part.block_of[None, :]
    m = np.where(
        same_block,
        op.w.values[:, None] * op.u.values[None, :] * mu[None, :] / part.block_measure[part.block_of][:, None],
        0.0,
    )
    return OperatorMatrix(m, mu.copy(), mu.copy(), partition=part)


def lp_norm(space: MeasureSpace, f: FunctionOnSpace | np.ndarray, p: float | str) -> float:
    """(sum |f|^p mu)^(1/p) for finite p >= 1, or max |f| for p == 'sup'."""
    v = f.values if isinstance(f, FunctionOnSpace) else np.asarray(f)
    a = np.abs(v)
    if isinstance(p, str):
        if p != "sup":
            raise DomainError(f"unknown norm exponent {p!r}")
        return float(np.max(a)) if a.size else 0.0
    if p < 1:
        raise DomainError("norm exponent must be >= 1")
    return float(np.sum(a**p * space.weight) ** (1.0 / p))


def v_weight(op: CondOperator) -> FunctionOnSpace:
    """The reduced symbol (E(|u|^{e'}))^{1/e'}, e' = p' when p == q else q'.

    Nonnegative, blockwise constant; its support carries every closed-range
    criterion quantity.
    """
    e_conj = op.exponents.p_conj if op.exponents.case == "same" else op.exponents.q_conj
    powered = function_on(op.space, np.abs(op.u.values) ** e_conj)
    return function_on(op.space, cond_exp(op.partition, powered).values.real ** (1.0 / e_conj))


def reduce_to_EMv(op: CondOperator) -> FunctionOnSpace:
    """Reduce w E(u .) to E(v .): v = u (E(|w|^q))^{1/q}.

    For every f, ||w E(uf)||_q == ||E(vf)||_q; the general-weight operator
    and the reduced one have identical norm behavior.
    """
    q = op.exponents.q
    ewq = cond_exp(op.partition, function_on(op.space, np.abs(op.w.values) ** q))
    return function_on(op.space, op.u.values * ewq.values.real ** (1.0 / q))


def reduced_operator(op: CondOperator) -> CondOperator:
    """The operator E M_v with v = reduce_to_EMv(op), codomain 'algebra'."""
    return em_u(op.partition, reduce_to_EMv(op), op.exponents.p, op.exponents.q)


def opnorm_pq(op: CondOperator, cfg=None):
    """sup ||Tf||_q / ||f||_p, delegated to the oracle's maximizer."""
    from .oracle import maximize_ratio

    return maximize_ratio(matrix_of(op), op.exponents.p, op.exponents.q, cfg)
