"""Kernel/range/index bookkeeping and the non-atomic dichotomy evidence.

On a model of a non-atomic space, the operator into the algebra is Fredholm
exactly when it is invertible; at desk scale this shows up as a dichotomy
across refinement levels: either kernel dimension or range codimension grows
without bound, or the index stays 0 with a uniformly positive bounded-below
constant.  The witness generators realize the proof's constructions
f_n = f chi_{S(f) and A_n} (kernel side) and g_n = g0 chi_{E_n} (adjoint
side) as checked, executable objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import oracle
from .condexp import FunctionOnSpace, cond_exp, function_on
from .errors import DomainError, PreconditionError
from .measure_core import CELL, RefinementFamily
from .weighted_ops import CondOperator, OperatorMatrix, apply, em_u, matrix_of

#: Residual tolerance (relative to operator scale) for membership checks.
MEMBERSHIP_RTOL = 1e-9


@dataclass(frozen=True)
class FredholmReport:
    kernel_dim: int
    range_rank: int
    codim: int
    index: int
    bounded_below: float
    invertible: bool
    codomain: str
    level: int | None = None
    adjoint_kernel_dim: int | None = None
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if self.index != self.kernel_dim - self.codim:
            raise DomainError("index must equal kernel_dim - codim")
        if self.invertible and (self.kernel_dim != 0 or self.codim != 0):
            raise DomainError("invertible reports require trivial kernel and cokernel")

    def to_dict(self) -> dict:
        return {
            "kernel_dim": self.kernel_dim,
            "range_rank": self.range_rank,
            "codim": self.codim,
            "index": self.index,
            "bounded_below": self.bounded_below,
            "invertible": self.invertible,
            "codomain": self.codomain,
            "level": self.level,
            "adjoint_kernel_dim": self.adjoint_kernel_dim,
            "notes": list(self.notes),
        }


def _l2mu_norm(values: np.ndarray, mu: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(values) ** 2 * mu).real))


def _op_scale(m) -> float:
    sv = oracle.singular_values(m)
    return float(sv[0]) if sv.size else 0.0


def kernel_basis(op: CondOperator, cfg: oracle.OracleConfig | None = None) -> list[FunctionOnSpace]:
    """Orthonormal basis (weighted inner product) of the numeric nullspace."""
    cfg = cfg or oracle.DEFAULT_CONFIG
    m = matrix_of(op)
    K = oracle.kernel_vectors(m, cfg)
    scale = _op_scale(m)
    out = []
    for j in range(K.shape[1]):
        b = function_on(op.space, K[:, j])
        residual = _l2mu_norm(apply(op, b).values, op.space.weight)
        if scale > 0 and residual > MEMBERSHIP_RTOL * scale:
            raise DomainError(f"numeric kernel vector {j} has residual {residual:.3e}")
        out.append(b)
    return out


def adjoint_matrix(op: CondOperator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(matrix of T*, its input weights, its output weights) in the weighted
    l2 pairing <f, g> = sum f conj(g) mu, honoring the declared codomain."""
    m = matrix_of(op)
    if op.codomain == "algebra":
        mb, bw = m.block_matrix()
        adj = (1.0 / m.weights_in)[:, None] * mb.conj().T * bw[None, :]
        return adj, bw, m.weights_in
    adj = (1.0 / m.weights_in)[:, None] * m.matrix.conj().T * m.weights_out[None, :]
    return adj, m.weights_out, m.weights_in


def apply_adjoint(op: CondOperator, g: FunctionOnSpace) -> FunctionOnSpace:
    """T* g = conj(u) E(conj(w) g), the weighted-pairing adjoint on points."""
    if g.space is not op.space:
        raise DomainError("g lives on a different space")
    return function_on(
        op.space, np.conj(op.u.values) * cond_exp(op.partition, op.w.conj() * g).values
    )


def range_analysis(op: CondOperator, cfg: oracle.OracleConfig | None = None) -> FredholmReport:
    """Rank, kernel dimension, codimension against the declared codomain, index.

    For p = q = 2 the codimension is independently cross-checked as the
    dimension of the adjoint kernel in the weighted pairing.
    """
    cfg = cfg or oracle.DEFAULT_CONFIG
    m = matrix_of(op)
    rank = oracle.numeric_rank(m, cfg)
    n = op.space.n_points
    kernel_dim = n - rank
    codim = op.codomain_dim - rank
    notes = []
    if kernel_dim > 0:
        bounded_below = 0.0
    else:
        res = oracle.min_modulus(m, op.exponents.p, op.exponents.q, cfg=cfg)
        bounded_below = res.value
        if res.flagged:
            notes.append(f"bounded_below flags: {','.join(res.flags)}")

    adj, w_in, w_out = adjoint_matrix(op)
    adj_rank = oracle.numeric_rank(OperatorMatrix(adj, w_in, w_out), cfg)
    adjoint_dim = adj.shape[1] - adj_rank
    if op.exponents.p == 2.0 and op.exponents.q == 2.0 and adjoint_dim != codim:
        raise DomainError(
            f"adjoint kernel dimension {adjoint_dim} disagrees with codimension {codim}"
        )

    return FredholmReport(
        kernel_dim=kernel_dim,
        range_rank=rank,
        codim=codim,
        index=kernel_dim - codim,
        bounded_below=bounded_below,
        invertible=(kernel_dim == 0 and codim == 0),
        codomain=op.codomain,
        adjoint_kernel_dim=adjoint_dim,
        notes=tuple(notes),
    )


def is_invertible(op: CondOperator, cfg: oracle.OracleConfig | None = None) -> tuple[bool, float]:
    """(invertible as a map onto the algebra, bounded-below constant)."""
    if op.codomain != "algebra":
        raise DomainError("invertibility is asked relative to the algebra codomain")
    report = range_analysis(op, cfg)
    return report.invertible, report.bounded_below


@dataclass(frozen=True)
class WitnessFamily:
    functions: tuple[FunctionOnSpace, ...]
    omitted: tuple[int, ...] = ()
    notes: tuple[str, ...] = ()

    def __len__(self):
        return len(self.functions)

    def __iter__(self):
        return iter(self.functions)


def kernel_witness_family(
    op: CondOperator,
    f: FunctionOnSpace,
    subblocks: Sequence[Sequence[int]],
    cfg: oracle.OracleConfig | None = None,
) -> WitnessFamily:
    """Restrictions f chi_{S(f) and A_n}, each verified to stay in the kernel.

    Pieces that miss the support of f are omitted (noted); the surviving
    witnesses have pairwise disjoint supports, hence are independent.
    """
    cfg = cfg or oracle.DEFAULT_CONFIG
    m = matrix_of(op)
    scale = _op_scale(m)
    fn = _l2mu_norm(f.values, op.space.weight)
    if fn == 0:
        raise PreconditionError("f must be a nonzero kernel element")
    if _l2mu_norm(apply(op, f).values, op.space.weight) > MEMBERSHIP_RTOL * max(scale * fn, 1e-30):
        raise PreconditionError("f is not in the kernel at tolerance")
    support = set(f.support.tolist())
    witnesses = []
    omitted = []
    notes = []
    for n_, piece in enumerate(subblocks):
        hit = sorted(support.intersection(int(i) for i in piece))
        if not hit:
            omitted.append(n_)
            notes.append(f"subblock {n_} misses S(f); witness omitted")
            continue
        chi = np.zeros(op.space.n_points)
        chi[hit] = 1.0
        fn_values = f.values * chi
        w = function_on(op.space, fn_values)
        res = _l2mu_norm(apply(op, w).values, op.space.weight)
        wn = _l2mu_norm(fn_values, op.space.weight)
        if res > MEMBERSHIP_RTOL * max(scale * wn, 1e-30):
            raise PreconditionError(
                f"witness from subblock {n_} leaves the kernel (residual {res:.3e})"
            )
        witnesses.append(w)
    return WitnessFamily(tuple(witnesses), tuple(omitted), tuple(notes))


def cokernel_witness_family(
    op: CondOperator,
    g0: FunctionOnSpace,
    pieces: Sequence[Sequence[int]],
    cfg: oracle.OracleConfig | None = None,
) -> WitnessFamily:
    """Restrictions g0 chi_{E_n} of a range annihilator, verified in N(T*).

    g0 must annihilate the range in the weighted pairing (checked against a
    range basis); the pieces must be pairwise disjoint.
    """
    cfg = cfg or oracle.DEFAULT_CONFIG
    if g0.space is not op.space:
        raise DomainError("g0 lives on a different space")
    if np.all(g0.values == 0):
        return WitnessFamily((), (), ("g0 == 0: empty family",))
    m = matrix_of(op)
    scale = max(_op_scale(m), 1e-30)
    g0n = _l2mu_norm(g0.values, op.space.weight)
    basis = oracle.range_basis(m, cfg)
    pairings = basis.conj().T @ (op.space.weight * g0.values)
    if np.max(np.abs(pairings), initial=0.0) > MEMBERSHIP_RTOL * g0n:
        raise PreconditionError("g0 does not annihilate the range")
    seen: set[int] = set()
    for n_, piece in enumerate(pieces):
        pts = {int(i) for i in piece}
        if seen & pts:
            raise DomainError(f"piece {n_} overlaps an earlier piece")
        seen |= pts
    witnesses = []
    notes = []
    for n_, piece in enumerate(pieces):
        chi = np.zeros(op.space.n_points)
        chi[np.asarray(list(piece), dtype=int)] = 1.0
        g = function_on(op.space, g0.values * chi)
        res = _l2mu_norm(apply_adjoint(op, g).values, op.space.weight)
        gn = _l2mu_norm(g.values, op.space.weight)
        if res > MEMBERSHIP_RTOL * max(scale * gn, 1e-30):
            raise DomainError(
                f"piece {n_} falls outside N(T*) (residual {res:.3e}); "
                "pieces must respect the algebra where u is active"
            )
        if gn > 0:
            witnesses.append(g)
        else:
            notes.append(f"piece {n_} meets g0 nowhere; dropped")
    return WitnessFamily(tuple(witnesses), (), tuple(notes))


@dataclass(frozen=True)
class SweepResult:
    levels: tuple[int, ...]
    reports: tuple[FredholmReport, ...]
    verdict: str

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.reports]

    def to_dict(self) -> dict:
        return {
            "levels": list(self.levels),
            "reports": [r.to_dict() for r in self.reports],
            "verdict": self.verdict,
        }


def dichotomy_sweep(
    family: RefinementFamily,
    u_rule: Callable[[np.ndarray], np.ndarray],
    p: float,
    q: float | None = None,
    levels: tuple[int, int] | None = None,
    cfg: oracle.OracleConfig | None = None,
) -> SweepResult:
    """Fredholm bookkeeping across refinement levels of a non-atomic model.

    ``u_rule`` maps cell centers to u values, so u is sampled from one fixed
    function on the underlying interval at every level.  Verdicts:
    ``fredholm-fails`` when kernel dimension or codimension strictly
    increases across the last three levels; ``invertible-uniform`` when the
    index is 0 at every level and the bounded-below constant never drops
    under half its first-level value; otherwise ``inconclusive``.
    """
    cfg = cfg or oracle.DEFAULT_CONFIG
    for lvl in family.levels:
        if any(k != CELL for k in lvl.space.kind):
            raise DomainError("dichotomy sweeps need an all-cell (non-atomic model) family")
    lo, hi = levels if levels is not None else (family.min_level, family.max_level)
    if not (family.min_level <= lo <= hi <= family.max_level):
        raise DomainError(
            f"levels {lo}..{hi} outside family range {family.min_level}..{family.max_level}"
        )
    reports = []
    lvls = []
    for l in range(lo, hi + 1):
        lvl = family.level(l)
        u = function_on(lvl.space, np.asarray(u_rule(lvl.centers), dtype=complex))
        op = em_u(lvl.partition, u, p, q, codomain="algebra")
        rep = range_analysis(op, cfg)
        reports.append(
            FredholmReport(
                kernel_dim=rep.kernel_dim,
                range_rank=rep.range_rank,
                codim=rep.codim,
                index=rep.index,
                bounded_below=rep.bounded_below,
                invertible=rep.invertible,
                codomain=rep.codomain,
                level=l,
                adjoint_kernel_dim=rep.adjoint_kernel_dim,
                notes=rep.notes,
            )
        )
        lvls.append(l)

    verdict = "inconclusive"
    kd = [r.kernel_dim for r in reports]
    cd = [r.codim for r in reports]
    if len(reports) >= 3:
        tail_k, tail_c = kd[-3:], cd[-3:]
        if (tail_k[0] < tail_k[1] < tail_k[2]) or (tail_c[0] < tail_c[1] < tail_c[2]):
            verdict = "fredholm-fails"
    if verdict == "inconclusive":
        bb = [r.bounded_below for r in reports]
        if all(r.index == 0 for r in reports) and min(bb) >= 0.5 * bb[0] and bb[0] > 0:
            verdict = "invertible-uniform"
    return SweepResult(tuple(lvls), tuple(reports), verdict)
