"""Recognizers: decide whether a matrix acts as k E(w .) and recover the parts.

An averaging-projection operator betrays its partition through its rows:
within a block all rows are equal (up to the output weight k), and distinct
blocks have disjoint row supports.  Recovery therefore clusters equal rows,
inverts the entries for the input weight w, fixes the output weight's gauge
by blockwise normalization, and accepts only if the rebuilt matrix reproduces
the input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .condexp import FunctionOnSpace, block_averages, function_on
from .errors import DomainError, NotConditionalType, PreconditionError
from .measure_core import MeasureSpace, PartitionAlgebra, make_partition
from .weighted_ops import OperatorMatrix

#: Relative tolerance for row clustering and weight consistency.
ROW_RTOL = 1e-10
#: Relative tolerance for the mandatory rebuild soundness check.
REBUILD_RTOL = 1e-9


@dataclass(frozen=True)
class AbstractOperator:
    """A linear operator given purely as a dense matrix on a space."""

    space: MeasureSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        n = self.space.n_points
        if m.shape != (n, n):
            raise DomainError(f"matrix shape {m.shape} does not match the {n}-point space")

    def __call__(self, values: np.ndarray) -> np.ndarray:
        return self.matrix @ values


@dataclass
class HypothesisReport:
    """Per-hypothesis residuals for the projection-recognition theorems."""

    positive: bool
    positivity_residual: float
    idempotent: bool
    idempotency_residual: float
    preserves_one: bool
    one_residual: float
    multiplicative: bool
    multiplicativity_residual: float
    sublattice: bool
    sublattice_residual: float
    order_continuity: str = "automatic on finite spaces"
    notes: list[str] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return (self.positive and self.idempotent and self.preserves_one
                and self.multiplicative and self.sublattice)

    def failed(self) -> list[str]:
        out = []
        for name in ("positive", "idempotent", "preserves_one", "multiplicative", "sublattice"):
            if not getattr(self, name):
                out.append(name)
        return out

    def to_dict(self) -> dict:
        return {
            "positive": self.positive,
            "positivity_residual": self.positivity_residual,
            "idempotent": self.idempotent,
            "idempotency_residual": self.idempotency_residual,
            "preserves_one": self.preserves_one,
            "one_residual": self.one_residual,
            "multiplicative": self.multiplicative,
            "multiplicativity_residual": self.multiplicativity_residual,
            "sublattice": self.sublattice,
            "sublattice_residual": self.sublattice_residual,
            "order_continuity": self.order_continuity,
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class RecoveredStructure:
    partition: PartitionAlgebra
    w: FunctionOnSpace
    k: FunctionOnSpace | None
    normalization: dict
    rebuild_residual: float
    notes: tuple[str, ...] = ()


def verify_projection_hypotheses(
    T: AbstractOperator, probes: int = 8, seed: int = 0, cfg: oracle.OracleConfig | None = None
) -> HypothesisReport:
    """Check positivity, T^2 = T, T1 = 1, multiplicativity T(f Tg) = Tf Tg on
    random probe pairs, and that |Tf| stays in the range (sublattice).

    Order continuity carries no finite-space content and is recorded as
    automatically satisfied rather than tested vacuously.
    """
    if probes < 1:
        raise DomainError("need at least one probe pair")
    cfg = cfg or oracle.DEFAULT_CONFIG
    m = T.matrix
    n = T.space.n_points
    scale = max(float(np.max(np.abs(m))), 1e-30)

    pos_res = float(max(np.max(-m.real, initial=0.0), np.max(np.abs(m.imag), initial=0.0)))
    positive = pos_res <= 1e-12 * scale

    idem_res = float(np.max(np.abs(m @ m - m))) / scale
    idempotent = idem_res <= 1e-10

    ones = np.ones(n, dtype=complex)
    one_res = float(np.max(np.abs(m @ ones - ones)))
    preserves_one = one_res <= 1e-10

    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x7EC)))
    mult_res = 0.0
    for _ in range(probes):
        f = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        g = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        tg = m @ g
        lhs = m @ (f * tg)
        rhs = (m @ f) * tg
        probe_scale = max(float(np.max(np.abs(rhs))), 1.0)
        mult_res = max(mult_res, float(np.max(np.abs(lhs - rhs))) / probe_scale)
    multiplicative = mult_res <= 1e-10

    om = OperatorMatrix(m, T.space.weight.copy(), T.space.weight.copy())
    basis = oracle.range_basis(om, cfg)
    lat_res = 0.0
    for _ in range(probes):
        f = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        tf_abs = np.abs(m @ f).astype(complex)
        res = tf_abs - basis @ (basis.conj().T @ (T.space.weight * tf_abs))
        lat_res = max(lat_res, float(np.sqrt(np.sum(np.abs(res) ** 2 * T.space.weight).real)))
    sublattice = lat_res <= 1e-9

    return HypothesisReport(
        positive, pos_res, idempotent, idem_res, preserves_one, one_res,
        multiplicative, mult_res, sublattice, lat_res,
    )


def _cluster_rows(matrix: np.ndarray) -> np.ndarray:
    """Partition assignment from equal matrix rows.

    Rows are lexicographically sorted; adjacent rows within the relative
    tolerance join one cluster (single linkage).  Cluster labels follow the
    lowest point index in each cluster.
    """
    n = matrix.shape[0]
    scale = max(float(np.max(np.abs(matrix))), 1e-30)
    tol = ROW_RTOL * scale
    keys = []
    for col in range(matrix.shape[1] - 1, -1, -1):
        keys.append(matrix[:, col].imag)
        keys.append(matrix[:, col].real)
    order = np.lexsort(keys)
    labels = np.full(n, -1, dtype=int)
    labels[order[0]] = order[0]
    for prev, here in zip(order[:-1], order[1:]):
        if np.max(np.abs(matrix[here] - matrix[prev])) <= tol:
            labels[here] = labels[prev]
        else:
            labels[here] = here
    # canonical labels 0..m-1, ordered by each cluster's lowest point index
    lowest: dict[int, int] = {}
    for point, lab in enumerate(labels.tolist()):
        lowest[lab] = min(lowest.get(lab, point), point)
    reps = sorted(lowest, key=lambda lab: lowest[lab])
    remap = {rep: i for i, rep in enumerate(reps)}
    return np.array([remap[l] for l in labels], dtype=int)


def _build_matrix(partition: PartitionAlgebra, w: np.ndarray, k: np.ndarray | None) -> np.ndarray:
    mu = partition.space.weight
    same = partition.block_of[:, None] == partition.block_of[None, :]
    kk = np.ones(len(mu)) if k is None else k
    return np.where(
        same,
        kk[:, None] * w[None, :] * mu[None, :] / partition.block_measure[partition.block_of][:, None],
        0.0,
    )


def recover_structure(
    T: AbstractOperator, attempt: bool = False, cfg: oracle.OracleConfig | None = None
) -> RecoveredStructure:
    """Recover (partition, w) with T = E(w .), or raise NotConditionalType.

    Unless ``attempt`` is set, the projection hypotheses are verified first;
    pass ``attempt=True`` to try recovery on operators that fail them (e.g.
    sign-indefinite or complex weights, which factor fine but are not
    positive projections).
    """
    if not attempt:
        hyp = verify_projection_hypotheses(T, cfg=cfg)
        if not hyp.all_passed:
            raise PreconditionError(
                f"projection hypotheses fail ({', '.join(hyp.failed())}); "
                "pass attempt=True to force recovery"
            )
    m = T.matrix
    mu = T.space.weight
    scale = max(float(np.max(np.abs(m))), 1e-30)
    assignment = _cluster_rows(m)
    try:
        partition = make_partition(T.space, assignment)
    except DomainError as exc:
        raise NotConditionalType(f"row clusters do not form a partition: {exc}") from exc

    meas = partition.block_measure
    w = np.zeros(T.space.n_points, dtype=complex)
    for b, members in enumerate(partition.blocks):
        rows = m[members][:, members]  # on-block entries
        first = rows[0]
        dev = float(np.max(np.abs(rows - first[None, :]), initial=0.0))
        if dev > ROW_RTOL * scale:
            raise NotConditionalType(
                f"rows of block {b} disagree by {dev:.3e}; weight is not well defined"
            )
        w[members] = first * meas[b] / mu[members]

    rebuilt = _build_matrix(partition, w, None)
    rebuild_res = float(np.max(np.abs(rebuilt - m))) / scale
    if rebuild_res > REBUILD_RTOL:
        raise NotConditionalType(
            f"rebuilt operator differs from the input by {rebuild_res:.3e} (relative)"
        )

    normalization = {}
    notes = []
    one_res = float(np.max(np.abs(m @ np.ones(T.space.n_points) - 1.0)))
    if one_res <= 1e-10:
        ew = block_averages(partition, w)
        normalization["E(w)=1"] = float(np.max(np.abs(ew - 1.0)))
        if normalization["E(w)=1"] > 1e-10:
            raise NotConditionalType("T1 = 1 but recovered weight violates E(w) = 1")
    else:
        notes.append("T1 != 1: no E(w) normalization claimed")
    return RecoveredStructure(
        partition, function_on(T.space, w), None, normalization, rebuild_res, tuple(notes)
    )


def recover_thmC(T: AbstractOperator, cfg: oracle.OracleConfig | None = None) -> RecoveredStructure:
    """Recover (partition, w, k) with T = k E(w .), E(k) = 1 and E(wk) = 1.

    Requires a positive projection onto a sublattice with strictly positive
    T1.  The gauge freedom (a per-block scale between k and w) is fixed by
    E(k) = 1; with that normalization both weights are unique, which the
    recovery cross-checks by rebuilding k from an independent gauge.
    """
    cfg = cfg or oracle.DEFAULT_CONFIG
    n = T.space.n_points
    mu = T.space.weight
    t1 = T.matrix @ np.ones(n, dtype=complex)
    if np.max(np.abs(t1.imag)) > 1e-12 or np.min(t1.real) <= 1e-12:
        raise PreconditionError("T1 is not strictly positive")
    t1 = t1.real
    hyp = verify_projection_hypotheses(T, cfg=cfg)
    if not (hyp.positive and hyp.idempotent and hyp.sublattice):
        failed = [f for f in hyp.failed() if f != "preserves_one" and f != "multiplicative"]
        raise PreconditionError(f"not a positive projection onto a sublattice ({', '.join(failed)})")

    normalized = T.matrix / t1[:, None]
    scale = max(float(np.max(np.abs(T.matrix))), 1e-30)
    assignment = _cluster_rows(normalized)
    try:
        partition = make_partition(T.space, assignment)
    except DomainError as exc:
        raise NotConditionalType(f"row clusters do not form a partition: {exc}") from exc
    meas = partition.block_measure

    et1 = block_averages(partition, t1.astype(complex)).real
    k = t1 / et1[partition.block_of]  # E(k) = 1 per block by construction

    w = np.zeros(n, dtype=complex)
    for b, members in enumerate(partition.blocks):
        rows = T.matrix[members][:, members] / k[members][:, None]
        first = rows[0]
        dev = float(np.max(np.abs(rows - first[None, :]), initial=0.0))
        if dev > ROW_RTOL * scale:
            raise NotConditionalType(f"entries of block {b} do not factor as k(x) w(y)")
        w[members] = first * meas[b] / mu[members]

    rebuilt = _build_matrix(partition, w, k)
    rebuild_res = float(np.max(np.abs(rebuilt - T.matrix))) / scale
    if rebuild_res > REBUILD_RTOL:
        raise NotConditionalType(
            f"rebuilt operator differs from the input by {rebuild_res:.3e} (relative)"
        )

    ek = block_averages(partition, k.astype(complex))
    ewk = block_averages(partition, w * k)
    normalization = {
        "E(k)=1": float(np.max(np.abs(ek - 1.0))),
        "E(wk)=1": float(np.max(np.abs(ewk - 1.0))),
    }
    if normalization["E(wk)=1"] > 1e-8:
        raise NotConditionalType("recovered weights violate E(wk) = 1: not a projection gauge")

    # uniqueness: rebuild k from the recovered w through the matrix and renormalize
    k_alt = np.zeros(n)
    for b, members in enumerate(partition.blocks):
        cols = np.abs(w[members])
        y_star = members[int(np.argmax(cols))]
        k_col = T.matrix[members, y_star] * meas[b] / (w[y_star] * mu[y_star])
        k_alt[members] = k_col.real
    k_alt = k_alt / block_averages(partition, k_alt.astype(complex)).real[partition.block_of]
    uniqueness = float(np.max(np.abs(k_alt - k)))
    normalization["gauge_uniqueness"] = uniqueness

    return RecoveredStructure(
        partition,
        function_on(T.space, w),
        function_on(T.space, k.astype(complex)),
        normalization,
        rebuild_res,
    )
