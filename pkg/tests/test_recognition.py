import numpy as np
import pytest

from condop import (
    NotConditionalType,
    PreconditionError,
    constant,
    em_u,
    function_on,
    make_partition,
    make_space,
    matrix_of,
)
from condop.condexp import block_averages
from condop.recognition import (
    AbstractOperator,
    recover_structure,
    recover_thmC,
    verify_projection_hypotheses,
)
from conftest import random_partition, random_space


def uniform4():
    sp = make_space([0.25] * 4)
    return sp, make_partition(sp, [0, 0, 1, 1])


def build_weighted_projection(partition, w_values, k_values=None):
    """Matrix of f -> k E(w f) on the partition's space."""
    sp = partition.space
    mu = sp.weight
    same = partition.block_of[:, None] == partition.block_of[None, :]
    k = np.ones(sp.n_points) if k_values is None else np.asarray(k_values, dtype=float)
    w = np.asarray(w_values, dtype=complex)
    meas = partition.block_measure
    m = np.where(same, k[:, None] * w[None, :] * mu[None, :] / meas[partition.block_of][:, None], 0.0)
    return AbstractOperator(sp, m)


def normalized_w(rng, partition, strictly_positive=False):
    """Random w >= 0 with blockwise E(w) = 1."""
    sp = partition.space
    lo = 0.25 if strictly_positive else 0.0
    w = rng.uniform(lo, 2.0, sp.n_points)
    ew = block_averages(partition, w.astype(complex)).real
    return w / ew[partition.block_of]


def blocks_of(partition):
    """Label-free view of a partition: frozen blocks, sorted."""
    return sorted(tuple(b.tolist()) for b in partition.blocks)


class TestVerifyHypotheses:
    def test_plain_conditional_expectation_passes(self):
        sp, part = uniform4()
        T = AbstractOperator(sp, matrix_of(em_u(part, constant(sp), 2.0)).matrix)
        rep = verify_projection_hypotheses(T)
        assert rep.all_passed
        assert rep.order_continuity == "automatic on finite spaces"

    def test_weighted_projection_with_normalized_weight(self):
        sp, part = uniform4()
        T = build_weighted_projection(part, [2, 0, 1, 1])  # blockwise E(w) = 1
        rep = verify_projection_hypotheses(T)
        assert rep.preserves_one and rep.idempotent and rep.multiplicative
        assert rep.all_passed

    def test_perturbation_breaks_idempotency_visibly(self, rng):
        sp, part = uniform4()
        T = build_weighted_projection(part, [2, 0, 1, 1])
        noise = rng.standard_normal(T.matrix.shape)
        T2 = AbstractOperator(sp, T.matrix + 0.01 * noise)
        rep = verify_projection_hypotheses(T2)
        assert not rep.idempotent
        assert rep.idempotency_residual > 1e-3

    def test_probe_count_validated(self):
        sp, part = uniform4()
        T = build_weighted_projection(part, [2, 0, 1, 1])
        with pytest.raises(Exception):
            verify_projection_hypotheses(T, probes=0)


class TestRecoverStructure:
    def test_unweighted_projection(self):
        sp, part = uniform4()
        T = AbstractOperator(sp, matrix_of(em_u(part, constant(sp), 2.0)).matrix)
        rec = recover_structure(T)
        assert rec.partition.block_of.tolist() == [0, 0, 1, 1]
        np.testing.assert_allclose(rec.w.values, 1.0)
        assert rec.normalization["E(w)=1"] <= 1e-12

    def test_weighted_recovery_exact(self):
        sp, part = uniform4()
        T = build_weighted_projection(part, [2, 0, 1, 1])
        rec = recover_structure(T)
        assert rec.partition.block_of.tolist() == [0, 0, 1, 1]
        np.testing.assert_allclose(rec.w.values, [2, 0, 1, 1], atol=1e-12)

    def test_random_dense_matrix_rejected(self, rng):
        sp, _ = uniform4()
        dense = rng.standard_normal((4, 4))
        with pytest.raises(NotConditionalType):
            recover_structure(AbstractOperator(sp, dense), attempt=True)

    def test_round_trips(self, rng):
        for _ in range(40):
            sp = random_space(rng, 24)
            part = random_partition(rng, sp, max_blocks=6)
            w = normalized_w(rng, part)
            T = build_weighted_projection(part, w)
            rec = recover_structure(T)
            assert blocks_of(rec.partition) == blocks_of(part)
            assert np.max(np.abs(rec.w.values - w)) <= 1e-10 * max(1.0, np.max(np.abs(w)))

    def test_hypothesis_gate_and_attempt_override(self, rng):
        sp, part = uniform4()
        # complex weight: factors fine but is not a positive projection
        w = np.array([1 + 1j, 1 - 1j, 2.0, 0.0])
        T = build_weighted_projection(part, w)
        with pytest.raises(PreconditionError):
            recover_structure(T)
        rec = recover_structure(T, attempt=True)
        np.testing.assert_allclose(rec.w.values, w, atol=1e-12)

    def test_unnormalized_weight_no_one_tag(self):
        sp, part = uniform4()
        T = build_weighted_projection(part, [3.0, 1.0, 2.0, 2.0])  # E(w) != 1
        rec = recover_structure(T, attempt=True)
        assert "E(w)=1" not in rec.normalization
        assert any("T1 != 1" in n for n in rec.notes)

    def test_soundness_rebuild_gate(self, rng):
        # near-conditional matrices (perturbed) must never be accepted
        for _ in range(15):
            sp = random_space(rng, 12)
            part = random_partition(rng, sp, max_blocks=4)
            T = build_weighted_projection(part, normalized_w(rng, part))
            noisy = T.matrix + 1e-5 * rng.standard_normal(T.matrix.shape)
            with pytest.raises(NotConditionalType):
                recover_structure(AbstractOperator(sp, noisy), attempt=True)


class TestRecoverThmC:
    def test_k_equal_one_reduces_to_plain_recovery(self):
        sp, part = uniform4()
        T = build_weighted_projection(part, [2, 0, 1, 1])
        rec = recover_thmC(T)
        np.testing.assert_allclose(rec.k.values, 1.0, atol=1e-12)
        np.testing.assert_allclose(rec.w.values, [2, 0, 1, 1], atol=1e-12)

    def test_spec_gauge_example(self):
        # raw k = (2, 2/3, 1, 1): the E(k)=1 gauge is (1.5, 0.5, 1, 1)
        sp, part = uniform4()
        k_raw = np.array([2.0, 2.0 / 3.0, 1.0, 1.0])
        w_raw = np.array([0.5, 1.5, 1.0, 1.0])
        ewk = block_averages(part, (w_raw * k_raw).astype(complex)).real
        w = w_raw / ewk[part.block_of]  # force E(wk) = 1
        T = build_weighted_projection(part, w, k_raw)
        rec = recover_thmC(T)
        np.testing.assert_allclose(rec.k.values.real, [1.5, 0.5, 1, 1], atol=1e-12)
        # the product k(x) w(y) is gauge invariant
        np.testing.assert_allclose(
            rec.k.values.real[:2, None] * rec.w.values.real[None, :2],
            k_raw[:2, None] * w[None, :2],
            atol=1e-12,
        )
        assert rec.normalization["E(wk)=1"] <= 1e-10
        assert rec.normalization["gauge_uniqueness"] <= 1e-10

    def test_zero_row_rejected(self):
        sp, part = uniform4()
        m = build_weighted_projection(part, [2, 0, 1, 1]).matrix.copy()
        m[0, :] = 0.0
        with pytest.raises(PreconditionError, match="strictly positive"):
            recover_thmC(AbstractOperator(sp, m))

    def test_round_trips(self, rng):
        for _ in range(25):
            sp = random_space(rng, 20)
            part = random_partition(rng, sp, max_blocks=5)
            k_raw = rng.uniform(0.3, 2.0, sp.n_points)
            ek = block_averages(part, k_raw.astype(complex)).real
            k = k_raw / ek[part.block_of]  # E(k) = 1
            w_raw = rng.uniform(0.2, 2.0, sp.n_points)
            ewk = block_averages(part, (w_raw * k).astype(complex)).real
            w = w_raw / ewk[part.block_of]  # E(wk) = 1
            T = build_weighted_projection(part, w, k)
            rec = recover_thmC(T)
            assert blocks_of(rec.partition) == blocks_of(part)
            assert np.max(np.abs(rec.k.values.real - k)) <= 1e-10 * max(1.0, k.max())
            assert np.max(np.abs(rec.w.values - w)) <= 1e-10 * max(1.0, np.max(np.abs(w)))
