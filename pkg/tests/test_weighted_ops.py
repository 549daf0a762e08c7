import numpy as np
import pytest

from condop import (
    CaseError,
    CondOperator,
    DomainError,
    ExponentPair,
    apply,
    cond_exp,
    constant,
    em_u,
    function_on,
    lp_norm,
    make_partition,
    make_space,
    matrix_of,
    numeric_rank,
    opnorm_pq,
    reduce_to_EMv,
    reduced_operator,
    singleton_partition,
    v_weight,
)
from condop.range_criteria import support_sets
from conftest import random_function, random_partition, random_space


def uniform4():
    sp = make_space([0.25] * 4)
    return sp, make_partition(sp, [0, 0, 1, 1])


class TestExponentPair:
    def test_conjugates_exact(self):
        e = ExponentPair(1.5, 3.0)
        assert abs(1 / e.p + 1 / e.p_conj - 1.0) <= 1e-14
        assert abs(1 / e.q + 1 / e.q_conj - 1.0) <= 1e-14

    def test_cases(self):
        assert ExponentPair(2, 2).case == "same"
        assert ExponentPair(3, 1.5).case == "down"
        assert ExponentPair(1.5, 3).case == "up"

    def test_r_only_for_down(self):
        e = ExponentPair(3.0, 1.5)
        assert abs(1 / e.r - (1 / 1.5 - 1 / 3.0)) <= 1e-14
        with pytest.raises(CaseError):
            _ = ExponentPair(1.5, 3.0).r

    def test_s_only_for_up(self):
        e = ExponentPair(1.5, 3.0)
        assert abs(1 / e.s - (1 / 1.5 - 1 / 3.0)) <= 1e-14
        with pytest.raises(CaseError):
            _ = ExponentPair(3.0, 1.5).s

    def test_bounds(self):
        with pytest.raises(DomainError):
            ExponentPair(1.0, 2.0)
        with pytest.raises(DomainError):
            ExponentPair(2.0, np.inf)


class TestApply:
    def test_unit_weights_give_cond_exp(self, rng):
        sp, part = uniform4()
        op = em_u(part, constant(sp), 2.0)
        f = random_function(rng, sp)
        np.testing.assert_allclose(apply(op, f).values, cond_exp(part, f).values)

    def test_hand_example(self):
        sp, part = uniform4()
        op = em_u(part, function_on(sp, [1, -1, 2, 0]), 2.0)
        out = apply(op, constant(sp))
        np.testing.assert_allclose(out.values, [0, 0, 1, 1], atol=1e-15)

    def test_zero_u_annihilates(self, rng):
        sp, part = uniform4()
        op = em_u(part, constant(sp, 0.0), 2.0)
        assert np.all(apply(op, random_function(rng, sp)).values == 0)

    def test_linearity(self, rng):
        sp, part = uniform4()
        op = em_u(part, random_function(rng, sp), 2.0)
        f, g = random_function(rng, sp), random_function(rng, sp)
        lhs = apply(op, function_on(sp, 2.0 * f.values + 3j * g.values)).values
        rhs = 2.0 * apply(op, f).values + 3j * apply(op, g).values
        np.testing.assert_allclose(lhs, rhs, atol=1e-14)

    def test_space_mismatch(self):
        sp, part = uniform4()
        other = make_space([1.0, 1.0])
        op = em_u(part, constant(sp), 2.0)
        with pytest.raises(DomainError):
            apply(op, constant(other))


class TestMatrixOf:
    def test_averaging_matrix(self):
        sp = make_space([0.5, 0.5])
        part = make_partition(sp, [0, 0])
        m = matrix_of(em_u(part, constant(sp), 2.0))
        np.testing.assert_allclose(m.matrix, 0.5 * np.ones((2, 2)))

    def test_diagonal_when_algebra_is_full(self):
        sp = make_space([0.2, 0.3, 0.5])
        part = singleton_partition(sp)
        u = function_on(sp, [2, -1, 5])
        m = matrix_of(em_u(part, u, 2.0))
        np.testing.assert_allclose(m.matrix, np.diag([2, -1, 5]))

    def test_zero_matrix(self):
        sp, part = uniform4()
        m = matrix_of(em_u(part, constant(sp, 0.0), 2.0))
        assert np.all(m.matrix == 0)

    def test_matrix_agrees_with_apply(self, rng):
        for _ in range(20):
            sp = random_space(rng, 24)
            part = random_partition(rng, sp)
            op = CondOperator(sp, part, random_function(rng, sp), random_function(rng, sp),
                              ExponentPair(2.0, 2.0))
            m = matrix_of(op)
            for _ in range(5):
                f = random_function(rng, sp)
                direct = apply(op, f).values
                via = m.matrix @ f.values
                scale = max(float(np.max(np.abs(direct))), 1.0)
                assert np.max(np.abs(direct - via)) <= 1e-12 * scale


class TestLpNorm:
    def test_normalized_constant(self):
        sp = make_space([0.5, 0.5])
        assert lp_norm(sp, function_on(sp, [1, 1]), 2) == pytest.approx(1.0)

    def test_three_four_five(self):
        sp = make_space([1.0, 1.0])
        assert lp_norm(sp, function_on(sp, [3, 4]), 2) == pytest.approx(5.0)

    def test_homogeneity(self, rng):
        sp = random_space(rng, 16)
        f = random_function(rng, sp)
        for p in (1.0, 1.5, 2.0, 3.7):
            assert lp_norm(sp, function_on(sp, 2.0 * f.values), p) == pytest.approx(
                2.0 * lp_norm(sp, f, p), rel=1e-12
            )

    def test_sup_norm(self):
        sp = make_space([0.1, 0.9])
        assert lp_norm(sp, function_on(sp, [3, -4]), "sup") == pytest.approx(4.0)

    def test_zero_iff_zero(self):
        sp = make_space([1.0, 1.0])
        assert lp_norm(sp, function_on(sp, [0, 0]), 2) == 0.0
        assert lp_norm(sp, function_on(sp, [0, 1e-150]), 2) > 0.0


class TestVWeight:
    def test_hand_example_p2(self):
        sp, part = uniform4()
        op = em_u(part, function_on(sp, [1, -1, 2, 0]), 2.0)
        np.testing.assert_allclose(
            v_weight(op).values.real, [1, 1, np.sqrt(2), np.sqrt(2)], rtol=1e-14
        )

    def test_measurable_u_gives_abs_u(self, rng):
        sp, part = uniform4()
        u = function_on(sp, [2 + 1j, 2 + 1j, -3, -3])
        for p, q in [(2.0, 2.0), (3.0, 1.5), (1.5, 3.0)]:
            op = em_u(part, u, p, q)
            np.testing.assert_allclose(v_weight(op).values.real, np.abs(u.values), rtol=1e-12)

    def test_zero_u(self):
        sp, part = uniform4()
        assert np.all(v_weight(em_u(part, constant(sp, 0.0), 2.0)).values == 0)

    def test_conjugate_choice_down_uses_q(self):
        sp, part = uniform4()
        u = function_on(sp, [1, 2, 0.5, 3])
        op = em_u(part, u, 3.0, 1.5)
        qc = 3.0  # q' = 1.5/(0.5)
        expect = cond_exp(part, function_on(sp, np.abs(u.values) ** qc)).values.real ** (1 / qc)
        np.testing.assert_allclose(v_weight(op).values.real, expect, rtol=1e-13)


class TestReduction:
    def test_w_one_returns_u(self, rng):
        sp, part = uniform4()
        u = random_function(rng, sp)
        op = CondOperator(sp, part, u, constant(sp), ExponentPair(2, 2))
        np.testing.assert_allclose(reduce_to_EMv(op).values, u.values)

    def test_hand_example(self):
        sp, part = uniform4()
        u = function_on(sp, [1, 1, 1, 1])
        w = function_on(sp, [0, 2, 0, 0])
        op = CondOperator(sp, part, u, w, ExponentPair(2, 2))
        v = reduce_to_EMv(op)
        np.testing.assert_allclose(v.values.real, [np.sqrt(2), np.sqrt(2), 0, 0], rtol=1e-14)

    def test_zero_w(self, rng):
        sp, part = uniform4()
        op = CondOperator(sp, part, random_function(rng, sp), constant(sp, 0.0), ExponentPair(2, 2))
        assert np.all(reduce_to_EMv(op).values == 0)

    def test_norm_identity_random_triples(self, rng):
        for _ in range(60):
            sp = random_space(rng, 24)
            part = random_partition(rng, sp)
            q = float(rng.uniform(1.1, 4.0))
            p = float(rng.uniform(1.1, 4.0))
            op = CondOperator(sp, part, random_function(rng, sp), random_function(rng, sp),
                              ExponentPair(p, q))
            red = reduced_operator(op)
            for _ in range(5):
                f = random_function(rng, sp)
                a = lp_norm(sp, apply(op, f), q)
                b = lp_norm(sp, apply(red, f), q)
                assert abs(a - b) <= 1e-10 * max(a, 1.0)


class TestOpNorm:
    def test_projection_norm_is_one(self, rng):
        for _ in range(5):
            sp = random_space(rng, 16)
            part = random_partition(rng, sp)
            res = opnorm_pq(em_u(part, constant(sp), 2.0))
            assert res.value == pytest.approx(1.0, abs=1e-8)

    def test_diagonal_same_exponent(self):
        sp = make_space([0.3, 0.5, 0.2])
        part = singleton_partition(sp)
        res = opnorm_pq(em_u(part, function_on(sp, [0.5, -2.5, 1.0]), 3.0))
        assert res.value == pytest.approx(2.5, rel=1e-6)

    def test_diagonal_down_hoelder_form(self):
        sp = make_space([0.4, 0.25, 0.35])
        part = singleton_partition(sp)
        u = np.array([1.2, 0.7, 2.1])
        p, q = 3.0, 1.5
        r = 1.0 / (1 / q - 1 / p)
        res = opnorm_pq(em_u(part, function_on(sp, u), p, q))
        expect = float(np.sum(u**r * sp.weight) ** (1 / r))
        assert res.value == pytest.approx(expect, rel=1e-6)


class TestRankLaw:
    def test_rank_equals_active_blocks(self, rng):
        for _ in range(40):
            sp = random_space(rng, 32)
            part = random_partition(rng, sp)
            mask = rng.random(part.n_blocks) > 0.3
            u_raw = random_function(rng, sp).values * mask[part.block_of]
            op = em_u(part, function_on(sp, u_raw), 2.0)
            rank = numeric_rank(matrix_of(op))
            assert rank == len(support_sets(op).N_v)


class TestCodomainValidation:
    def test_algebra_needs_measurable_w(self, rng):
        sp, part = uniform4()
        with pytest.raises(DomainError, match="algebra-measurable"):
            CondOperator(sp, part, constant(sp), function_on(sp, [1, 2, 1, 1]),
                         ExponentPair(2, 2), codomain="algebra")

    def test_codomain_dims(self):
        sp, part = uniform4()
        op = em_u(part, constant(sp), 2.0, codomain="algebra")
        assert op.codomain_dim == 2
        assert op.with_codomain("sigma").codomain_dim == 4
