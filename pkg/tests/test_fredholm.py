import numpy as np
import pytest

from condop import (
    DomainError,
    PreconditionError,
    apply,
    constant,
    em_u,
    function_on,
    indicator,
    make_partition,
    make_space,
    singleton_partition,
)
from condop.fredholm import (
    cokernel_witness_family,
    dichotomy_sweep,
    is_invertible,
    kernel_basis,
    kernel_witness_family,
    range_analysis,
)
from condop.measure_core import dyadic_family
from conftest import random_function, random_partition, random_space


def uniform4():
    sp = make_space([0.25] * 4)
    return sp, make_partition(sp, [0, 0, 1, 1])


class TestKernelBasis:
    def test_averaging_two_point_kernel(self):
        sp = make_space([0.5, 0.5])
        part = make_partition(sp, [0, 0])
        basis = kernel_basis(em_u(part, constant(sp), 2.0))
        assert len(basis) == 1
        v = basis[0].values
        assert abs(v[0] + v[1]) <= 1e-12 * np.max(np.abs(v))  # span{(1, -1)}

    def test_diagonal_nowhere_zero(self):
        sp = make_space([0.3, 0.7])
        part = singleton_partition(sp)
        assert kernel_basis(em_u(part, function_on(sp, [1.0, 2.0]), 2.0)) == []

    def test_rank_nullity_on_half_active(self):
        sp, part = uniform4()
        basis = kernel_basis(em_u(part, function_on(sp, [0, 0, 1, 1]), 2.0))
        assert len(basis) == 3  # rank 1, nullity 3


class TestRangeAnalysis:
    def test_projection_algebra_codomain(self):
        sp, part = uniform4()
        rep = range_analysis(em_u(part, constant(sp), 2.0, codomain="algebra"))
        assert (rep.range_rank, rep.codim, rep.kernel_dim, rep.index) == (2, 0, 2, 2)
        assert rep.adjoint_kernel_dim == 0

    def test_projection_sigma_codomain(self):
        sp, part = uniform4()
        rep = range_analysis(em_u(part, constant(sp), 2.0, codomain="sigma"))
        assert (rep.range_rank, rep.codim, rep.index) == (2, 2, 0)
        assert rep.adjoint_kernel_dim == 2

    def test_zero_operator_bookkeeping(self):
        sp, part = uniform4()
        rep = range_analysis(em_u(part, constant(sp, 0.0), 2.0, codomain="algebra"))
        assert (rep.kernel_dim, rep.codim, rep.index) == (4, 2, 2)
        assert rep.bounded_below == 0.0

    def test_rank_nullity_random(self, rng):
        for _ in range(25):
            sp = random_space(rng, 24)
            part = random_partition(rng, sp)
            rep = range_analysis(em_u(part, random_function(rng, sp), 2.0))
            assert rep.kernel_dim + rep.range_rank == sp.n_points
            assert rep.index == rep.kernel_dim - rep.codim

    def test_adjoint_dim_matches_codim_at_p2(self, rng):
        for codomain in ("sigma", "algebra"):
            for _ in range(15):
                sp = random_space(rng, 20)
                part = random_partition(rng, sp)
                rep = range_analysis(em_u(part, random_function(rng, sp), 2.0, codomain=codomain))
                assert rep.adjoint_kernel_dim == rep.codim


class TestIsInvertible:
    def test_diagonal_bounded_below(self):
        sp = make_space([0.5, 0.3, 0.2])
        part = singleton_partition(sp)
        ok, bb = is_invertible(em_u(part, function_on(sp, [0.4, 1.0, 2.0]), 2.0))
        assert ok
        assert bb == pytest.approx(0.4, abs=1e-12)

    def test_projection_not_invertible_despite_surjectivity(self):
        sp, part = uniform4()
        op = em_u(part, constant(sp), 2.0, codomain="algebra")
        ok, bb = is_invertible(op)
        assert not ok and bb == 0.0
        assert range_analysis(op).codim == 0  # surjective onto the algebra

    def test_zero_operator(self):
        sp, part = uniform4()
        ok, _ = is_invertible(em_u(part, constant(sp, 0.0), 2.0))
        assert not ok

    def test_sigma_codomain_rejected(self):
        sp, part = uniform4()
        with pytest.raises(DomainError):
            is_invertible(em_u(part, constant(sp), 2.0, codomain="sigma"))


class TestKernelWitnesses:
    def test_singleton_pieces_of_dead_block(self):
        sp, part = uniform4()
        op = em_u(part, function_on(sp, [0, 0, 1, 1]), 2.0)
        f = indicator(sp, [0, 1])
        fam = kernel_witness_family(op, f, [[0], [1]])
        assert len(fam) == 2
        supports = [set(w.support.tolist()) for w in fam]
        assert supports == [{0}, {1}]  # disjoint, hence independent

    def test_single_piece_inside_one_block(self):
        sp = make_space([0.5, 0.5])
        part = make_partition(sp, [0, 0])
        op = em_u(part, constant(sp), 2.0)
        f = function_on(sp, [1, -1])
        fam = kernel_witness_family(op, f, [[0, 1]])
        assert len(fam) == 1
        np.testing.assert_allclose(fam.functions[0].values, f.values)

    def test_dyadic_left_half_counts(self):
        fam_space = dyadic_family(4, 1.0, "pairs")
        L = 5
        lvl = fam_space.level(L)
        u = function_on(lvl.space, (lvl.centers >= 0.5).astype(complex))
        op = em_u(lvl.partition, u, 2.0)
        left = list(range(2 ** (L - 1)))
        f = indicator(lvl.space, left)
        fam = kernel_witness_family(op, f, [[i] for i in left])
        assert len(fam) == 2 ** (L - 1)

    def test_piece_missing_support_is_omitted(self):
        sp, part = uniform4()
        op = em_u(part, function_on(sp, [0, 0, 1, 1]), 2.0)
        f = indicator(sp, [0])
        fam = kernel_witness_family(op, f, [[0], [1]])
        assert len(fam) == 1 and fam.omitted == (1,)

    def test_non_kernel_input_rejected(self):
        sp, part = uniform4()
        op = em_u(part, constant(sp), 2.0)
        with pytest.raises(PreconditionError):
            kernel_witness_family(op, constant(sp), [[0]])

    def test_witness_leaving_kernel_rejected(self):
        # f = (1,-1,0,0) kills E, but the half piece {0} does not
        sp, part = uniform4()
        op = em_u(part, constant(sp), 2.0)
        f = function_on(sp, [1, -1, 0, 0])
        with pytest.raises(PreconditionError, match="leaves the kernel"):
            kernel_witness_family(op, f, [[0]])


class TestCokernelWitnesses:
    def test_dead_block_pieces(self):
        sp, part = uniform4()
        op = em_u(part, function_on(sp, [0, 0, 1, 1]), 2.0)
        g0 = indicator(sp, [0, 1])
        fam = cokernel_witness_family(op, g0, [[0], [1]])
        assert len(fam) == 2

    def test_zero_annihilator_gives_empty_family(self):
        sp, part = uniform4()
        op = em_u(part, function_on(sp, [0, 0, 1, 1]), 2.0)
        fam = cokernel_witness_family(op, constant(sp, 0.0), [[0]])
        assert len(fam) == 0

    def test_invertible_diagonal_has_no_annihilator(self):
        sp = make_space([0.5, 0.5])
        part = singleton_partition(sp)
        op = em_u(part, function_on(sp, [1.0, 2.0]), 2.0)
        with pytest.raises(PreconditionError):
            cokernel_witness_family(op, constant(sp), [[0]])

    def test_overlapping_pieces_rejected(self):
        sp, part = uniform4()
        op = em_u(part, function_on(sp, [0, 0, 1, 1]), 2.0)
        with pytest.raises(DomainError, match="overlaps"):
            cokernel_witness_family(op, indicator(sp, [0, 1]), [[0, 1], [1]])


class TestDichotomySweep:
    def test_indicator_rule_fails_fredholm(self):
        fam = dyadic_family(5, 1.0, "pairs")
        sweep = dichotomy_sweep(fam, lambda t: (t < 0.5).astype(complex), 2.0, levels=(3, 5))
        assert sweep.verdict == "fredholm-fails"
        for rep in sweep.reports:
            L = rep.level
            assert rep.kernel_dim == 2 ** (L - 1) + 2 ** (L - 2)

    def test_uniformly_invertible_diagonal_rule(self):
        fam = dyadic_family(5, 1.0, "singletons")
        sweep = dichotomy_sweep(fam, lambda t: 2.0 + t, 2.0, levels=(3, 5))
        assert sweep.verdict == "invertible-uniform"
        assert all(rep.index == 0 for rep in sweep.reports)
        assert min(rep.bounded_below for rep in sweep.reports) >= 2.0

    def test_zero_rule_fails(self):
        fam = dyadic_family(4, 1.0, "pairs")
        sweep = dichotomy_sweep(fam, lambda t: np.zeros(len(t)), 2.0, levels=(2, 4))
        assert sweep.verdict == "fredholm-fails"
        assert sweep.reports[-1].kernel_dim == 2**4

    def test_kernel_growth_law_for_indicator_rules(self):
        fam = dyadic_family(6, 1.0, "pairs")
        sweep = dichotomy_sweep(fam, lambda t: (t < 0.5).astype(complex), 2.0, levels=(3, 6))
        kd = sweep.column("kernel_dim")
        for a, b in zip(kd, kd[1:]):
            assert b == 2 * a  # exact doubling for the half-interval indicator

    def test_mixed_family_rejected(self):
        sp = make_space([0.5, 0.5], ["atom", "atom"])
        part = make_partition(sp, [0, 1])
        from condop.measure_core import FamilyLevel, RefinementFamily

        lvl1 = FamilyLevel(1, sp, part, np.array([0.25, 0.75]))
        sp2 = make_space([0.25] * 4, ["atom"] * 4)
        lvl2 = FamilyLevel(2, sp2, singleton_partition(sp2), (np.arange(4) + 0.5) / 4)
        fam = RefinementFamily((lvl1, lvl2), (np.arange(4) // 2,), (0.5, 0.25))
        with pytest.raises(DomainError, match="all-cell"):
            dichotomy_sweep(fam, lambda t: t, 2.0)

    def test_level_range_validation(self):
        fam = dyadic_family(3, 1.0, "pairs")
        with pytest.raises(DomainError):
            dichotomy_sweep(fam, lambda t: t, 2.0, levels=(1, 9))
