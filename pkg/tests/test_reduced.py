"""Tests for the reduced system of a one-hidden-layer network."""

import numpy as np
import pytest

from pydlnn.config import SolverOptions
from pydlnn.network import Architecture, TrainingInstance, build_gradient_system, sample_instance
from pydlnn.polytope import NewtonPolytope
from pydlnn.reduced import (
    GenericityError,
    LiftSingularError,
    build_reduced_system,
    lift_reduced_solution,
    sample_mu,
    solve_reduced,
)
from pydlnn.tracker import refine, solution_counts, solve_total_degree


@pytest.fixture
def scalar_arch():
    """One input, one hidden neuron, one output, one data point."""
    return Architecture.parse("H=1,m=1,dx=1,dy=1,d=1")


@pytest.fixture
def scalar_instance():
    """Hand-picked data for ``scalar_arch``."""
    return TrainingInstance(X=[[2.0]], Y=[[1.0]], lambdas=[[[0.5]], [[0.25]]])


def test_scalar_reduced_system_is_a_quartic(scalar_arch, scalar_instance):
    """Test the single univariate equation."""
    system = build_reduced_system(scalar_arch, scalar_instance)
    assert len(system) == 1
    assert system.degrees() == [4]
    assert system.var_names == ("w1_1_1",)
    # kappa = 8, c = 2, T = 16 a^2: (1 + 16 a^2)^2 / 8 - 4
    poly = system[0]
    assert poly.coefficient((4,)) == pytest.approx(32.0)
    assert poly.coefficient((2,)) == pytest.approx(4.0)
    assert poly.coefficient((0,)) == pytest.approx(1 / 8 - 4)


def test_scaled_reduced_system(scalar_arch, scalar_instance):
    """Test the S-variable form with unit largest coefficient."""
    system = build_reduced_system(scalar_arch, scalar_instance, scaled=True)
    assert system.var_names == ("s_1",)
    # c = 2: 2 s^4 + s^2 - 3.875, divided by 3.875
    poly = system[0]
    assert poly.coefficient((4,)) == pytest.approx(2 / 3.875)
    assert poly.coefficient((2,)) == pytest.approx(1 / 3.875)
    assert poly.coefficient((0,)) == pytest.approx(-1.0)

    arch = Architecture.parse("H=1,m=1,dx=2,dy=3,d=2")
    scaled = build_reduced_system(arch, sample_instance(arch, 0), sample_mu(2, 0), scaled=True)
    for poly in scaled:
        assert max(abs(c) for _, c in poly.items()) == pytest.approx(1.0)
        assert poly.degree == 12


def test_mu_adds_linear_terms(scalar_arch, scalar_instance):
    """Test the regularization term."""
    plain = build_reduced_system(scalar_arch, scalar_instance)
    regularized = build_reduced_system(scalar_arch, scalar_instance, mu=[1e-3])
    assert regularized[0] - plain[0] == regularized[0].homogeneous_part(1)
    assert regularized[0].coefficient((1,)) == pytest.approx(1e-3)
    with pytest.raises(ValueError, match="mu must have length 1"):
        build_reduced_system(scalar_arch, scalar_instance, mu=[1e-3, 1e-3])


def test_sample_mu():
    """Test the seeded regularization parameters."""
    mu = sample_mu(3, seed=5)
    assert mu.shape == (3,)
    assert np.all((mu >= 0) & (mu < 1e-3))
    np.testing.assert_array_equal(mu, sample_mu(3, seed=5))


@pytest.mark.parametrize("arch_text", ["H=1,m=1,dx=2,dy=2,d=2", "H=1,m=1,dx=3,dy=2,d=3"])
def test_newton_polytope_in_scaled_simplex(arch_text):
    """Test that every reduced polynomial lies in (4p) times the simplex."""
    arch = Architecture.parse(arch_text)
    system = build_reduced_system(arch, sample_instance(arch, 0), sample_mu(arch.hidden[0], 0))
    assert len(system) == arch.hidden[0]
    for poly in system:
        assert NewtonPolytope.of(poly).contained_in_simplex(4 * arch.d_y)
        assert poly.degree == 4 * arch.d_y


def test_genericity_errors(scalar_arch):
    """Test data the elimination cannot handle."""
    zero_x = TrainingInstance(X=[[0.0]], Y=[[1.0]], lambdas=[[[0.5]], [[0.25]]])
    with pytest.raises(GenericityError, match="x_1 is zero"):
        build_reduced_system(scalar_arch, zero_x)
    zero_lam = TrainingInstance(X=[[1.0]], Y=[[1.0]], lambdas=[[[0.0]], [[0.25]]])
    with pytest.raises(GenericityError):
        build_reduced_system(scalar_arch, zero_lam)
    deep = Architecture.parse("H=2,m=1,dx=1,dy=1,d=1")
    with pytest.raises(ValueError, match="one hidden layer"):
        build_reduced_system(deep, sample_instance(deep, 0))


def test_lift_singular_point(scalar_arch, scalar_instance):
    """Test the lift on the 1 + T = 0 component."""
    with pytest.raises(LiftSingularError):
        lift_reduced_solution([0.25j], scalar_arch, scalar_instance)
    with pytest.raises(ValueError, match="nonzero coordinates"):
        lift_reduced_solution([0.0], scalar_arch, scalar_instance)


def test_lifted_roots_are_critical_points(scalar_arch, scalar_instance):
    """Test that each quartic root lifts to a gradient zero."""
    reduced = build_reduced_system(scalar_arch, scalar_instance)
    roots, _ = solve_total_degree(reduced)
    assert len(roots) == 4
    full = build_gradient_system(scalar_arch, scalar_instance)
    for root in roots:
        weights = lift_reduced_solution(root.point, scalar_arch, scalar_instance)
        assert weights.shape == (2,)
        assert refine(full, weights).residual < 1e-8


def test_solve_reduced_matches_full_system(scalar_arch):
    """Test the toric counts from both routes on sampled data."""
    opts = SolverOptions(seed=2)
    inst = sample_instance(scalar_arch, 2)
    lifted = solve_reduced(scalar_arch, inst, opts)
    full, _ = solve_total_degree(build_gradient_system(scalar_arch, inst), opts)
    assert len(lifted) == solution_counts(full)[1] == 4
    assert all(s.is_toric for s in lifted)


@pytest.mark.slow
def test_solve_reduced_two_neurons_two_outputs():
    """Test d = p = 2: sixteen toric critical points."""
    arch = Architecture.parse("H=1,m=1,dx=2,dy=2,d=2")
    lifted = solve_reduced(arch, sample_instance(arch, 0), SolverOptions(seed=0))
    assert len(lifted) == 16
    points = np.array([s.point for s in lifted])
    distances = np.abs(points[:, None, :] - points[None, :, :]).max(axis=2)
    assert np.all(distances[~np.eye(16, dtype=bool)] > 1e-6)


def test_solve_reduced_three_outputs():
    """Test the degree-12 reduced equation of a single neuron with three outputs."""
    arch = Architecture.parse("H=1,m=1,dx=1,dy=3,d=1")
    for seed in range(3):
        opts = SolverOptions(seed=seed)
        inst = sample_instance(arch, seed)
        lifted = solve_reduced(arch, inst, opts)
        full, _ = solve_total_degree(build_gradient_system(arch, inst), opts)
        assert len(lifted) == solution_counts(full)[1] == 12


@pytest.mark.slow
def test_solve_reduced_two_neurons_three_outputs():
    """Test d = 2, p = 3: 48 lifted points, each matching a toric full-system solution."""
    arch = Architecture.parse("H=1,m=1,dx=1,dy=3,d=2")
    inst = sample_instance(arch, 0)
    lifted = solve_reduced(arch, inst, SolverOptions(seed=0))
    assert len(lifted) == 48

    full, _ = solve_total_degree(build_gradient_system(arch, inst), SolverOptions(seed=0))
    toric = np.array([s.point for s in full if s.is_toric])
    assert len(toric) == 48
    for sol in lifted:
        distance = np.abs(toric - sol.point[None, :]).max(axis=1)
        assert distance.min() < 1e-6
