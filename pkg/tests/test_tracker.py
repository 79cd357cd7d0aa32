"""Tests for total-degree homotopy continuation."""

import numpy as np
import pytest

from pydlnn.bounds import compute_bounds
from pydlnn.config import SolverOptions
from pydlnn.network import Architecture, build_gradient_system, sample_instance
from pydlnn.polynomial import NonSquareSystemError, Polynomial, PolySystem
from pydlnn.tracker import (
    Solution,
    _BatchTracker,
    classify,
    conjugation_closed,
    dedupe,
    real_parity_ok,
    refine,
    solution_counts,
    solve_total_degree,
    start_points,
)


@pytest.fixture
def worked_system(small_arch, small_instance):
    """Gradient system of the two-point worked example."""
    return build_gradient_system(small_arch, small_instance)


@pytest.fixture
def worked_solutions(worked_system):
    """Solutions of the worked example (81 paths)."""
    return solve_total_degree(worked_system, SolverOptions(seed=0))


def _sorted_points(solutions):
    return sorted(
        (tuple(np.round(s.point, 6)) for s in solutions),
        key=lambda p: tuple((z.real, z.imag) for z in p),
    )


def test_start_points_are_roots_of_unity():
    """Test the mixed-radix start solutions."""
    points = start_points([2, 3], np.arange(6))
    assert points.shape == (6, 2)
    np.testing.assert_allclose(points[:, 0] ** 2, 1.0, atol=1e-12)
    np.testing.assert_allclose(points[:, 1] ** 3, 1.0, atol=1e-12)
    assert len({tuple(np.round(p, 8)) for p in points}) == 6


def test_cube_roots_of_unity():
    """Test a univariate cubic."""
    x = Polynomial.variable(0, 1)
    solutions, stats = solve_total_degree(PolySystem([x**3 - 1]))
    assert len(solutions) == 3
    assert stats.paths_tracked == 3
    np.testing.assert_allclose(sorted(np.angle(s.point[0]) for s in solutions),
                               [-2 * np.pi / 3, 0.0, 2 * np.pi / 3], atol=1e-8)
    assert sum(s.is_real for s in solutions) == 1


def test_worked_example_counts(worked_solutions):
    """Test 17 critical points, 16 of them in the torus."""
    solutions, stats = worked_solutions
    n_c, n_cstar, n_r = solution_counts(solutions)
    assert n_c == 17
    assert n_cstar == 16
    assert n_r <= n_c
    assert stats.paths_tracked == 81
    assert (
        stats.paths_converged + stats.paths_diverged + stats.paths_failed == stats.paths_tracked
    )


def test_worked_example_structure(worked_solutions, worked_system):
    """Test residuals, origin recovery and conjugate pairing."""
    solutions, _ = worked_solutions
    assert any(not np.any(s.point) or all(s.zero_mask) for s in solutions)
    for sol in solutions:
        assert np.max(np.abs(worked_system.evaluate(sol.point))) < 1e-8
        assert sol.is_toric == (not any(sol.zero_mask))
    assert conjugation_closed(solutions)
    assert real_parity_ok(solutions)


def test_single_neuron_network():
    """Test the scalar network: 5 critical points, 4 in the torus."""
    arch = Architecture.parse("H=1,m=1,dx=1,dy=1,d=1")
    for seed in range(3):
        system = build_gradient_system(arch, sample_instance(arch, seed))
        solutions, _ = solve_total_degree(system, SolverOptions(seed=seed))
        assert solution_counts(solutions)[:2] == (5, 4)


def test_deterministic(worked_system):
    """Test that a fixed seed reproduces the solution set."""
    opts = SolverOptions(seed=3, max_paths=20)
    first, _ = solve_total_degree(worked_system, opts)
    second, _ = solve_total_degree(worked_system, opts)
    assert _sorted_points(first) == _sorted_points(second)


def test_threads_do_not_change_results(worked_system):
    """Test batching over a thread pool."""
    serial, _ = solve_total_degree(worked_system, SolverOptions(seed=1, batch_size=81))
    pooled, stats = solve_total_degree(
        worked_system, SolverOptions(seed=1, batch_size=10, threads=3)
    )
    assert len(serial) == len(pooled)
    assert stats.paths_tracked == 81


def test_max_paths(worked_system):
    """Test tracking a prefix of the start solutions."""
    _, stats = solve_total_degree(worked_system, SolverOptions(max_paths=5))
    assert stats.paths_tracked == 5


def test_non_square_system():
    """Test that non-square systems are refused."""
    x = Polynomial.variable(0, 2)
    with pytest.raises(NonSquareSystemError):
        solve_total_degree(PolySystem([x * x - 1]))


def test_refine(worked_solutions, worked_system):
    """Test Newton polishing from exact and perturbed roots."""
    solutions, _ = worked_solutions
    root = next(s for s in solutions if s.is_toric)
    again = refine(worked_system, root.point)
    assert again.newton_iters <= 2
    np.testing.assert_allclose(again.point, root.point, atol=1e-10)
    perturbed = refine(worked_system, root.point + 1e-4)
    assert perturbed.newton_iters <= 5
    np.testing.assert_allclose(perturbed.point, root.point, atol=1e-8)

    origin = refine(worked_system, np.zeros(4))
    assert origin.newton_iters == 0
    assert origin.residual == 0.0
    assert np.isfinite(origin.condition_estimate)


def test_refine_flags_singular_jacobian():
    """Test the condition estimate at a double root."""
    x = Polynomial.variable(0, 1)
    sol = refine(PolySystem([x**2]), [0.0])
    assert sol.condition_estimate == np.inf


def test_classify():
    """Test zero masks and realness."""
    origin = classify(Solution(point=np.zeros(3), residual=0.0))
    assert origin.zero_mask == (True, True, True)
    assert not origin.is_toric
    assert origin.is_real

    mixed = classify(Solution(point=np.array([0.5, -0.2 + 1e-3j]), residual=0.0))
    assert mixed.is_toric
    assert not mixed.is_real


def test_dedupe():
    """Test clustering keeps the lowest residual and ignores order."""
    a = Solution(point=np.array([1.0, 2.0]), residual=1e-12)
    b = Solution(point=np.array([1.0 + 1e-11, 2.0]), residual=1e-14)
    c = Solution(point=np.array([-1.0, 0.5j]), residual=1e-13)
    kept = dedupe([a, b, c])
    assert len(kept) == 2
    assert any(s.residual == 1e-14 for s in kept)
    assert _sorted_points(dedupe([c, b, a])) == _sorted_points(kept)
    assert dedupe([]) == []


def test_conjugation_closure_detects_missing_partner():
    """Test the conjugate-pair check."""
    z = Solution(point=np.array([1.0 + 1.0j]), residual=0.0)
    zbar = Solution(point=np.array([1.0 - 1.0j]), residual=0.0)
    assert conjugation_closed([z, zbar])
    assert not conjugation_closed([z])


def test_solution_json_round_trip():
    """Test the JSON-lines representation."""
    sol = classify(Solution(point=np.array([0.0, 1.5 - 2j]), residual=3e-13, newton_iters=2))
    data = sol.to_json_dict()
    assert data["point"] == [[0.0, 0.0], [1.5, -2.0]]
    assert data["zero_mask"] == [1, 0]
    restored = Solution.from_json_dict(data)
    np.testing.assert_array_equal(restored.point, sol.point)
    assert restored.zero_mask == sol.zero_mask
    assert restored.newton_iters == 2


class _ScriptedHomotopy:
    """Stand-in homotopy whose Newton updates have prescribed sizes."""

    def __init__(self, updates):
        self.updates = iter(updates)

    def evaluate(self, X, t):
        n = X.shape[1]
        H = np.full(X.shape, next(self.updates), dtype=complex)
        Hx = np.broadcast_to(np.eye(n, dtype=complex), (X.shape[0], n, n)).copy()
        return H, Hx, None


def test_corrector_keeps_point_at_noise_floor():
    """Test that a non-contracting update after a tiny one keeps the point."""
    tracker = _BatchTracker(_ScriptedHomotopy([1e-8, 1e-8]), SolverOptions())
    X, ok = tracker._correct(np.ones((1, 1), dtype=complex), np.array([0.5]))
    assert ok.tolist() == [True]
    assert X[0, 0] == pytest.approx(1.0 - 1e-8)


def test_corrector_rejects_large_non_contracting_update():
    """Test that a non-contracting update far from the path is a failure."""
    tracker = _BatchTracker(_ScriptedHomotopy([1e-3, 1e-3]), SolverOptions())
    _, ok = tracker._correct(np.ones((1, 1), dtype=complex), np.array([0.5]))
    assert ok.tolist() == [False]


@pytest.mark.parametrize(
    "arch_text, n_c, n_cstar",
    [
        ("H=2,m=1,dx=1,dy=1,d=1", 17, 16),
        ("H=2,m=1,dx=2,dy=1,d=1", 17, 16),
        ("H=1,m=2,dx=2,dy=2,d=1", 17, 16),
        ("H=1,m=1,dx=1,dy=2,d=2", 33, 16),
    ],
)
def test_reference_counts(arch_text, n_c, n_cstar):
    """Test N_C and N_C* of small reference architectures."""
    arch = Architecture.parse(arch_text)
    system = build_gradient_system(arch, sample_instance(arch, 0))
    solutions, _ = solve_total_degree(system, SolverOptions(seed=0))
    assert solution_counts(solutions)[:2] == (n_c, n_cstar)


@pytest.fixture(scope="module")
def three_variable_system():
    """Single neuron with two outputs: 27 start paths, 9 critical points."""
    arch = Architecture.parse("H=1,m=1,dx=1,dy=2,d=1")
    return build_gradient_system(arch, sample_instance(arch, 7))


@pytest.mark.parametrize("seed", range(1, 21))
def test_solution_set_independent_of_gamma(three_variable_system, seed):
    """Test that every tracker seed finds the same solution set."""
    reference, _ = solve_total_degree(three_variable_system, SolverOptions(seed=0))
    other, _ = solve_total_degree(three_variable_system, SolverOptions(seed=seed))
    assert len(other) == len(reference) == 9
    points = np.array([s.point for s in reference])
    for sol in other:
        assert np.abs(points - sol.point[None, :]).max(axis=1).min() < 1e-8


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("arch_text", ["H=1,m=2,dx=1,dy=1,d=2", "H=1,m=1,dx=2,dy=1,d=1"])
def test_count_chain_and_symmetries(arch_text, seed):
    """Test N_C* <= N_C <= BKK <= CBB, conjugation closure and N_C - N_R parity."""
    arch = Architecture.parse(arch_text)
    system = build_gradient_system(arch, sample_instance(arch, seed))
    solutions, _ = solve_total_degree(system, SolverOptions(seed=seed))
    bounds = compute_bounds(arch, seed=seed)
    n_c, n_cstar, n_r = solution_counts(solutions)
    assert n_cstar <= n_c <= bounds.bkk_affine <= bounds.cbb
    assert conjugation_closed(solutions)
    assert real_parity_ok(solutions)
    assert (n_c - n_r) % 2 == 0
