"""Tests for batched system evaluation."""

import numpy as np
import pytest

from pydlnn.compiled import CompiledSystem
from pydlnn.polynomial import Polynomial, PolySystem


@pytest.fixture
def system():
    """A small system with a constant term and mixed degrees."""
    x, y = Polynomial.variable(0, 2), Polynomial.variable(1, 2)
    return PolySystem([x**2 * y - 3, x + y * 2j])


def test_matches_symbolic_evaluation(system):
    """Test batched values and Jacobians against the symbolic ones."""
    compiled = CompiledSystem(system)
    points = np.array([[1.0 + 1j, -2.0], [0.5, 0.25j], [0.0, 0.0]])
    values, jac = compiled.evaluate_with_jacobian(points)
    for k, point in enumerate(points):
        np.testing.assert_allclose(values[k], system.evaluate(point))
        np.testing.assert_allclose(jac[k], system.jacobian(point))
    np.testing.assert_allclose(compiled.evaluate(points), values)
    np.testing.assert_allclose(compiled.jacobian(points), jac)


def test_term_scale(system):
    """Test the absolute term sum used for relative residuals."""
    compiled = CompiledSystem(system)
    scale = compiled.term_scale(np.array([[2.0, 1.0]]))
    # |x^2 y| + 3 = 7 and |x| + |2y| = 4
    assert scale[0] == pytest.approx(7.0)


def test_empty_batch(system):
    """Test that an empty batch evaluates to empty arrays."""
    compiled = CompiledSystem(system)
    values, jac = compiled.evaluate_with_jacobian(np.zeros((0, 2), dtype=complex))
    assert values.shape == (0, 2)
    assert jac.shape == (0, 2, 2)


def test_wrong_width(system):
    """Test rejecting points with the wrong number of coordinates."""
    with pytest.raises(ValueError, match="3 coordinates"):
        CompiledSystem(system).evaluate(np.ones((1, 3)))
