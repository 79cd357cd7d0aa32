"""Tests for the Bezout, BKK and closed-form bounds."""

import pytest

from pydlnn.bounds import (
    BoundsReport,
    admissible_bucket_bounds,
    bezout_bound,
    bkk_bounds,
    bkk_swap_symmetric,
    closed_form_bounds_h1m1,
    compute_bounds,
)
from pydlnn.network import Architecture, build_gradient_system, sample_instance
from pydlnn.polynomial import NonSquareSystemError, Polynomial, PolySystem


def test_bezout_bound():
    """Test exact integer Bezout bounds."""
    assert bezout_bound(Architecture.parse("H=1,m=1,dx=1,dy=1,d=1")) == 9
    assert bezout_bound(Architecture.parse("H=1,m=2,dx=2,dy=2,d=1")) == 81
    assert bezout_bound(Architecture.parse("H=2,m=1,dx=1,dy=1,d=3")) == 30517578125


def test_closed_form_bounds():
    """Test (4p)^d and (1+4p)^d."""
    assert closed_form_bounds_h1m1(1, 1) == (4, 5)
    assert closed_form_bounds_h1m1(2, 1) == (16, 25)
    assert closed_form_bounds_h1m1(2, 2) == (64, 81)
    assert closed_form_bounds_h1m1(3, 2) == (512, 729)
    with pytest.raises(ValueError):
        closed_form_bounds_h1m1(0, 1)


def test_admissible_bucket_bounds():
    """Test the per zero-row bounds and their sum."""
    assert admissible_bucket_bounds(2, 2) == [64, 16, 1]
    for d, p in [(1, 1), (2, 3), (3, 2)]:
        assert sum(admissible_bucket_bounds(d, p)) == closed_form_bounds_h1m1(d, p)[1]


def test_bkk_worked_example(small_arch, small_instance):
    """Test the affine BKK bound of the two-point worked example."""
    torus, affine = bkk_bounds(build_gradient_system(small_arch, small_instance))
    assert affine == 33
    assert torus <= affine <= 81


def test_bkk_rejects_non_square():
    """Test that a non-square system is refused."""
    with pytest.raises(NonSquareSystemError):
        bkk_bounds(PolySystem([Polynomial.variable(0, 2)]))


@pytest.mark.parametrize(
    "arch_text, cbb, bkk",
    [
        ("H=1,m=1,dx=1,dy=1,d=1", 9, 5),
        ("H=1,m=1,dx=2,dy=1,d=1", 27, 9),
        ("H=1,m=1,dx=2,dy=2,d=1", 81, 33),
        ("H=2,m=1,dx=1,dy=1,d=1", 125, 17),
    ],
)
def test_compute_bounds(arch_text, cbb, bkk):
    """Test bound reports for small architectures."""
    report = compute_bounds(Architecture.parse(arch_text))
    assert report.cbb == cbb
    assert report.bkk_affine == bkk
    assert report.cbb >= report.bkk_affine >= report.bkk_torus >= 0


def test_compute_bounds_closed_forms_only_for_h1m1():
    """Test that the closed forms appear only for one hidden layer and one point."""
    report = compute_bounds(Architecture.parse("H=1,m=1,dx=1,dy=1,d=1"))
    assert (report.b_cstar, report.b_c) == (4, 5)
    report = compute_bounds(Architecture.parse("H=1,m=2,dx=1,dy=1,d=1"))
    assert report.b_c is None and report.b_cstar is None


def test_bkk_skipped_above_cap():
    """Test the variable cap and the CSV cells it produces."""
    arch = Architecture.parse("H=1,m=1,dx=3,dy=3,d=2")
    report = compute_bounds(arch, bkk_max_vars=8)
    assert report.bkk_skipped
    assert report.csv_fields() == ["12", "531441", "skipped", "skipped", "144", "169"]
    assert BoundsReport(N=2, cbb=9).csv_fields()[-2:] == ["", ""]


def test_bkk_same_for_one_and_two_data_points():
    """Test that the affine BKK bound does not depend on m."""
    base = Architecture.parse("H=1,m=1,dx=2,dy=1,d=1")
    values = {
        bkk_bounds(build_gradient_system(a, sample_instance(a, 0)))[1]
        for a in (base, base.with_m(2), base.with_m(3))
    }
    assert values == {9}


@pytest.mark.parametrize(
    "arch_text", ["H=1,m=1,dx=2,dy=1,d=1", "H=1,m=1,dx=3,dy=1,d=1", "H=1,m=1,dx=3,dy=2,d=1"]
)
def test_bkk_swap_symmetric(arch_text):
    """Test that exchanging d_x and d_y keeps the affine BKK bound."""
    first, second = bkk_swap_symmetric(Architecture.parse(arch_text))
    assert first == second


@pytest.mark.slow
def test_bkk_two_hidden_neurons():
    """Test the affine BKK bound for d_1 = d_x = d_y = 2."""
    report = compute_bounds(Architecture.parse("H=1,m=1,dx=2,dy=2,d=2"))
    assert report.cbb == 6561
    assert report.bkk_affine == 1089
