import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from confspec.eigensolve import (
    NotPositiveDefiniteError,
    aggregate,
    relative_residual,
    solve_generalized,
)
from confspec.grid import BandedSymmetric, WeakForm1D, assemble_weak_form, make_grid
from confspec.operators import conformal_laplacian, dirac_operator, make_mode

import oracles


def random_pencil(rng, m, bandwidth=1):
    """Seeded symmetric banded pair with B positive definite."""
    bands_a = np.zeros((bandwidth + 1, m))
    bands_a[0] = rng.uniform(-1.0, 1.0, m)
    for d in range(1, bandwidth + 1):
        bands_a[d, : m - d] = rng.uniform(-0.5, 0.5, m - d)
    bands_b = np.zeros((bandwidth + 1, m))
    bands_b[0] = rng.uniform(1.0, 2.0, m)
    for d in range(1, bandwidth + 1):
        bands_b[d, : m - d] = rng.uniform(-0.2, 0.2, m - d)
    return BandedSymmetric(bands_a), BandedSymmetric(bands_b)


def test_diagonal_pencil_is_exact():
    A = BandedSymmetric.from_tridiagonal(np.array([1.0, 2.0, 3.0] + [5.0] * 13), np.zeros(15))
    B = BandedSymmetric.from_tridiagonal(np.ones(16), np.zeros(15))
    pairs = solve_generalized(A, B, count=3)
    assert [p.value for p in pairs] == [1.0, 2.0, 3.0]


def test_second_difference_dirichlet():
    grid = make_grid("polar", 2000)
    form = WeakForm1D(
        p=lambda x: np.ones_like(x),
        q=lambda x: np.zeros_like(x),
        w=lambda x: np.ones_like(x),
        essential_left=True,
        essential_right=True,
    )
    A, M = assemble_weak_form(form, grid)
    pairs = solve_generalized(A, M, count=3)
    for m, pair in enumerate(pairs, start=1):
        assert pair.value == pytest.approx(m * m, abs=1e-4)


def test_matches_bisection_oracle_full_spectrum():
    rng = np.random.default_rng(42)
    m = 200
    A, B = random_pencil(rng, m)
    reference = oracles.pencil_eigs_of_banded(A, B)
    pairs = solve_generalized(A, B, count=m, method="dense")
    scale = np.max(np.abs(reference))
    assert np.allclose([p.value for p in pairs], reference, atol=1e-10 * scale, rtol=1e-10)


def test_dense_and_iterative_paths_agree():
    rng = np.random.default_rng(3)
    for m in (80, 400, 1500):
        A, B = random_pencil(rng, m)
        dense = solve_generalized(A, B, count=5, method="dense", seed=1)
        iterative = solve_generalized(A, B, count=5, method="iterative", seed=1)
        for a, b in zip(dense, iterative):
            assert a.value == pytest.approx(b.value, abs=1e-8, rel=1e-8)


def test_residuals_and_b_orthogonality():
    rng = np.random.default_rng(11)
    A, B = random_pencil(rng, 600)
    pairs = solve_generalized(A, B, count=6)
    for pair in pairs:
        assert pair.residual <= 1e-9
        # recomputable from the returned data
        assert relative_residual(A, B, pair.value, pair.vector) == pytest.approx(
            pair.residual, abs=1e-12
        )
    for i, a in enumerate(pairs):
        for b in pairs[i + 1 :]:
            assert abs(a.vector @ B.matvec(b.vector)) <= 1e-8


def test_shift_exactness():
    rng = np.random.default_rng(5)
    A, B = random_pencil(rng, 300)
    c = 0.8125  # exactly representable
    shifted = A.add_scaled(B, c)
    base = solve_generalized(A, B, count=4, seed=2)
    moved = solve_generalized(shifted, B, count=4, window=(c, c), seed=2)
    base_sorted = sorted(p.value for p in base)
    moved_sorted = sorted(p.value for p in moved)
    for a, b in zip(base_sorted, moved_sorted):
        assert b - a == pytest.approx(c, abs=1e-9)


def test_window_selection():
    diag = np.arange(1.0, 41.0)
    A = BandedSymmetric.from_tridiagonal(diag, np.zeros(39))
    B = BandedSymmetric.from_tridiagonal(np.ones(40), np.zeros(39))
    pairs = solve_generalized(A, B, count=3, window=(17.2, 18.8))
    assert sorted(round(p.value) for p in pairs) == [17, 18, 19]


def test_not_positive_definite_reports_pivot():
    diag = np.ones(20)
    diag[7] = -1.0
    A = BandedSymmetric.from_tridiagonal(np.ones(20), np.zeros(19))
    B = BandedSymmetric.from_tridiagonal(diag, np.zeros(19))
    with pytest.raises(NotPositiveDefiniteError) as err:
        solve_generalized(A, B, count=2)
    assert err.value.pivot_index == 7


def test_deterministic_given_seed():
    rng = np.random.default_rng(9)
    A, B = random_pencil(rng, 900)
    first = solve_generalized(A, B, count=4, seed=123)
    second = solve_generalized(A, B, count=4, seed=123)
    for a, b in zip(first, second):
        assert a.value == b.value
        assert np.array_equal(a.vector, b.vector)


def test_singular_shift_recovers():
    # A has an exact zero eigenvalue; shift-invert at 0 must not hang
    grid = make_grid("polar", 1200)
    form = WeakForm1D(
        p=lambda x: np.ones_like(x),
        q=lambda x: np.zeros_like(x),
        w=lambda x: np.ones_like(x),
    )
    A, M = assemble_weak_form(form, grid)
    pairs = solve_generalized(A, M, count=2, method="iterative")
    assert pairs[0].value == pytest.approx(0.0, abs=1e-9)
    # natural ends truncate the domain to [h, pi - h]; Neumann mode cos(x)
    h = grid.nodes[0]
    assert pairs[1].value == pytest.approx((math.pi / (math.pi - 2 * h)) ** 2, abs=1e-4)


# ------------------------------------------------------------------ aggregate


def test_aggregate_merges_modes_with_multiplicity():
    op = conformal_laplacian(3)
    report = aggregate(
        [
            (make_mode(op, 0), [0.75]),
            (make_mode(op, 1), [3.75]),
        ]
    )
    assert [e.value for e in report.entries] == [0.75, 3.75]
    assert [e.multiplicity for e in report.entries] == [1, 3]
    assert report.lambda_1_plus == 0.75
    assert report.lambda_1_minus is None


def test_aggregate_dirac_symmetric():
    op = dirac_operator(2)
    report = aggregate(
        [
            (make_mode(op, 0.5), [-1.0, 1.0]),
            (make_mode(op, -0.5), [-1.0, 1.0]),
        ]
    )
    near_one = [e for e in report.entries if abs(e.value - 1.0) < 1e-12]
    assert sum(e.multiplicity for e in near_one) == 2
    assert report.lambda_1_plus == 1.0
    assert report.lambda_1_minus == -1.0


def test_aggregate_without_positive_part():
    op = dirac_operator(2)
    report = aggregate([(make_mode(op, 0.5), [-2.0, -1.0])])
    assert report.lambda_1_plus is None
    assert report.lambda_1_minus == -1.0


def test_lambda_j_counts_multiplicity():
    op = conformal_laplacian(3)
    report = aggregate(
        [
            (make_mode(op, 0), [0.75, 3.75]),
            (make_mode(op, 1), [3.75]),
        ]
    )
    assert report.lambda_plus(1) == 0.75
    assert report.lambda_plus(2) == 3.75  # multiplicity-3 entry covers j = 2..4
    assert report.lambda_plus(5) == 3.75
    assert report.lambda_plus(6) is None


def test_kernel_tolerance_default_scales():
    op = conformal_laplacian(3)
    report = aggregate([(make_mode(op, 0), [1e-12, 2.0])])
    # 1e-12 sits below 1e-8 * spectral scale, so it is treated as kernel
    assert report.lambda_1_plus == 2.0


@settings(max_examples=40, deadline=None)
@given(
    values=st.lists(
        st.floats(min_value=-50, max_value=50, allow_nan=False), min_size=1, max_size=12
    )
)
def test_aggregate_sorted_and_extraction_consistent(values):
    op = conformal_laplacian(3)
    report = aggregate([(make_mode(op, 0), values)], kernel_tolerance=1e-9)
    got = [e.value for e in report.entries]
    assert got == sorted(got)
    positives = [v for v in got if v > 1e-9]
    negatives = [v for v in got if v < -1e-9]
    assert report.lambda_1_plus == (min(positives) if positives else None)
    assert report.lambda_1_minus == (max(negatives) if negatives else None)
