import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from confspec.eigensolve import solve_generalized
from confspec.grid import (
    BandedSymmetric,
    GradingSpec,
    WeakForm1D,
    assemble_weak_form,
    make_grid,
)

import oracles


def ones(x):
    return np.ones_like(x)


def zeros(x):
    return np.zeros_like(x)


# ---------------------------------------------------------------- make_grid


def test_rejects_tiny_node_count():
    with pytest.raises(ValueError, match="node count too small"):
        make_grid("polar", 3)


def test_uniform_polar_partition():
    grid = make_grid("polar", 17)
    assert np.allclose(grid.nodes, np.pi * np.arange(1, 18) / 18, rtol=0, atol=0)


def test_geometric_grading_recurrence():
    ratio, r_min = 1.01, 1e-6
    grid = make_grid("polar", 2000, GradingSpec("geometric-near-left", ratio=ratio, r_min=r_min))
    spacings = np.diff(grid.nodes)
    # first spacing follows the geometric recurrence from r_min
    assert spacings[0] == pytest.approx(r_min * (ratio - 1.0), rel=1e-12)
    ratios = spacings[1:] / spacings[:-1]
    assert np.all(ratios <= ratio * (1 + 1e-12))
    assert np.all(ratios >= 1.0 - 1e-12)
    # the prefix is exactly geometric: recompute the recurrence directly
    k = np.flatnonzero(ratios < 1.0 + 1e-12)[0] + 1  # first uniform step
    assert np.allclose(grid.nodes[:k], r_min * ratio ** np.arange(k), rtol=1e-12)


def test_geometric_rejects_bad_parameters():
    with pytest.raises(ValueError):
        GradingSpec("geometric-near-left", ratio=0.99, r_min=1e-6)
    with pytest.raises(ValueError):
        GradingSpec("geometric-near-left", ratio=1.01, r_min=-1.0)
    with pytest.raises(ValueError, match="pi/2"):
        make_grid("polar", 100, GradingSpec("geometric-near-left", ratio=1.01, r_min=2.0))


def test_arclength_needs_length():
    with pytest.raises(ValueError):
        make_grid("arclength", 100)
    grid = make_grid("arclength", 100, length=7.5)
    assert grid.span == 7.5
    assert grid.nodes[0] > 0 and grid.nodes[-1] < 7.5


@settings(max_examples=40, deadline=None)
@given(
    N=st.integers(min_value=16, max_value=400),
    ratio=st.floats(min_value=1.001, max_value=1.2),
    r_min_exp=st.floats(min_value=-8.0, max_value=-2.0),
)
def test_geometric_grading_invariants(N, ratio, r_min_exp):
    r_min = 10.0**r_min_exp
    try:
        grid = make_grid("polar", N, GradingSpec("geometric-near-left", ratio=ratio, r_min=r_min))
    except ValueError:
        return  # infeasible parameter combination is allowed to be rejected
    nodes = grid.nodes
    assert nodes[0] == r_min
    assert nodes[-1] < math.pi
    spacings = np.diff(nodes)
    assert np.all(spacings > 0)
    ratios = spacings[1:] / spacings[:-1]
    assert np.all(ratios <= ratio * (1 + 1e-9))
    assert np.all(ratios >= 1.0 - 1e-9)


# ------------------------------------------------------------- assembly


def test_dirichlet_laplacian_spectrum():
    grid = make_grid("polar", 2000)
    form = WeakForm1D(p=ones, q=zeros, w=ones, essential_left=True, essential_right=True)
    A, M = assemble_weak_form(form, grid)
    pairs = solve_generalized(A, M, count=3)
    for m, pair in enumerate(pairs, start=1):
        assert pair.value == pytest.approx(m * m, abs=1e-4)


def test_essential_ends_give_second_difference_stiffness():
    grid = make_grid("polar", 17)
    form = WeakForm1D(p=ones, q=zeros, w=ones, essential_left=True, essential_right=True)
    A, _ = assemble_weak_form(form, grid)
    h = np.pi / 18
    assert np.allclose(A.bands[0], 2.0 / h)
    assert np.allclose(A.bands[1, :-1], -1.0 / h)


def test_constant_shift_moves_spectrum_exactly():
    grid = make_grid("polar", 300)
    base = WeakForm1D(p=ones, q=zeros, w=ones, essential_left=True, essential_right=True)
    shifted = WeakForm1D(
        p=ones, q=lambda x: np.full_like(x, 2.5), w=ones,
        essential_left=True, essential_right=True,
    )
    A0, M = assemble_weak_form(base, grid)
    A1, M1 = assemble_weak_form(shifted, grid)
    assert np.allclose(M1.bands, M.bands, rtol=0, atol=0)
    ev0 = solve_generalized(A0, M, count=4)
    ev1 = solve_generalized(A1, M, count=4, window=(2.5, 2.5 + 10.0))
    for a, b in zip(ev0, ev1):
        assert b.value - a.value == pytest.approx(2.5, abs=1e-9)


def test_sphere_radial_modes_against_fd_oracle():
    # radial S^3 Laplacian, angular mode 0: eigenvalues j(j+2)
    n = 3
    grid = make_grid("polar", 2000)
    form = WeakForm1D(
        p=lambda r: np.sin(r) ** (n - 1),
        q=zeros,
        w=lambda r: np.sin(r) ** (n - 1),
    )
    A, M = assemble_weak_form(form, grid)
    computed = [p.value for p in solve_generalized(A, M, count=3)]
    for lam, expected in zip(computed, [0.0, 3.0, 8.0]):
        assert lam == pytest.approx(expected, abs=1e-3)
    # independent oracle: conservative finite differences at double resolution
    reference = oracles.fd_radial_eigs(
        lambda r: np.sin(r) ** 2, lambda r: np.zeros_like(r), lambda r: np.sin(r) ** 2,
        N=4000, span=math.pi, count=3,
    )
    assert np.allclose(reference, [0.0, 3.0, 8.0], atol=3e-4)
    assert np.allclose(computed, reference, atol=1e-3)


def test_assembled_matrices_exactly_symmetric():
    grid = make_grid("polar", 200, GradingSpec("geometric-near-left", ratio=1.05, r_min=1e-3))
    rng = np.random.default_rng(7)
    coef = rng.uniform(0.5, 2.0, size=3)
    form = WeakForm1D(
        p=lambda x: coef[0] + np.sin(3 * x) ** 2,
        q=lambda x: coef[1] * np.cos(x),
        w=lambda x: coef[2] + x,
    )
    A, M = assemble_weak_form(form, grid)
    for mat in (A, M):
        dense = mat.to_dense()
        assert np.array_equal(dense, dense.T)


def test_non_finite_coefficient_reports_cell():
    grid = make_grid("polar", 32)

    def bad_q(x):
        out = np.zeros_like(x)
        out[5] = np.inf
        return out

    form = WeakForm1D(p=ones, q=bad_q, w=ones)
    with pytest.raises(ValueError, match="cell 5"):
        assemble_weak_form(form, grid)


@settings(max_examples=15, deadline=None)
@given(amplitude=st.floats(min_value=0.0, max_value=5.0), seed=st.integers(0, 2**16))
def test_nonnegative_potential_increment_never_lowers_eigenvalues(amplitude, seed):
    # min-max principle: q -> q + (nonnegative bump) raises every eigenvalue
    grid = make_grid("polar", 80)
    rng = np.random.default_rng(seed)
    center = rng.uniform(0.5, 2.5)

    def bump(x):
        return amplitude * np.exp(-((x - center) ** 2) * 8.0)

    base = WeakForm1D(p=ones, q=zeros, w=ones, essential_left=True, essential_right=True)
    more = WeakForm1D(p=ones, q=bump, w=ones, essential_left=True, essential_right=True)
    A0, M = assemble_weak_form(base, grid)
    A1, _ = assemble_weak_form(more, grid)
    ev0 = oracles.pencil_eigs_of_banded(A0, M, 0, 4)
    ev1 = oracles.pencil_eigs_of_banded(A1, M, 0, 4)
    assert np.all(ev1 >= ev0 - 1e-11)


def test_refinement_second_order():
    # doubling N cuts the error against a 4x-resolution reference by >= 3
    def run(N):
        grid = make_grid("polar", N)
        form = WeakForm1D(
            p=lambda x: 1.0 + 0.3 * np.sin(x),
            q=lambda x: np.cos(x) ** 2,
            w=lambda x: 1.0 + 0.1 * x,
            essential_left=True,
            essential_right=True,
        )
        A, M = assemble_weak_form(form, grid)
        return solve_generalized(A, M, count=2)[0].value

    reference = run(2000)
    err_coarse = abs(run(250) - reference)
    err_fine = abs(run(500) - reference)
    assert err_coarse / err_fine >= 3.0


def test_banded_container_roundtrip():
    diag = np.array([2.0, 3.0, 4.0, 5.0])
    sub = np.array([-1.0, -0.5, -0.25])
    A = BandedSymmetric.from_tridiagonal(diag, sub)
    dense = A.to_dense()
    x = np.array([1.0, 2.0, -1.0, 0.5])
    assert np.allclose(A.matvec(x), dense @ x)
    assert np.allclose(A.scaled(2.0).to_dense(), 2 * dense)
    assert np.allclose(A.add_scaled(A, 0.5).to_dense(), 1.5 * dense)
