import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from percospec.errors import PreconditionError, ResourceError
from percospec.hamiltonian import SparseHamiltonian, assemble
from percospec.lattice import Box, config_from_active, generate_config
from percospec.measure import INF, MeasureSpec
from percospec.spectral import (char_poly_exact, count_interval, count_leq, count_leq_many, counting_function,
                                dense_eigh, dense_eigvals, eigen_sym, localization_profile)

SQRT2 = math.sqrt(2)
DIMER = SparseHamiltonian.from_dense([[0, 1], [1, 0]])
P3 = SparseHamiltonian.from_dense([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
ZERO1 = SparseHamiltonian.from_dense([[0]])


def c4():
    box = Box(2, 2)
    active = np.zeros(9, bool)
    active[[4, 5, 7, 8]] = True
    return assemble(config_from_active(box, active), "adjacency")


@pytest.mark.parametrize("H, expected", [
    (DIMER, [-1, 1]),
    (P3, [-SQRT2, 0, SQRT2]),
    (None, [-2, 0, 0, 2]),
])
def test_eigen_examples(H, expected):
    H = H or c4()
    res = eigen_sym(H, want_vectors=True)
    assert np.allclose(res.eigenvalues, expected, atol=1e-12)
    assert np.all(res.residuals <= 1e-8 * max(1, H.scale))
    v = res.eigenvectors
    assert np.allclose(v.T @ v, np.eye(H.n), atol=1e-8)


@pytest.mark.parametrize("H, E, expected", [(ZERO1, 0.0, 1), (DIMER, 0.0, 1), (P3, 1.0, 2),
                                             (P3, SQRT2, 3), (P3, -SQRT2, 1), (P3, -2.0, 0)])
def test_count_leq_examples(H, E, expected):
    assert count_leq(H, E) == expected


def test_count_interval_is_closed():
    assert count_interval(P3, 0.0, 0.0) == 1
    assert count_interval(P3, -SQRT2, SQRT2) == 3
    assert count_interval(c4(), 0.0, 0.0) == 2


def test_counting_function_examples():
    box = Box(1, 4)
    H = assemble(config_from_active(box, np.ones(5, bool)), "adjacency")
    assert counting_function(H, box, [2.0])[0] == 1.25
    assert counting_function(H, box, [2.0], normalization="per_site")[0] == 1.0
    empty = assemble(config_from_active(box, np.zeros(5, bool)))
    assert np.all(counting_function(empty, box, [-5.0, 0.0, 5.0]) == 0)
    assert counting_function(H, box, [-3.5])[0] == 0
    with pytest.raises(PreconditionError):
        counting_function(H, box, [1.0, 0.0])


def test_counting_reaches_active_density_at_2d():
    box = Box(2, 20)
    cfg = generate_config(box, MeasureSpec.bernoulli(0.5), 1, 0)
    H = assemble(cfg, "adjacency")
    grid = np.linspace(-5, 4, 50)
    N = counting_function(H, box, grid)
    assert np.all(np.diff(N) >= 0)
    assert N[-1] == cfg.n_active / box.volume


@pytest.mark.parametrize("H, expected", [(ZERO1, [1, 0]), (DIMER, [1, 0, -1]), (P3, [1, 0, -2, 0]),
                                         (None, [1, 0, -4, 0, 0])])
def test_char_poly_examples(H, expected):
    assert char_poly_exact(H or c4()) == expected


def test_char_poly_preconditions():
    with pytest.raises(PreconditionError):
        char_poly_exact(np.array([[0.5]]))
    with pytest.raises(PreconditionError):
        char_poly_exact(np.eye(13))


def test_char_poly_large_entries_use_exact_integers():
    a = np.diag([10 ** 6] * 12)
    assert char_poly_exact(a)[-1] == 10 ** 72


def test_localization_examples():
    single = localization_profile(SparseHamiltonian.from_dense([[3.0]]), (0, 5))
    assert single[0].ipr == 1.0
    dimer = localization_profile(DIMER, (-2, 2))
    assert [r.ipr for r in dimer] == pytest.approx([0.5, 0.5])
    for r in dimer:
        assert len(r.radial) <= 2 and r.radial.sum() == pytest.approx(1.0)
    # uniform ground state of the complete graph on n vertices
    n = 6
    kn = localization_profile(SparseHamiltonian.from_dense(np.ones((n, n)) - np.eye(n)), (4.5, 5.5))
    assert kn[0].ipr == pytest.approx(1 / n)


def test_localization_with_box_uses_l1_distance():
    box = Box(1, 6)
    H = assemble(config_from_active(box, np.ones(7, bool)), "adjacency")
    prof = localization_profile(H, (-3, 3))
    assert len(prof) == 7
    assert all(len(r.radial) <= 7 for r in prof)


def test_dense_threshold_guard():
    box = Box(1, 100)
    H = assemble(config_from_active(box, np.ones(101, bool)), "adjacency")
    with pytest.raises(ResourceError, match="count_leq"):
        eigen_sym(H, dense_threshold=50)
    # counting still works above the threshold
    assert count_leq_many(H, [2.0])[0] == 101


def test_block_diagonal_handling():
    box = Box(1, 10)
    active = np.array([1, 1, 0, 1, 1, 1, 0, 1, 0, 0, 1], bool)
    H = assemble(config_from_active(box, active, q=np.arange(11) * 0.1))
    assert np.allclose(eigen_sym(H).eigenvalues, np.linalg.eigvalsh(H.to_dense()), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 90), st.integers(0, 10 ** 6))
def test_dense_solvers_match_reference(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    a = a + a.T
    ref = np.linalg.eigvalsh(a)
    assert np.allclose(dense_eigvals(a), ref, atol=1e-10 * max(1, np.abs(a).sum(axis=1).max()))
    w, v = dense_eigh(a)
    assert np.allclose(w, ref, atol=1e-10 * np.abs(a).sum(axis=1).max())
    assert np.allclose(v.T @ v, np.eye(n), atol=1e-10)
    assert np.allclose(a @ v, v * w, atol=1e-8 * np.abs(a).sum(axis=1).max())


@settings(max_examples=10, deadline=None)
@given(st.integers(70, 200), st.integers(2, 8), st.integers(0, 10 ** 6))
def test_banded_path_matches_reference(n, b, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    a = np.triu(np.tril(a + a.T, b), -b)
    assert np.allclose(dense_eigvals(a), np.linalg.eigvalsh(a), atol=1e-10 * np.abs(a).sum(axis=1).max())


def test_degenerate_zero_eigenvalue_converges():
    # many near-zero diagonals once stalled the local deflation test
    box = Box(2, 60)
    cfg = generate_config(box, MeasureSpec.bernoulli(0.7), 20060101, 0)
    H = assemble(cfg, "adjacency")
    w = eigen_sym(H).eigenvalues
    assert np.allclose(w, np.linalg.eigvalsh(H.to_dense()), atol=1e-9 * H.scale)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.floats(0.3, 1.0), st.booleans(), st.integers(0, 10 ** 6))
def test_count_leq_agrees_with_eigen(d, p, with_potential, seed):
    box = Box(d, {1: 60, 2: 10, 3: 4}[d])
    m = MeasureSpec(atoms=((INF, 1 - p),), densities=((0.0, 1.0, p),)) if with_potential \
        else MeasureSpec.bernoulli(p)
    H = assemble(generate_config(box, m, seed, 0))
    w = eigen_sym(H).eigenvalues
    grid = np.concatenate([np.linspace(-2 * d - 1, 2 * d + 2, 20), [-1.0, 0.0, 1.0, SQRT2, -SQRT2]])
    ref = np.searchsorted(w, grid + 1e-10 * max(H.scale, 1), side="right")
    assert np.array_equal(count_leq_many(H, grid), ref)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 2), st.floats(0.3, 0.8), st.integers(0, 10 ** 6))
def test_char_poly_roots_match_eigenvalues(d, p, seed):
    box = Box(d, {1: 10, 2: 2}[d])
    cfg = generate_config(box, MeasureSpec.bernoulli(p), seed, 0)
    H = assemble(cfg, "adjacency")
    if H.n == 0 or H.n > 12:
        return
    roots = np.sort(np.roots(char_poly_exact(H)).real)
    assert np.allclose(roots, eigen_sym(H).eigenvalues, atol=1e-6)
