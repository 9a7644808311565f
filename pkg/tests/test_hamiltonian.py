import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from percospec.errors import ValidationError
from percospec.hamiltonian import SparseHamiltonian, assemble
from percospec.lattice import Box, config_from_active, generate_config, label_clusters, vertex_deficiency
from percospec.measure import INF, MeasureSpec
from percospec.spectral import eigen_sym


def _one_site(box, coord, q=0.0):
    active = np.zeros(box.n_sites, bool)
    active[box.index(coord)] = True
    return config_from_active(box, active, q)


def test_single_site():
    H = assemble(_one_site(Box(2, 2), (0, 0)), "anderson")
    assert H.to_dense().tolist() == [[0.0]]


def test_dimer_adjacency():
    box = Box(1, 2)
    H = assemble(config_from_active(box, [False, True, True]), "adjacency")
    assert H.to_dense().tolist() == [[0, 1], [1, 0]]


def test_dimer_anderson_closed_form():
    box = Box(1, 2)
    H = assemble(config_from_active(box, [False, True, True], q=[0.0, 0.0, 10.0]), "anderson")
    assert H.to_dense().tolist() == [[0, 1], [1, 10]]
    w = eigen_sym(H).eigenvalues
    assert np.allclose(w, [5 - math.sqrt(26), 5 + math.sqrt(26)], atol=1e-12)


def test_empty_active_set():
    H = assemble(generate_config(Box(2, 4), MeasureSpec.point(INF), 0, 0))
    assert H.n == 0 and H.to_dense().shape == (0, 0)
    assert len(eigen_sym(H).eigenvalues) == 0


def test_variants_diagonals():
    box = Box(2, 4)
    cfg = generate_config(box, MeasureSpec(atoms=((INF, 0.3),), densities=((0.0, 1.0, 0.7),)), 2, 0)
    v = vertex_deficiency(cfg)[cfg.active]
    assert np.array_equal(assemble(cfg, "anderson").diag, cfg.q[cfg.active])
    assert np.all(assemble(cfg, "adjacency").diag == 0)
    assert np.array_equal(assemble(cfg, "neumann_like").diag, v)
    assert np.array_equal(assemble(cfg, "dirichlet_like").diag, -v)
    with pytest.raises(ValidationError):
        assemble(cfg, "laplace")


def test_cluster_restriction_is_principal_submatrix():
    box = Box(2, 10)
    cfg = generate_config(box, MeasureSpec.bernoulli(0.6), 4, 1)
    lab = label_clusters(cfg)
    full = assemble(cfg, "neumann_like")
    sub = assemble(cfg, "neumann_like", lab.mask("largest"))
    local = np.searchsorted(full.sites, sub.sites)
    assert np.array_equal(full.to_dense()[np.ix_(local, local)], sub.to_dense())


def test_coordinate_export():
    box = Box(1, 2)
    H = assemble(config_from_active(box, [True, True, False], q=[1.5, 0.0, 0.0]))
    lines = H.to_coordinate_text().splitlines()
    assert lines[0].startswith("%%MatrixMarket matrix coordinate real symmetric")
    body = [l for l in lines if not l.startswith("%")]
    assert body[0] == "2 2 3"
    assert body[1:] == ["1 1 1.5", "2 1 1.0", "2 2 0.0"]


def test_from_dense_round_trip_and_matvec():
    a = np.array([[1.0, 2.0, 0.0], [2.0, -1.0, 3.0], [0.0, 3.0, 0.5]])
    H = SparseHamiltonian.from_dense(a)
    assert np.array_equal(H.to_dense(), a)
    x = np.array([1.0, -2.0, 0.5])
    assert np.allclose(H.matvec(x), a @ x)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.floats(0.3, 1.0), st.integers(0, 10 ** 6))
def test_structure_invariants(d, p, seed):
    box = Box(d, {1: 40, 2: 8, 3: 4}[d])
    cfg = generate_config(box, MeasureSpec.bernoulli(p), seed, 0)
    H = assemble(cfg, "adjacency")
    a = H.to_dense()
    assert np.array_equal(a, a.T)
    assert set(np.unique(a)) <= {0.0, 1.0}
    assert np.all(a.sum(axis=1) <= 2 * d)
    w = eigen_sym(H).eigenvalues
    assert np.all(np.abs(w) <= 2 * d + 1e-9)
