import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from percospec.errors import ValidationError
from percospec.lattice import (Box, config_from_active, config_to_csv, generate_config, label_clusters,
                               vertex_deficiency)
from percospec.measure import INF, MeasureSpec


@pytest.mark.parametrize("d, L", [(1, 4), (2, 4), (2, 10), (3, 2)])
def test_box_size_and_index_round_trip(d, L):
    box = Box(d, L)
    assert box.n_sites == (L + 1) ** d
    assert box.volume == L ** d
    for i in range(box.n_sites):
        c = box.coord(i)
        assert all(-L // 2 <= x <= L // 2 for x in c)
        assert box.index(c) == i


def test_box_edges_are_unit_l1_pairs():
    box = Box(2, 4)
    e = box.edges
    assert len(e) == 2 * 5 * 4
    diff = np.abs(box.coords[e[:, 0]] - box.coords[e[:, 1]]).sum(axis=1)
    assert np.all(diff == 1) and np.all(e[:, 0] < e[:, 1])


def test_periodic_box_wraps():
    box = Box(1, 4, periodic=True)
    assert len(box.edges) == 5
    assert [0, 4] in box.edges.tolist()


def test_odd_L_requires_opt_in():
    with pytest.raises(ValidationError):
        Box(2, 3)
    with pytest.warns(UserWarning):
        box = Box(2, 3, allow_odd=True)
    assert box.side == 3


@pytest.mark.parametrize("bad", [dict(d=0, L=4), dict(d=2, L=0), dict(d=2, L=-2)])
def test_box_validation(bad):
    with pytest.raises(ValidationError):
        Box(**bad)


def test_full_and_empty_configs():
    box = Box(2, 6)
    full = generate_config(box, MeasureSpec.point(0.0), 1, 0)
    assert full.n_active == box.n_sites and np.all(full.q == 0)
    empty = generate_config(box, MeasureSpec.point(INF), 1, 0)
    assert empty.n_active == 0
    lab = label_clusters(empty)
    assert lab.n_clusters == 0 and lab.largest == -1


def test_bernoulli_active_fraction():
    cfg = generate_config(Box(2, 100), MeasureSpec.bernoulli(0.6), 12, 0)
    assert abs(cfg.n_active / cfg.box.n_sites - 0.6) <= 0.01


def test_regeneration_is_bit_exact():
    box = Box(2, 20)
    m = MeasureSpec(atoms=((INF, 0.3),), densities=((0.0, 1.0, 0.7),))
    a = generate_config(box, m, 5, 3).q
    b = generate_config(box, m, 5, 3).q
    assert a.tobytes() == b.tobytes()
    assert a.tobytes() != generate_config(box, m, 5, 4).q.tobytes()


def test_full_box_is_one_spanning_cluster():
    box = Box(2, 4)
    lab = label_clusters(config_from_active(box, np.ones(box.n_sites, bool)))
    assert lab.n_clusters == 1 and lab.sizes[0] == 25 and lab.spans[0] and lab.touches_boundary[0]


def test_checkerboard_gives_singletons():
    box = Box(2, 6)
    lab = label_clusters(config_from_active(box, box.coords.sum(axis=1) % 2 == 0))
    assert np.all(lab.sizes == 1)
    assert not lab.spans.any()


def test_spanning_near_threshold():
    box = Box(2, 64)
    m = MeasureSpec.bernoulli(0.5927)
    spans = [label_clusters(generate_config(box, m, 77, r)).spans.any() for r in range(200)]
    assert 0.4 <= np.mean(spans) <= 0.85


def test_vertex_deficiency_examples():
    box = Box(2, 4)
    lone = np.zeros(box.n_sites, bool)
    lone[box.index((0, 0))] = True
    assert vertex_deficiency(config_from_active(box, lone))[box.index((0, 0))] == 4
    v = vertex_deficiency(config_from_active(box, np.ones(box.n_sites, bool)))
    assert v[box.index((0, 0))] == 0
    assert v[box.index((2, 2))] == 2
    assert v[box.index((2, 0))] == 1


def test_cluster_mask_scopes():
    box = Box(1, 10)
    active = np.array([1, 1, 0, 1, 1, 1, 0, 1, 0, 1, 1], bool)
    lab = label_clusters(config_from_active(box, active))
    assert lab.sizes.tolist() == [2, 3, 1, 2]
    assert lab.mask("largest").sum() == 3
    assert lab.mask("all").sum() == active.sum()
    assert lab.mask("spanning").sum() == 0
    with pytest.raises(ValidationError):
        lab.mask("biggest")


def test_config_csv():
    box = Box(1, 2)
    cfg = config_from_active(box, [True, False, True], q=[0.5, 0.0, 0.25])
    text = config_to_csv(cfg)
    assert text.splitlines() == ["x_1,q,cluster_label", "-1,0.5,0", "0,inf,-1", "1,0.25,1"]
    assert len(config_to_csv(cfg, omit_deleted=True).splitlines()) == 3


def _bfs_components(box, active):
    nbrs = {i: [] for i in range(box.n_sites)}
    for a, b in box.edges:
        if active[a] and active[b]:
            nbrs[a].append(b)
            nbrs[b].append(a)
    comp = {}
    for s in range(box.n_sites):
        if active[s] and s not in comp:
            stack = [s]
            comp[s] = s
            while stack:
                u = stack.pop()
                for v in nbrs[u]:
                    if v not in comp:
                        comp[v] = s
                        stack.append(v)
    return comp


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.floats(0.2, 0.9), st.integers(0, 10 ** 6))
def test_labels_match_bfs_and_are_canonical(d, p, seed):
    box = Box(d, {1: 30, 2: 8, 3: 4}[d])
    cfg = generate_config(box, MeasureSpec.bernoulli(p), seed, 0)
    lab = label_clusters(cfg)
    comp = _bfs_components(box, cfg.active)
    assert lab.sizes.sum() == cfg.n_active
    for a in comp:
        for b in comp:
            assert (comp[a] == comp[b]) == (lab.labels[a] == lab.labels[b])
    # canonical: label order follows the smallest member index
    firsts = [np.flatnonzero(lab.labels == k)[0] for k in range(lab.n_clusters)]
    assert firsts == sorted(firsts)
    v = vertex_deficiency(cfg)
    assert np.all((v >= 0) & (v <= 2 * d))


def test_isolated_vertex_density():
    p, box = 0.3, Box(2, 80)
    interior = np.all(np.abs(box.coords) < box.half, axis=1)
    per = []
    for r in range(20):
        cfg = generate_config(box, MeasureSpec.bernoulli(p), 3, r)
        lab = label_clusters(cfg)
        iso = (lab.labels >= 0) & (lab.sizes[np.maximum(lab.labels, 0)] == 1)
        per.append(np.mean(iso[interior]))
    se = np.std(per, ddof=1) / np.sqrt(len(per))
    assert abs(np.mean(per) - p * (1 - p) ** 4) <= 3 * se + 1e-3
