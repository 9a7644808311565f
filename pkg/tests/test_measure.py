import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from percospec.errors import PreconditionError, ValidationError
from percospec.measure import (INF, MeasureSpec, RandomStream, minkowski_band, sample, sample_many,
                               support_real, wegner_constant)

THIRD = 1 / 3
CLOSING = MeasureSpec(atoms=((8.0, THIRD), (INF, THIRD)), densities=((0.0, 1.0, THIRD),))


def test_point_mass_always_returns_value():
    x = sample_many(MeasureSpec.point(0.0), RandomStream(1, 0), 1000)
    assert np.all(x == 0.0)


def test_three_component_frequencies():
    x = sample_many(CLOSING, RandomStream(7, 0), 10_000)
    assert np.all((x >= 0) & (x <= 1) | (x == 8) | np.isinf(x))
    for freq in (np.mean((x >= 0) & (x <= 1)), np.mean(x == 8), np.mean(np.isinf(x))):
        assert abs(freq - THIRD) <= 0.02


def test_bernoulli_is_site_percolation():
    m = MeasureSpec.bernoulli(0.6)
    assert m.is_bernoulli and m.retention == pytest.approx(0.6)
    x = sample_many(m, RandomStream(3, 1), 20_000)
    assert set(np.unique(x)) <= {0.0, INF}
    assert abs(np.mean(x == 0) - 0.6) < 0.015


def test_stream_offsets_match_bulk_draws():
    s = RandomStream(11, 4)
    bulk = s.uniforms(50)
    for k in (0, 1, 3, 4, 5, 17, 49):
        assert s.uniform(k) == bulk[k]
        assert np.array_equal(s.uniforms(5, start=k)[:1], bulk[k:k + 1])


def test_single_sample_matches_bulk():
    s = RandomStream(2, 9)
    bulk = sample_many(CLOSING, s, 40)
    assert all(sample(CLOSING, s, i) == bulk[i] or (math.isinf(bulk[i]) and math.isinf(sample(CLOSING, s, i)))
               for i in range(40))


def test_distinct_realizations_differ():
    a = RandomStream(5, 0).uniforms(10)
    b = RandomStream(5, 1).uniforms(10)
    assert not np.array_equal(a, b)


@pytest.mark.parametrize("kwargs, needle", [
    (dict(atoms=((0.0, 0.5),)), "total mass"),
    (dict(atoms=((0.0, 1.2), (INF, -0.2))), "negative atom weight"),
    (dict(atoms=((-1.0, 1.0),)), "< 0"),
    (dict(densities=((1.0, 0.0, 1.0),)), "lo < hi"),
    (dict(densities=((-1.0, 0.0, 1.0),)), "below 0"),
    (dict(densities=((0.0, 1.0, 0.5), (0.5, 1.5, 0.5))), "disjoint"),
    (dict(atoms=((math.nan, 1.0),)), "NaN"),
])
def test_invalid_measures_name_the_invariant(kwargs, needle):
    with pytest.raises(ValidationError, match=needle):
        MeasureSpec(**kwargs)


def test_negative_support_needs_opt_in():
    with pytest.raises(ValidationError):
        MeasureSpec(densities=((-2.0, 3.0, 0.2),))
    assert MeasureSpec(densities=((-2.0, 3.0, 0.2),), allow_negative=True).mass_open(-2, 3) == pytest.approx(1)


def test_json_round_trip_spells_inf():
    text = CLOSING.to_json()
    assert '"inf"' in text
    assert MeasureSpec.from_json(text) == CLOSING
    raw = {"atoms": [{"value": "inf", "weight": 0.4}, {"value": 0.0, "weight": 0.6}]}
    assert MeasureSpec.from_dict(raw).retention == pytest.approx(0.6)


def test_json_malformed():
    with pytest.raises(ValidationError):
        MeasureSpec.from_dict({"atoms": [{"val": 1}]})
    with pytest.raises(ValidationError):
        MeasureSpec.from_json("{not json")
    json.loads(MeasureSpec.bernoulli(0.5).to_json())


@pytest.mark.parametrize("m, expected", [
    (MeasureSpec.point(INF), []),
    (MeasureSpec(atoms=((0.0, 0.5), (10.0, 0.5))), [(0.0, 0.0), (10.0, 10.0)]),
    (CLOSING, [(0.0, 1.0), (8.0, 8.0)]),
    (MeasureSpec(atoms=((1.0, 0.5),), densities=((0.0, 1.0, 0.5),)), [(0.0, 1.0)]),
])
def test_support_real(m, expected):
    assert support_real(m) == expected


def test_minkowski_band_merges_overlaps():
    assert minkowski_band(support_real(CLOSING), 2) == [(-4.0, 12.0)]
    assert minkowski_band([(0.0, 0.0), (10.0, 10.0)], 1) == [(-2.0, 2.0), (8.0, 12.0)]


def test_wegner_constant_hand_value():
    m = MeasureSpec(densities=((-2.0, 3.0, 0.2),), allow_negative=True)
    assert wegner_constant(m, 0.0, 1.0, 0.5, 1) == pytest.approx(230.4, abs=1e-9)


def test_wegner_constant_scaling():
    # window ]a-2d, b+2d[ = ]-2, 3[; doubling the height there while keeping window mass fixed
    base = MeasureSpec(atoms=((INF, 0.5),), densities=((-2.0, 3.0, 0.1),), allow_negative=True)
    taller = MeasureSpec(atoms=((INF, 0.5),), densities=((-2.0, 0.5, 0.2),), allow_negative=True)
    c1 = wegner_constant(base, 0, 1, 0.5, 1)
    c2 = wegner_constant(taller, 0, 1, 0.5, 1)
    assert c2 == pytest.approx(2 * c1)
    assert wegner_constant(base, 0, 1, 1.0, 1) < c1


def test_wegner_constant_rejects_atoms_in_window():
    m = MeasureSpec(atoms=((0.0, 0.5),), densities=((1.0, 2.0, 0.5),))
    with pytest.raises(PreconditionError):
        wegner_constant(m, 0.0, 1.0, 0.5, 1)


def test_wegner_constant_zero_mass():
    with pytest.raises(ZeroDivisionError):
        wegner_constant(MeasureSpec(densities=((20.0, 21.0, 1.0),)), 0.0, 1.0, 0.5, 1)


@st.composite
def measures(draw):
    n_atoms = draw(st.integers(0, 3))
    n_dens = draw(st.integers(0 if n_atoms else 1, 2))
    values = draw(st.lists(st.one_of(st.just(INF), st.floats(0, 20)), min_size=n_atoms, max_size=n_atoms,
                           unique=True))
    raw = draw(st.lists(st.floats(0.05, 1.0), min_size=n_atoms + n_dens, max_size=n_atoms + n_dens))
    total = sum(raw)
    w = [x / total for x in raw]
    dens = []
    for k in range(n_dens):
        lo = 3.0 * k + draw(st.floats(0, 1))
        hi = lo + draw(st.floats(0.1, 2))
        dens.append((lo, hi, w[n_atoms + k] / (hi - lo)))
    return MeasureSpec(atoms=tuple(zip(values, w[:n_atoms])), densities=tuple(dens))


@settings(max_examples=40, deadline=None)
@given(measures(), st.integers(0, 2 ** 32))
def test_samples_lie_in_support(m, seed):
    x = sample_many(m, RandomStream(seed, 0), 300)
    supp = support_real(m)
    finite = x[np.isfinite(x)]
    inside = np.zeros(len(finite), dtype=bool)
    for lo, hi in supp:
        inside |= (finite >= lo - 1e-12) & (finite <= hi + 1e-12)
    assert inside.all()
    assert all(a[1] < b[0] for a, b in zip(supp, supp[1:]))


@settings(max_examples=30, deadline=None)
@given(measures())
def test_atom_frequencies(m):
    n = 4000
    x = sample_many(m, RandomStream(99, 0), n)
    for v, w in m.atoms:
        freq = np.mean(np.isinf(x)) if math.isinf(v) else np.mean(x == v)
        assert abs(freq - w) <= 5 * math.sqrt(w * (1 - w) / n) + 1e-12
