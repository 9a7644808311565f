import math

import numpy as np
import pytest

from percospec.animals import (AnimalCatalogue, LatticeAnimal, build_catalogue, enumerate_animals, predicted_jump,
                               verify_algebraic_integer)
from percospec.errors import ResourceError, ValidationError
from percospec.verify import brute_force_animal_counts, catalogue_integrity

SQRT2 = math.sqrt(2)


def sizes(animals):
    return np.bincount([a.size for a in animals])[1:].tolist()


def test_one_segment_per_size_in_1d():
    animals = enumerate_animals(1, 7)
    assert sizes(animals) == [1] * 7
    assert all(a.sites == tuple((k,) for k in range(a.size)) for a in animals)


def test_2d_counts():
    assert sizes(enumerate_animals(2, 5)) == [1, 2, 6, 19, 63]


def test_3d_dimers_one_per_axis():
    assert sizes(enumerate_animals(3, 2)) == [1, 3]


@pytest.mark.parametrize("d, n", [(2, 1), (2, 2), (2, 3), (2, 4), (2, 5), (3, 3), (3, 4)])
def test_enumeration_matches_brute_force(d, n):
    counts = sizes(enumerate_animals(d, n))
    assert counts[n - 1] == brute_force_animal_counts(d, n)


def test_animals_are_canonical_connected_and_unique():
    animals = enumerate_animals(2, 6)
    assert len({a.sites for a in animals}) == len(animals)
    for a in animals:
        assert a.is_connected()
        assert min(a.sites) == (0, 0)


def test_boundary_examples():
    single = LatticeAnimal.from_sites([(3, 4)])
    assert single.sites == ((0, 0),) and single.boundary_size == 4
    assert LatticeAnimal.from_sites([(0,), (1,)]).boundary_size == 2
    assert LatticeAnimal.from_sites([(0, 0), (1, 0)]).boundary_size == 6
    square = LatticeAnimal.from_sites([(0, 0), (0, 1), (1, 0), (1, 1)])
    assert square.boundary_size == 8


def test_enumeration_guard():
    with pytest.raises(ResourceError):
        enumerate_animals(2, 11)
    with pytest.raises(ResourceError):
        enumerate_animals(3, 9)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_catalogue_small_truncations(d):
    assert build_catalogue(enumerate_animals(d, 1)).values.tolist() == [0.0]
    assert np.allclose(build_catalogue(enumerate_animals(d, 2)).values, [-1, 0, 1], atol=1e-12)


def test_catalogue_d2_n3():
    cat = build_catalogue(enumerate_animals(2, 3))
    assert np.allclose(cat.values, [-SQRT2, -1, 0, 1, SQRT2], atol=1e-9)
    assert len(cat.values) == 5


def test_catalogue_shift():
    base = build_catalogue(enumerate_animals(2, 3))
    shifted = build_catalogue(enumerate_animals(2, 3), potential_shift=2.5)
    assert np.allclose(shifted.values, base.values + 2.5)
    for e in shifted.entries:
        assert verify_algebraic_integer(e, shifted).charpoly[0] == 1


def test_catalogue_values_within_gershgorin():
    cat = build_catalogue(enumerate_animals(2, 6))
    assert np.all(np.abs(cat.values) <= 4)
    assert np.all(np.diff(cat.values) > 0)


def test_catalogue_gaps_shrink():
    gaps = []
    for n in range(2, 8):
        v = build_catalogue(enumerate_animals(2, n)).values
        v = np.concatenate([[-2.0], v[(v >= -2) & (v <= 2)], [2.0]])
        gaps.append(np.max(np.diff(v)))
    assert all(a >= b for a, b in zip(gaps, gaps[1:]))


@pytest.mark.parametrize("E, animal_size, expected", [
    (SQRT2, 3, (1, 0, -2, 0)),
    (1.0, 2, (1, 0, -1)),
    (0.0, 1, (1, 0)),
])
def test_certificates(E, animal_size, expected):
    cat = build_catalogue(enumerate_animals(1, 3))
    cert = verify_algebraic_integer(cat.lookup(E), cat)
    assert cat.animals[cert.source_animal].size == animal_size
    assert cert.charpoly == expected
    lo, hi = cert.bracket
    assert lo <= E <= hi


def test_predicted_jump_examples():
    p = 0.3
    for d in (1, 2, 3):
        cat = build_catalogue(enumerate_animals(d, 1))
        assert predicted_jump(0.0, p, cat).jump == pytest.approx(p * (1 - p) ** (2 * d), rel=1e-14)
    cat1 = build_catalogue(enumerate_animals(1, 2))
    assert predicted_jump(1.0, p, cat1).jump == pytest.approx(p ** 2 * (1 - p) ** 2, rel=1e-14)
    miss = predicted_jump(5.0, p, build_catalogue(enumerate_animals(2, 4)))
    assert miss.jump == 0 and not miss.catalogued and miss.n_max == 4


def test_predicted_jump_monotone_in_truncation():
    p = 0.4
    jumps = [predicted_jump(0.0, p, build_catalogue(enumerate_animals(2, n))).jump for n in range(1, 7)]
    assert all(a <= b for a, b in zip(jumps, jumps[1:]))


def test_catalogue_json_round_trip():
    cat = build_catalogue(enumerate_animals(2, 4))
    back = AnimalCatalogue.from_json(cat.to_json())
    assert back.to_json() == cat.to_json()
    assert catalogue_integrity(back)[1]


def test_corrupted_catalogue_fails_integrity():
    cat = build_catalogue(enumerate_animals(2, 4))
    data = cat.to_dict()
    data["animals"][3]["charpoly"][-1] += 1
    assert not catalogue_integrity(AnimalCatalogue.from_dict(data))[1]
    data = cat.to_dict()
    data["entries"][0]["value"] += 0.01
    assert not catalogue_integrity(AnimalCatalogue.from_dict(data))[1]
    with pytest.raises(ValidationError):
        AnimalCatalogue.from_dict({"d": 2})
