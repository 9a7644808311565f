"""Lattice animals in Z^d and the catalogue of their exact eigenvalues.

Every eigenvalue of a finite animal's adjacency matrix is identified exactly
by a pair (irreducible integer factor of the characteristic polynomial, index
of the root among that factor's sorted real roots).  Two catalogue values are
the same number iff they carry the same identity.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np
import sympy

from .errors import PreconditionError, ResourceError, ValidationError
from .spectral import char_poly_exact, dense_eigvals

DEDUP_TOL = 1e-9
CERT_MAX_N = 12
# (d -> largest n_max) enumeration guard
ENUM_GUARD = {1: 64, 2: 10, 3: 8}

Site = tuple[int, ...]


def _neighbors(c: Site):
    for axis in range(len(c)):
        for step in (-1, 1):
            yield c[:axis] + (c[axis] + step,) + c[axis + 1:]


@dataclass(frozen=True)
class LatticeAnimal:
    """Connected finite subset of Z^d, translated so its lexicographic minimum is the origin."""

    sites: tuple[Site, ...]

    @classmethod
    def from_sites(cls, sites) -> "LatticeAnimal":
        pts = [tuple(int(x) for x in s) for s in sites]
        base = min(pts)
        return cls(tuple(sorted(tuple(a - b for a, b in zip(p, base)) for p in pts)))

    @property
    def d(self) -> int:
        return len(self.sites[0])

    @property
    def size(self) -> int:
        return len(self.sites)

    @cached_property
    def boundary(self) -> frozenset:
        s = set(self.sites)
        return frozenset(y for x in self.sites for y in _neighbors(x) if y not in s)

    @property
    def boundary_size(self) -> int:
        return len(self.boundary)

    def adjacency(self) -> np.ndarray:
        index = {s: i for i, s in enumerate(self.sites)}
        a = np.zeros((self.size, self.size), dtype=np.int64)
        for s, i in index.items():
            for y in _neighbors(s):
                j = index.get(y)
                if j is not None:
                    a[i, j] = 1
        return a

    def is_connected(self) -> bool:
        s = set(self.sites)
        seen = {self.sites[0]}
        stack = [self.sites[0]]
        while stack:
            for y in _neighbors(stack.pop()):
                if y in s and y not in seen:
                    seen.add(y)
                    stack.append(y)
        return len(seen) == len(s)


def enumerate_animals(d: int, n_max: int, guard: dict[int, int] | None = None) -> list[LatticeAnimal]:
    """All fixed animals with 1..n_max sites, one per translation class.

    Redelmeier's method: grow from the origin, only through cells that are
    lexicographically greater than the origin, keeping an untried set and a
    mark set so that no animal is produced twice.
    """
    guard = ENUM_GUARD if guard is None else guard
    if d < 1 or n_max < 1:
        raise PreconditionError(f"enumerate_animals: need d >= 1 and n_max >= 1, got d={d}, n_max={n_max}")
    if d not in guard or n_max > guard[d]:
        raise ResourceError(
            f"enumerate_animals: (d={d}, n_max={n_max}) exceeds resource guard {guard.get(d, 'none')}"
        )
    origin = (0,) * d
    out: list[LatticeAnimal] = []
    cells: list[Site] = []
    marked = {origin}

    def grow(untried: list[Site]):
        untried = list(untried)
        while untried:
            c = untried.pop()
            cells.append(c)
            out.append(LatticeAnimal(tuple(sorted(cells))))
            if len(cells) < n_max:
                new = [y for y in _neighbors(c) if y > origin and y not in marked]
                marked.update(new)
                grow(untried + new)
                marked.difference_update(new)
            cells.pop()

    grow([origin])
    out.sort(key=lambda a: (a.size, a.sites))
    return out


# --- polynomial helpers ----------------------------------------------------

Poly = tuple[int, ...]  # integer coefficients, highest degree first

_X = sympy.Symbol("x")


@lru_cache(maxsize=None)
def factor_poly(coeffs: Poly) -> tuple[tuple[Poly, int], ...]:
    """Irreducible factorization over Z of a monic polynomial: ((factor, exponent), ...)."""
    _, facs = sympy.Poly(list(coeffs), _X).factor_list()
    out = []
    for f, k in facs:
        c = tuple(int(x) for x in f.all_coeffs())
        if c[0] < 0:
            c = tuple(-x for x in c)
        out.append((c, int(k)))
    return tuple(sorted(out))


def _polyval_exact(coeffs: Poly, x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in coeffs:
        acc = acc * x + c
    return acc


@lru_cache(maxsize=None)
def factor_roots(f: Poly) -> tuple[float, ...]:
    """Sorted real roots of an irreducible factor, polished by bisection on exact signs.

    Factors of symmetric-matrix characteristic polynomials have only real,
    simple roots.
    """
    deg = len(f) - 1
    if deg == 1:
        return (-f[1] / f[0],)
    approx = np.sort(np.real(np.roots(np.array(f, dtype=float))))
    gaps = np.diff(approx)
    roots = []
    for k, r in enumerate(approx):
        half = 0.25 * min(gaps[k - 1] if k > 0 else 1.0, gaps[k] if k < deg - 1 else 1.0, 1.0)
        lo, hi = Fraction(float(r - half)), Fraction(float(r + half))
        flo = _polyval_exact(f, lo)
        if flo == 0:
            roots.append(float(lo))
            continue
        if flo * _polyval_exact(f, hi) > 0:
            roots.append(float(r))
            continue
        for _ in range(60):
            mid = Fraction((float(lo) + float(hi)) / 2)
            if mid in (lo, hi):
                break
            fm = _polyval_exact(f, mid)
            if fm == 0:
                lo = hi = mid
                break
            if (fm > 0) == (flo > 0):
                lo, flo = mid, fm
            else:
                hi = mid
        roots.append(float((lo + hi) / 2))
    return tuple(roots)


def poly_str(coeffs: Poly, var: str = "x") -> str:
    deg = len(coeffs) - 1
    terms = []
    for k, c in enumerate(coeffs):
        p = deg - k
        if c == 0:
            continue
        mag = abs(c)
        mono = "" if p == 0 else (var if p == 1 else f"{var}^{p}")
        body = (str(mag) if mag != 1 or p == 0 else "") + mono
        terms.append(("-" if c < 0 else "+", body))
    if not terms:
        return "0"
    s = ("-" if terms[0][0] == "-" else "") + terms[0][1]
    for sign, body in terms[1:]:
        s += f" {sign} {body}"
    return s


# --- catalogue --------------------------------------------------------------

@dataclass
class CatalogueEntry:
    value: float  # root + shift
    factor: Poly  # minimal polynomial of (value - shift)
    root_index: int
    sources: list[tuple[int, int]] = field(default_factory=list)  # (animal id, multiplicity)
    close_distinct: bool = False  # another distinct value lies within DEDUP_TOL


@dataclass
class AnimalCatalogue:
    d: int
    n_max: int
    shift: float
    animals: list[LatticeAnimal]
    charpolys: list[Poly]
    entries: list[CatalogueEntry]

    @cached_property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.entries])

    @cached_property
    def animal_index(self) -> dict[tuple[Site, ...], int]:
        return {a.sites: i for i, a in enumerate(self.animals)}

    def lookup(self, E: float, tol: float = DEDUP_TOL) -> CatalogueEntry | None:
        """Closest entry within ``tol`` of E, or None."""
        if not self.entries:
            return None
        k = int(np.searchsorted(self.values, E))
        best = None
        for j in (k - 1, k):
            if 0 <= j < len(self.entries) and abs(self.values[j] - E) <= tol:
                if best is None or abs(self.values[j] - E) < abs(self.values[best] - E):
                    best = j
        return None if best is None else self.entries[best]

    def multiplicity(self, animal_id: int, entry: CatalogueEntry) -> int:
        for f, k in factor_poly(self.charpolys[animal_id]):
            if f == entry.factor:
                return k
        return 0

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "n_max": self.n_max,
            "shift": self.shift,
            "animals": [
                {"sites": [list(s) for s in a.sites], "charpoly": list(cp)}
                for a, cp in zip(self.animals, self.charpolys)
            ],
            "entries": [
                {
                    "value": e.value,
                    "factor": list(e.factor),
                    "root_index": e.root_index,
                    "sources": [list(s) for s in e.sources],
                    "close_distinct": e.close_distinct,
                }
                for e in self.entries
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "AnimalCatalogue":
        try:
            animals = [LatticeAnimal(tuple(tuple(s) for s in a["sites"])) for a in data["animals"]]
            charpolys = [tuple(int(c) for c in a["charpoly"]) for a in data["animals"]]
            entries = [
                CatalogueEntry(float(e["value"]), tuple(int(c) for c in e["factor"]), int(e["root_index"]),
                               [tuple(s) for s in e["sources"]], bool(e.get("close_distinct", False)))
                for e in data["entries"]
            ]
            return cls(int(data["d"]), int(data["n_max"]), float(data["shift"]), animals, charpolys, entries)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"catalogue: malformed JSON ({exc})") from exc

    @classmethod
    def from_json(cls, text: str) -> "AnimalCatalogue":
        return cls.from_dict(json.loads(text))


def build_catalogue(animals: list[LatticeAnimal], potential_shift: float = 0.0,
                    crosscheck_tol: float = 1e-8) -> AnimalCatalogue:
    """Exact eigenvalue table of the animals' adjacency matrices, shifted by a constant.

    Each animal's eigenvalues come from two routes: roots of the irreducible
    factors of its exact characteristic polynomial, and the dense eigensolver.
    They must agree to ``crosscheck_tol``.
    """
    if not animals:
        raise PreconditionError("build_catalogue: no animals")
    d = animals[0].d
    n_max = max(a.size for a in animals)
    charpolys: list[Poly] = []
    table: dict[tuple[Poly, int], list[tuple[int, int]]] = {}
    for aid, animal in enumerate(animals):
        adj = animal.adjacency()
        cp = tuple(char_poly_exact(adj, max_n=max(CERT_MAX_N, animal.size)))
        charpolys.append(cp)
        exact = []
        for f, k in factor_poly(cp):
            for r_idx, root in enumerate(factor_roots(f)):
                table.setdefault((f, r_idx), []).append((aid, k))
                exact.extend([root] * k)
        numeric = dense_eigvals(adj)
        if np.max(np.abs(np.sort(exact) - numeric)) > crosscheck_tol:
            raise ArithmeticError(f"build_catalogue: char-poly roots disagree with eigensolver for {animal.sites}")
    entries = [
        CatalogueEntry(factor_roots(f)[r] + potential_shift, f, r, sources)
        for (f, r), sources in table.items()
    ]
    entries.sort(key=lambda e: (e.value, e.factor, e.root_index))
    for a, b in zip(entries, entries[1:]):
        if b.value - a.value <= DEDUP_TOL:
            a.close_distinct = b.close_distinct = True
    return AnimalCatalogue(d, n_max, float(potential_shift), list(animals), charpolys, entries)


@dataclass(frozen=True)
class JumpPrediction:
    jump: float
    catalogued: bool
    n_max: int
    value: float | None = None


def predicted_jump(E: float, p: float, cat: AnimalCatalogue, d: int | None = None,
                   tol: float = DEDUP_TOL) -> JumpPrediction:
    """Truncated finite-cluster expansion of the IDS jump at E for Bernoulli(p).

    ``sum_S p^|S| (1-p)^|dS| mult_S(E)`` over the catalogued translation
    classes; a lower bound on the true jump.
    """
    if d is not None and d != cat.d:
        raise PreconditionError(f"predicted_jump: catalogue is for d={cat.d}, got d={d}")
    if not 0.0 <= p <= 1.0:
        raise PreconditionError(f"predicted_jump: p must be in [0, 1], got {p}")
    entry = cat.lookup(E, tol)
    if entry is None:
        return JumpPrediction(0.0, False, cat.n_max)
    total = 0.0
    for aid, mult in entry.sources:
        a = cat.animals[aid]
        total += p ** a.size * (1.0 - p) ** a.boundary_size * mult
    return JumpPrediction(total, True, cat.n_max, entry.value)


@dataclass(frozen=True)
class Certificate:
    charpoly: Poly  # monic integer characteristic polynomial of the source animal
    minimal_poly: Poly  # irreducible factor with the value as a root
    bracket: tuple[float, float]  # sign change of minimal_poly, verified exactly
    source_animal: int

    def __str__(self) -> str:
        return f"{poly_str(self.charpoly)} (minimal: {poly_str(self.minimal_poly)})"


def verify_algebraic_integer(entry: CatalogueEntry, cat: AnimalCatalogue) -> Certificate:
    """Certificate that ``entry.value - shift`` is a root of a monic integer polynomial."""
    sources = sorted(entry.sources, key=lambda s: (cat.animals[s[0]].size, s[0]))
    aid = sources[0][0]
    if cat.animals[aid].size > CERT_MAX_N:
        raise ResourceError(f"verify_algebraic_integer: source animal exceeds n={CERT_MAX_N}")
    cp = tuple(char_poly_exact(cat.animals[aid].adjacency()))
    if cp != cat.charpolys[aid]:
        raise ArithmeticError("verify_algebraic_integer: stored characteristic polynomial is wrong")
    if cp[0] != 1:
        raise ArithmeticError("verify_algebraic_integer: characteristic polynomial is not monic")
    f = entry.factor
    if f[0] != 1 or f not in {g for g, _ in factor_poly(cp)}:
        raise ArithmeticError("verify_algebraic_integer: factor does not divide the characteristic polynomial")
    x = entry.value - cat.shift
    width = 1e-9 * max(1.0, abs(x))
    lo, hi = x - width, x + width
    vlo, vhi = _polyval_exact(f, Fraction(lo)), _polyval_exact(f, Fraction(hi))
    if vlo * vhi > 0:
        raise ArithmeticError(f"verify_algebraic_integer: no sign change of the factor around {x}")
    return Certificate(cp, f, (lo, hi), aid)
