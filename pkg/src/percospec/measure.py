"""Single-site distributions on [0, inf] and the counter-based random stream.

A measure is a finite mixture of atoms and piecewise-constant densities.  The
atom value ``INF`` marks a deleted vertex.  Sampling uses a single uniform per
site pushed through the mixture's quantile function, so the sample for site
``x`` of realization ``r`` depends only on ``(seed, r, x)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import PreconditionError, ValidationError

INF = math.inf
MASS_TOL = 1e-12

_MASK64 = (1 << 64) - 1


class RandomStream:
    """Philox-backed stream keyed by ``(seed, realization)``.

    Uniform number ``k`` of the stream is a pure function of the key and ``k``;
    generating a block or a single value at an offset gives identical bits.
    """

    def __init__(self, seed: int, realization: int):
        self.seed = int(seed)
        self.realization = int(realization)
        self._key = np.array([self.seed & _MASK64, self.realization & _MASK64], dtype=np.uint64)

    def _generator(self, start: int) -> tuple[np.random.Generator, int]:
        bitgen = np.random.Philox(key=self._key)
        # Philox emits four 64-bit words per counter increment.
        bitgen.advance(start // 4)
        return np.random.Generator(bitgen), start % 4

    def uniforms(self, count: int, start: int = 0) -> np.ndarray:
        gen, skip = self._generator(start)
        return gen.random(count + skip)[skip:]

    def uniform(self, index: int) -> float:
        return float(self.uniforms(1, start=index)[0])


def _fmt_value(v: float):
    return "inf" if math.isinf(v) else float(v)


def _parse_value(v) -> float:
    if isinstance(v, str):
        if v.strip().lower() in ("inf", "infinity", "+inf"):
            return INF
        return float(v)
    return float(v)


@dataclass(frozen=True)
class MeasureSpec:
    """Mixture ``sum_i w_i delta_{v_i} + sum_j h_j 1_[lo_j, hi_j]``.

    ``allow_negative`` relaxes the nonnegativity of finite values; it exists for
    shifted Wegner setups whose density reaches below zero.
    """

    atoms: tuple[tuple[float, float], ...] = ()
    densities: tuple[tuple[float, float, float], ...] = ()
    allow_negative: bool = False
    _table: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        atoms = tuple((float(v), float(w)) for v, w in self.atoms)
        dens = tuple((float(lo), float(hi), float(h)) for lo, hi, h in self.densities)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "densities", dens)
        self._validate()
        object.__setattr__(self, "_table", self._build_table())

    # -- construction -------------------------------------------------------

    @classmethod
    def bernoulli(cls, p: float) -> "MeasureSpec":
        """Site percolation: retained with probability ``p`` and ``q = 0``."""
        atoms = [(0.0, p), (INF, 1.0 - p)]
        return cls(atoms=tuple(a for a in atoms if a[1] > 0))

    @classmethod
    def point(cls, value: float) -> "MeasureSpec":
        return cls(atoms=((value, 1.0),))

    @classmethod
    def from_dict(cls, data: dict) -> "MeasureSpec":
        try:
            atoms = tuple((_parse_value(a["value"]), float(a["weight"])) for a in data.get("atoms", []))
            dens = tuple(
                (float(p["lo"]), float(p["hi"]), float(p["height"])) for p in data.get("densities", [])
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"measure: malformed JSON ({exc})") from exc
        return cls(atoms=atoms, densities=dens, allow_negative=bool(data.get("allow_negative", False)))

    @classmethod
    def from_json(cls, text: str) -> "MeasureSpec":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"measure: malformed JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ValidationError("measure: JSON must be an object with 'atoms' and/or 'densities'")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = {
            "atoms": [{"value": _fmt_value(v), "weight": w} for v, w in self.atoms],
            "densities": [{"lo": lo, "hi": hi, "height": h} for lo, hi, h in self.densities],
        }
        if self.allow_negative:
            out["allow_negative"] = True
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    # -- validation ---------------------------------------------------------

    def _validate(self) -> None:
        for v, w in self.atoms:
            if math.isnan(v) or math.isnan(w):
                raise ValidationError("measure: NaN in atom")
            if w < 0:
                raise ValidationError(f"measure: negative atom weight {w} (weights must be >= 0)")
            if v == -INF:
                raise ValidationError("measure: atom value -inf (values must be >= 0 or inf)")
            if v < 0 and not self.allow_negative:
                raise ValidationError(f"measure: atom value {v} < 0 (q maps into [0, inf])")
        for lo, hi, h in self.densities:
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValidationError(f"measure: density piece [{lo}, {hi}] has non-finite endpoint")
            if not lo < hi:
                raise ValidationError(f"measure: density piece requires lo < hi, got [{lo}, {hi}]")
            if h < 0 or math.isnan(h):
                raise ValidationError(f"measure: negative density height {h}")
            if lo < 0 and not self.allow_negative:
                raise ValidationError(f"measure: density support [{lo}, {hi}] reaches below 0")
        pieces = sorted(self.densities)
        for (lo1, hi1, _), (lo2, _, _) in zip(pieces, pieces[1:]):
            if lo2 < hi1:
                raise ValidationError(
                    f"measure: density pieces must have disjoint interiors ([{lo1}, {hi1}] overlaps one starting at {lo2})"
                )
        total = sum(w for _, w in self.atoms) + sum(h * (hi - lo) for lo, hi, h in self.densities)
        if abs(total - 1.0) > MASS_TOL:
            raise ValidationError(f"measure: total mass {total!r} != 1 (tolerance {MASS_TOL})")

    # -- basic queries ------------------------------------------------------

    @property
    def deletion_weight(self) -> float:
        return sum(w for v, w in self.atoms if math.isinf(v))

    @property
    def retention(self) -> float:
        """Probability that a site is kept, ``mu([0, inf))``."""
        return 1.0 - self.deletion_weight

    @property
    def finite_atoms(self) -> list[tuple[float, float]]:
        return [(v, w) for v, w in self.atoms if math.isfinite(v) and w > 0]

    @property
    def is_bernoulli(self) -> bool:
        """True when ``supp mu`` is contained in ``{0, inf}``."""
        if any(h > 0 for _, _, h in self.densities):
            return False
        return all(w == 0 or v == 0 or math.isinf(v) for v, w in self.atoms)

    def mass_open(self, lo: float, hi: float) -> float:
        """``mu(]lo, hi[)`` restricted to finite values."""
        m = sum(w for v, w in self.atoms if lo < v < hi)
        for a, b, h in self.densities:
            m += h * max(0.0, min(b, hi) - max(a, lo))
        return m

    # -- sampling -----------------------------------------------------------

    def _build_table(self):
        # Components ordered by position; the deletion atom comes last so that
        # Bernoulli measures couple monotonically in p.
        comps = []
        for v, w in self.atoms:
            if w > 0:
                comps.append((v, 0, v, v, w))
        for lo, hi, h in self.densities:
            if h > 0:
                comps.append((lo, 1, lo, hi, h * (hi - lo)))
        comps.sort(key=lambda c: (c[0], c[1]))
        lo = np.array([c[2] for c in comps])
        hi = np.array([c[3] for c in comps])
        w = np.array([c[4] for c in comps])
        edges = np.concatenate([[0.0], np.cumsum(w)])
        return lo, hi, w, edges

    def quantile(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms in [0, 1) to samples (inverse-CDF over the mixture)."""
        lo, hi, w, edges = self._table
        u = np.asarray(u, dtype=float)
        idx = np.searchsorted(edges, u, side="right") - 1
        idx = np.clip(idx, 0, len(w) - 1)
        frac = np.clip((u - edges[idx]) / w[idx], 0.0, 1.0)
        with np.errstate(invalid="ignore"):
            out = np.where(lo[idx] == hi[idx], lo[idx], lo[idx] + frac * (hi[idx] - lo[idx]))
        return out


def sample(m: MeasureSpec, stream: RandomStream, index: int = 0) -> float:
    """Draw the value keyed by ``index`` of ``stream``."""
    return float(m.quantile(np.array([stream.uniform(index)]))[0])


def sample_many(m: MeasureSpec, stream: RandomStream, count: int, start: int = 0) -> np.ndarray:
    return m.quantile(stream.uniforms(count, start=start))


def _merge(intervals: Iterable[tuple[float, float]]) -> list[tuple[float, float]]:
    merged: list[list[float]] = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [(a, b) for a, b in merged]


def support_real(m: MeasureSpec) -> list[tuple[float, float]]:
    """Support of mu restricted to R as sorted disjoint closed intervals.

    Isolated points are degenerate intervals ``(v, v)``.
    """
    parts = [(v, v) for v, w in m.atoms if w > 0 and math.isfinite(v)]
    parts += [(lo, hi) for lo, hi, h in m.densities if h > 0]
    return _merge(parts)


def minkowski_band(support: list[tuple[float, float]], d: int) -> list[tuple[float, float]]:
    """``[-2d, 2d] + support``, merged."""
    return _merge((lo - 2 * d, hi + 2 * d) for lo, hi in support)


def wegner_constant(m: MeasureSpec, a: float, b: float, delta: float, d: int) -> float:
    """Explicit Wegner constant for energies in ``]a, b[`` at distance ``delta``.

    ``C = 2^(d+2) * ((b - a + 4d + 1) / delta)^2 * ||f||_inf / mu(]a-2d, b+2d[)``
    where ``f`` is the density of mu on the window ``]a-2d, b+2d[``.
    """
    if not delta > 0:
        raise PreconditionError(f"wegner_constant: delta must be > 0, got {delta}")
    if d < 1:
        raise PreconditionError(f"wegner_constant: d must be >= 1, got {d}")
    lo, hi = a - 2 * d, b + 2 * d
    for v, w in m.atoms:
        if w > 0 and lo < v < hi:
            raise PreconditionError(
                f"wegner_constant: atom at {v} inside ]{lo}, {hi}[ (mu must be absolutely continuous there)"
            )
    f_sup = max(
        (h for plo, phi, h in m.densities if h > 0 and min(phi, hi) - max(plo, lo) > 0),
        default=0.0,
    )
    mass = m.mass_open(lo, hi)
    if mass <= 0:
        raise ZeroDivisionError(f"wegner_constant: mu(]{lo}, {hi}[) = 0")
    return 2.0 ** (d + 2) * ((b - a + 4 * d + 1) / delta) ** 2 * f_sup / mass
