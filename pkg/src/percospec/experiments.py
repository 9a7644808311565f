"""Monte Carlo drivers for the finite-volume checks.

Every realization is a pure function of ``(seed, index)``; aggregation walks
realizations in index order, so results do not depend on the worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .animals import AnimalCatalogue, LatticeAnimal, predicted_jump
from .errors import InsufficientStatisticsError, PreconditionError
from .hamiltonian import SparseHamiltonian, assemble
from .lattice import Box, ClusterLabeling, PercolationConfig, generate_config, label_clusters
from .measure import MeasureSpec, minkowski_band, support_real, wegner_constant
from .spectral import count_leq_many, eigen_sym, normalization_volume

DEFAULT_SEED = 20060101
EIG_DEDUP = 1e-7
MATCH_TOL = 1e-6
# a jump estimate must be at least this many standard errors above zero
SIGNIFICANCE = 5.0


def pmap(fn: Callable, items: Iterable, threads: int = 1) -> list:
    """Order-preserving map, threaded when ``threads > 1`` (kernels release the GIL)."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def realize(box: Box, m: MeasureSpec, seed: int, index: int, variant: str = "anderson",
            cluster_scope: str = "all") -> tuple[PercolationConfig, ClusterLabeling, SparseHamiltonian]:
    cfg = generate_config(box, m, seed, index)
    lab = label_clusters(cfg)
    subset = None if cluster_scope == "all" else lab.mask(cluster_scope)
    return cfg, lab, assemble(cfg, variant, subset)


# --- IDS --------------------------------------------------------------------

@dataclass
class EmpiricalIDS:
    grid: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    n: int
    metadata: dict = field(default_factory=dict)

    @property
    def stderr(self) -> np.ndarray:
        return self.std / math.sqrt(self.n) if self.n > 1 else np.zeros_like(self.std)


def estimate_ids(d: int, L_list: Sequence[int], m: MeasureSpec, grid, n_realizations: int,
                 seed: int = DEFAULT_SEED, variant: str = "anderson", cluster_scope: str = "all",
                 normalization: str = "volume", threads: int = 1, periodic: bool = False,
                 allow_odd: bool = False) -> dict[int, EmpiricalIDS]:
    """Average of the counting function over independent realizations, per L."""
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise PreconditionError("estimate_ids: grid must be sorted")
    if n_realizations < 1:
        raise PreconditionError("estimate_ids: n_realizations must be >= 1")
    out = {}
    for L in L_list:
        box = Box(d, L, periodic=periodic, allow_odd=allow_odd)
        vol = normalization_volume(box, normalization)

        def one(r: int) -> np.ndarray:
            _, _, H = realize(box, m, seed, r, variant, cluster_scope)
            return count_leq_many(H, grid)

        counts = np.array(pmap(one, range(n_realizations), threads), dtype=float) / vol
        std = counts.std(axis=0, ddof=1) if n_realizations > 1 else np.zeros(len(grid))
        meta = {
            "d": d, "L": L, "measure": m.to_dict(), "seed": seed, "variant": variant,
            "cluster_scope": cluster_scope, "normalization": normalization,
            "n_realizations": n_realizations, "periodic": periodic,
        }
        out[L] = EmpiricalIDS(grid, counts.mean(axis=0), std, n_realizations, meta)
    return out


def spanning_cluster_ids(d, L_list, m, grid, n_realizations, **kw) -> dict[int, EmpiricalIDS]:
    """IDS restricted to spanning clusters (alternative infinite-cluster proxy)."""
    return estimate_ids(d, L_list, m, grid, n_realizations, cluster_scope="spanning", **kw)


def analytic_ids_1d(E) -> np.ndarray:
    """IDS of the free 1D lattice Laplacian ``A`` on Z: ``1 - arccos(E/2)/pi``."""
    E = np.clip(np.asarray(E, dtype=float), -2.0, 2.0)
    return 1.0 - np.arccos(E / 2.0) / np.pi


# --- eigenvalue samples and jumps ----------------------------------------

@dataclass
class EigenvalueSample:
    eigenvalues: list[np.ndarray]
    volume: int  # normalization of each realization's counting function
    metadata: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.eigenvalues)


def collect_eigenvalues(d: int, L: int, m: MeasureSpec, n_realizations: int, seed: int = DEFAULT_SEED,
                        variant: str = "anderson", cluster_scope: str = "all", normalization: str = "volume",
                        threads: int = 1, periodic: bool = False) -> EigenvalueSample:
    box = Box(d, L, periodic=periodic)

    def one(r: int) -> np.ndarray:
        _, _, H = realize(box, m, seed, r, variant, cluster_scope)
        return eigen_sym(H).eigenvalues

    eigs = pmap(one, range(n_realizations), threads)
    meta = {"d": d, "L": L, "measure": m.to_dict(), "seed": seed, "variant": variant,
            "cluster_scope": cluster_scope, "normalization": normalization, "n_realizations": n_realizations}
    return EigenvalueSample(eigs, normalization_volume(box, normalization), meta)


def cluster_values(values: np.ndarray, tol: float = EIG_DEDUP) -> list[tuple[float, int]]:
    """Group sorted values whose consecutive gaps are <= tol: (median location, count)."""
    values = np.sort(np.asarray(values, dtype=float))
    if len(values) == 0:
        return []
    breaks = np.flatnonzero(np.diff(values) > tol) + 1
    out = []
    for grp in np.split(values, breaks):
        out.append((float(np.median(grp)), len(grp)))
    return out


@dataclass
class Jump:
    E: float
    size: float
    stderr: float
    matched: float | None  # catalogue value, None when uncatalogued
    predicted: float | None
    n_max: int | None
    count: int | None = None


@dataclass
class JumpReport:
    jumps: list[Jump]
    threshold: float | None
    mode: str

    @property
    def uncatalogued(self) -> list[Jump]:
        return [j for j in self.jumps if j.matched is None]

    def at(self, E: float, tol: float = MATCH_TOL) -> Jump | None:
        for j in self.jumps:
            if abs(j.E - E) <= tol:
                return j
        return None


def _match(E: float, catalogue: AnimalCatalogue | None, p: float | None, tol: float):
    if catalogue is None:
        return None, None, None
    entry = catalogue.lookup(E, tol)
    if entry is None:
        return None, None, catalogue.n_max
    pred = predicted_jump(entry.value, p, catalogue).jump if p is not None else None
    return entry.value, pred, catalogue.n_max


def detect_jumps(source: EmpiricalIDS | EigenvalueSample, threshold: float | None = None,
                 catalogue: AnimalCatalogue | None = None, p: float | None = None,
                 match_tol: float = MATCH_TOL, dedup_tol: float = EIG_DEDUP) -> JumpReport:
    """Locate atoms of the IDS measure and match them against the catalogue.

    With an :class:`EigenvalueSample`, eigenvalues pooled over realizations are
    clustered at ``dedup_tol``; a cluster of ``c`` eigenvalues has mass
    ``c / (R * volume)`` with Poisson standard error ``sqrt(c) / (R * volume)``.
    With an :class:`EmpiricalIDS`, increments between grid points are used and
    the default threshold is ``SIGNIFICANCE`` standard errors of N.
    Jumps that match no catalogue value are kept and flagged.
    """
    jumps: list[Jump] = []
    if isinstance(source, EigenvalueSample):
        norm = source.n * source.volume
        pooled = np.concatenate(source.eigenvalues) if source.eigenvalues else np.zeros(0)
        for E, c in cluster_values(pooled, dedup_tol):
            size = c / norm
            se = math.sqrt(c) / norm
            keep = size > threshold if threshold is not None else size >= SIGNIFICANCE * se
            if not keep:
                continue
            matched, pred, n_max = _match(E, catalogue, p, match_tol)
            jumps.append(Jump(E, size, se, matched, pred, n_max, c))
        return JumpReport(jumps, threshold, "eigenvalues")
    grid, mean, se = source.grid, source.mean, source.stderr
    inc = np.diff(mean)
    for k, dn in enumerate(inc, start=1):
        noise = SIGNIFICANCE * max(se[k], se[k - 1])
        thr = threshold if threshold is not None else noise
        if dn <= thr or dn <= 0:
            continue
        lo, hi = grid[k - 1], grid[k]
        loc = 0.5 * (lo + hi)
        matched = pred = n_max = None
        if catalogue is not None:
            inside = [e for e in catalogue.entries if lo - match_tol < e.value <= hi + match_tol]
            n_max = catalogue.n_max
            if inside:
                best = min(inside, key=lambda e: abs(e.value - loc))
                matched, loc = best.value, best.value
                pred = predicted_jump(best.value, p, catalogue).jump if p is not None else None
        jumps.append(Jump(loc, float(dn), float(max(se[k], se[k - 1])), matched, pred, n_max))
    return JumpReport(jumps, threshold, "grid")


# --- Wegner ------------------------------------------------------------------

@dataclass
class WegnerRow:
    lo: float
    hi: float
    distance: float
    lhs: float
    lhs_stderr: float
    rhs: float
    constant: float

    @property
    def slack(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else math.inf)

    @property
    def violation(self) -> bool:
        return self.lhs - 3.0 * self.lhs_stderr > self.rhs


def interval_distance(lo: float, hi: float, a: float, b: float) -> float:
    """Distance from ``[lo, hi]`` to the complement of ``]a, b[`` (0 if it sticks out)."""
    return max(0.0, min(lo - a, b - hi))


def wegner_experiment(d: int, L: int, m: MeasureSpec, a: float, b: float, delta: float,
                      intervals: Sequence[tuple[float, float]], n_realizations: int,
                      seed: int = DEFAULT_SEED, threads: int = 1,
                      check_distance: bool = True) -> list[WegnerRow]:
    """Expected eigenvalue count in each interval against ``C |I| L^d``.

    ``check_distance=False`` evaluates intervals closer than ``delta`` to the
    edge of ``]a, b[`` instead of rejecting them; their distance is reported.
    """
    C = wegner_constant(m, a, b, delta, d)
    for lo, hi in intervals:
        if hi < lo:
            raise PreconditionError(f"wegner_experiment: interval [{lo}, {hi}] has hi < lo")
        dist = interval_distance(lo, hi, a, b)
        if check_distance and dist < delta:
            raise PreconditionError(
                f"wegner_experiment: interval [{lo}, {hi}] has distance {dist:g} < delta={delta:g} "
                f"to the complement of ]{a}, {b}["
            )
    box = Box(d, L)
    vol = box.volume
    edges = sorted({x for iv in intervals for x in iv})

    def one(r: int) -> dict:
        _, _, H = realize(box, m, seed, r, "anderson", "all")
        nudge = 1e-10 * max(H.scale, 1.0)
        energies = np.array(edges + [x - 2 * nudge for x in edges])
        counts = count_leq_many(H, energies)
        k = len(edges)
        return {x: (counts[i], counts[k + i]) for i, x in enumerate(edges)}

    per = pmap(one, range(n_realizations), threads)
    rows = []
    for lo, hi in intervals:
        # closed interval: #{<= hi} - #{< lo}
        tr = np.array([c[hi][0] - c[lo][1] for c in per], dtype=float)
        se = tr.std(ddof=1) / math.sqrt(len(tr)) if len(tr) > 1 else 0.0
        rows.append(WegnerRow(lo, hi, interval_distance(lo, hi, a, b), float(tr.mean()), float(se),
                              C * (hi - lo) * vol, C))
    return rows


# --- spectrum support ---------------------------------------------------------

@dataclass
class SupportRow:
    L: int
    n_eigenvalues: int
    min_eig: float
    max_eig: float
    frac_outside: float
    dist_min: float
    dist_max: float


@dataclass
class SupportReport:
    predicted: list[tuple[float, float]]
    epsilon: float
    rows: list[SupportRow]


def predicted_spectrum(m: MeasureSpec, d: int) -> list[tuple[float, float]]:
    return minkowski_band(support_real(m), d)


def outside_fraction(eigs: np.ndarray, intervals: list[tuple[float, float]], epsilon: float) -> float:
    if len(eigs) == 0:
        return 0.0
    inside = np.zeros(len(eigs), dtype=bool)
    for lo, hi in intervals:
        inside |= (eigs >= lo - epsilon) & (eigs <= hi + epsilon)
    return float(1.0 - inside.mean())


def support_check(d: int, m: MeasureSpec, L_list: Sequence[int], n_realizations: int, epsilon: float,
                  seed: int = DEFAULT_SEED, threads: int = 1) -> SupportReport:
    """Compare finite-volume spectra with ``[-2d, 2d] + supp mu``."""
    pred = predicted_spectrum(m, d)
    rows = []
    for L in L_list:
        sample = collect_eigenvalues(d, L, m, n_realizations, seed, threads=threads)
        eigs = np.concatenate(sample.eigenvalues) if sample.eigenvalues else np.zeros(0)
        if len(eigs) == 0 or not pred:
            rows.append(SupportRow(L, 0, math.nan, math.nan, 0.0, math.nan, math.nan))
            continue
        lo, hi = float(eigs.min()), float(eigs.max())
        rows.append(SupportRow(L, len(eigs), lo, hi, outside_fraction(eigs, pred, epsilon),
                               abs(lo - pred[0][0]), abs(hi - pred[-1][1])))
    return SupportReport(pred, epsilon, rows)


# --- continuity ---------------------------------------------------------------

@dataclass
class ContinuityRow:
    L: int
    max_jump: float  # mean over realizations of the largest eigenvalue-cluster mass
    max_jump_worst: float  # the same, maximised over realizations


def continuity_check(d: int, m: MeasureSpec, L_list: Sequence[int], n_realizations: int,
                     seed: int = DEFAULT_SEED, dedup_tol: float = EIG_DEDUP, normalization: str = "volume",
                     threads: int = 1) -> list[ContinuityRow]:
    """Largest jump of ``N_omega^L`` per L, for measures without finite atoms."""
    if m.finite_atoms:
        raise PreconditionError(
            f"continuity_check: measure has finite atoms at {[v for v, _ in m.finite_atoms]}; "
            "continuity requires mu = mu_c + (1-p) delta_inf"
        )
    rows = []
    for L in L_list:
        sample = collect_eigenvalues(d, L, m, n_realizations, seed, normalization=normalization,
                                     threads=threads)
        per = np.array([max((c for _, c in cluster_values(w, dedup_tol)), default=0)
                        for w in sample.eigenvalues], dtype=float) / sample.volume
        rows.append(ContinuityRow(L, float(per.mean()), float(per.max())))
    return rows


# --- Lifshitz tail ------------------------------------------------------------

@dataclass
class LifshitzFit:
    kappa: float
    log_c: float
    power_exponent: float
    rss_lifshitz: float
    rss_power: float
    offsets: np.ndarray
    ids: np.ndarray
    excluded: list[float]
    bottom: float

    @property
    def lifshitz(self) -> bool:
        """Stretched-exponential thinning fits better than a power law."""
        return self.kappa > 0 and self.rss_lifshitz < self.rss_power


def fit_lifshitz(offsets, ids, bottom: float = math.nan, excluded: list[float] | None = None) -> LifshitzFit:
    """Fit ``log N = -c s^-kappa`` and, as the alternative, ``log N = b + beta log s``.

    Residuals of both models are measured in ``log N``.
    """
    s = np.asarray(offsets, dtype=float)
    N = np.asarray(ids, dtype=float)
    ok = (N > 0) & (N < 1)
    s, N = s[ok], N[ok]
    if len(s) < 3:
        raise InsufficientStatisticsError(f"fit_lifshitz: {len(s)} usable offsets (need 3 with 0 < N < 1)")
    x = np.log(s)
    logN = np.log(N)
    slope, icpt = np.polyfit(x, np.log(-logN), 1)
    kappa, log_c = -slope, icpt
    rss_l = float(np.sum((logN + np.exp(log_c) * s ** (-kappa)) ** 2))
    beta, b0 = np.polyfit(x, logN, 1)
    rss_p = float(np.sum((logN - (b0 + beta * x)) ** 2))
    return LifshitzFit(float(kappa), float(log_c), float(beta), rss_l, rss_p, s, N, excluded or [], bottom)


def lifshitz_probe(d: int, m: MeasureSpec, offsets: Sequence[float], L: int, n_realizations: int,
                   seed: int = DEFAULT_SEED, window: float | None = None, normalization: str = "volume",
                   threads: int = 1) -> LifshitzFit:
    """Fit the Lifshitz exponent from the IDS at ``min Sigma + s``.

    Offsets beyond ``window`` (default ``d``) are in the bulk and excluded.
    """
    supp = support_real(m)
    if not supp:
        raise PreconditionError("lifshitz_probe: measure has no finite support")
    bottom = -2.0 * d + supp[0][0]
    window = float(d) if window is None else window
    offsets = sorted(float(s) for s in offsets)
    used = [s for s in offsets if 0 < s <= window]
    excluded = [s for s in offsets if not 0 < s <= window]
    if not used:
        raise InsufficientStatisticsError("lifshitz_probe: no offsets inside the window")
    ids = estimate_ids(d, [L], m, bottom + np.array(used), n_realizations, seed,
                       normalization=normalization, threads=threads)[L]
    if not np.any(ids.mean > 0):
        raise InsufficientStatisticsError("lifshitz_probe: IDS estimate is zero at every offset")
    return fit_lifshitz(used, ids.mean, bottom, excluded)


# --- multiplicity lower bound -------------------------------------------------

def interior_animals(cfg: PercolationConfig, labeling: ClusterLabeling,
                     catalogue: AnimalCatalogue) -> list[int]:
    """Catalogue ids of clusters that stay off the box boundary."""
    coords = cfg.box.coords
    out = []
    order = np.argsort(labeling.labels, kind="stable")
    labs = labeling.labels[order]
    starts = np.searchsorted(labs, np.arange(labeling.n_clusters))
    ends = np.searchsorted(labs, np.arange(labeling.n_clusters), side="right")
    for lab in range(labeling.n_clusters):
        if labeling.touches_boundary[lab] or labeling.sizes[lab] > catalogue.n_max:
            continue
        members = order[starts[lab]:ends[lab]]
        animal = LatticeAnimal.from_sites(map(tuple, coords[members]))
        out.append(catalogue.animal_index[animal.sites])
    return out


def multiplicity_table(cfg: PercolationConfig, labeling: ClusterLabeling, catalogue: AnimalCatalogue,
                       tol: float = EIG_DEDUP, variant: str = "anderson") -> list[tuple[float, int, int]]:
    """(E, observed multiplicity, interior-cluster lower bound) for every catalogue value."""
    w = eigen_sym(assemble(cfg, variant)).eigenvalues
    ids = interior_animals(cfg, labeling, catalogue)
    rows = []
    for entry in catalogue.entries:
        E = entry.value
        observed = int(np.searchsorted(w, E + tol, side="right") - np.searchsorted(w, E - tol, side="left"))
        bound = sum(catalogue.multiplicity(aid, entry) for aid in ids)
        rows.append((E, observed, bound))
    return rows


def multiplicity_lower_bound_check(cfg: PercolationConfig, labeling: ClusterLabeling,
                                   catalogue: AnimalCatalogue, E: float,
                                   tol: float = EIG_DEDUP) -> tuple[int, int]:
    entry = catalogue.lookup(E, MATCH_TOL)
    if entry is None:
        raise PreconditionError(f"multiplicity_lower_bound_check: E={E} is not catalogued")
    if cfg.measure is not None and not cfg.measure.is_bernoulli:
        raise PreconditionError("multiplicity_lower_bound_check: requires a Bernoulli measure")
    for e, obs, bound in multiplicity_table(cfg, labeling, catalogue, tol):
        if e == entry.value:
            return obs, bound
    raise AssertionError("unreachable")
