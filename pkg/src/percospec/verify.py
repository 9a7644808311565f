"""Self-checks behind ``percospec verify``.

``fast`` runs exact and oracle checks (seconds); ``full`` adds the Monte Carlo
criteria.  Each check returns a :class:`CheckResult`; reports carry no
timestamps or timings so repeated runs are byte-identical.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .animals import (CERT_MAX_N, AnimalCatalogue, LatticeAnimal, build_catalogue, enumerate_animals,
                      factor_poly, predicted_jump, verify_algebraic_integer)
from .errors import PercospecError, PreconditionError
from .experiments import (DEFAULT_SEED, analytic_ids_1d, collect_eigenvalues, continuity_check,
                          detect_jumps, estimate_ids, lifshitz_probe, multiplicity_table,
                          support_check, wegner_experiment)
from .hamiltonian import SparseHamiltonian, assemble
from .lattice import Box, config_from_active, generate_config, label_clusters, vertex_deficiency
from .measure import INF, MeasureSpec, RandomStream, sample_many, support_real, wegner_constant
from .spectral import char_poly_exact, count_leq_many, counting_function, eigen_sym, localization_profile

SQRT2 = math.sqrt(2.0)


@dataclass
class CheckResult:
    name: str
    observed: str
    tolerance: str
    passed: bool

    def __post_init__(self):
        self.passed = bool(self.passed)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: observed {self.observed} (tolerance {self.tolerance})"


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


# --- independent oracles ---------------------------------------------------

def brute_force_animal_counts(d: int, n: int) -> int:
    """Translation classes of connected n-subsets, by exhaustive subsets of an n^d window.

    Any animal of size n fits in a box of side n once its bounding box is
    moved to the origin, so the window sees every class.
    """
    cells = list(itertools.product(range(n), repeat=d))
    seen = set()
    for subset in itertools.combinations(cells, n):
        s = set(subset)
        start = subset[0]
        stack, reached = [start], {start}
        while stack:
            c = stack.pop()
            for axis in range(d):
                for step in (-1, 1):
                    y = c[:axis] + (c[axis] + step,) + c[axis + 1:]
                    if y in s and y not in reached:
                        reached.add(y)
                        stack.append(y)
        if len(reached) != n:
            continue
        mins = [min(c[k] for c in subset) for k in range(d)]
        seen.add(tuple(sorted(tuple(c[k] - mins[k] for k in range(d)) for c in subset)))
    return len(seen)


# --- criteria (also used by tests/test_acceptance.py) ------------------------

def crit_animal_counts() -> CheckResult:
    got = [sum(1 for a in enumerate_animals(2, 5) if a.size == k) for k in range(1, 6)]
    oracle = [brute_force_animal_counts(2, k) for k in range(1, 6)]
    d1 = [sum(1 for a in enumerate_animals(1, 6) if a.size == k) for k in range(1, 7)]
    ok = got == oracle == [1, 2, 6, 19, 63] and d1 == [1] * 6
    return CheckResult("C1 animal enumeration vs brute force", f"d=2 {got}, oracle {oracle}, d=1 {d1}",
                       "exact", ok)


def crit_catalogue_exact() -> CheckResult:
    ok = True
    notes = []
    for d, n_max, expected in [(1, 2, [-1, 0, 1]), (2, 2, [-1, 0, 1]), (2, 3, [-SQRT2, -1, 0, 1, SQRT2])]:
        cat = build_catalogue(enumerate_animals(d, n_max))
        vals = [e.value for e in cat.entries]
        match = len(vals) == len(expected) and all(abs(a - b) <= 1e-9 for a, b in zip(vals, expected))
        certs = all(_cert_ok(e, cat) for e in cat.entries)
        ok &= match and certs
        notes.append(f"d={d},n={n_max}:{len(vals)} values{'' if match else ' MISMATCH'}")
    return CheckResult("C2 catalogue truncation exactness + certificates", "; ".join(notes), "1e-9", ok)


def _cert_ok(entry, cat) -> bool:
    try:
        c = verify_algebraic_integer(entry, cat)
    except (ArithmeticError, PercospecError):
        return False
    return c.charpoly[0] == 1 and all(isinstance(x, int) for x in c.charpoly)


def crit_1d_ids_oracle() -> CheckResult:
    grid = np.linspace(-2.0, 2.0, 101)
    ids = estimate_ids(1, [1000], MeasureSpec.point(0.0), grid, 1, normalization="per_site",
                       variant="adjacency")[1000]
    dev = float(np.max(np.abs(ids.mean - analytic_ids_1d(grid))))
    return CheckResult("C3 1D full-lattice IDS vs 1 - arccos(E/2)/pi", _fmt(dev), "<= 0.02", dev <= 0.02)


def catalogue_d2_8() -> AnimalCatalogue:
    return build_catalogue(enumerate_animals(2, 8))


def crit_jump_reproduction(cat: AnimalCatalogue | None = None) -> CheckResult:
    cat = cat or catalogue_d2_8()
    m = MeasureSpec.bernoulli(0.3)
    sample = collect_eigenvalues(2, 60, m, 50, normalization="per_site")
    rep = detect_jumps(sample, catalogue=cat, p=0.3)
    j0 = rep.at(0.0)
    pred = predicted_jump(0.0, 0.3, cat).jump
    rel = abs(j0.size - pred) / pred if j0 else math.inf
    unmatched = [j for j in rep.jumps if j.matched is None or abs(j.E - j.matched) > 1e-6]
    ok = j0 is not None and rel <= 0.10 and not unmatched
    obs = f"jump(0)={_fmt(j0.size if j0 else 0.0)} predicted={_fmt(pred)} rel={_fmt(rel)}; " \
          f"{len(rep.jumps)} jumps, {len(unmatched)} unmatched"
    return CheckResult("C4 IDS jumps at catalogued values (p=0.3)", obs, "rel <= 0.10, match 1e-6", ok)


def crit_largest_cluster_jumps(cat: AnimalCatalogue | None = None) -> CheckResult:
    cat = cat or catalogue_d2_8()
    sample = collect_eigenvalues(2, 60, MeasureSpec.bernoulli(0.7), 50, cluster_scope="largest",
                                 normalization="per_site")
    rep = detect_jumps(sample, catalogue=cat)
    ok = rep.at(0.0) is not None and rep.at(0.0).matched is not None and not rep.uncatalogued
    obs = f"jumps at {[round(j.E, 6) for j in rep.jumps]}, {len(rep.uncatalogued)} uncatalogued"
    return CheckResult("C5 largest-cluster jumps (p=0.7)", obs, "0 uncatalogued, E=0 present", ok)


WEGNER_MEASURE = dict(densities=((-2.0, 3.0, 0.2),), allow_negative=True)
WEGNER_INTERVALS = [(0.4, 0.6), (0.45, 0.55), (0.49, 0.51)]


def crit_wegner() -> CheckResult:
    m = MeasureSpec(**WEGNER_MEASURE)
    C = wegner_constant(m, 0.0, 1.0, 0.5, 1)
    rows = wegner_experiment(1, 100, m, 0.0, 1.0, 0.5, WEGNER_INTERVALS, 200, check_distance=False)
    ok = abs(C - 230.4) <= 1e-9 and all(r.slack < 1 and not r.violation for r in rows)
    obs = f"C={_fmt(C)}; slack " + ", ".join(f"[{r.lo},{r.hi}]:{r.slack:.3g}" for r in rows)
    return CheckResult("C6 Wegner bound", obs, "slack < 1, no 3-sigma violation", ok)


def crit_support() -> CheckResult:
    m = MeasureSpec(atoms=((0.0, 0.5), (10.0, 0.5)))
    rep = support_check(1, m, [500], 20, 0.1)
    r = rep.rows[0]
    eigs = np.concatenate(collect_eigenvalues(1, 500, m, 20).eigenvalues)
    gap = float(np.mean((eigs > 2.1) & (eigs < 7.9)))
    ok = gap <= 0.005 and abs(r.min_eig + 2) <= 0.1 and abs(r.max_eig - 12) <= 0.3 \
        and rep.predicted == [(-2.0, 2.0), (8.0, 12.0)]
    obs = f"Sigma={rep.predicted} gap fraction={_fmt(gap)} min={_fmt(r.min_eig)} max={_fmt(r.max_eig)}"
    return CheckResult("C7 spectrum support", obs, "gap <= 0.5%, |min+2| <= 0.1, |max-12| <= 0.3", ok)


def crit_continuity() -> CheckResult:
    m = MeasureSpec(atoms=((INF, 0.3),), densities=((0.0, 2.0, 0.35),))
    rows = continuity_check(1, m, [50, 100, 200], 50)
    jumps = [r.max_jump for r in rows]
    ok = all(a > b for a, b in zip(jumps, jumps[1:]))
    return CheckResult("C8 IDS continuity", f"max jump by L {dict(zip([50, 100, 200], map(_fmt, jumps)))}",
                       "strictly decreasing", ok)


def crit_multiplicity(n_configs: int = 100) -> CheckResult:
    cat = build_catalogue(enumerate_animals(2, 6))
    box = Box(2, 40)
    m = MeasureSpec.bernoulli(0.3)
    violations = checked = 0
    for r in range(n_configs):
        cfg = generate_config(box, m, DEFAULT_SEED, r)
        for _, obs, bound in multiplicity_table(cfg, label_clusters(cfg), cat):
            checked += 1
            violations += obs < bound
    return CheckResult("C9 multiplicity lower bound", f"{violations} violations in {checked} checks",
                       "0 violations", violations == 0)


def _random_small_config(r: int):
    rng = np.random.default_rng([DEFAULT_SEED, r])
    d = int(rng.integers(1, 4))
    L = {1: 200, 2: 16, 3: 4}[d]
    p = float(rng.uniform(0.3, 1.0))
    if rng.random() < 0.5:
        m = MeasureSpec.bernoulli(p)
    else:
        m = MeasureSpec(atoms=((INF, 1 - p),), densities=((0.0, 1.0, p),))
    return generate_config(Box(d, L), m, DEFAULT_SEED, r)


def crit_linear_algebra(n_configs: int = 100) -> CheckResult:
    count_bad = weyl_bad = inter_bad = 0
    for r in range(n_configs):
        cfg = _random_small_config(r)
        H = assemble(cfg, "anderson")
        w = eigen_sym(H).eigenvalues
        lo, hi = (w.min() - 1, w.max() + 1) if len(w) else (-1, 1)
        grid = np.concatenate([np.linspace(lo, hi, 16), [-1.0, 0.0, 1.0, SQRT2]])
        s = max(H.scale, 1.0)
        ref = np.searchsorted(w, grid + 1e-10 * s, side="right")
        count_bad += int(np.sum(count_leq_many(H, grid) != ref))
        a = eigen_sym(assemble(cfg, "adjacency")).eigenvalues
        dm = eigen_sym(assemble(cfg, "dirichlet_like")).eigenvalues
        np_ = eigen_sym(assemble(cfg, "neumann_like")).eigenvalues
        weyl_bad += int(np.sum(dm > a + 1e-9) + np.sum(a > np_ + 1e-9))
        act = np.flatnonzero(cfg.active)
        if len(act) >= 2:
            drop = act[r % len(act)]
            mask = np.ones(cfg.box.n_sites, dtype=bool)
            mask[drop] = False
            mu = eigen_sym(assemble(cfg, "anderson", mask)).eigenvalues
            inter_bad += int(np.sum(mu < w[:-1] - 1e-9) + np.sum(mu > w[1:] + 1e-9))
    ok = count_bad == weyl_bad == inter_bad == 0
    obs = f"count mismatches {count_bad}, Weyl {weyl_bad}, interlacing {inter_bad} over {n_configs} configs"
    return CheckResult("C10 linear-algebra invariants", obs, "0 / 0 / 0", ok)


LIFSHITZ_MEASURE = dict(atoms=((4.0, 1 / 3), (INF, 1 / 3)), densities=((0.0, 1.0, 1 / 3),))
LIFSHITZ_OFFSETS = [round(0.3 + 0.05 * k, 2) for k in range(15)]


def crit_lifshitz() -> CheckResult:
    fit = lifshitz_probe(1, MeasureSpec(**LIFSHITZ_MEASURE), LIFSHITZ_OFFSETS, 2000, 500)
    control = lifshitz_probe(1, MeasureSpec.point(0.0), LIFSHITZ_OFFSETS, 2000, 1)
    ok = 0.25 <= fit.kappa <= 1.0 and fit.lifshitz and not control.lifshitz
    obs = f"kappa={_fmt(fit.kappa)} (lifshitz={fit.lifshitz}); control lifshitz={control.lifshitz}"
    return CheckResult("C11 Lifshitz probe (exploratory)", obs, "kappa in [0.25, 1.0]", ok)


# --- fast suite ---------------------------------------------------------------

def _check(name: str, fn: Callable[[], tuple[str, bool]], tol: str = "exact") -> CheckResult:
    try:
        obs, ok = fn()
    except Exception as exc:  # a crashing check is a failing check
        obs, ok = f"error: {type(exc).__name__}: {exc}", False
    return CheckResult(name, obs, tol, ok)


def _fast_measure():
    m = MeasureSpec(atoms=((8.0, 1 / 3), (INF, 1 / 3)), densities=((0.0, 1.0, 1 / 3),))
    x = sample_many(m, RandomStream(DEFAULT_SEED, 0), 10_000)
    f = [float(np.mean((x >= 0) & (x <= 1))), float(np.mean(x == 8)), float(np.mean(np.isinf(x)))]
    ok = all(abs(v - 1 / 3) <= 0.02 for v in f) and support_real(m) == [(0.0, 1.0), (8.0, 8.0)]
    return f"frequencies {[round(v, 4) for v in f]}", ok


def _fast_wegner_constant():
    m = MeasureSpec(**WEGNER_MEASURE)
    C = wegner_constant(m, 0.0, 1.0, 0.5, 1)
    try:
        wegner_constant(MeasureSpec(atoms=((0.0, 0.5),), densities=((1.0, 2.0, 0.5),)), 0, 1, 0.5, 1)
        atom_rejected = False
    except PreconditionError:
        atom_rejected = True
    return f"C={C!r}, atom rejected={atom_rejected}", abs(C - 230.4) <= 1e-9 and atom_rejected


def _fast_lattice():
    box = Box(2, 4)
    full = config_from_active(box, np.ones(box.n_sites, bool))
    lab = label_clusters(full)
    v = vertex_deficiency(full)
    checker = config_from_active(box, (box.coords.sum(axis=1) % 2) == 0)
    ok = lab.n_clusters == 1 and lab.sizes[0] == 25 and bool(lab.spans[0]) \
        and v[box.index((0, 0))] == 0 and v[box.index((2, 2))] == 2 \
        and np.all(label_clusters(checker).sizes == 1)
    return f"clusters={lab.n_clusters}, corner V={v[box.index((2, 2))]}", ok


def _fast_hamiltonian():
    box = Box(1, 2)
    cfg = config_from_active(box, [False, True, True], q=[0.0, 0.0, 10.0])
    w = eigen_sym(assemble(cfg, "anderson")).eigenvalues
    exp = [5 - math.sqrt(26), 5 + math.sqrt(26)]
    return f"dimer eigenvalues {w.tolist()}", bool(np.allclose(w, exp, atol=1e-12))


def _fast_eigen():
    p3 = SparseHamiltonian.from_dense([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    c4 = assemble(config_from_active(Box(2, 2), np.isin(np.arange(9), [4, 5, 7, 8])), "adjacency")
    w3 = eigen_sym(p3).eigenvalues
    w4 = eigen_sym(c4).eigenvalues
    ok = np.allclose(w3, [-SQRT2, 0, SQRT2], atol=1e-12) and np.allclose(w4, [-2, 0, 0, 2], atol=1e-12) \
        and count_leq_many(p3, [1.0])[0] == 2 and char_poly_exact(p3) == [1, 0, -2, 0]
    return f"P3 {np.round(w3, 12).tolist()}, C4 {np.round(w4, 12).tolist()}", bool(ok)


def _fast_counting():
    box = Box(1, 4)
    H = assemble(config_from_active(box, np.ones(5, bool)), "adjacency")
    N = counting_function(H, box, [2.0])[0]
    dimer = SparseHamiltonian.from_dense([[0, 1], [1, 0]])
    prof = localization_profile(dimer, (-2, 2))
    ok = N == 1.25 and all(abs(r.ipr - 0.5) < 1e-12 for r in prof)
    return f"N^L(2)={N}, dimer IPR={[round(r.ipr, 12) for r in prof]}", ok


def _fast_predicted_jump():
    p = 0.3
    cat1 = build_catalogue(enumerate_animals(2, 1))
    cat2 = build_catalogue(enumerate_animals(1, 2))
    a = predicted_jump(0.0, p, cat1).jump
    b = predicted_jump(1.0, p, cat2).jump
    c = predicted_jump(5.0, p, cat1)
    ok = abs(a - p * (1 - p) ** 4) < 1e-15 and abs(b - p * p * (1 - p) ** 2) < 1e-15 \
        and c.jump == 0 and not c.catalogued
    return f"J(0)={a:.6g}, J1d(1)={b:.6g}", ok


def catalogue_integrity(cat: AnimalCatalogue) -> tuple[str, bool]:
    """Recompute every certificate, animal and multiplicity of a catalogue."""
    problems = 0
    for a, cp in zip(cat.animals, cat.charpolys):
        if not a.is_connected() or min(a.sites) != (0,) * cat.d or a.size > cat.n_max:
            problems += 1
        elif tuple(char_poly_exact(a.adjacency(), max_n=max(12, a.size))) != cp:
            problems += 1
    fresh = build_catalogue(cat.animals, cat.shift)
    if [(e.factor, e.root_index) for e in fresh.entries] != [(e.factor, e.root_index) for e in cat.entries]:
        problems += 1
    for e, f in zip(cat.entries, fresh.entries):
        if abs(e.value - f.value) > 1e-9 or sorted(map(tuple, e.sources)) != sorted(map(tuple, f.sources)):
            problems += 1
        certifiable = min(cat.animals[a].size for a, _ in e.sources) <= CERT_MAX_N
        if not -2 * cat.d - 1e-12 <= e.value - cat.shift <= 2 * cat.d + 1e-12 \
                or (certifiable and not _cert_ok(e, cat)):
            problems += 1
    return f"{len(cat.entries)} entries, {problems} problems", problems == 0


def _fast_catalogue_roundtrip(path: Path | None):
    if path is not None:
        cat = AnimalCatalogue.from_json(Path(path).read_text())
    else:
        cat = AnimalCatalogue.from_json(build_catalogue(enumerate_animals(2, 5)).to_json())
    return catalogue_integrity(cat)


def _fast_reproducibility():
    grid = np.linspace(-4, 4, 17)
    m = MeasureSpec.bernoulli(0.6)
    a = estimate_ids(2, [10], m, grid, 8, threads=1)[10]
    b = estimate_ids(2, [10], m, grid, 8, threads=8)[10]
    c = generate_config(Box(2, 10), m, 1, 3).q
    ok = a.mean.tobytes() == b.mean.tobytes() and c.tobytes() == generate_config(Box(2, 10), m, 1, 3).q.tobytes()
    return "threads 1 vs 8 identical" if ok else "threads 1 vs 8 differ", ok


def fast_checks(catalogue_path: Path | None = None) -> list[CheckResult]:
    return [
        _check("measure sampling + support", _fast_measure, "1/3 +- 0.02"),
        _check("Wegner constant", _fast_wegner_constant, "1e-9"),
        _check("lattice labeling + deficiency", _fast_lattice),
        _check("Anderson dimer spectrum", _fast_hamiltonian, "1e-12"),
        _check("eigensolver / inertia / char-poly oracles", _fast_eigen, "1e-12"),
        _check("counting function + IPR", _fast_counting),
        _check("predicted jump closed forms", _fast_predicted_jump, "1e-15"),
        _check("catalogue integrity", lambda: _fast_catalogue_roundtrip(catalogue_path)),
        _check("reproducibility across thread counts", _fast_reproducibility, "byte-identical"),
        _safe(crit_animal_counts),
        _safe(crit_catalogue_exact),
        _safe(crit_1d_ids_oracle),
    ]


def _safe(fn: Callable[[], CheckResult]) -> CheckResult:
    try:
        return fn()
    except Exception as exc:
        return CheckResult(fn.__name__, f"error: {type(exc).__name__}: {exc}", "-", False)


def full_checks(catalogue_path: Path | None = None) -> list[CheckResult]:
    out = fast_checks(catalogue_path)
    cat = catalogue_d2_8()
    out += [
        _safe(lambda: crit_jump_reproduction(cat)),
        _safe(lambda: crit_largest_cluster_jumps(cat)),
        _safe(crit_wegner),
        _safe(crit_support),
        _safe(crit_continuity),
        _safe(crit_multiplicity),
        _safe(crit_linear_algebra),
        _safe(crit_lifshitz),
    ]
    return out


def report_csv(results: list[CheckResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["check", "observed", "tolerance", "status"])
    for r in results:
        w.writerow([r.name, r.observed, r.tolerance, "pass" if r.passed else "fail"])
    return buf.getvalue()


def report_json(results: list[CheckResult], suite: str) -> str:
    return json.dumps({
        "suite": suite,
        "version": __version__,
        "passed": all(r.passed for r in results),
        "checks": [r.__dict__ for r in results],
    }, indent=2, sort_keys=True) + "\n"
