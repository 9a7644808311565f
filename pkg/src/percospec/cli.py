"""``percospec`` command line: ``run <command>`` and ``verify fast|full``.

Parameters come from a JSON run specification (``--spec``) and/or flags; flags
win.  Every field is validated before any computation.  Each run writes
``<command>.csv`` plus a ``<command>.json`` sidecar holding the resolved run
specification and the code version.

Exit codes: 0 success, 1 validation/precondition error (or failed verify
checks), 2 runtime or resource error.  Errors go to stderr as one JSON line.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .animals import AnimalCatalogue, build_catalogue, enumerate_animals, poly_str, verify_algebraic_integer
from .errors import PercospecError, ResourceError, ValidationError
from .experiments import (DEFAULT_SEED, collect_eigenvalues, continuity_check, detect_jumps, estimate_ids,
                          lifshitz_probe, multiplicity_table, pmap, predicted_spectrum, support_check,
                          wegner_experiment)
from .hamiltonian import VARIANTS, assemble
from .lattice import Box, config_to_csv, generate_config, label_clusters
from .measure import MeasureSpec
from .spectral import eigen_sym

COMMANDS = ("animals", "catalogue", "ids", "jumps", "wegner", "support", "continuity", "lifshitz",
            "spectrum", "multiplicity")
SCOPES = ("all", "largest", "spanning")
NORMALIZATIONS = ("volume", "per_site")
NEEDS_MEASURE = set(COMMANDS) - {"animals", "catalogue"}
EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


@dataclass
class RunSpec:
    command: str
    d: int = 2
    L: int | None = None
    L_list: list[int] | None = None
    measure: dict | None = None
    p: float | None = None
    n_realizations: int = 10
    seed: int = DEFAULT_SEED
    grid: str | list[float] | None = None
    n_max: int = 6
    variant: str = "anderson"
    cluster_scope: str = "all"
    normalization: str = "volume"
    threads: int = 1
    out: str = "percospec-out"
    a: float | None = None
    b: float | None = None
    delta: float | None = None
    intervals: list[list[float]] | None = None
    threshold: float | None = None
    epsilon: float = 0.1
    offsets: list[float] | None = None
    window: float | None = None
    shift: float = 0.0
    realization: int = 0
    catalogue: str | None = None
    periodic: bool = False
    allow_odd_L: bool = False
    gnuplot: bool = False
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        return d


def _fail(field_name: str, constraint: str):
    raise ValidationError(f"{field_name}: {constraint}")


def _parse_grid(g) -> np.ndarray:
    if isinstance(g, str):
        parts = g.split(":")
        if len(parts) != 3:
            _fail("grid", f"expected lo:hi:step, got {g!r}")
        try:
            lo, hi, step = map(float, parts)
        except ValueError:
            _fail("grid", f"non-numeric entry in {g!r}")
        if not step > 0 or hi < lo:
            _fail("grid", "need step > 0 and hi >= lo")
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        if n > 1_000_000:
            _fail("grid", f"{n} points exceeds 1e6")
        return lo + step * np.arange(n)
    arr = np.asarray(g, dtype=float)
    if arr.ndim != 1 or len(arr) == 0 or not np.all(np.isfinite(arr)):
        _fail("grid", "must be a non-empty list of finite numbers")
    if np.any(np.diff(arr) < 0):
        _fail("grid", "must be sorted ascending")
    return arr


def _parse_list(text: str, name: str, conv=float) -> list:
    try:
        return [conv(x) for x in text.split(",") if x.strip()]
    except ValueError:
        _fail(name, f"malformed comma-separated list {text!r}")


def _parse_intervals(text: str) -> list[list[float]]:
    out = []
    for part in text.split(","):
        try:
            lo, hi = map(float, part.split(":"))
        except ValueError:
            _fail("intervals", f"expected lo:hi[,lo:hi...], got {part!r}")
        out.append([lo, hi])
    return out


def resolve_measure(spec: RunSpec) -> MeasureSpec | None:
    if spec.measure is not None:
        try:
            return MeasureSpec.from_dict(spec.measure)
        except ValidationError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            _fail("measure", f"malformed ({exc})")
    if spec.p is not None:
        return MeasureSpec.bernoulli(spec.p)
    return None


def validate(spec: RunSpec) -> tuple[MeasureSpec | None, np.ndarray | None]:
    """Check every field; returns the parsed measure and grid."""
    if spec.command not in COMMANDS:
        _fail("command", f"must be one of {', '.join(COMMANDS)}")
    if not isinstance(spec.d, int) or not 1 <= spec.d <= 3:
        _fail("d", "must be an integer in 1..3")
    Ls = ([spec.L] if spec.L is not None else []) + list(spec.L_list or [])
    for L in Ls:
        if not isinstance(L, int) or L < 1:
            _fail("L", f"must be a positive integer, got {L!r}")
        if L % 2 and not spec.allow_odd_L:
            _fail("L", f"must be even (box [-L/2, L/2]^d), got {L}; pass --allow-odd-L to override")
        if L % 2 and spec.command not in ("ids", "spectrum"):
            _fail("L", "odd L is only supported by the ids and spectrum commands")
    if spec.command in ("ids", "support", "continuity") and not Ls:
        _fail("L_list", f"{spec.command} needs --L or --L-list")
    if spec.command in ("jumps", "wegner", "lifshitz", "spectrum", "multiplicity") and spec.L is None:
        _fail("L", f"{spec.command} needs --L")
    if spec.p is not None and not 0.0 <= spec.p <= 1.0:
        _fail("p", "must lie in [0, 1]")
    if spec.measure is not None and spec.p is not None:
        _fail("measure", "give either --measure or --p, not both")
    if not isinstance(spec.n_realizations, int) or spec.n_realizations < 1:
        _fail("n_realizations", "must be an integer >= 1")
    if not isinstance(spec.seed, int) or spec.seed < 0:
        _fail("seed", "must be a non-negative integer")
    if not isinstance(spec.n_max, int) or spec.n_max < 1:
        _fail("n_max", "must be an integer >= 1")
    if spec.variant not in VARIANTS:
        _fail("variant", f"must be one of {', '.join(VARIANTS)}")
    if spec.cluster_scope not in SCOPES:
        _fail("cluster_scope", f"must be one of {', '.join(SCOPES)}")
    if spec.normalization not in NORMALIZATIONS:
        _fail("normalization", f"must be one of {', '.join(NORMALIZATIONS)}")
    if not isinstance(spec.threads, int) or spec.threads < 1:
        _fail("threads", "must be an integer >= 1")
    if not isinstance(spec.realization, int) or spec.realization < 0:
        _fail("realization", "must be a non-negative integer")
    if spec.threshold is not None and not spec.threshold > 0:
        _fail("threshold", "must be > 0")
    if not spec.epsilon >= 0:
        _fail("epsilon", "must be >= 0")
    m = resolve_measure(spec)
    if spec.command in NEEDS_MEASURE and m is None:
        _fail("measure", f"{spec.command} needs --measure or --p")
    if spec.command == "multiplicity" and not m.is_bernoulli:
        _fail("measure", "multiplicity needs a Bernoulli measure p*delta_0 + (1-p)*delta_inf")
    if spec.command == "wegner":
        for name in ("a", "b", "delta"):
            if getattr(spec, name) is None:
                _fail(name, "required by wegner")
        if not spec.a < spec.b:
            _fail("a", "need a < b")
        if not spec.delta > 0:
            _fail("delta", "must be > 0")
        if not spec.intervals:
            _fail("intervals", "wegner needs at least one interval")
        for iv in spec.intervals:
            if len(iv) != 2 or not iv[0] <= iv[1]:
                _fail("intervals", f"each interval needs lo <= hi, got {iv}")
    if spec.command == "lifshitz" and not spec.offsets:
        _fail("offsets", "lifshitz needs --offsets")
    grid = _parse_grid(spec.grid) if spec.grid is not None else None
    if spec.command == "ids" and grid is None:
        grid = _default_grid(m, spec.d)
    return m, grid


def _default_grid(m: MeasureSpec, d: int) -> np.ndarray:
    sigma = predicted_spectrum(m, d)
    lo, hi = (sigma[0][0], sigma[-1][1]) if sigma else (-2.0 * d, 2.0 * d)
    return np.linspace(lo - 0.5, hi + 0.5, 201)


# --- output helpers ------------------------------------------------------------

def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([c if isinstance(c, str) else _num(c) for c in r])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(x, np.bool_):
        return bool(x)
    return x


GNUPLOT = {
    "ids": "set key left\nplot for [L in Ls] '{csv}' using (column('L')==L ? $2 : 1/0):3 with lines title sprintf('L=%d', L)\n",
    "lifshitz": "set logscale xy\nplot '{csv}' using 1:2 with linespoints title 'N(min Sigma + s)'\n",
    "continuity": "set logscale xy\nplot '{csv}' using 1:2 with linespoints title 'max jump'\n",
    "spectrum": "plot '{csv}' using 1:2 with points title 'eigenvalues'\n",
    "jumps": "plot '{csv}' using 1:2:3 with yerrorbars title 'jump size'\n",
    "wegner": "plot '{csv}' using 0:8 with linespoints title 'slack lhs/rhs'\n",
    "support": "plot '{csv}' using 1:4 with linespoints title 'min', '' using 1:5 with linespoints title 'max'\n",
    "multiplicity": "plot '{csv}' using 2:($3-$4) with points title 'observed - bound'\n",
    "catalogue": "plot '{csv}' using 1:5 with impulses title 'total multiplicity'\n",
    "animals": "set style fill solid\nplot '{csv}' using 2:(1) smooth frequency with boxes title 'animals per size'\n",
}


def _gnuplot(command: str, csv_name: str, Ls: list[int]) -> str | None:
    body = GNUPLOT.get(command)
    if body is None:
        return None
    head = "set datafile separator ','\nset key autotitle columnhead\n"
    if command == "ids":
        head += "Ls = '" + " ".join(str(L) for L in Ls) + "'\n"
    return head + body.format(csv=csv_name)


# --- command implementations --------------------------------------------------

def _catalogue(spec: RunSpec, shift: float = 0.0) -> AnimalCatalogue:
    if spec.catalogue:
        try:
            text = Path(spec.catalogue).read_text()
        except OSError as exc:
            _fail("catalogue", f"cannot read {spec.catalogue!r} ({exc.strerror})")
        try:
            cat = AnimalCatalogue.from_json(text)
        except json.JSONDecodeError as exc:
            _fail("catalogue", f"malformed JSON ({exc})")
        if cat.d != spec.d:
            _fail("catalogue", f"catalogue is for d={cat.d}, run has d={spec.d}")
        return cat
    return build_catalogue(enumerate_animals(spec.d, spec.n_max), shift)


def cmd_animals(spec, m, grid):
    animals = enumerate_animals(spec.d, spec.n_max)
    rows = [(i, a.size, a.boundary_size, ";".join(" ".join(map(str, s)) for s in a.sites))
            for i, a in enumerate(animals)]
    counts = {k: sum(1 for a in animals if a.size == k) for k in range(1, spec.n_max + 1)}
    return _csv(["id", "size", "boundary_size", "sites"], rows), {"count": len(animals), "by_size": counts}, {}


def cmd_catalogue(spec, m, grid):
    cat = _catalogue(spec, spec.shift)
    rows = []
    uncertified = 0
    for e in cat.entries:
        try:
            cert = poly_str(verify_algebraic_integer(e, cat).charpoly)
        except ResourceError:  # every source animal is too large: floating value only
            cert = ""
            uncertified += 1
        rows.append((e.value, poly_str(e.factor), e.root_index, len(e.sources),
                     sum(k for _, k in e.sources), e.close_distinct, cert))
    header = ["value", "minimal_poly", "root_index", "n_animals", "total_multiplicity", "close_distinct",
              "certificate_charpoly"]
    return _csv(header, rows), {"n_values": len(cat.entries), "n_animals": len(cat.animals),
                                 "n_uncertified": uncertified}, \
        {"animal_catalogue.json": cat.to_json() + "\n"}


def cmd_ids(spec, m, grid):
    Ls = ([spec.L] if spec.L is not None else []) + list(spec.L_list or [])
    res = estimate_ids(spec.d, Ls, m, grid, spec.n_realizations, spec.seed, spec.variant, spec.cluster_scope,
                       spec.normalization, spec.threads, spec.periodic, spec.allow_odd_L)
    rows = []
    for L in Ls:
        r = res[L]
        for E, mu, sd in zip(r.grid, r.mean, r.std):
            rows.append((L, E, mu, sd, r.n))
    return _csv(["L", "E", "N_mean", "N_std", "n_realizations"], rows), {"L": Ls, "n_grid": len(grid)}, {}


def cmd_jumps(spec, m, grid):
    shift = spec.shift
    cat = _catalogue(spec, shift)
    sample = collect_eigenvalues(spec.d, spec.L, m, spec.n_realizations, spec.seed, spec.variant,
                                 spec.cluster_scope, spec.normalization, spec.threads, spec.periodic)
    p = m.retention if m.is_bernoulli else None
    rep = detect_jumps(sample, spec.threshold, cat, p)
    rows = [(j.E, j.size, j.stderr, j.count, j.matched, j.predicted, j.n_max,
             "matched" if j.matched is not None else "uncatalogued") for j in rep.jumps]
    header = ["E", "size", "stderr", "count", "matched", "predicted", "n_max", "status"]
    return _csv(header, rows), {"n_jumps": len(rep.jumps), "n_uncatalogued": len(rep.uncatalogued)}, {}


def cmd_wegner(spec, m, grid):
    rows = wegner_experiment(spec.d, spec.L, m, spec.a, spec.b, spec.delta,
                             [tuple(iv) for iv in spec.intervals], spec.n_realizations, spec.seed, spec.threads)
    out = [(r.lo, r.hi, r.distance, r.lhs, r.lhs_stderr, r.rhs, r.constant, r.slack, r.violation) for r in rows]
    header = ["lo", "hi", "distance", "lhs", "lhs_stderr", "rhs", "constant", "slack", "violation"]
    return _csv(header, out), {"constant": rows[0].constant, "violations": sum(r.violation for r in rows)}, {}


def cmd_support(spec, m, grid):
    Ls = ([spec.L] if spec.L is not None else []) + list(spec.L_list or [])
    rep = support_check(spec.d, m, Ls, spec.n_realizations, spec.epsilon, spec.seed, spec.threads)
    rows = [(r.L, r.n_eigenvalues, r.min_eig, r.max_eig, r.frac_outside, r.dist_min, r.dist_max) for r in rep.rows]
    header = ["L", "n_eigenvalues", "min_eig", "max_eig", "frac_outside", "dist_min", "dist_max"]
    return _csv(header, rows), {"predicted_sigma": rep.predicted, "epsilon": rep.epsilon}, {}


def cmd_continuity(spec, m, grid):
    Ls = ([spec.L] if spec.L is not None else []) + list(spec.L_list or [])
    rows = continuity_check(spec.d, m, Ls, spec.n_realizations, spec.seed, normalization=spec.normalization,
                            threads=spec.threads)
    jumps = [r.max_jump for r in rows]
    summary = {"strictly_decreasing": all(a > b for a, b in zip(jumps, jumps[1:]))}
    return _csv(["L", "max_jump", "max_jump_worst"], [(r.L, r.max_jump, r.max_jump_worst) for r in rows]), summary, {}


def cmd_lifshitz(spec, m, grid):
    fit = lifshitz_probe(spec.d, m, spec.offsets, spec.L, spec.n_realizations, spec.seed, spec.window,
                         spec.normalization, spec.threads)
    summary = {"kappa": fit.kappa, "log_c": fit.log_c, "power_exponent": fit.power_exponent,
               "rss_lifshitz": fit.rss_lifshitz, "rss_power": fit.rss_power, "lifshitz": fit.lifshitz,
               "bottom": fit.bottom, "excluded_offsets": fit.excluded}
    return _csv(["s", "N"], zip(fit.offsets, fit.ids)), summary, {}


def cmd_spectrum(spec, m, grid):
    box = Box(spec.d, spec.L, periodic=spec.periodic, allow_odd=spec.allow_odd_L)
    cfg = generate_config(box, m, spec.seed, spec.realization)
    lab = label_clusters(cfg)
    subset = None if spec.cluster_scope == "all" else lab.mask(spec.cluster_scope)
    H = assemble(cfg, spec.variant, subset)
    w = eigen_sym(H).eigenvalues
    extra = {"config.csv": config_to_csv(cfg, lab), "matrix.mtx": H.to_coordinate_text()}
    summary = {"n": H.n, "n_clusters": lab.n_clusters,
               "largest_cluster": int(lab.sizes[lab.largest]) if lab.largest >= 0 else 0}
    return _csv(["index", "eigenvalue"], enumerate(w)), summary, extra


def cmd_multiplicity(spec, m, grid):
    cat = _catalogue(spec)
    box = Box(spec.d, spec.L)

    def one(r: int):
        cfg = generate_config(box, m, spec.seed, r)
        return multiplicity_table(cfg, label_clusters(cfg), cat, variant="adjacency")

    tables = pmap(one, range(spec.n_realizations), spec.threads)
    rows = [(r, E, obs, bound, obs >= bound) for r, t in enumerate(tables) for E, obs, bound in t]
    summary = {"violations": sum(1 for row in rows if not row[-1]), "checks": len(rows)}
    return _csv(["realization", "E", "observed", "bound", "holds"], rows), summary, {}


HANDLERS = {
    "animals": cmd_animals, "catalogue": cmd_catalogue, "ids": cmd_ids, "jumps": cmd_jumps,
    "wegner": cmd_wegner, "support": cmd_support, "continuity": cmd_continuity, "lifshitz": cmd_lifshitz,
    "spectrum": cmd_spectrum, "multiplicity": cmd_multiplicity,
}


def run(spec: RunSpec) -> dict:
    """Validate, execute and write outputs; returns the sidecar dictionary."""
    m, grid = validate(spec)
    out = Path(spec.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        _fail("out", f"cannot create {spec.out!r} ({exc.strerror})")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore" if spec.allow_odd_L else "default")
        text, summary, extra = HANDLERS[spec.command](spec, m, grid)
    csv_name = f"{spec.command}.csv"
    (out / csv_name).write_text(text)
    files = [csv_name]
    for name, body in extra.items():
        (out / name).write_text(body)
        files.append(name)
    if spec.gnuplot:
        Ls = ([spec.L] if spec.L is not None else []) + list(spec.L_list or [])
        script = _gnuplot(spec.command, csv_name, Ls)
        if script is not None:
            (out / f"{spec.command}.gp").write_text(script)
            files.append(f"{spec.command}.gp")
    sidecar = {"runspec": _jsonable(spec.to_dict()), "code_version": __version__,
               "files": files, "summary": _jsonable(summary)}
    (out / f"{spec.command}.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return sidecar


# --- argument parsing -----------------------------------------------------------

def _add_run_flags(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--spec", help="JSON run specification; flags override its fields")
    p.add_argument("--d", type=int, default=S)
    p.add_argument("--L", type=int, default=S)
    p.add_argument("--L-list", dest="L_list", default=S, help="comma-separated box sizes")
    p.add_argument("--measure", default=S, help="measure JSON file (or inline JSON object)")
    p.add_argument("--p", type=float, default=S, help="Bernoulli shorthand p*delta_0 + (1-p)*delta_inf")
    p.add_argument("--n-realizations", dest="n_realizations", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--grid", default=S, help="lo:hi:step")
    p.add_argument("--n-max", dest="n_max", type=int, default=S)
    p.add_argument("--variant", default=S)
    p.add_argument("--cluster-scope", dest="cluster_scope", default=S)
    p.add_argument("--normalization", default=S, choices=NORMALIZATIONS)
    p.add_argument("--threads", type=int, default=S, help="worker threads (env PERCOSPEC_THREADS)")
    p.add_argument("--out", default=S)
    p.add_argument("--a", type=float, default=S)
    p.add_argument("--b", type=float, default=S)
    p.add_argument("--delta", type=float, default=S)
    p.add_argument("--intervals", default=S, help="lo:hi[,lo:hi...]")
    p.add_argument("--threshold", type=float, default=S)
    p.add_argument("--epsilon", type=float, default=S)
    p.add_argument("--offsets", default=S, help="comma-separated energy offsets above min Sigma")
    p.add_argument("--window", type=float, default=S)
    p.add_argument("--shift", type=float, default=S, help="catalogue potential shift")
    p.add_argument("--realization", type=int, default=S)
    p.add_argument("--catalogue", default=S, help="catalogue JSON written by 'run catalogue'")
    p.add_argument("--periodic", action="store_true", default=S)
    p.add_argument("--allow-odd-L", dest="allow_odd_L", action="store_true", default=S)
    p.add_argument("--gnuplot", action="store_true", default=S)


class _Parser(argparse.ArgumentParser):
    """Usage errors become validation errors so they are reported as JSON."""

    def error(self, message):
        raise ValidationError(f"arguments: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="percospec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"percospec {__version__}")
    sub = parser.add_subparsers(dest="action", required=True)
    _add_run_flags(sub.add_parser("run", help="run one experiment"))
    v = sub.add_parser("verify", help="run the self-check suite")
    v.add_argument("suite", choices=("fast", "full"))
    v.add_argument("--catalogue", help="catalogue JSON to integrity-check")
    v.add_argument("--out", help="directory for verify-<suite>.csv/json")
    return parser


def _load_measure(value) -> dict:
    if isinstance(value, dict):
        return value
    text = value.strip()
    if not text.startswith("{"):
        try:
            text = Path(value).read_text()
        except OSError as exc:
            _fail("measure", f"cannot read {value!r} ({exc.strerror})")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        _fail("measure", f"malformed JSON ({exc})")


def spec_from_args(ns: argparse.Namespace, environ=os.environ) -> RunSpec:
    values: dict = {}
    if getattr(ns, "spec", None):
        try:
            values = json.loads(Path(ns.spec).read_text())
        except OSError as exc:
            _fail("spec", f"cannot read {ns.spec!r} ({exc.strerror})")
        except json.JSONDecodeError as exc:
            _fail("spec", f"malformed JSON ({exc})")
        if not isinstance(values, dict):
            _fail("spec", "must be a JSON object")
    flags = {k: v for k, v in vars(ns).items() if k not in ("action", "spec")}
    if "L_list" in flags:
        flags["L_list"] = _parse_list(flags["L_list"], "L_list", int)
    if "offsets" in flags:
        flags["offsets"] = _parse_list(flags["offsets"], "offsets")
    if "intervals" in flags:
        flags["intervals"] = _parse_intervals(flags["intervals"])
    values.update(flags)
    if "threads" not in values and environ.get("PERCOSPEC_THREADS"):
        try:
            values["threads"] = int(environ["PERCOSPEC_THREADS"])
        except ValueError:
            _fail("threads", f"PERCOSPEC_THREADS={environ['PERCOSPEC_THREADS']!r} is not an integer")
    known = {f.name for f in fields(RunSpec)} - {"extra"}
    unknown = sorted(set(values) - known)
    if unknown:
        _fail(unknown[0], "unknown run-specification field")
    if "measure" in values and values["measure"] is not None:
        values["measure"] = _load_measure(values["measure"])
    if "command" not in values:
        _fail("command", "missing")
    return RunSpec(**values)


def _error(exc: BaseException, code: int) -> int:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}), file=sys.stderr)
    return code


def _verify(ns) -> int:
    from .verify import fast_checks, full_checks, report_csv, report_json

    cat = Path(ns.catalogue) if ns.catalogue else None
    results = fast_checks(cat) if ns.suite == "fast" else full_checks(cat)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    if ns.out:
        out = Path(ns.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"verify-{ns.suite}.csv").write_text(report_csv(results))
        (out / f"verify-{ns.suite}.json").write_text(report_json(results, ns.suite))
    return EXIT_OK if ok else EXIT_VALIDATION


_NEGATIVE = re.compile(r"^-\.?\d")


def _glue_negative_values(argv: list[str]) -> list[str]:
    """Turn ``--grid -4:4:0.1`` into ``--grid=-4:4:0.1`` so argparse accepts it."""
    out: list[str] = []
    it = iter(range(len(argv)))
    for i in it:
        tok = argv[i]
        if tok.startswith("--") and "=" not in tok and i + 1 < len(argv) and _NEGATIVE.match(argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            next(it, None)
        else:
            out.append(tok)
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = _glue_negative_values(sys.argv[1:] if argv is None else list(argv))
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # --help and --version
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    except ValidationError as exc:
        return _error(exc, EXIT_VALIDATION)
    try:
        if ns.action == "verify":
            return _verify(ns)
        spec = spec_from_args(ns)
        sidecar = run(spec)
        print(json.dumps({"status": "ok", "files": sidecar["files"]}))
        return EXIT_OK
    except (ValidationError, ValueError, TypeError) as exc:
        return _error(exc, EXIT_VALIDATION)
    except (ResourceError, PercospecError, RuntimeError, MemoryError, OSError, ArithmeticError) as exc:
        return _error(exc, EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())
