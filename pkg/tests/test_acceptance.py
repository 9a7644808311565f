"""Acceptance criteria C1-C12, each at its stated tolerance.

Every test prints one pass/fail line, also collected into the terminal summary.
"""
import time

import pytest

from conftest import ACCEPTANCE_LINES
from percospec import verify
from percospec.cli import main
from percospec.verify import CheckResult, report_csv, report_json

pytestmark = pytest.mark.slow


def record(result: CheckResult, elapsed: float, budget: float) -> None:
    on_time = elapsed <= budget
    line = result.line() + f" [{elapsed:.1f}s / budget {budget:.0f}s]"
    if not on_time:
        line = line.replace("[PASS]", "[FAIL]", 1) + " over budget"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert result.passed, result.line()
    assert on_time, f"{result.name}: {elapsed:.1f}s exceeds {budget:.0f}s"


def timed(fn, *args):
    t = time.perf_counter()
    res = fn(*args)
    return res, time.perf_counter() - t


@pytest.fixture(scope="module")
def catalogue_d2_8():
    return verify.catalogue_d2_8()


def test_c01_animal_enumeration_oracle():
    record(*timed(verify.crit_animal_counts), 10)


def test_c02_catalogue_truncation_exactness():
    record(*timed(verify.crit_catalogue_exact), 1)


def test_c03_1d_ids_oracle():
    record(*timed(verify.crit_1d_ids_oracle), 60)


def test_c04_jump_reproduction(catalogue_d2_8):
    record(*timed(verify.crit_jump_reproduction, catalogue_d2_8), 15 * 60)


def test_c05_largest_cluster_jumps(catalogue_d2_8):
    record(*timed(verify.crit_largest_cluster_jumps, catalogue_d2_8), 15 * 60)


def test_c06_wegner_bound():
    record(*timed(verify.crit_wegner), 10 * 60)


def test_c07_spectrum_support():
    record(*timed(verify.crit_support), 10 * 60)


def test_c08_continuity():
    record(*timed(verify.crit_continuity), 10 * 60)


def test_c09_multiplicity_lower_bound():
    record(*timed(verify.crit_multiplicity), 10 * 60)


def test_c10_linear_algebra_invariants():
    record(*timed(verify.crit_linear_algebra), 5 * 60)


def test_c11_lifshitz_probe():
    record(*timed(verify.crit_lifshitz), 30 * 60)


def _reproducibility(tmp_path) -> CheckResult:
    fast = [verify.fast_checks() for _ in range(2)]
    same_verify = report_csv(fast[0]) == report_csv(fast[1]) \
        and report_json(fast[0], "fast") == report_json(fast[1], "fast")
    csvs = []
    for threads in (1, 8):
        out = tmp_path / f"t{threads}"
        code = main(["run", "ids", "--d", "2", "--L", "20", "--p", "0.6", "--n-realizations", "16",
                     "--grid", "-4:4:0.05", "--threads", str(threads), "--out", str(out)])
        csvs.append((out / "ids.csv").read_bytes() if code == 0 else b"")
    same_ids = csvs[0] == csvs[1] and csvs[0] != b""
    return CheckResult("C12 reproducibility", f"verify fast identical={same_verify}, "
                       f"IDS threads 1 vs 8 identical={same_ids}", "byte-identical", same_verify and same_ids)


def test_c12_reproducibility(tmp_path):
    record(*timed(_reproducibility, tmp_path), 10 * 60)
