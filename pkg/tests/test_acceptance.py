"""Acceptance criteria 1-9.

Each test runs its verification suite, prints one PASS/FAIL line and fails
if any check misses its tolerance or the run exceeds its time budget.
"""

import subprocess
import sys
import time
from pathlib import Path

import pytest

from pottscut.checks import CheckResult, run_suite

pytestmark = pytest.mark.slow

TESTS = Path(__file__).parent


def _report(capsys, number, title, results, elapsed, budget):
    ok = all(r.passed for r in results) and elapsed <= budget
    with capsys.disabled():
        print()
        for r in results:
            print("    " + r.line())
        print(f"{'PASS' if ok else 'FAIL'} criterion {number} ({title}): "
              f"{sum(r.passed for r in results)}/{len(results)} checks, {elapsed:.0f}s of {budget:.0f}s")
    assert all(r.passed for r in results), [r.line() for r in results if not r.passed]
    assert elapsed <= budget, f"criterion {number} took {elapsed:.0f}s, budget {budget:.0f}s"


def _run(capsys, number, title, suite, budget):
    t0 = time.perf_counter()
    results = run_suite(suite, seed=0)
    _report(capsys, number, title, results, time.perf_counter() - t0, budget)


def test_criterion_1_closed_forms(capsys):
    _run(capsys, 1, "closed-form identities", "closed-forms", 60)


def test_criterion_2_rpc_oracle(capsys):
    _run(capsys, 2, "cascade oracle", "rpc-oracle", 600)


def test_criterion_3_guerra_bound(capsys):
    _run(capsys, 3, "upper bound at desk scale", "guerra", 1200)


def test_criterion_4_ground_state_sandwich(capsys):
    _run(capsys, 4, "ground-state sandwich", "sandwich", 600)


def test_criterion_5_cut_oracle(capsys):
    _run(capsys, 5, "cut oracle", "cut-oracle", 300)


def test_criterion_6_coupling_bound(capsys):
    _run(capsys, 6, "coupling bound", "coupling", 900)


def test_criterion_7_internal_consistency(capsys):
    _run(capsys, 7, "max-cut correction vs prediction", "maxcut-prediction", 3600)


def test_criterion_8_surrogate(capsys):
    _run(capsys, 8, "surrogate consistency", "surrogate", 1800)


def test_criterion_9_invariants(capsys):
    t0 = time.perf_counter()
    results = run_suite("invariants", seed=0)
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           str(TESTS / "test_properties.py")], capture_output=True, text=True)
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()[-200:]
    results.append(CheckResult("property-test runner", proc.returncode == 0, float(proc.returncode), 0.0, tail))
    _report(capsys, 9, "invariant suites", results, time.perf_counter() - t0, 600)
