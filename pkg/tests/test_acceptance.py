"""Exit criteria for the package, one test per criterion.

Each test prints a single PASS/FAIL line (visible with ``pytest -s`` or in
the terminal summary) and asserts at the pinned tolerance.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

from twoline_parking.analysis import check_factorization, compare_with_closed_form, compare_with_ode
from twoline_parking.cli import main
from twoline_parking.core import FIRST, ModelVariant, first_line_bit, transition_rate
from twoline_parking.ode import OdeSpec, centered_difference, closed_form_fsum, integrate
from twoline_parking.simulator import SimConfig, simulate

NS, SC = ModelVariant.NO_SCREENING, ModelVariant.SCREENING
FIRST_LINE_EXACT = (1 - math.exp(-2)) / 2

RESULTS = []


def record(criterion, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion:>2}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def ode_runs(tmp_path_factory):
    """cmd_ode for both models; returns (summary, wall seconds, csv path)."""
    root = tmp_path_factory.mktemp("ode")
    runs = {}
    for model in ModelVariant:
        out = root / f"{model.value}.csv"
        start = time.perf_counter()
        assert main(["ode", "--model", model.value, "--t-max", "30", "--out", str(out)]) == 0
        elapsed = time.perf_counter() - start
        runs[model] = (json.loads(out.with_suffix(".json").read_text())["summary"], elapsed, out)
    return runs


@pytest.fixture(scope="module")
def trajectories():
    return {m: integrate(OdeSpec(m, 30.0, 1e-3)) for m in ModelVariant}


def test_01_no_screening_first_line_limit(ode_runs):
    summary, elapsed, _ = ode_runs[NS]
    err = abs(summary["line1"] - FIRST_LINE_EXACT)
    record(1, err <= 1e-6 and elapsed < 5, f"line1={summary['line1']:.10f} |err|={err:.2e} (<=1e-6), {elapsed:.2f}s (<5s)")


def test_02_no_screening_second_line_limit(ode_runs):
    summary, _, _ = ode_runs[NS]
    e2 = abs(summary["line2"] - 0.434868)
    ei = abs(summary["increase_factor"] - 1.006)
    record(2, e2 <= 2e-6 and ei <= 1e-3,
           f"line2={summary['line2']:.8f} |err|={e2:.2e} (<=2e-6), I={summary['increase_factor']:.6f} |err|={ei:.2e} (<=1e-3)")


def test_03_screening_limits(ode_runs):
    summary, _, _ = ode_runs[SC]
    e1 = abs(summary["line1"] - 0.366475)
    e2 = abs(summary["line2"] - 0.433896)
    ei = abs(summary["increase_factor"] - 1.184)
    record(3, e1 <= 2e-6 and e2 <= 2e-6 and ei <= 1e-3,
           f"line1={summary['line1']:.8f} ({e1:.1e}), line2={summary['line2']:.8f} ({e2:.1e}), I={summary['increase_factor']:.6f} ({ei:.1e})")


def test_04_fsum_identity(trajectories):
    tr = trajectories[NS]
    dev = max(abs(a + b - closed_form_fsum(t)) for t, a, b in zip(tr.times, tr.f0, tr.f2))
    record(4, dev <= 1e-8, f"max|f0+f2-exp(e^-t-1)| over t in [0,30] = {dev:.2e} (<=1e-8)")


def test_05_r_is_derivative_of_f3(trajectories):
    devs = {}
    for model, tr in trajectories.items():
        devs[model] = float(np.max(np.abs(centered_difference(tr.f3, tr.times) - tr.r[1:-1])))
    ok = all(d <= 1e-5 for d in devs.values())
    record(5, ok, ", ".join(f"{m.value}: {d:.2e}" for m, d in devs.items()) + " (<=1e-5)")


def test_06_conservation_and_range(trajectories):
    cons = max(float(np.max(np.abs(tr.states[:, :4].sum(axis=1) - 1))) for tr in trajectories.values())
    lo = min(float(tr.states.min()) for tr in trajectories.values())
    hi = max(float(tr.states.max()) for tr in trajectories.values())
    ok = cons <= 1e-10 and lo >= -1e-10 and hi <= 1 + 1e-10
    record(6, ok, f"max|sum D - 1|={cons:.1e} (<=1e-10), components in [{lo:.2e}, {hi:.12f}]")


def test_07_oracle_gate(tmp_path):
    start = time.perf_counter()
    details = []
    ok = True
    for model in ModelVariant:
        out = tmp_path / f"gate_{model.value}.json"
        code = main(["compare", "--reference", "oracle", "--model", model.value, "--sites", "6",
                     "--replicas", "100000", "--times", "0.5,1,2,5",
                     "--patterns", "0,1,0", "0,0,0", "1,0,1", "--z-threshold", "4", "--out", str(out)])
        payload = json.loads(out.read_text())
        reports = payload["reports"]
        observables = {r["observable"] for r in reports}
        expected = {"D0", "D1", "D2", "D3", "D(0,1,0)", "D(0,0,0)", "D(1,0,1)"}
        worst = max(abs(r["z_score"]) for r in reports if r["z_score"] is not None)
        replicas = min(r["estimate"]["replicas"] for r in reports)
        ok &= code == 0 and observables == expected and len(reports) == 28 and replicas >= 100_000
        details.append(f"{model.value}: exit {code}, {len(reports)} checks, max|z|={worst:.2f}")
    elapsed = time.perf_counter() - start
    record(7, ok and elapsed < 300, "; ".join(details) + f"; {elapsed:.0f}s (<300s)")


def test_08_bulk_agreement_with_ode(trajectories):
    start = time.perf_counter()
    details = []
    ok = True
    for model in ModelVariant:
        sim = simulate(SimConfig(10_000, 15.0, model, master_seed=2024, replicas=100, sample_times=(15.0,)))
        # |z| <= 3 or |diff| <= 2e-3  <=>  |diff| <= max(3 stderr, 2e-3)
        reports = [r for r in compare_with_ode(sim, trajectories[model], z_threshold=3, abs_floor=2e-3)
                   if r.observable in ("line1", "line2")]
        ok &= len(reports) == 2 and all(r.passed for r in reports)
        for r in reports:
            details.append(f"{model.value} {r.observable}: {r.estimate.mean:.5f} vs {r.reference:.5f} "
                           f"(tol {max(3 * r.estimate.stderr, 2e-3):.1e})")
    elapsed = time.perf_counter() - start
    record(8, ok and elapsed < 120, "; ".join(details) + f"; {elapsed:.0f}s (<120s)")


def test_09_isolated_site_single_car():
    sim = simulate(SimConfig(200, 2.0, NS, master_seed=99, replicas=20_000, sample_times=(0.5, 1.0, 2.0), frozen_sites=(0, 2)))
    reports = compare_with_closed_form(sim, z_threshold=4, abs_floor=0.0)
    ok = len(reports) == 3 and all(r.passed for r in reports)
    record(9, ok, ", ".join(f"t={r.time:g}: {r.estimate.mean:.4f} vs t*e^-t={r.reference:.4f} z={r.z_score:+.2f}" for r in reports))


def test_10_factorization(trajectories):
    pairs = [(0, 0), (0, 1), (1, 0), (1, 1), (2, 2)]
    patterns = tuple((s, 0, t) for s, t in pairs)
    sim = simulate(SimConfig(10_000, 4.0, NS, master_seed=7, replicas=200, sample_times=(1.0, 2.0, 4.0),
                             frozen_sites=(0,), patterns=patterns))
    reports = check_factorization(sim, trajectories[NS], [1.0, 2.0, 4.0], pairs, z_threshold=4)
    worst = max(abs(r.z_score) for r in reports)
    ok = len(reports) == 15 and all(r.passed for r in reports)
    record(10, ok, f"{sum(r.passed for r in reports)}/15 pattern-time checks pass, max|z|={worst:.2f}")


def test_11_core_exhaustive():
    start = time.perf_counter()
    triples = list(itertools.product(range(4), repeat=3))
    ok = True
    for model in ModelVariant:
        for t in triples:
            rates = {s: transition_rate(model, s, t) for s in range(4)}
            ok &= rates[1] + rates[2] + rates[3] <= 1
            for s, rate in rates.items():
                ok &= transition_rate(SC, s, t) <= transition_rate(NS, s, t)
                if rate:
                    ok &= bin(s).count("1") > bin(t[1]).count("1")
            if rates[FIRST]:
                ok &= not first_line_bit(t[0]) and not first_line_bit(t[2])
    elapsed = time.perf_counter() - start
    record(11, ok and elapsed < 1, f"exclusivity, dominance, monotone occupancy, first-line safety over 64x2 triples; {elapsed * 1e3:.0f}ms")


def test_12_determinism(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)

    def run(argv, name):
        assert main(argv + ["--out", name]) == 0
        return (tmp_path / name).read_bytes()

    ode = [run(["ode", "--model", "screening", "--t-max", "30"], f"ode{k}.csv") for k in range(2)]
    orc = [run(["oracle", "--sites", "6", "--times", "1"], f"orc{k}.csv") for k in range(2)]
    sim_args = ["simulate", "--sites", "500", "--t-max", "5", "--replicas", "16", "--seed", "31337", "--patterns", "0,1,0"]
    sim = [run(sim_args, "sim0.csv"), run(sim_args, "sim1.csv"), run(sim_args + ["--jobs", "4"], "sim2.csv")]
    ok = ode[0] == ode[1] and orc[0] == orc[1] and sim[0] == sim[1] == sim[2]
    record(12, ok, "cmd_ode, cmd_oracle byte-identical; cmd_simulate byte-identical across reruns and --jobs 4")


def test_zz_summary():
    print("\nacceptance summary:\n" + "\n".join(RESULTS))
