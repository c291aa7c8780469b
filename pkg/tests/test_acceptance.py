"""End-to-end acceptance runs at full scale.

Each test runs one criterion at its stated size and tolerance, appends a
PASS/FAIL line to ``RESULTS`` (printed in the terminal summary by conftest)
and then asserts.  Expect several minutes of wall time.
"""

import json
import math

import pytest

from weylpersist.cli import main
from weylpersist.errors import InsufficientData
from weylpersist.grids import GridSpec
from weylpersist.kernels import KernelSpec
from weylpersist.sampler import RngStream, WeylModel, sample_stationary_signs, sample_weyl_signs

pytestmark = pytest.mark.slow

RESULTS = []
N_LIST = "64,100,196,256,400"
TRIALS = "1000000"


def report(number, title, ok, detail):
    RESULTS.append(f"{'PASS' if ok else 'FAIL'}  criterion {number}: {title}  ({detail})")
    return ok


def run_cli(tmp, name, argv):
    out = tmp / f"{name}.jsonl"
    code = main(argv + ["--out", str(out)])
    lines = out.read_text().splitlines()
    recs = [json.loads(line) for line in lines]
    return code, recs, lines[1:]


def of_type(recs, kind):
    return [r for r in recs if r["type"] == kind]


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="module")
def b_run(workdir):
    argv = ["estimate-b", "--kernel", "gauss", "--T", "10,15,20,25", "--step", "0.05", "--trials", TRIALS]
    return run_cli(workdir, "b", argv)


@pytest.fixture(scope="module")
def b_hat(b_run):
    code, recs, _ = b_run
    assert code == 0, "reference run failed"
    return of_type(recs, "summary")[0]["value"]


@pytest.fixture(scope="module")
def half_run(workdir):
    argv = ["weyl-exponent", "--side", "half", "--n", N_LIST, "--step", "0.05", "--trials", TRIALS, "--refine"]
    return run_cli(workdir, "half", argv)


@pytest.fixture(scope="module")
def decompose_run(workdir):
    argv = ["decompose", "--n", "64,100,196", "--step", "0.05", "--trials", TRIALS, "--workers", "1"]
    return run_cli(workdir, "decompose", argv)


def test_reference_exponent(b_run):
    code, recs, _ = b_run
    assert code == 0
    header = recs[0]
    summary = of_type(recs, "summary")[0]
    ests = of_type(recs, "estimate")
    rates = summary["rates"]
    # rate CI half-width from the Wilson interval in log space
    widths = [(math.log(e["ci"][1]) - math.log(e["ci"][0])) / 2 / e["scale"] for e in ests]
    positive = all(r is not None and r > 0 for r in rates)
    in_range = positive and all(0.1 <= r <= 0.3 for r in rates)
    nonincreasing = positive and all(
        rates[k + 1] <= rates[k] + 3 * math.hypot(widths[k], widths[k + 1]) for k in range(len(rates) - 1)
    )
    tight = summary["stderr"] < 0.01
    fast = header["duration_s"] < 15 * 60
    ok = positive and in_range and nonincreasing and tight and fast
    detail = (
        f"b_hat={summary['value']:.4f}+/-{summary['stderr']:.4f}, rates="
        + ",".join(f"{r:.4f}" for r in rates)
        + f", in [0.1,0.3]={in_range}, nonincreasing={nonincreasing}, {header['duration_s']:.0f}s"
    )
    assert report(1, "reference exponent b from the Gaussian-kernel process", ok, detail), detail


def test_half_line_exponent(half_run, b_hat):
    code, recs, _ = half_run
    assert code == 0
    coarse, fine = of_type(recs, "fit")
    refinement = of_type(recs, "refinement")[0]
    rel = abs(coarse["slope"] + b_hat) / b_hat
    ok = rel <= 0.15 and refinement["pass"] and recs[0]["duration_s"] < 3600
    detail = (
        f"slope={coarse['slope']:.4f}+/-{coarse['stderr']:.4f}, rel. gap to -b_hat={rel:.3f}, "
        f"step/2 slope={fine['slope']:.4f}, refinement agrees={refinement['pass']}"
    )
    assert report(2, "half-line Weyl exponent equals -b", ok, detail), detail


def test_whole_line_exponent(workdir, half_run, b_hat):
    argv = ["weyl-exponent", "--side", "whole", "--n", N_LIST, "--step", "0.05", "--trials", TRIALS]
    code, recs, _ = run_cli(workdir, "whole", argv)
    counts = ",".join(str(e["successes"]) for e in of_type(recs, "estimate"))
    if code == InsufficientData.exit_code:
        detail = f"too few surviving paths per n: {counts} of {TRIALS}"
        report(3, "whole-line Weyl exponent equals -2b", False, detail)
        pytest.fail(detail)
    assert code == 0
    whole = of_type(recs, "fit")[0]
    half = of_type(half_run[1], "fit")[0]
    rel = abs(whole["slope"] + 2 * b_hat) / (2 * b_hat)
    ratio = whole["slope"] / half["slope"]
    ok = rel <= 0.15 and 1.8 <= ratio <= 2.2
    detail = f"slope={whole['slope']:.4f}, rel. gap to -2b_hat={rel:.3f}, ratio={ratio:.3f}, successes {counts}"
    assert report(3, "whole-line Weyl exponent equals -2b", ok, detail), detail


def test_edge_pieces_negligible(decompose_run, b_hat):
    code, recs, _ = decompose_run
    assert code == 0
    decs = of_type(recs, "decomposition")
    nlb = [d["neg_log_b_over_root_n"] for d in decs]
    nlc = [d["neg_log_c_over_root_n"] for d in decs]
    small = all(v < 0.25 * b_hat for v in nlb + nlc)
    decreasing = all(s[k + 1] < s[k] for s in (nlb, nlc) for k in range(len(s) - 1))
    ok = small and decreasing
    detail = (
        "-log B/sqrt(n)=" + ",".join(f"{v:.3f}" for v in nlb)
        + "; -log C/sqrt(n)=" + ",".join(f"{v:.3f}" for v in nlc)
        + f"; bound 0.25*b_hat={0.25 * b_hat:.3f}; decreasing={decreasing}"
    )
    assert report(4, "edge pieces negligible on the sqrt(n) scale", ok, detail), detail


def test_slepian_consistency(decompose_run):
    code, recs, _ = decompose_run
    assert code == 0
    decs = of_type(recs, "decomposition")
    ok = len(decs) == 3 and all(d["full"] >= d["product"] - 3 * d["combined_halfwidth"] for d in decs)
    detail = ", ".join(f"n={d['params']['n']}: full={d['full']:.4g} >= product={d['product']:.4g}" for d in decs)
    assert report(5, "full-interval probability dominates the product of pieces", ok, detail), detail


def test_bounds_suite(workdir):
    code, recs, _ = run_cli(workdir, "bounds", ["verify-bounds"])
    reports = of_type(recs, "report")
    failed = [r["name"] for r in reports if not r["pass"]]
    ok = code == 0 and not failed and len(reports) == 11 and recs[0]["duration_s"] < 300
    detail = f"{len(reports) - len(failed)}/{len(reports)} reports pass in {recs[0]['duration_s']:.0f}s"
    if failed:
        detail += f", failed: {', '.join(failed)}"
    assert report(6, "analytic bounds suite", ok, detail), detail


def orthant(rho):
    return 0.25 + math.asin(rho) / (2 * math.pi)


def within_ci(batch, p):
    half = 1.96 * math.sqrt(p * (1 - p) / batch.trials)
    return abs(batch.ratio - p) <= 3 * half


def test_small_instance_oracles():
    trials = 1_000_000
    gauss = KernelSpec.gauss()
    cases = [
        # exp(-40^2/2) underflows to an exact zero correlation
        ("rho=0", sample_stationary_signs(gauss, 40.0, 40.0, trials, RngStream(101)), orthant(0.0)),
        ("rho=exp(-1/2)", sample_stationary_signs(gauss, 1.0, 1.0, trials, RngStream(102)), orthant(math.exp(-0.5))),
        ("rho=0.632456", sample_weyl_signs(WeylModel(2), GridSpec(0.0, 1.0, 1.0), trials, RngStream(103)),
         orthant(1 / math.sqrt(2.5))),
        ("single point, stationary", sample_stationary_signs(gauss, 0.0, 0.05, trials, RngStream(104)), 0.5),
        ("single point, Weyl n=0", sample_weyl_signs(WeylModel(0), GridSpec(0.0, 0.0, 1.0), trials, RngStream(105)),
         0.5),
    ]
    assert [b.grid.count for _, b, _ in cases] == [2, 2, 2, 1, 1]
    checks = [(name, b.ratio, p, within_ci(b, p)) for name, b, p in cases]
    ok = all(c[3] for c in checks)
    detail = "; ".join(f"{name}: {got:.5f} vs {want:.5f}" for name, got, want, _ in checks)
    assert report(7, "two-point and single-point orthant oracles", ok, detail), detail


def test_determinism_across_workers(workdir, decompose_run):
    argv = ["decompose", "--n", "64,100,196", "--step", "0.05", "--trials", TRIALS, "--workers", "4"]
    code, _, lines = run_cli(workdir, "decompose_w4", argv)
    ok = code == 0 and lines == decompose_run[2]
    detail = f"{len(lines)} payload lines, workers 1 vs 4, identical={lines == decompose_run[2]}"
    assert report(8, "byte-identical payloads at any worker count", ok, detail), detail
