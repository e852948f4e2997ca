"""Acceptance criteria 1-11; each test prints one PASS/FAIL line."""

import csv
import itertools
import time
from fractions import Fraction

import numpy as np

from pgl import cli
from pgl.core import SeedSpec, make_bond_params, make_gen_params, sample_invariant_measures
from pgl.kernels import (bond_envelope_kernel, diagonal_flip,
                         generalized_envelope_kernel, kernel_equivalence_check, row_sums)
from pgl.polynomials import grid_axes, reproduce_thresholds
from pgl.pushforward import SMALL_BOX, sample_gen_points, verify_bound_lemmas, verify_identity_lemmas
from pgl.regimes import classify_generalized_grid
from pgl.simulator import duality_check, estimate_draw_probability, transform_equivalence_mc
from pgl.weights import VARIANTS, coefficient_sign_audit, perturbed_rhs, verify_sweep


def _rational_points(n, seed, dims, denominator=997):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        xs = [Fraction(int(v), denominator) for v in rng.integers(0, denominator + 1, size=dims)]
        if sum(xs[:2]) <= 1:
            out.append(xs)
    return out


def test_criterion_01_kernel_identity(acceptance):
    t = time.perf_counter()
    sums_exact = transform_exact = True
    for p, q, r in _rational_points(25, 1, 3):
        k = generalized_envelope_kernel(make_gen_params(p, q, r))
        sums_exact &= all(s == 1 for s in row_sums(k).values())
    worst = Fraction(0)
    for rp, sp in _rational_points(25, 2, 2):
        if sp == 1:
            continue
        b = make_bond_params(rp, sp)
        sums_exact &= all(s == 1 for s in row_sums(bond_envelope_kernel(b)).values())
        worst = max(worst, kernel_equivalence_check(b))
    transform_exact = worst == 0
    ok = acceptance(1, sums_exact and transform_exact, f"row sums exact={sums_exact}, worst transform gap={worst}",
                    time.perf_counter() - t, 1)
    assert ok


def test_criterion_02_pushforward_identities(acceptance):
    t = time.perf_counter()
    measures = sample_invariant_measures(20, 0, 5)
    worst, n = Fraction(0), 0
    for params in sample_gen_points(100, 0):
        for m in measures:
            for res in verify_identity_lemmas(params, m):
                worst = max(worst, abs(res.value))
                n += 1
    ok = acceptance(2, worst == 0 and n == 4000, f"{n} residuals, max |residual| = {worst}",
                    time.perf_counter() - t, 30)
    assert ok


def test_criterion_03_bound_lemmas(acceptance):
    t = time.perf_counter()
    measures = sample_invariant_measures(10, 0, 5)
    worst_margin, worst_partition, n = None, Fraction(0), 0
    for params in sample_gen_points(100, 0, SMALL_BOX):
        for m in measures:
            for res in verify_bound_lemmas(params, m):
                n += 1
                if res.kind == "residual":
                    worst_partition = max(worst_partition, abs(res.value))
                else:
                    worst_margin = res.value if worst_margin is None else max(worst_margin, res.value)
    ok = worst_margin <= 0 and worst_partition == 0
    ok = acceptance(3, ok, f"{n} checks, max margin = {float(worst_margin):.3e}, partition residual = {worst_partition}",
                    time.perf_counter() - t, 120)
    assert ok


def test_criterion_04_threshold_reproduction(acceptance):
    t = time.perf_counter()
    checks = reproduce_thresholds()
    bad = [f"{c.poly_id}: printed {float(c.constant)}, root in [{float(c.bracket.lo):.7f}, {float(c.bracket.hi):.7f}]"
           for c in checks if not c.passed]
    ok = acceptance(4, len(checks) == 16 and not bad, f"{16 - len(bad)}/16 within 1e-5; off: {bad or 'none'}",
                    time.perf_counter() - t, 5)
    assert ok


def test_criterion_05_classical_boundaries(acceptance):
    t = time.perf_counter()
    a_lo, a_hi = diagonal_flip("criterion_a", "0.2", "0.4")
    b_lo, b_hi = diagonal_flip("criterion_b", "0.1", "0.2")
    a_ok = Fraction("0.2929") < a_lo and a_hi < Fraction("0.2931")
    b_ok = Fraction("0.13396") < b_lo and b_hi < Fraction("0.13398")
    ok = acceptance(5, a_ok and b_ok,
                    f"(a) flips at {float(a_lo):.7f} (window (0.2929, 0.2931): {a_ok}); "
                    f"(b) flips at {float(b_lo):.7f} (window (0.13396, 0.13398): {b_ok})",
                    time.perf_counter() - t, 1)
    assert ok


def _region_rows(tmp_path, grid_hi):
    out = tmp_path / f"region_{grid_hi}.csv"
    code = cli.main(["region", "--fix", "p=0.001", "--grid", f"q=0:{grid_hi}:101", "--grid", f"r=0:{grid_hi}:101",
                     "--out", str(out)])
    assert code == 0
    with open(out) as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def test_criterion_06_regime_structure(acceptance, tmp_path):
    t = time.perf_counter()
    axes = grid_axes({v: (Fraction(0), Fraction(1, 50)) for v in "pqr"}, 101)
    g = classify_generalized_grid(axes)
    theta = g["in_theta"]
    conds = [g[f"c{i}"] & theta for i in range(1, 5)]
    disjoint = all(not (a & b).any() for a, b in itertools.combinations(conds, 2))
    s1_sub = not (g["s1"] & theta & ~(g["universal"] & conds[0])).any()
    s4_sub = not (g["s4"] & theta & ~g["member"]).any()
    # four-way partition at p = 0.001; the condition-3 sliver is narrower than
    # the coarse grid step, so the picture is taken on a zoomed window
    rows = _region_rows(tmp_path, "0.004")
    members = [r for r in rows if r["member"] == "1"]
    present = sorted({r["cond"] for r in members})
    by = {c: [float(r["q"]) for r in members if r["cond"] == c] for c in "1234"}
    # regime 1 needs q >= p(1-p); regimes 2-3 sit just left of it; regime 4 needs q < p
    layout = present == list("1234") and (min(by["1"]) >= 0.000999 and max(by["2"] + by["3"]) <= 0.00101
                                          and max(by["4"]) < 0.001)
    coarse = _region_rows(tmp_path, "0.02")
    ok = disjoint and s1_sub and s4_sub and present == list("1234") and layout and len(coarse) == 101 * 101
    ok = acceptance(6, ok, f"disjoint={disjoint}, s1 in regime 1={s1_sub}, s4 in regimes={s4_sub}, "
                           f"conditions at p=0.001: {present}, layout={layout}",
                    time.perf_counter() - t, 120)
    assert ok


def test_criterion_07_weight_inequalities(acceptance):
    t = time.perf_counter()
    summary, ok = [], True
    for v in VARIANTS:
        res = verify_sweep(v, 200, 20, 0)
        control = verify_sweep(v, 200, 20, 0, rhs_override=perturbed_rhs(v))
        good = res.ok and len(res.reports) == 4000 and not control.ok
        ok &= good
        summary.append(f"{v}:{len(res.failures)}/{len(res.reports)} fail, control {len(control.failures)} fail")
    ok = acceptance(7, ok, "; ".join(summary), time.perf_counter() - t, 600)
    assert ok


def test_criterion_08_coefficient_signs(acceptance):
    t = time.perf_counter()
    gen = coefficient_sign_audit("gen_cond234")["DD"]
    b1 = coefficient_sign_audit("bond_B1")["DD_subtracted_times_1_minus_sp"]
    b3 = coefficient_sign_audit("bond_B3")["LWD"]
    ok = gen.all_neg and b1.all_pos and b3.all_neg and min(gen.n_points, b1.n_points, b3.n_points) > 0
    ok = acceptance(8, ok, f"gen DD<0 on {gen.n_points} pts: {gen.all_neg}; B1 DD>0 on {b1.n_points}: {b1.all_pos}; "
                           f"B3 LWD<0 on {b3.n_points}: {b3.all_neg}", time.perf_counter() - t, 60)
    assert ok


def test_criterion_09_duality(acceptance):
    t = time.perf_counter()
    gens = [make_gen_params(*x) for x in [("0.01", "0.02", "0.01"), ("0.1", "0.05", "0.3"), (1, 0, 0), ("0.2", "0.2", "0.5"), (0, 0, "0.05")]]
    bonds = [make_bond_params(*x) for x in [("0.1", "0.1"), ("0.2", 0), ("0.05", "0.3"), (0, "0.1"), ("0.4", "0.4")]]
    agree = 0
    for seed in range(50):
        agree += duality_check(gens[seed % len(gens)], 64, SeedSpec(seed))
        agree += duality_check(bonds[seed % len(bonds)], 64, SeedSpec(seed))
    ok = acceptance(9, agree == 100, f"{agree}/100 boards agree site-for-site", time.perf_counter() - t, 10)
    assert ok


def test_criterion_10_monte_carlo(acceptance):
    t = time.perf_counter()
    M = 10_000
    e0 = estimate_draw_probability(make_bond_params(0, 0), 200, M, SeedSpec(10))
    e1 = estimate_draw_probability(make_bond_params(1, 0), 200, M, SeedSpec(11))
    e25 = estimate_draw_probability(make_bond_params("0.25", 0), 200, M, SeedSpec(12))
    trend = [estimate_draw_probability(make_bond_params("0.2", 0), N, M, SeedSpec(13)) for N in (50, 100, 200)]
    monotone = all(b.point_estimate <= a.point_estimate + 3 * np.hypot(a.sigma, b.sigma)
                   for a, b in zip(trend, trend[1:]))
    cmp = transform_equivalence_mc(make_bond_params("0.05", "0.05"), 128, M, SeedSpec(14))
    ok = (e0.point_estimate == 1.0 and e1.point_estimate == 0.0 and e25.point_estimate <= 0.05
          and monotone and cmp.within_3sigma)
    ok = acceptance(10, ok, f"r'=0: {e0.point_estimate}; r'=1: {e1.point_estimate}; r'=0.25: {e25.point_estimate}; "
                            f"r'=0.2 N=50,100,200: {[e.point_estimate for e in trend]}; "
                            f"transform diff {cmp.difference:.4f} vs 3 sigma {3 * cmp.pooled_sigma:.4f}",
                    time.perf_counter() - t, 300)
    assert ok


CLI_RUNS = [
    ["kernel", "--model", "generalized", "--p", "0.01", "--q", "0.02", "--r", "0.01"],
    ["draw-prob", "--model", "bond", "--rp", "0.15", "--sp", "0.02", "--horizon", "60", "--replicas", "700", "--seed", "3"],
    ["draw-prob", "--model", "generalized", "--p", "0.05", "--q", "0.05", "--r", "0.1", "--horizon", "40",
     "--replicas", "300", "--seed", "4", "--format", "csv"],
    ["simulate", "--model", "bond", "--rp", "0.2", "--size", "512", "--steps", "40", "--seed", "5"],
    ["simulate", "--model", "generalized", "--p", "0.1", "--size", "128", "--steps", "20", "--driver", "kernel"],
    ["regime", "--model", "bond", "--rp", "0.2", "--sp", "0"],
    ["region", "--predicate", "bond", "--grid", "rp=0:0.02:21", "--grid", "sp=0:0.02:21"],
    ["roots", "--list"],
    ["verify", "lemmas", "--param-samples", "2", "--measure-samples", "3"],
    ["verify", "weights", "--variant", "bond_B3", "--param-samples", "2", "--measure-samples", "3"],
]


def test_criterion_11_determinism(acceptance, tmp_path):
    t = time.perf_counter()
    mismatched, codes = [], []
    for i, argv in enumerate(CLI_RUNS):
        blobs = []
        for threads in ("1", "4", "1"):
            out = tmp_path / f"run{i}_{threads}_{len(blobs)}"
            codes.append(cli.main(["--threads", threads] + argv + ["--out", str(out)]))
            blobs.append(out.read_bytes())
        if len(set(blobs)) != 1:
            mismatched.append(" ".join(argv[:2]))
    ok = acceptance(11, not mismatched, f"{len(CLI_RUNS)} configurations x 3 runs, mismatched: {mismatched or 'none'}",
                    time.perf_counter() - t, 300)
    assert ok


if __name__ == "__main__":
    import pytest
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
