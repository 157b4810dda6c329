"""Acceptance criteria 1-11, each at its stated tolerance.

Every test appends one PASS/FAIL line to the acceptance summary printed at
the end of the session, then asserts.
"""
import math
import time
import warnings
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import second_eigenvalue, sparsest_cut_by_masks, two_variable_lp_minmax
from sparsecut import mwu
from sparsecut.cli import main, spread_points
from sparsecut.cutmatch import (embedding_player, flow_matching_player, hypercube_points, run_game,
                                sphere_point_set_of_size)
from sparsecut.decomp import pseudo_decompose, scale_paths
from sparsecut.directions import (default_coin_count, isoperimetry_violation_rate,
                                  pm1_stretch_tail, trial_rng)
from sparsecut.driver import sparsest_cut, verify_certificate
from sparsecut.generators import (complete_graph, cycle_graph, dumbbell_graph, gnp_graph,
                                  hypercube_graph, path_graph, planted_cut_graph,
                                  random_acyclic_flow, random_regular_graph)
from sparsecut.graph import save_graph
from sparsecut.matching import ProjectionCover, chain_long_edges, single_direction_baseline
from sparsecut.maxflow import flow_and_cut
from sparsecut.mwu import MwuConfig, OracleFault, generic_mwu

pytestmark = pytest.mark.slow


def record(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


# -- Criteria 1 and 6: certificate soundness and congestion audits --------------


def _soundness_graph(i: int):
    n = 8 + (i * 56) // 49
    seed = 1000 + i
    while True:
        if i % 2 == 0:
            weights = (0.5, 2.0) if i % 4 == 0 else None
            g = gnp_graph(n, min(1.0, 3 * math.log(n) / n), seed, weights)
        else:
            g = planted_cut_graph(n, 0.5, 0.04, seed)
        if g.is_connected():
            return g
        seed += 100


@pytest.fixture(scope="module")
def soundness_runs():
    audits = []
    mwu.audit_observers.append(audits.append)
    runs = []
    start = time.perf_counter()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for i in range(50):
                g = _soundness_graph(i)
                report = sparsest_cut(g, 0.25, i, compare=False)
                runs.append((g, report, [verify_certificate(g, c) for c in report.certificates]))
    finally:
        mwu.audit_observers.remove(audits.append)
    return runs, audits, time.perf_counter() - start


def test_certificate_soundness(soundness_runs):
    runs, _, elapsed = soundness_runs
    problems = []
    flows = 0
    for i, (g, report, checks) in enumerate(runs):
        if not report.certificates:
            problems.append(f"graph {i}: no certificate")
        for cert, check in zip(report.certificates, checks):
            if not check.ok:
                problems.append(f"graph {i}: {check.failures}")
            if cert.type == "flow":
                flows += 1
                if not (cert.lambda2 >= 0.1 and cert.congestion <= 1.0):
                    problems.append(f"graph {i}: lambda2 {cert.lambda2} congestion {cert.congestion}")
    sizes = [g.n for g, _, _ in runs]
    ok = not problems and elapsed < 600 and min(sizes) >= 8 and max(sizes) <= 64
    record(1, ok, f"{len(runs)} graphs n in [{min(sizes)},{max(sizes)}], "
                  f"{sum(len(r.certificates) for _, r, _ in runs)} certificates ({flows} flow) "
                  f"verified, {elapsed:.0f}s")
    assert not problems, problems[:5]
    assert elapsed < 600


def test_congestion_audits(soundness_runs):
    _, audits, _ = soundness_runs
    bad = [a for a in audits if not a.max_congestion <= a.bound]
    worst = max((a.max_congestion / a.bound for a in audits), default=Fraction(0))
    ok = bool(audits) and not bad
    record(6, ok, f"{len(audits)} matchings audited, worst congestion/bound {float(worst):.3f}")
    assert audits and not bad


# -- Criterion 2: approximation ratio against brute force ----------------------


def test_approximation_ratio():
    worst = 0.0
    ratios = []
    for i in range(30):
        n = 8 + i % 13
        seed = 2000 + i
        while True:
            if i % 3 == 0:
                g = planted_cut_graph(n, 0.7, 0.1, seed)
            else:
                g = gnp_graph(n, 0.45, seed, (0.5, 2.0) if i % 3 == 2 else None)
            if g.is_connected():
                break
            seed += 100
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            report = sparsest_cut(g, 0.25, i, compare=False)
        optimum = sparsest_cut_by_masks(g.n, g.edges)
        ratio = report.cut.expansion / optimum
        ratios.append(ratio)
        worst = max(worst, ratio)
    ok = max(ratios) <= 10
    record(2, ok, f"30 graphs n<=20, worst expansion/optimum {worst:.3f}, "
                  f"median {float(np.median(ratios)):.3f}")
    assert ok


# -- Criterion 3: generic multiplicative weights contract ----------------------


def test_mwu_contract():
    def oracle(y, t):
        x = np.zeros(2)
        x[int(np.argmin(y))] = 2.0
        return x

    config = MwuConfig(eta=0.25, width=2.0, num_constraints=2)
    expected_T = math.ceil(2.0 * 16 * math.log(2))
    out = generic_mwu(oracle, lambda x: x, [1.0, 1.0], config)
    avg = [Fraction(sum(int(x[i]) for x in out.solutions), out.iterations) for i in range(2)]
    within = config.T == expected_T and max(avg) <= 2
    lp = two_variable_lp_minmax([(2, 0), (0, 2)])

    fired = False
    try:
        generic_mwu(lambda y, t: np.array([3.0, 0.0]), lambda x: x, [1.0, 1.0], config)
    except OracleFault:
        fired = True
    ok = within and fired and max(avg) >= lp
    record(3, ok, f"T={config.T}, averaged solution {[str(a) for a in avg]} <= 2, "
                  f"fault detector fired={fired}")
    assert ok


# -- Criterion 4: FlowAndCut cut branch ----------------------------------------


def test_flow_and_cut_property():
    rng = np.random.default_rng(4)
    cuts = flows = 0
    bad = []
    for k in range(500):
        n = int(rng.integers(8, 49))
        g = gnp_graph(n, float(rng.uniform(0.1, 0.7)), int(rng.integers(1 << 30)), (0.25, 4.0))
        kappa = float(2.0 ** rng.uniform(-4, 4))
        c = float(rng.choice([1 / 16, 1 / 8, 3 / 16, 1 / 4]))
        proj = list(rng.standard_normal(n))
        out = flow_and_cut(g, kappa, c, proj)
        if out.is_cut:
            cuts += 1
            cut = out.cut
            if cut.balance < math.floor(c * n) or not cut.expansion <= kappa:
                bad.append((k, cut.balance, cut.expansion, kappa))
        else:
            flows += 1
    ok = not bad and cuts > 0
    record(4, ok, f"500 instances, {cuts} cut branches and {flows} flow branches, "
                  f"{len(bad)} violations")
    assert not bad, bad[:5]
    assert cuts > 0


# -- Criterion 5: link-cut vs naive decomposition ------------------------------


def test_decomposition_equivalence_and_speed():
    mismatches = 0
    largest = 0
    for k in range(200):
        # 5 flows at n=1024 (m=8192), 15 at n=512, the rest at 64..256.
        n = 1024 if k % 40 == 39 else 512 if k % 10 == 9 else 64 << (k % 3)
        largest = max(largest, n)
        result, m = random_acyclic_flow(n, 8 * n, n, 5000 + k)
        rng = np.random.default_rng(k)
        lengths = list(rng.integers(0, 64, m) / 16)
        fast = pseudo_decompose(result, lengths, fast=True)
        naive = pseudo_decompose(result, lengths, fast=False)
        if Counter(fast.entries) != Counter(naive.entries) or fast.entries != naive.entries:
            mismatches += 1
            continue
        # Exact either way; integer factors keep the largest flows fast.
        draws = rng.integers(0, 11, len(fast))
        alphas = [Fraction(int(a), 5) for a in draws] if n <= 256 else [int(a) for a in draws]
        if scale_paths(result, alphas, True).flow != scale_paths(result, alphas, False).flow:
            mismatches += 1

    # Speed on a fixed n=1024, m=8192 batch of long paths; best of five per method.
    batch = [random_acyclic_flow(1024, 8192, 4000, seed, jump=0.0, double=0.1) for seed in range(3)]
    weights = [list(np.random.default_rng(s).random(m)) for s, (_, m) in enumerate(batch)]
    best = {True: math.inf, False: math.inf}
    for _ in range(5):
        for fast in (True, False):
            t = time.process_time()
            for (result, _), w in zip(batch, weights):
                pseudo_decompose(result, w, fast=fast)
            best[fast] = min(best[fast], time.process_time() - t)
    speedup = best[False] / best[True]
    speed_note = "meets" if speedup >= 5 else "below (soft threshold)"
    record(5, mismatches == 0,
           f"200 flows up to n={largest} m={8 * largest} agree exactly ({mismatches} mismatches); "
           f"fast path {speedup:.2f}x faster, {speed_note} the 5x target")
    assert mismatches == 0


# -- Criteria 7 and 8: direction sampler statistics ----------------------------


def test_pm1_tails():
    k = default_coin_count(1024)
    assert k == math.ceil(9 * math.log2(1024))
    rows = []
    ok = True
    for i, (rho, t) in enumerate((r, t) for r in (0.0, 0.9) for t in (1, 2, 3)):
        rate = pm1_stretch_tail(k, rho, t, 100_000, trial_rng(7, i))
        bound = 1.5 * math.exp(-t * t / 3)
        ok &= rate <= bound
        rows.append(f"rho={rho} t={t}: {rate:.4f}<={bound:.4f}")
    record(7, ok, f"k={k}, 1e5 samples; " + "; ".join(rows))
    assert ok


def test_isoperimetry_rates():
    rows = []
    ok = True
    N = 100_000
    for i, (delta, rho, eps) in enumerate(((0.3, 0.5, 0.1), (0.1, 0.9, 0.05))):
        rate = isoperimetry_violation_rate(delta, rho, eps, N, trial_rng(8, i))
        limit = eps + 3 * math.sqrt(eps * (1 - eps) / N)
        ok &= rate < limit
        rows.append(f"(delta,rho,eps)=({delta},{rho},{eps}): {rate:.4f}<{limit:.4f}")
    record(8, ok, "1e5 trials; " + "; ".join(rows))
    assert ok


# -- Criterion 9: long edges in chained matchings ------------------------------


def test_chained_long_edges():
    points = spread_points(512, 9, trial_rng(9, 0))
    cover = ProjectionCover(points)
    L, trials = 2.0, 200
    reports = {R: chain_long_edges(points, cover, R, trials, L, trial_rng(9, 1, R)) for R in (1, 2, 3)}
    base = single_direction_baseline(points, cover, trials, L, trial_rng(9, 2))
    gap = abs(reports[1].mean - base.mean)
    tol = 4 * math.hypot(reports[1].stderr, base.stderr)
    ok = all(r.mean > 0 for r in reports.values()) and gap <= tol
    means = ", ".join(f"R={R}: {r.mean:.2f}" for R, r in reports.items())
    record(9, ok, f"n=512 d=9 L={L}, {trials} trials; {means}; "
                  f"baseline {base.mean:.2f}, |R1-baseline|={gap:.2f}<={tol:.2f}")
    assert ok


# -- Criterion 10: cut-matching game mechanics ---------------------------------


def test_cut_matching_mechanics():
    # (a) flow player, lobe bisection of the dumbbell.
    g = dumbbell_graph(8)
    lobes = (tuple(range(8)), tuple(range(8, 16)))
    state = run_game(16, lambda b: flow_matching_player(g, b), 5, first_bisection=lobes)
    part_a = state.cut is not None and state.t == 0 and state.cut.expansion <= 1

    # (b) hypercube player, d=4: every increment at most 4/d = 1.
    pts = hypercube_points(4)
    cube = run_game(16, embedding_player(pts), 8, rng=trial_rng(10, 1), points=pts)
    part_b = cube.t == 8 and all(inc <= 1 for inc in cube.increments)

    # (c) sphere player at d in {4, 6}, n near 512.
    details = []
    part_c = True
    for d in (4, 6):
        emb = sphere_point_set_of_size(d, 512, trial_rng(10, 2, d))
        sphere = run_game(emb.n, embedding_player(emb.points), 20, rng=trial_rng(10, 3, d),
                          points=emb.points)
        lam_ok = all(lam <= psi + 1e-6 for lam, psi in zip(sphere.lambda2[1:], sphere.psi[1:]))
        # Independent eigenvalue check of the final accumulated graph.
        final = second_eigenvalue(sphere.laplacian)
        lam_ok &= abs(final - sphere.lambda2[-1]) <= 1e-8
        cap = 64 * emb.n * emb.radius
        cost_ok = all(cost <= cap for cost in sphere.costs)
        part_c &= sphere.t == 20 and lam_ok and cost_ok and abs(emb.n - 512) <= 64
        details.append(f"d={d} n={emb.n} r={emb.radius:.3f} max cost {max(sphere.costs):.0f}"
                       f"<= {cap:.0f}, max lambda2-psi {max(l - p for l, p in zip(sphere.lambda2[1:], sphere.psi[1:])):.3f}")
    ok = part_a and part_b and part_c
    record(10, ok, f"(a) dumbbell cut expansion {state.cut.expansion if state.cut else None} "
                   f"(b) max increment {max(cube.increments):.3f} (c) " + "; ".join(details))
    assert part_a and part_b and part_c


# -- Criterion 11: determinism -------------------------------------------------


def test_determinism(tmp_path):
    fixtures = [dumbbell_graph(5), complete_graph(10), cycle_graph(12), hypercube_graph(3),
                path_graph(10), gnp_graph(16, 0.4, 3), gnp_graph(14, 0.5, 4, (0.5, 2.0)),
                planted_cut_graph(16, 0.8, 0.1, 5), random_regular_graph(16, 3, 6),
                dumbbell_graph(6, 0.5)]
    differing = []
    for k, g in enumerate(fixtures):
        path = tmp_path / f"g{k}.txt"
        save_graph(g, str(path))
        blobs = []
        for run in range(2):
            out = tmp_path / f"c{k}_{run}.json"
            code = main(["sparsest-cut", "-i", str(path), "--epsilon", "0.3", "--seed", str(k),
                         "-o", str(out)])
            assert code == 0
            blobs.append(out.read_bytes())
        if blobs[0] != blobs[1]:
            differing.append(k)
    ok = not differing
    record(11, ok, f"10 fixtures, {len(differing)} with differing certificate bytes")
    assert ok
