"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Expensive ensembles are built once per module and shared.  Every tolerance
and runtime budget is pinned here, not configurable.

Known red: criterion 6's ln|S-phi| slope-quantile clause is unattainable in
IEEE double precision (the gap underflows below one ulp of ln S - ln phi by
t ~ 35-45, capping the observable decay window far below what the +0.2 slack
assumes).  The clause is asserted faithfully anyway; the assertion message
and the project decisions ledger carry the measurement-limit analysis.
"""

import math
import time

import numpy as np
import pytest

from stosir import analysis
from stosir.analysis import (
    ergodic_average,
    extinction_rate_estimate,
    ks_statistic,
    lyapunov_estimate,
    moment_series,
    occupation_histogram,
    percentile_grid,
    total_variation,
)
from stosir.cli import load_preset, run_threshold
from stosir.engine import (
    make_bundle,
    simulate_boundary,
    simulate_coupled,
    simulate_full,
)
from stosir.model import ModelParams, State, derive_constants, make_catalog_incidence
from stosir.threshold import Classification, StationaryLaw, lambda_threshold


def report(criterion: str, ok: bool, detail: str) -> None:
    print(f"[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


# ---------------------------------------------------------------------------
# shared ensembles


@pytest.fixture(scope="module")
def ex1_threshold():
    cfg = load_preset("ex1")
    t0 = time.monotonic()
    rep = lambda_threshold(cfg.params, cfg.incidence, seed=cfg.master_seed)
    return rep, time.monotonic() - t0, cfg


@pytest.fixture(scope="module")
def ex2_threshold():
    cfg = load_preset("ex2")
    t0 = time.monotonic()
    rep = lambda_threshold(cfg.params, cfg.incidence, seed=cfg.master_seed)
    return rep, time.monotonic() - t0, cfg


@pytest.fixture(scope="module")
def ex1_coupled_ensemble():
    # criterion 6 configuration: 200 coupled paths, T=200, dt=1e-3
    cfg = load_preset("ex1")
    t0 = time.monotonic()
    paths = [
        simulate_coupled(cfg.params, cfg.incidence, cfg.initial, 200.0, 1e-3,
                         cfg.master_seed, trajectory_index=k, store_stride=100)
        for k in range(200)
    ]
    return paths, time.monotonic() - t0, cfg


@pytest.fixture(scope="module")
def ex2_ensembles():
    # criterion 7 configuration: 200 paths, T=500, two initial points
    cfg = load_preset("ex2")
    second = State(4.0, 2.0)
    t0 = time.monotonic()
    group_a = [
        simulate_full(cfg.params, cfg.incidence, cfg.initial, 500.0, 1e-3,
                      cfg.master_seed, trajectory_index=k, store_stride=100)
        for k in range(100)
    ]
    group_b = [
        simulate_full(cfg.params, cfg.incidence, second, 500.0, 1e-3,
                      cfg.master_seed, trajectory_index=100 + k,
                      store_stride=100)
        for k in range(100)
    ]
    return group_a, group_b, time.monotonic() - t0, cfg


# ---------------------------------------------------------------------------
# criteria


def test_criterion_1_threshold_reproduction_ex2(ex2_threshold):
    rep, elapsed, _ = ex2_threshold
    paper_lambda = 3.3611
    rel = abs(rep.lam - paper_lambda) / paper_lambda
    agree = abs(rep.lam - rep.mc_lambda)
    agree_bound = rep.quad_error + 3.0 * rep.mc_halfwidth
    ok = (rel <= 0.05 and agree <= agree_bound
          and rep.classification == Classification.PERMANENCE
          and elapsed < 10.0)
    report("1 threshold ex2", ok,
           f"lambda={rep.lam:.6f} vs paper {paper_lambda} (rel {rel:.2e}); "
           f"|quad-mc|={agree:.2e} <= {agree_bound:.2e}; {elapsed:.1f}s < 10s")


def test_criterion_2_threshold_sign_ex1(ex1_threshold):
    rep, elapsed, _ = ex1_threshold
    agree = abs(rep.lam - rep.mc_lambda)
    agree_bound = rep.quad_error + 3.0 * rep.mc_halfwidth
    ok = (rep.lam < 0.0 and rep.r < 1.0
          and rep.classification == Classification.EXTINCTION
          and agree <= agree_bound and elapsed < 10.0)
    report("2 threshold ex1 sign", ok,
           f"lambda={rep.lam:.6f} < 0, R={rep.r:.6f} < 1; "
           f"|quad-mc|={agree:.2e} <= {agree_bound:.2e}; {elapsed:.1f}s < 10s")


def test_criterion_3_sign_equivalence_randomized():
    rng = np.random.default_rng(20260810)
    t0 = time.monotonic()
    violations = 0
    checked = 0
    for k in range(1000):
        params = ModelParams(
            a1=float(rng.uniform(0.3, 20.0)),
            b1=float(rng.uniform(0.05, 4.0)),
            b2=float(rng.uniform(0.05, 4.0)),
            sigma1=float(rng.uniform(0.2, 3.0)),
            sigma2=float(rng.uniform(0.0, 3.0)),
        )
        kind = k % 4
        if kind == 0:
            model = make_catalog_incidence(
                "bilinear", beta=float(rng.uniform(0.01, 5.0)))
        elif kind == 1:
            model = make_catalog_incidence(
                "holling2", beta=float(rng.uniform(0.1, 8.0)),
                m1=float(rng.uniform(0.2, 5.0)))
        elif kind == 2:
            model = make_catalog_incidence(
                "beddington_deangelis", beta=float(rng.uniform(0.1, 8.0)),
                m1=float(rng.uniform(0.1, 4.0)), m2=float(rng.uniform(0.1, 4.0)))
        else:
            model = make_catalog_incidence(
                "ratio_example", c=float(rng.uniform(0.05, 10.0)),
                m=float(rng.uniform(0.05, 3.0)))
        rep = lambda_threshold(params, model, mc_samples=0)
        if abs(rep.lam) > rep.quad_error:
            checked += 1
            if math.copysign(1.0, rep.lam) != math.copysign(1.0, rep.r - 1.0):
                violations += 1
    elapsed = time.monotonic() - t0
    ok = violations == 0 and elapsed < 60.0
    report("3 sign equivalence", ok,
           f"{violations} violations over {checked}/1000 separated models; "
           f"{elapsed:.1f}s < 60s")


def test_criterion_4_boundary_stationary_law():
    params = ModelParams(a1=3.0, b1=1.0, b2=1.0, sigma1=1.0, sigma2=1.0)
    law = StationaryLaw.from_params(params)
    assert (law.a, law.b) == (3.0, 6.0)
    t0 = time.monotonic()
    pooled = []
    positive = True
    for k in range(2000):
        bundle = make_bundle(1904, k, 1e-3, 500_000)
        phi = simulate_boundary(params, 2.0, bundle, store_stride=500)
        positive &= bool(np.all(phi > 0.0))
        pooled.append(phi[200:])  # times are 0.5*k, so index 200 is t=100
    samples = np.concatenate(pooled)
    ks = ks_statistic(samples, law.cdf)
    elapsed = time.monotonic() - t0
    ok = ks < 0.03 and positive and elapsed < 300.0
    report("4 boundary stationary law", ok,
           f"KS={ks:.4f} < 0.03 over {samples.size} pooled samples "
           f"(2000 paths, T=500, burn-in 100); positive={positive}; "
           f"{elapsed:.0f}s < 300s")


def test_criterion_5_boundary_exact_solution_oracle():
    from scipy.integrate import cumulative_trapezoid

    params = ModelParams(a1=3.0, b1=1.0, b2=1.0, sigma1=1.0, sigma2=1.0)
    d = derive_constants(params)
    u, horizon = 2.0, 10.0
    t0 = time.monotonic()

    def rms_rel(dt: float) -> float:
        n = int(round(horizon / dt))
        errs = np.empty(100)
        for k in range(100):
            bundle = make_bundle(1906, k, dt, n)
            phi = simulate_boundary(params, u, bundle)
            b_path = np.concatenate([[0.0], np.cumsum(bundle.db1)])
            t = dt * np.arange(n + 1)
            grow = np.exp(d.c1 * t - params.sigma1 * b_path)
            ref = (np.exp(-d.c1 * t + params.sigma1 * b_path)
                   * (u + params.a1 * cumulative_trapezoid(grow, dx=dt,
                                                           initial=0.0)))
            errs[k] = (phi[-1] - ref[-1]) / ref[-1]
        return float(np.sqrt(np.mean(errs ** 2)))

    coarse = rms_rel(1e-3)
    fine = rms_rel(5e-4)
    elapsed = time.monotonic() - t0
    ok = coarse < 0.01 and fine < coarse and elapsed < 120.0
    report("5 variation-of-constants oracle", ok,
           f"rms_rel(dt=1e-3)={coarse:.5f} < 1%; rms_rel(dt=5e-4)={fine:.5f} "
           f"< {coarse:.5f}; {elapsed:.0f}s < 120s")


def test_criterion_6_extinction_lyapunov_slope(ex1_threshold,
                                               ex1_coupled_ensemble):
    rep, _, _ = ex1_threshold
    paths, sim_time, _ = ex1_coupled_ensemble
    t0 = time.monotonic()
    slopes = np.array([lyapunov_estimate(p).slope for p in paths])
    elapsed = sim_time + (time.monotonic() - t0)
    median = float(np.median(slopes))
    ok = abs(median - rep.lam) <= 0.15 and elapsed < 600.0
    report("6a extinction: median ln I slope", ok,
           f"median={median:.4f} within 0.15 of lambda={rep.lam:.4f} "
           f"(gap {abs(median - rep.lam):.4f}); {elapsed:.0f}s < 600s")


def test_criterion_6_extinction_s_phi_slope_bound(ex1_threshold,
                                                  ex1_coupled_ensemble):
    rep, _, _ = ex1_threshold
    paths, _, cfg = ex1_coupled_ensemble
    d = derive_constants(cfg.params)
    estimates = [extinction_rate_estimate(p) for p in paths]
    slopes = np.array([e.slope for e in estimates])
    finite = slopes[np.isfinite(slopes)]
    p90 = float(np.percentile(finite, 90)) if finite.size else -math.inf
    bound = max(rep.lam, -d.c1) + 0.2
    collapsed = float(np.mean([e.truncated or not math.isfinite(e.slope)
                               for e in estimates]))
    ok = p90 <= bound
    report(
        "6b extinction: ln|S-phi| slope quantile", ok,
        f"p90={p90:.4f} vs bound max(lambda,-c1)+0.2={bound:.4f}; "
        f"collapse fraction {collapsed:.2f}. "
        "KNOWN RED (measurement limit, see decisions ledger): |S-phi| "
        "underflows below one ulp of lnS-lnphi (gap/S ~ 2e-16) by t~35-45, "
        "so slopes are only measurable over ~25-30 time units, where the "
        "gap's own martingale scatter (~0.25 per path) puts the 90th "
        "percentile near lambda+0.28; the +0.2 slack presumes the length-100 "
        "window of exact arithmetic. Every path's gap collapses below float "
        "resolution by t<60, a far stronger convergence certificate than "
        "the e^(-0.8555 t) bound being asserted here.")


def test_criterion_7_permanence_suite(ex2_ensembles):
    group_a, group_b, sim_time, cfg = ex2_ensembles
    paths = group_a + group_b
    t0 = time.monotonic()

    # (i) occupation histograms over [100,250] vs [250,500], shared grid
    s_all, i_all, _ = analysis.pooled_samples(paths, 100.0)
    grid = percentile_grid(s_all, i_all, bins=(20, 20))
    h_early = occupation_histogram(paths, 100.0, grid=grid, t_max=250.0)
    h_late = occupation_histogram(paths, 250.0, grid=grid)
    tv = total_variation(h_early, h_late)

    # (ii) ergodic averages of h(s,i)=s from the two initial points
    avg_a = ergodic_average(group_a, lambda s, i: s, 100.0)
    avg_b = ergodic_average(group_b, lambda s, i: s, 100.0)
    gap = abs(avg_a.mean - avg_b.mean)
    joint = 3.0 * math.hypot(avg_a.stderr, avg_b.stderr)

    # (iii) median ln I slope near 0
    slopes = np.array([lyapunov_estimate(p).slope for p in paths])
    median = float(np.median(slopes))

    elapsed = sim_time + (time.monotonic() - t0)
    ok = (tv < 0.05 and gap <= joint and abs(median) <= 0.05
          and elapsed < 900.0)
    report("7 permanence suite", ok,
           f"TV={tv:.4f} < 0.05 (20x20 grid); ergodic gap {gap:.4f} <= "
           f"3*joint SE {joint:.4f}; median ln I slope {median:.5f} within "
           f"0.05; {elapsed:.0f}s < 900s")


def test_criterion_8_positivity_and_determinism(tmp_path, ex1_coupled_ensemble,
                                                ex2_ensembles):
    paths1, _, cfg1 = ex1_coupled_ensemble
    group_a, group_b, _, cfg2 = ex2_ensembles
    positive = all(
        np.all(p.s > 0) and np.all(p.i > 0)
        and (p.phi is None or np.all(p.phi > 0))
        for p in paths1 + group_a + group_b
    )

    # byte-identical artifacts on rerun with the same master seed
    rerun_equal = True
    for name in ("one", "two"):
        sub = tmp_path / name
        sub.mkdir()
        run_threshold(cfg2, sub)
        p = simulate_coupled(cfg1.params, cfg1.incidence, cfg1.initial,
                             20.0, 1e-3, cfg1.master_seed,
                             trajectory_index=0, store_stride=100)
        p.to_csv(sub / "path.csv")
        bundle = make_bundle(1904, 0, 1e-3, 100_000)
        phi = simulate_boundary(cfg1.params, 2.0, bundle, store_stride=100)
        (sub / "phi.bin").write_bytes(phi.tobytes())
    for name in ("report.csv", "path.csv", "phi.bin"):
        rerun_equal &= ((tmp_path / "one" / name).read_bytes()
                        == (tmp_path / "two" / name).read_bytes())

    ok = positive and rerun_equal
    report("8 positivity and determinism", ok,
           f"all stored S,I,phi positive over 400 ensemble paths: {positive}; "
           f"threshold/trajectory/boundary artifacts byte-identical on "
           f"rerun: {rerun_equal}")


def test_criterion_9_moment_bound_proxy(ex2_ensembles):
    group_a, group_b, _, cfg = ex2_ensembles
    paths = group_a + group_b
    series = moment_series(paths, cfg.params, p=0.5, p_bar=1.0)
    mid = float(series.values[(series.times >= 50.0)
                              & (series.times <= 250.0)].max())
    late = float(series.values[series.times >= 250.0].max())
    ratio = late / mid
    ok = ratio <= 1.2
    report("9 moment bound proxy", ok,
           f"late-window max {late:.2f} <= 1.2 x mid-window max {mid:.2f} "
           f"(ratio {ratio:.3f}; windows [50,250] vs [250,500])")
