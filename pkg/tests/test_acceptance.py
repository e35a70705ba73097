"""Acceptance suite: one test per criterion, each printing a PASS line.

Seeds and the search configuration are pinned; every check is deterministic
apart from the wall-clock budgets.
"""

import json
import math
import time

import numpy as np

from doubling_lab import cli
from doubling_lab import grid as gr
from doubling_lab import growth as gw
from doubling_lab import measure_mc as mc
from doubling_lab import model_spaces as ms
from doubling_lab import rotations as rot
from doubling_lab import search as se
from doubling_lab import sets as st


def report(criterion, detail):
    print(f"[acceptance] {criterion}: PASS ({detail})")


def test_criterion_1_extremizer_identity():
    start = time.monotonic()
    thetas = np.linspace(0.1, math.pi / 2, 16)
    worst = 0.0
    for i, theta in enumerate(thetas):
        theta = float(theta)
        m, m2 = st.cap_doubling(theta)
        est = mc.estimate_measure(st.cap(rot.EZ, theta), 1_000_000, rot.derive_seed(101, 2 * i))
        est2 = mc.estimate_measure(
            st.cap_product_spec(theta, theta), 1_000_000, rot.derive_seed(101, 2 * i + 1)
        )
        assert abs(est.value - m) <= 4 * est.stderr
        if est2.stderr > 0:
            assert abs(est2.value - m2) <= 4 * est2.stderr
            worst = max(worst, abs(est2.value - m2) / est2.stderr)
        else:
            assert abs(est2.value - m2) <= 1e-12  # whole-group row, exact up to rounding
        worst = max(worst, abs(est.value - m) / est.stderr)
    elapsed = time.monotonic() - start
    assert elapsed < 30.0
    report("criterion 1 (extremizer identity)", f"16 angles, worst z = {worst:.2f}, {elapsed:.1f}s")


def test_criterion_2_399_threshold():
    for m in np.linspace(1e-6, 0.0025, 200):
        assert 4.0 * (1.0 - m) >= 3.99
    est = mc.estimate_measure(st.cap(rot.EZ, 0.1), 10_000_000, rot.derive_seed(202, 0))
    est2 = mc.estimate_measure(st.cap_product_spec(0.1, 0.1), 10_000_000, rot.derive_seed(202, 1))
    ratio = est2.value / est.value
    assert abs(ratio - 3.99001) / 3.99001 <= 0.02
    report("criterion 2 (3.99 threshold)", f"MC ratio {ratio:.5f} vs 3.99001")


def test_criterion_3_doubling_limits():
    for theta in np.linspace(1e-4, 0.05, 300):
        m, m2 = st.cap_doubling(float(theta))
        ratio = m2 / m
        assert 3.99 <= ratio < 4.0
    # below r ~ 2e-4 the cancellation in r - sin(r) exceeds the margin to 8
    for r in np.linspace(1e-3, 0.05, 300):
        ratio = rot.ball_measure(2.0 * float(r)) / rot.ball_measure(float(r))
        assert 7.99 <= ratio < 8.0
    report("criterion 3 (doubling limits)", "caps in [3.99, 4), balls in [7.99, 8)")


def test_criterion_4_grid_sandwich():
    spec = st.cap(rot.EZ, 0.4)
    truth = math.sin(0.4) ** 2
    est = mc.estimate_product_lower(spec, spec, 512, 100_000, seed=404)
    lower = est.value - 3 * est.stderr
    widths = []
    fine_elapsed = None
    for shape in [(24, 48, 96), (48, 96, 192)]:
        start = time.monotonic()
        grid = gr.build_grid(*shape)
        cells = gr.rasterize(spec, grid)
        upper = gr.product_outer(cells, cells, grid).measure_upper
        elapsed = time.monotonic() - start
        assert lower <= truth <= upper
        widths.append(upper - lower)
        if shape == (48, 96, 192):
            fine_elapsed = elapsed
    assert widths[0] / widths[1] >= 1.5
    assert fine_elapsed < 300.0
    report(
        "criterion 4 (grid sandwich)",
        f"widths {widths[0]:.3f} -> {widths[1]:.3f} (ratio {widths[0]/widths[1]:.2f}), fine grid {fine_elapsed:.0f}s",
    )


def test_criterion_5_bm_solver():
    rng = np.random.default_rng(505)
    for _ in range(1000):
        mu_a, mu_b = rng.uniform(1e-4, 0.6, 2)
        mu_ab = min(1.0, max(mu_a, mu_b) * rng.uniform(1.05, 6.0))
        r = gw.bm_growth(mu_a, mu_b, mu_ab)
        rec = (mu_a ** (1 / r) + mu_b ** (1 / r)) ** r
        assert abs(rec - mu_ab) <= 1e-12 * mu_ab
    bm_02 = gw.build_report(st.cap(rot.EZ, 0.2), st.cap(rot.EZ, 0.2), "closed-form").bm_lower
    assert abs(bm_02 - math.log2(4.0 * math.cos(0.1) ** 2)) <= 1e-6
    for t1 in np.linspace(0.05, math.pi / 2, 15):
        for t2 in np.linspace(0.05, math.pi / 2, 15):
            r = gw.bm_growth(
                st.cap_measure(t1), st.cap_measure(t2), st.cap_measure(min(t1 + t2, math.pi))
            )
            assert r <= 2.0 + 1e-9
    report("criterion 5 (growth-exponent solver)", f"roundtrips to 1e-12, cap pair at 0.2 -> {bm_02:.6f}")


def test_criterion_6_kemperman():
    for theta in np.linspace(0.01, math.pi / 2, 300):
        m, m2 = st.cap_doubling(float(theta))
        assert gw.kemperman_slack(m, m, m2) >= 0.0
    for r in np.linspace(0.01, math.pi / 2, 300):
        mu = rot.ball_measure(float(r))
        mu2 = rot.ball_measure(min(2.0 * float(r), math.pi))
        assert gw.kemperman_slack(mu, mu, mu2) >= 0.0
    grid = gr.build_grid(12, 24, 48)
    rep = gw.build_report(
        st.cap(rot.EZ, 0.4), st.cap(rot.EZ, 0.4), "mc+grid",
        grid=grid, witnesses=256, samples=50_000, seed=606,
    )
    assert rep.kemperman_slack >= -3.0 * rep.combined_mu_stderr()
    report("criterion 6 (sum-bound slack)", "closed-form scans exact, mc+grid within 3 stderr")


def test_criterion_7_expansion_gap():
    cap_max = st.cap_radius_for_measure(0.49)
    for theta in np.linspace(0.01, cap_max, 300):
        m, m2 = st.cap_doubling(float(theta))
        assert gw.expansion_gap_check(m, m2)
    r49 = 2.1161815  # ball_measure(2.1161815) ~ 0.49
    assert rot.ball_measure(r49) <= 0.49
    for r in np.linspace(0.01, r49, 300):
        mu = rot.ball_measure(float(r))
        mu2 = rot.ball_measure(min(2.0 * float(r), math.pi))
        assert gw.expansion_gap_check(mu, mu2)
    report("criterion 7 (expansion gap)", "caps and balls clear (2 + 1e-12) up to measure 0.49")


def test_criterion_8_hyperbolic_identity():
    for r in np.linspace(0.03, 3.0, 100):
        lhs, rhs = ms.hyperbolic_double_check(float(r))
        assert abs(lhs - rhs) / lhs < 1e-12
    for r in np.linspace(0.03, 1.5, 100):
        spherical = ms.sphere_cap_area(2.0 * float(r)) / ms.sphere_cap_area(float(r))
        hyperbolic = 4.0 * (1.0 + ms.hyperbolic_ball_volume(float(r)))
        assert spherical < 4.0 < hyperbolic
    report("criterion 8 (hyperbolic identity)", "identity to 1e-12 and curvature-sign contrast on 100 radii")


def test_criterion_9_ball_volume_series():
    for r in np.linspace(0.005, 0.1, 50):
        series = ms.ball_volume_series(ms.BallSeriesQuery(2, 2.0, float(r)))
        assert abs(series / ms.sphere_cap_area(float(r)) - 1.0) <= float(r) ** 3
    series3 = ms.ball_volume_series(ms.BallSeriesQuery(3, 1.5, 0.2))
    assert abs(series3 / (8.0 * math.pi**2) / rot.ball_measure(0.2) - 1.0) <= 1e-3
    report("criterion 9 (ball-volume series)", "surface series within r^3; group series within 1e-3")


def test_criterion_10_determinism(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    journal = tmp_path / "journal.jsonl"
    args = [
        "--journal", str(journal), "cap-scan", "--theta-min", "0.2", "--theta-max", "1.0",
        "--steps", "5", "--samples", "50000", "--seed", "1010",
    ]
    assert cli.main(args + ["--out", str(out1)]) == 0
    record = json.loads(journal.read_text().splitlines()[0])
    cfg = record["config"]
    rerun = [
        "--journal", str(journal), "cap-scan",
        "--theta-min", str(cfg["theta_min"]), "--theta-max", str(cfg["theta_max"]),
        "--steps", str(cfg["steps"]), "--samples", str(cfg["samples"]),
        "--seed", str(cfg["seed"]), "--out", str(out2),
    ]
    assert cli.main(rerun) == 0
    assert out1.read_bytes() == out2.read_bytes()

    # estimates are independent of how the index range is chunked
    spec = st.ball(0.9)
    direct = mc.estimate_measure(spec, 150_000, seed=42)
    hits = 0
    for start, n in [(0, 65536), (65536, 65536), (131072, 150_000 - 131072)]:
        hits += int(np.count_nonzero(st.membership_many(spec, rot.haar_quaternions(42, n, start))))
    assert hits / 150_000 == direct.value
    report("criterion 10 (determinism)", "journal rerun byte-identical; chunked estimate bit-equal")


def test_criterion_11_search(tmp_path):
    single = se.run_search(
        se.SearchConfig(
            family="single-cap", target_measure=0.01, restarts=4, seed=1111,
            grid_shape=(8, 16, 32), optimizer=se.OptimizerConfig(max_evals=300, tol=1e-9),
            mc_samples=100_000,
        )
    )
    theta = single.best_param.values[2]
    target_theta = math.acos(1.0 - 2.0 * 0.01)
    assert abs(theta - target_theta) < 1e-3
    assert not se.conjecture_anomaly(single, gr.build_grid(8, 16, 32))

    two_cap_config = se.SearchConfig(
        family="two-cap-union", target_measure=0.01, restarts=16, seed=2024,
        grid_shape=(12, 24, 48), optimizer=se.OptimizerConfig(max_evals=200, tol=1e-10),
        mc_samples=200_000,
    )
    two_cap = se.run_search(two_cap_config)
    v = two_cap.best_param.values
    a1, a2 = se._axis(v[0], v[1]), se._axis(v[3], v[4])
    separation = min(rot.angle_between(a1, a2), math.pi - rot.angle_between(a1, a2))
    assert separation < 0.05  # pinned exploratory regression
    grid = gr.build_grid(12, 24, 48)
    assert not se.conjecture_anomaly(two_cap, grid)
    report(
        "criterion 11 (search)",
        f"single-cap theta error {abs(theta - target_theta):.2e}; two-cap separation {separation:.4f}",
    )
