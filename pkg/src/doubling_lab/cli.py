"""Batch experiment runner.

Subcommands: ``cap-scan``, ``ball-scan``, ``product``, ``grid-build``,
``bm``, ``search``, ``hyperbolic``.  Scans write CSV with fixed headers and
9-significant-digit values; ``product`` and ``search`` write JSON reports.
Every run appends one self-contained JSON line to the journal (full config,
result digest, tool version; the timestamp and wall time are excluded from
the content hash so reruns are byte-comparable).

Exit codes: 0 success, 1 property/cross-check failure, 2 argument or I/O
errors.  All report files are written to a temporary name and atomically
renamed, so a failed run never leaves a partial report.

``DOUBLING_LAB_THREADS`` caps the compiled-kernel worker count (0 = auto);
results are deterministic for any setting.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from . import grid as gr
from . import growth as gw
from . import measure_mc as mc
from . import model_spaces as ms
from . import rotations as rot
from . import search as se
from . import sets as st

DEFAULT_JOURNAL = "doubling-lab-journal.jsonl"


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def _atomic_write(path: str, content: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(content)
    os.replace(tmp, path)


def _apply_thread_cap() -> None:
    raw = os.environ.get("DOUBLING_LAB_THREADS", "0")
    try:
        cap = int(raw)
    except ValueError as exc:
        raise ValueError(f"DOUBLING_LAB_THREADS must be an integer, got {raw!r}") from exc
    if cap < 0:
        raise ValueError("DOUBLING_LAB_THREADS must be >= 0")
    if cap > 0:
        try:
            import numba

            numba.set_num_threads(min(cap, numba.config.NUMBA_NUM_THREADS))
        except ImportError:
            pass


def _record_hash(record: dict) -> str:
    hashed = {k: v for k, v in record.items() if k not in ("wall_time_seconds", "timestamp", "content_hash")}
    blob = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _journal_append(path: str, subcommand: str, config: dict, result: dict, wall_time: float) -> None:
    record = {
        "subcommand": subcommand,
        "config": config,
        "result": result,
        "tool_version": __version__,
        "wall_time_seconds": wall_time,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    record["content_hash"] = _record_hash(record)
    with open(path, "a") as fh:
        fh.write(json.dumps(record, separators=(",", ":")) + "\n")


def _csv_sha256(content: str) -> str:
    return hashlib.sha256(content.encode()).hexdigest()


# ---------------------------------------------------------------------------
# scans
# ---------------------------------------------------------------------------

def cmd_cap_scan(args) -> int:
    if not 0.0 < args.theta_min < args.theta_max <= math.pi / 2:
        print("cap-scan: need 0 < theta-min < theta-max <= pi/2", file=sys.stderr)
        return 2
    if args.steps < 2:
        print("cap-scan: need steps >= 2", file=sys.stderr)
        return 2
    start = time.monotonic()
    thetas = np.linspace(args.theta_min, args.theta_max, args.steps)
    rows = ["theta,mu,mu2_closed,mu_mc,mu2_mc,ratio,bg_slack,kemperman_slack"]
    ok = True
    for i, theta in enumerate(thetas):
        m, m2 = st.cap_doubling(float(theta))
        spec = st.cap(rot.EZ, float(theta))
        square = st.cap_product_spec(float(theta), float(theta))
        est = mc.estimate_measure(spec, args.samples, rot.derive_seed(args.seed, 2 * i))
        est2 = mc.estimate_measure(square, args.samples, rot.derive_seed(args.seed, 2 * i + 1))
        if abs(est.value - m) > 4 * est.stderr or abs(est2.value - m2) > 4 * est2.stderr:
            ok = False
        rows.append(
            ",".join(
                _fmt(v)
                for v in (
                    theta, m, m2, est.value, est2.value, m2 / m,
                    gw.bg_slack(m, m2), gw.kemperman_slack(m, m, m2),
                )
            )
        )
    content = "\n".join(rows) + "\n"
    _atomic_write(args.out, content)
    config = {
        "theta_min": args.theta_min, "theta_max": args.theta_max, "steps": args.steps,
        "samples": args.samples, "seed": args.seed, "out": args.out,
    }
    result = {"rows": args.steps, "cross_check_ok": ok, "csv_sha256": _csv_sha256(content)}
    _journal_append(args.journal, "cap-scan", config, result, time.monotonic() - start)
    return 0 if ok else 1


def cmd_ball_scan(args) -> int:
    if not 0.0 < args.r_min < args.r_max <= math.pi / 2:
        print("ball-scan: need 0 < r-min < r-max <= pi/2", file=sys.stderr)
        return 2
    if args.steps < 2:
        print("ball-scan: need steps >= 2", file=sys.stderr)
        return 2
    start = time.monotonic()
    radii = np.linspace(args.r_min, args.r_max, args.steps)
    rows = ["r,mu,mu2_closed,mu_mc,mu2_mc,ratio,bg_slack,kemperman_slack"]
    ok = True
    for i, r in enumerate(radii):
        m = rot.ball_measure(float(r))
        m2 = rot.ball_measure(min(2.0 * float(r), math.pi))
        est = mc.estimate_measure(st.ball(float(r)), args.samples, rot.derive_seed(args.seed, 2 * i))
        est2 = mc.estimate_measure(
            st.ball_product_spec(float(r), float(r)), args.samples, rot.derive_seed(args.seed, 2 * i + 1)
        )
        if abs(est.value - m) > 4 * est.stderr or abs(est2.value - m2) > 4 * est2.stderr:
            ok = False
        rows.append(
            ",".join(
                _fmt(v)
                for v in (
                    r, m, m2, est.value, est2.value, m2 / m,
                    gw.bg_slack(m, m2), gw.kemperman_slack(m, m, m2),
                )
            )
        )
    content = "\n".join(rows) + "\n"
    _atomic_write(args.out, content)
    config = {
        "r_min": args.r_min, "r_max": args.r_max, "steps": args.steps,
        "samples": args.samples, "seed": args.seed, "out": args.out,
    }
    result = {"rows": args.steps, "cross_check_ok": ok, "csv_sha256": _csv_sha256(content)}
    _journal_append(args.journal, "ball-scan", config, result, time.monotonic() - start)
    return 0 if ok else 1


def cmd_hyperbolic(args) -> int:
    if not 0.0 < args.r_min < args.r_max:
        print("hyperbolic: need 0 < r-min < r-max", file=sys.stderr)
        return 2
    if args.steps < 2:
        print("hyperbolic: need steps >= 2", file=sys.stderr)
        return 2
    start = time.monotonic()
    radii = np.linspace(args.r_min, args.r_max, args.steps)
    rows = ["r,volume,volume_2r,doubling_ratio,identity_residual"]
    ok = True
    for r in radii:
        m = ms.hyperbolic_ball_volume(float(r))
        lhs, rhs = ms.hyperbolic_double_check(float(r))
        residual = abs(lhs - rhs) / lhs
        ratio = lhs / m
        if residual >= 1e-12 or not ratio > 4.0:
            ok = False
        rows.append(",".join(_fmt(v) for v in (r, m, lhs, ratio, residual)))
    content = "\n".join(rows) + "\n"
    if args.out:
        _atomic_write(args.out, content)
    else:
        sys.stdout.write(content)
    config = {"r_min": args.r_min, "r_max": args.r_max, "steps": args.steps, "out": args.out}
    result = {"rows": args.steps, "identity_ok": ok, "csv_sha256": _csv_sha256(content)}
    _journal_append(args.journal, "hyperbolic", config, result, time.monotonic() - start)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# grid / product / bm / search
# ---------------------------------------------------------------------------

def cmd_grid_build(args) -> int:
    if min(args.n_eta, args.n_xi1, args.n_xi2) < 1:
        print("grid-build: subdivision counts must be >= 1", file=sys.stderr)
        return 2
    start = time.monotonic()
    grid = gr.build_grid(args.n_eta, args.n_xi1, args.n_xi2)
    gr.save_grid(grid, args.cache)
    config = {"n_eta": args.n_eta, "n_xi1": args.n_xi1, "n_xi2": args.n_xi2, "cache": args.cache}
    result = {"cells": grid.n_cells, "radius": grid.radius, "weight_sum": float(grid.weights.sum())}
    _journal_append(args.journal, "grid-build", config, result, time.monotonic() - start)
    print(f"grid-build: {grid.n_cells} cells, radius {_fmt(grid.radius)}, cache {args.cache}")
    return 0


def _load_spec_file(path: str) -> st.SetSpec:
    with open(path) as fh:
        return st.spec_from_json(json.load(fh))


def cmd_product(args) -> int:
    start = time.monotonic()
    try:
        spec_a = _load_spec_file(args.a)
        spec_b = _load_spec_file(args.b)
        grid = gr.load_grid(args.grid)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"product: {exc}", file=sys.stderr)
        return 2
    report = gw.build_report(
        spec_a, spec_b, "mc+grid",
        grid=grid, witnesses=args.witnesses, samples=args.samples, seed=args.seed,
    )
    _atomic_write(args.report, report.to_json())
    config = {
        "a": args.a, "b": args.b, "grid": args.grid, "witnesses": args.witnesses,
        "samples": args.samples, "seed": args.seed, "report": args.report,
    }
    result = report.to_json_dict()
    _journal_append(args.journal, "product", config, result, time.monotonic() - start)
    # 1e-12 absolute allowance for the rounding of large weight sums
    if report.mu_ab_lower > report.mu_ab_upper + 1e-12:
        print("product: sandwich inversion (lower bound above certified upper)", file=sys.stderr)
        return 1
    if report.kemperman_slack < -3.0 * report.combined_mu_stderr() - 1e-12:
        print("product: sum-bound slack below the -3 stderr allowance", file=sys.stderr)
        return 1
    print(
        f"product: mu(AB) in [{_fmt(report.mu_ab_lower)}, {_fmt(report.mu_ab_upper)}], "
        f"growth exponent in [{report.bm_lower and _fmt(report.bm_lower)}, "
        f"{report.bm_upper and _fmt(report.bm_upper)}]"
    )
    return 0


def cmd_bm(args) -> int:
    start = time.monotonic()
    try:
        r = gw.bm_growth(args.mu_a, args.mu_b, args.mu_ab)
    except ValueError as exc:
        print(f"bm: {exc}", file=sys.stderr)
        return 2
    print(f"r = {_fmt(r)}")
    config = {"mu_a": args.mu_a, "mu_b": args.mu_b, "mu_ab": args.mu_ab}
    _journal_append(args.journal, "bm", config, {"r": r}, time.monotonic() - start)
    return 0


_SEARCH_CONFIG_FIELDS = ("family", "target_measure", "restarts", "seed", "grid", "optimizer", "mc_samples")
_OPTIMIZER_FIELDS = ("max_evals", "tol", "reflect", "expand", "contract", "shrink")


def _parse_search_config(raw: dict) -> se.SearchConfig:
    missing = [k for k in _SEARCH_CONFIG_FIELDS if k not in raw]
    if missing:
        raise ValueError(f"search config missing fields: {missing}")
    opt_raw = raw["optimizer"]
    missing = [k for k in _OPTIMIZER_FIELDS if k not in opt_raw]
    if missing:
        raise ValueError(f"search optimizer config missing fields: {missing}")
    return se.SearchConfig(
        family=raw["family"],
        target_measure=float(raw["target_measure"]),
        restarts=int(raw["restarts"]),
        seed=int(raw["seed"]),
        grid_shape=tuple(int(c) for c in raw["grid"]),
        optimizer=se.OptimizerConfig(
            max_evals=int(opt_raw["max_evals"]),
            tol=float(opt_raw["tol"]),
            reflect=float(opt_raw["reflect"]),
            expand=float(opt_raw["expand"]),
            contract=float(opt_raw["contract"]),
            shrink=float(opt_raw["shrink"]),
        ),
        mc_samples=int(raw["mc_samples"]),
    )


def cmd_search(args) -> int:
    start = time.monotonic()
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
        config = _parse_search_config(raw)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"search: {exc}", file=sys.stderr)
        return 2
    result = se.run_search(config)
    payload = se.search_result_json_dict(result, config)
    content = json.dumps(payload, indent=2) + "\n"
    if args.out:
        _atomic_write(args.out, content)
    else:
        sys.stdout.write(content)
    _journal_append(args.journal, "search", raw, payload, time.monotonic() - start)
    anomaly_grid = gr.build_grid(*config.grid_shape)
    if se.conjecture_anomaly(result, anomaly_grid):
        print(
            "search: conjecture anomaly, certified bound fell below the cap floor "
            "beyond the grid gap (bug signal)",
            file=sys.stderr,
        )
        return 1
    print(f"search: best objective {_fmt(result.best_objective)} after {result.evaluations} evaluations")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="doubling-lab",
        description="Measure-doubling experiments in the 3D rotation group",
    )
    parser.add_argument("--journal", default=DEFAULT_JOURNAL, help="append-only JSONL journal path")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("cap-scan", help="closed-form vs Monte Carlo doubling of the cap family")
    p.add_argument("--theta-min", type=float, required=True)
    p.add_argument("--theta-max", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_cap_scan)

    p = sub.add_parser("ball-scan", help="closed-form vs Monte Carlo doubling of metric balls")
    p.add_argument("--r-min", type=float, required=True)
    p.add_argument("--r-max", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_ball_scan)

    p = sub.add_parser("product", help="bracket mu(AB) for set specs via witnesses and the grid")
    p.add_argument("--a", required=True, help="JSON set spec for A")
    p.add_argument("--b", required=True, help="JSON set spec for B")
    p.add_argument("--grid", required=True, help="grid cache file")
    p.add_argument("--witnesses", type=int, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--report", required=True, help="output report JSON")
    p.set_defaults(fn=cmd_product)

    p = sub.add_parser("grid-build", help="build and cache a cell grid")
    p.add_argument("--n-eta", type=int, required=True)
    p.add_argument("--n-xi1", type=int, required=True)
    p.add_argument("--n-xi2", type=int, required=True)
    p.add_argument("--cache", required=True)
    p.set_defaults(fn=cmd_grid_build)

    p = sub.add_parser("bm", help="solve for the growth exponent of a measure triple")
    p.add_argument("--mu-a", type=float, required=True)
    p.add_argument("--mu-b", type=float, required=True)
    p.add_argument("--mu-ab", type=float, required=True)
    p.set_defaults(fn=cmd_bm)

    p = sub.add_parser("search", help="minimize the certified doubling bound over a family")
    p.add_argument("--config", required=True, help="search configuration JSON")
    p.add_argument("--out", help="result JSON path (stdout when omitted)")
    p.set_defaults(fn=cmd_search)

    p = sub.add_parser("hyperbolic", help="hyperbolic-plane doubling identity scan")
    p.add_argument("--r-min", type=float, required=True)
    p.add_argument("--r-max", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out", help="CSV path (stdout when omitted)")
    p.set_defaults(fn=cmd_hyperbolic)

    return parser


def main(argv=None) -> int:
    try:
        _apply_thread_cap()
    except ValueError as exc:
        print(f"doubling-lab: {exc}", file=sys.stderr)
        return 2
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (mc.RejectionBudgetError, gw.NoSolutionError) as exc:
        print(f"doubling-lab: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"doubling-lab: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
