"""Growth functionals: the product-growth exponent, inequality slacks, reports.

The growth exponent of a triple (mu_a, mu_b, mu_ab) is the unique r > 0
with mu_ab^(1/r) = mu_a^(1/r) + mu_b^(1/r).  In s = 1/r the generalized
mean (mu_a^s + mu_b^s)^(1/s) decreases from +infinity (s -> 0) to
max(mu_a, mu_b) (s -> infinity), so a root exists and is unique exactly
when mu_ab > max(mu_a, mu_b), and bisection is unconditionally convergent.

Slacks: the connected-unimodular lower bound mu_ab >= min(mu_a + mu_b, 1),
the conjectured sharp doubling floor mu_a2 >= min(1, 4 mu_a (1 - mu_a)),
and the coarse expansion gap mu_a2 >= (2 + 1e-12) mu_a.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

from . import grid as gr
from . import measure_mc as mc
from . import sets as st
from .rotations import ball_measure, derive_seed

TOOL_VERSION = "0.1.0"

EXPANSION_GAP_FACTOR = 2.0 + 1e-12

_BM_REL_TOL = 1e-12


class NoSolutionError(ValueError):
    """mu_ab <= max(mu_a, mu_b): no growth exponent (measurement inconsistency)."""


def bm_growth(mu_a: float, mu_b: float, mu_ab: float) -> float:
    """The unique r with mu_ab^(1/r) = mu_a^(1/r) + mu_b^(1/r), to 1e-12 relative."""
    mu_a, mu_b, mu_ab = float(mu_a), float(mu_b), float(mu_ab)
    if not (mu_a > 0.0 and mu_b > 0.0):
        raise ValueError("mu_a and mu_b must be positive")
    if not mu_ab > max(mu_a, mu_b):
        raise NoSolutionError(
            f"no growth exponent: mu_ab={mu_ab!r} must exceed max(mu_a, mu_b)={max(mu_a, mu_b)!r}"
        )

    def reconstructed(s: float) -> float:
        return (mu_a**s + mu_b**s) ** (1.0 / s)

    lo, hi = 1e-9, 1e9  # bisection on s = 1/r; reconstructed(s) is decreasing
    s = 1.0
    for _ in range(200):
        s = 0.5 * (lo + hi)
        rec = reconstructed(s)
        if abs(rec - mu_ab) <= _BM_REL_TOL * mu_ab:
            break
        if rec > mu_ab:
            lo = s
        else:
            hi = s
    return 1.0 / s


def kemperman_slack(mu_a: float, mu_b: float, mu_ab: float) -> float:
    """mu_ab - min(mu_a + mu_b, 1); nonnegative in any connected unimodular group."""
    return float(mu_ab) - min(float(mu_a) + float(mu_b), 1.0)


def bg_slack(mu_a: float, mu_a2: float) -> float:
    """mu_a2 - min(1, 4 mu_a (1 - mu_a)); zero exactly on the extremal cap family."""
    a = float(mu_a)
    return float(mu_a2) - min(1.0, 4.0 * a * (1.0 - a))


def expansion_gap_check(mu_a: float, mu_a2: float) -> bool:
    """mu_a2 >= (2 + 1e-12) mu_a, the coarse gap every implemented family clears."""
    if not float(mu_a) > 0.0:
        raise ValueError("mu_a must be positive")
    return float(mu_a2) >= EXPANSION_GAP_FACTOR * float(mu_a)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthReport:
    mu_a: mc.MeasureEstimate
    mu_b: mc.MeasureEstimate
    mu_ab_lower: float
    mu_ab_upper: float
    bm_lower: Optional[float]
    bm_upper: Optional[float]
    kemperman_slack: float
    bg_slack: Optional[float]
    seed: Optional[int]
    grid_shape: Optional[tuple]
    spec_a: st.SetSpec
    spec_b: st.SetSpec

    def __post_init__(self):
        if self.mu_ab_lower > self.mu_ab_upper + 1e-15:
            raise ValueError("mu_ab bracket inverted")

    def combined_mu_stderr(self) -> float:
        return math.hypot(self.mu_a.stderr, self.mu_b.stderr)

    def to_json_dict(self) -> dict:
        def estimate_dict(e: mc.MeasureEstimate) -> dict:
            return {"value": e.value, "stderr": e.stderr, "samples": e.samples, "seed": e.seed}

        return {
            "mu_a": estimate_dict(self.mu_a),
            "mu_b": estimate_dict(self.mu_b),
            "mu_ab_lower": self.mu_ab_lower,
            "mu_ab_upper": self.mu_ab_upper,
            "bm_lower": self.bm_lower,
            "bm_upper": self.bm_upper,
            "kemperman_slack": self.kemperman_slack,
            "bg_slack": self.bg_slack,
            "seed": self.seed,
            "grid": list(self.grid_shape) if self.grid_shape is not None else None,
            "specs": {"a": st.spec_to_json(self.spec_a), "b": st.spec_to_json(self.spec_b)},
            "tool_version": TOOL_VERSION,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"


def _exact_estimate(value: float) -> mc.MeasureEstimate:
    return mc.MeasureEstimate(value=value, stderr=0.0, samples=0, seed=0)


def _closed_form_measures(a: st.SetSpec, b: st.SetSpec):
    """(mu_a, mu_b, mu_ab) when the pair has a closed-form product, else None.

    Same-axis caps multiply by adding angles (either axis sign names the same
    set); balls multiply by adding radii.
    """
    if isinstance(a, st.Cap) and isinstance(b, st.Cap):
        dot = sum(x * y for x, y in zip(a.axis, b.axis))
        if abs(abs(dot) - 1.0) <= 1e-12 and a.theta <= math.pi / 2 and b.theta <= math.pi / 2:
            product = st.cap_product_spec(a.theta, b.theta, axis=a.axis)
            return st.cap_measure(a.theta), st.cap_measure(b.theta), st.cap_measure(product.theta)
    if isinstance(a, st.Ball) and isinstance(b, st.Ball):
        product = st.ball_product_spec(a.radius, b.radius)
        return ball_measure(a.radius), ball_measure(b.radius), ball_measure(product.radius)
    return None


def _bm_or_none(mu_a: float, mu_b: float, mu_ab: float) -> Optional[float]:
    try:
        return bm_growth(mu_a, mu_b, mu_ab)
    except NoSolutionError:
        return None


def build_report(
    a_spec: st.SetSpec,
    b_spec: st.SetSpec,
    method: str,
    *,
    grid: Optional[gr.HopfGrid] = None,
    witnesses: int = 256,
    samples: int = 100_000,
    seed: int = 0,
) -> GrowthReport:
    """Assemble measures, the growth-exponent bracket, and inequality slacks.

    ``closed-form`` requires a same-axis cap pair or a ball pair and gives a
    degenerate (exact) bracket.  ``mc+grid`` estimates mu_a, mu_b by Monte
    Carlo, lower-bounds mu_ab by a witness union, and upper-bounds it by the
    certified grid dilation.  Slacks are taken on the certified-upper side,
    the direction in which a violation is a genuine bug signal.
    """
    if method == "closed-form":
        closed = _closed_form_measures(a_spec, b_spec)
        if closed is None:
            raise ValueError("closed-form reports need a same-axis cap pair or a ball pair")
        mu_a, mu_b, mu_ab = closed
        r = _bm_or_none(mu_a, mu_b, mu_ab)
        return GrowthReport(
            mu_a=_exact_estimate(mu_a),
            mu_b=_exact_estimate(mu_b),
            mu_ab_lower=mu_ab,
            mu_ab_upper=mu_ab,
            bm_lower=r,
            bm_upper=r,
            kemperman_slack=kemperman_slack(mu_a, mu_b, mu_ab),
            bg_slack=bg_slack(mu_a, mu_ab) if a_spec == b_spec else None,
            seed=None,
            grid_shape=None,
            spec_a=a_spec,
            spec_b=b_spec,
        )

    if method != "mc+grid":
        raise ValueError(f"unknown report method {method!r}")
    if grid is None:
        raise ValueError("mc+grid reports need a grid")

    est_a = mc.estimate_measure(a_spec, samples, derive_seed(seed, 11))
    est_b = mc.estimate_measure(b_spec, samples, derive_seed(seed, 12))
    lower_est = mc.estimate_product_lower(a_spec, b_spec, witnesses, samples, derive_seed(seed, 13))
    cells_a = gr.rasterize(a_spec, grid)
    cells_b = gr.rasterize(b_spec, grid)
    upper = gr.product_outer(cells_a, cells_b, grid).measure_upper

    lower = min(lower_est.value, upper)  # the estimate may exceed the certified bound only by noise
    return GrowthReport(
        mu_a=est_a,
        mu_b=est_b,
        mu_ab_lower=lower,
        mu_ab_upper=upper,
        bm_lower=_bm_or_none(est_a.value, est_b.value, lower),
        bm_upper=_bm_or_none(est_a.value, est_b.value, upper),
        kemperman_slack=kemperman_slack(est_a.value, est_b.value, upper),
        bg_slack=bg_slack(est_a.value, upper) if a_spec == b_spec else None,
        seed=seed,
        grid_shape=grid.shape_tuple(),
        spec_a=a_spec,
        spec_b=b_spec,
    )
