"""Derivative-free search for small-doubling sets at a fixed target measure.

Parametric families (a single cap, a union of two caps, a cap-ball union)
are scored by a certified upper bound on the squared set's measure plus a
measure-constraint penalty; minimizing probes whether anything in the
family beats the conjectured extremal caps.  The objective must be
deterministic for the simplex comparisons to be meaningful, so the upper
bound comes from the grid dilation (never a Monte Carlo point value) and
the penalty measure is the exact closed form for single-leaf sets or an
estimate over a cached, fixed-seed sample bank otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import grid as gr
from . import sets as st
from .rotations import ball_measure, derive_seed, haar_quaternions

FAMILIES = ("single-cap", "two-cap-union", "cap-ball-union")

_RADIUS_LO = 1e-3
_RADIUS_HI = math.pi / 2
_PENALTY_WEIGHT = 100.0


@dataclass(frozen=True)
class OptimizerConfig:
    max_evals: int
    tol: float
    reflect: float = 1.0
    expand: float = 2.0
    contract: float = 0.5
    shrink: float = 0.5


@dataclass(frozen=True)
class FamilyParam:
    family: str
    values: tuple
    target_measure: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if len(self.values) != family_dimension(self.family):
            raise ValueError(
                f"{self.family} takes {family_dimension(self.family)} parameters, got {len(self.values)}"
            )


@dataclass(frozen=True)
class SearchConfig:
    family: str
    target_measure: float
    restarts: int
    seed: int
    grid_shape: tuple
    optimizer: OptimizerConfig
    mc_samples: int


@dataclass(frozen=True)
class SearchResult:
    best_param: FamilyParam
    best_objective: float
    evaluations: int
    seed: int
    trace: tuple  # per restart: (parameter tuple, objective)


def family_dimension(family: str) -> int:
    return {"single-cap": 3, "two-cap-union": 6, "cap-ball-union": 4}[family]


def _axis(colat: float, lon: float) -> np.ndarray:
    s = math.sin(colat)
    return np.array([s * math.cos(lon), s * math.sin(lon), math.cos(colat)])


def _clip_radius(r: float) -> float:
    return min(max(float(r), _RADIUS_LO), _RADIUS_HI)


def param_to_spec(p: FamilyParam) -> st.SetSpec:
    """Materialize the parameter vector; angles wrap, radii clip to (0, pi/2]."""
    v = p.values
    if p.family == "single-cap":
        return st.cap(_axis(v[0], v[1]), _clip_radius(v[2]))
    if p.family == "two-cap-union":
        return st.union(
            st.cap(_axis(v[0], v[1]), _clip_radius(v[2])),
            st.cap(_axis(v[3], v[4]), _clip_radius(v[5])),
        )
    return st.union(
        st.cap(_axis(v[0], v[1]), _clip_radius(v[2])),
        st.ball(_clip_radius(v[3])),
    )


def _ball_radius_for_measure(m: float) -> float:
    lo, hi = 0.0, math.pi
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if ball_measure(mid) < m:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class ObjectiveContext:
    """Grid and fixed sample bank shared by all evaluations of one search."""

    def __init__(self, grid: gr.HopfGrid, mc_samples: int, seed: int):
        self.grid = grid
        self.sample_bank = haar_quaternions(derive_seed(seed, 0xBA5E), int(mc_samples))

    def measure_estimate(self, spec: st.SetSpec) -> float:
        if isinstance(spec, st.Cap):
            return st.cap_measure(spec.theta)
        if isinstance(spec, st.Ball):
            return ball_measure(spec.radius)
        return float(np.count_nonzero(st.membership_many(spec, self.sample_bank))) / self.sample_bank.shape[0]


def objective(p: FamilyParam, context: ObjectiveContext) -> float:
    """Certified upper bound on mu(A^2) plus the measure-constraint penalty."""
    spec = param_to_spec(p)
    cells = gr.rasterize(spec, context.grid)
    upper = gr.product_outer(cells, cells, context.grid).measure_upper
    mu_hat = context.measure_estimate(spec)
    return upper + _PENALTY_WEIGHT * abs(mu_hat - p.target_measure)


# ---------------------------------------------------------------------------
# Nelder-Mead
# ---------------------------------------------------------------------------

def nelder_mead(
    fn: Callable[[np.ndarray], float],
    initial_simplex: np.ndarray,
    config: OptimizerConfig,
):
    """Standard simplex minimization; deterministic for a fixed simplex and config.

    Returns (best point, best value, evaluations).  Terminates when the
    simplex value spread drops below ``tol`` or the evaluation budget runs
    out.  The initial simplex must be affinely independent.
    """
    simplex = np.array(initial_simplex, dtype=float)
    n_pts, dim = simplex.shape
    if n_pts != dim + 1:
        raise ValueError(f"simplex needs {dim + 1} points for dimension {dim}")
    if config.max_evals < dim + 1:
        raise ValueError("max_evals must cover the initial simplex")
    spans = simplex[1:] - simplex[0]
    if np.linalg.matrix_rank(spans, tol=1e-12) < dim:
        raise ValueError("initial simplex is affinely dependent")

    values = np.array([fn(x) for x in simplex])
    evals = n_pts
    while evals < config.max_evals:
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        if values[-1] - values[0] < config.tol:
            break
        centroid = simplex[:-1].mean(axis=0)
        reflected = centroid + config.reflect * (centroid - simplex[-1])
        f_reflected = fn(reflected)
        evals += 1
        if f_reflected < values[0]:
            expanded = centroid + config.expand * (reflected - centroid)
            f_expanded = fn(expanded)
            evals += 1
            if f_expanded < f_reflected:
                simplex[-1], values[-1] = expanded, f_expanded
            else:
                simplex[-1], values[-1] = reflected, f_reflected
            continue
        if f_reflected < values[-2]:
            simplex[-1], values[-1] = reflected, f_reflected
            continue
        if f_reflected < values[-1]:
            contracted = centroid + config.contract * (reflected - centroid)
        else:
            contracted = centroid + config.contract * (simplex[-1] - centroid)
        f_contracted = fn(contracted)
        evals += 1
        if f_contracted < min(f_reflected, values[-1]):
            simplex[-1], values[-1] = contracted, f_contracted
            continue
        # shrink toward the best vertex
        for k in range(1, n_pts):
            simplex[k] = simplex[0] + config.shrink * (simplex[k] - simplex[0])
            values[k] = fn(simplex[k])
            evals += 1
            if evals >= config.max_evals:
                break
    order = np.argsort(values, kind="stable")
    return simplex[order[0]].copy(), float(values[order[0]]), evals


# ---------------------------------------------------------------------------
# restarts
# ---------------------------------------------------------------------------

def _initial_point(family: str, target: float, rng: np.random.Generator) -> np.ndarray:
    theta_hat = st.cap_radius_for_measure(target)
    ball_hat = _ball_radius_for_measure(target)

    def axis_angles():
        return [math.acos(1.0 - 2.0 * rng.uniform()), 2.0 * math.pi * rng.uniform()]

    def radius_near(base):
        return base * rng.uniform(0.6, 1.5)

    if family == "single-cap":
        return np.array(axis_angles() + [radius_near(theta_hat)])
    if family == "two-cap-union":
        first = axis_angles()
        if rng.uniform() < 0.5:
            # half the starts place the axes close together so the merged
            # configuration's basin is always explored among the restarts
            second = list(np.array(first) + rng.normal(0.0, 0.2, 2))
        else:
            second = axis_angles()
        return np.array(first + [radius_near(theta_hat)] + second + [radius_near(theta_hat)])
    return np.array(axis_angles() + [radius_near(theta_hat), radius_near(ball_hat)])


def _initial_simplex(point: np.ndarray) -> np.ndarray:
    dim = point.size
    simplex = np.tile(point, (dim + 1, 1))
    for k in range(dim):
        # angles get coarser steps than radii
        simplex[k + 1, k] += 0.2 if _is_angle_coordinate(dim, k) else 0.08
    return simplex


def _is_angle_coordinate(dim: int, k: int) -> bool:
    if dim == 3:
        return k < 2
    if dim == 6:
        return k % 3 != 2
    return k < 2  # dim 4: colat, lon, cap radius, ball radius


def run_search(config: SearchConfig) -> SearchResult:
    """Seeded random restarts of the simplex search; the best restart wins."""
    if config.restarts < 1:
        raise ValueError("restarts must be >= 1")
    if config.family not in FAMILIES:
        raise ValueError(f"unknown family {config.family!r}")
    grid = gr.build_grid(*config.grid_shape)
    context = ObjectiveContext(grid, config.mc_samples, config.seed)

    def fn(x: np.ndarray) -> float:
        return objective(FamilyParam(config.family, tuple(float(c) for c in x), config.target_measure), context)

    best_x = None
    best_f = math.inf
    total_evals = 0
    trace = []
    for restart in range(config.restarts):
        rng = np.random.default_rng(derive_seed(config.seed, restart))
        x0 = _initial_point(config.family, config.target_measure, rng)
        x, f, evals = nelder_mead(fn, _initial_simplex(x0), config.optimizer)
        total_evals += evals
        trace.append((tuple(float(c) for c in x), f))
        if f < best_f:  # ties keep the earliest restart
            best_x, best_f = x, f
    # polish the incumbent with a fresh small simplex; recorded as the final
    # trace entry and can only improve the result
    polish = np.tile(best_x, (best_x.size + 1, 1))
    for k in range(best_x.size):
        polish[k + 1, k] += 0.02
    x, f, evals = nelder_mead(fn, polish, config.optimizer)
    total_evals += evals
    trace.append((tuple(float(c) for c in x), f))
    if f < best_f:
        best_x, best_f = x, f
    best_param = FamilyParam(config.family, tuple(float(c) for c in best_x), config.target_measure)
    return SearchResult(
        best_param=best_param,
        best_objective=best_f,
        evaluations=total_evals,
        seed=config.seed,
        trace=tuple(trace),
    )


def conjecture_anomaly(result: SearchResult, grid: gr.HopfGrid) -> bool:
    """True when the certified bound undercuts the conjectured cap floor.

    The best objective upper-bounds mu(A^2) for a set of measure close to
    the target, so falling below 4 m (1 - m) by more than twice the grid
    sandwich gap of the set itself cannot be explained by discretization
    and signals a bug (or a counterexample).
    """
    m = result.best_param.target_measure
    cells = gr.rasterize(param_to_spec(result.best_param), grid)
    gap = cells.measure_upper - cells.measure_lower
    return result.best_objective < 4.0 * m * (1.0 - m) - 2.0 * gap


def search_result_json_dict(result: SearchResult, config: SearchConfig) -> dict:
    return {
        "family": config.family,
        "target_measure": config.target_measure,
        "restarts": config.restarts,
        "seed": config.seed,
        "grid": list(config.grid_shape),
        "optimizer": {
            "max_evals": config.optimizer.max_evals,
            "tol": config.optimizer.tol,
            "reflect": config.optimizer.reflect,
            "expand": config.optimizer.expand,
            "contract": config.optimizer.contract,
            "shrink": config.optimizer.shrink,
        },
        "mc_samples": config.mc_samples,
        "best_param": list(result.best_param.values),
        "best_objective": result.best_objective,
        "evaluations": result.evaluations,
        "trace": [{"param": list(p), "objective": f} for p, f in result.trace],
    }
