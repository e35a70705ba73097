"""Deterministic partition of the rotation group into Hopf-coordinate cells.

The unit-quaternion chart (eta, xi1, xi2) in [0, pi/2] x [0, pi) x [0, 2 pi),

    q = (cos eta cos xi1, cos eta sin xi1, sin eta cos xi2, sin eta sin xi2),

has volume element sin(eta) cos(eta) deta dxi1 dxi2; halving the xi1 range
selects one sheet of the double cover (the antipodal map is the shift
(xi1, xi2) -> (xi1 + pi, xi2 + pi)), so uniform subdivisions tile the
rotation group up to measure zero with exact closed-form Haar weights

    weight = (sin^2 eta_hi - sin^2 eta_lo)/2 * dxi1 * dxi2 / pi^2.

Each cell's rotation-metric radius about its midpoint is bounded by
deta + dxi1 + dxi2: the chart speeds are at most 1 on the 3-sphere, so a
coordinate path from the center costs at most the half-extent sum
(deta + dxi1 + dxi2)/2, and the rotation metric is twice the 3-sphere
metric.

Rasterization classifies cells against a 1-Lipschitz set value f at the
center c: f(c) <= -radius certifies the whole cell inside, f(c) >= +radius
certifies it outside, anything else is boundary.  Sums of inner/outer
weights bracket the measure.

The product dilation uses bi-invariance, d(g1 g2, c1 c2) <= d(g1, c1) +
d(g2, c2): every product of two outer cells lies within the summed radii
of the product of centers, so marking all cells within reach of all pair
products yields a certified superset of the product set.  To keep the
pair loop tractable the pair products are first deduplicated at cell
resolution (locate the product, remember the cell) and the marking radius
is widened by one cell radius; the result is a certified superset of the
literal per-pair rule.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from . import sets as st
from .rotations import Rotation, quat_canonical, quat_mul

MAGIC = b"SO3GRID1"

_DISTANCE_PAD = 1e-9


class CorruptCacheError(ValueError):
    """Raised when a grid cache file fails validation."""


@dataclass(frozen=True)
class HopfGrid:
    n_eta: int
    n_xi1: int
    n_xi2: int
    centers: np.ndarray  # (N, 4) chart-lift quaternions at coordinate midpoints
    radii: np.ndarray  # (N,) rotation-metric radius bound, uniform
    weights: np.ndarray  # (N,) exact Haar weights

    @property
    def n_cells(self) -> int:
        return self.n_eta * self.n_xi1 * self.n_xi2

    @property
    def d_eta(self) -> float:
        return (math.pi / 2.0) / self.n_eta

    @property
    def d_xi1(self) -> float:
        return math.pi / self.n_xi1

    @property
    def d_xi2(self) -> float:
        return (2.0 * math.pi) / self.n_xi2

    @property
    def radius(self) -> float:
        return self.d_eta + self.d_xi1 + self.d_xi2

    def shape_tuple(self) -> tuple:
        return (self.n_eta, self.n_xi1, self.n_xi2)


@dataclass
class CellSet:
    """Certified inner/outer cell classification of a set on a grid."""

    grid: HopfGrid
    inner: np.ndarray = field(repr=False)  # bool (N,), certified subset
    outer: np.ndarray = field(repr=False)  # bool (N,), certified superset

    def __post_init__(self):
        if np.any(self.inner & ~self.outer):
            raise ValueError("inner cells must be contained in outer cells")

    @property
    def measure_lower(self) -> float:
        return float(self.grid.weights[self.inner].sum())

    @property
    def measure_upper(self) -> float:
        return float(self.grid.weights[self.outer].sum())


def build_grid(n_eta: int, n_xi1: int, n_xi2: int) -> HopfGrid:
    n_eta, n_xi1, n_xi2 = int(n_eta), int(n_xi1), int(n_xi2)
    if min(n_eta, n_xi1, n_xi2) < 1:
        raise ValueError("subdivision counts must be >= 1")
    d_eta = (math.pi / 2.0) / n_eta
    d_xi1 = math.pi / n_xi1
    d_xi2 = (2.0 * math.pi) / n_xi2

    eta_edges = np.linspace(0.0, math.pi / 2.0, n_eta + 1)
    eta_mid = (np.arange(n_eta) + 0.5) * d_eta
    xi1_mid = (np.arange(n_xi1) + 0.5) * d_xi1
    xi2_mid = (np.arange(n_xi2) + 0.5) * d_xi2

    eta, xi1, xi2 = np.meshgrid(eta_mid, xi1_mid, xi2_mid, indexing="ij")
    eta, xi1, xi2 = eta.ravel(), xi1.ravel(), xi2.ravel()
    centers = np.stack(
        [
            np.cos(eta) * np.cos(xi1),
            np.cos(eta) * np.sin(xi1),
            np.sin(eta) * np.cos(xi2),
            np.sin(eta) * np.sin(xi2),
        ],
        axis=1,
    )

    row_weight = np.diff(np.sin(eta_edges) ** 2) / 2.0 * d_xi1 * d_xi2 / math.pi**2
    weights = np.repeat(row_weight, n_xi1 * n_xi2)
    radius = d_eta + d_xi1 + d_xi2
    radii = np.full(n_eta * n_xi1 * n_xi2, radius)
    return HopfGrid(n_eta=n_eta, n_xi1=n_xi1, n_xi2=n_xi2, centers=centers, radii=radii, weights=weights)


# ---------------------------------------------------------------------------
# locating
# ---------------------------------------------------------------------------

def locate_many(grid: HopfGrid, quats: np.ndarray) -> np.ndarray:
    """Flat cell indices by analytic chart inversion; accepts either lift sign."""
    q = np.atleast_2d(np.asarray(quats, dtype=float))
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    eta = np.arcsin(np.clip(np.sqrt(y * y + z * z), 0.0, 1.0))
    t1 = np.arctan2(x, w)
    flip = t1 < 0.0
    t1 = np.where(flip, t1 + math.pi, t1)
    high = t1 >= math.pi  # the atan2 == pi edge
    t1 = np.where(high, t1 - math.pi, t1)
    flip = flip ^ high
    t2 = np.arctan2(z, y) + np.where(flip, math.pi, 0.0)
    t2 = np.mod(t2, 2.0 * math.pi)

    i_eta = np.minimum((eta / grid.d_eta).astype(np.int64), grid.n_eta - 1)
    i1 = np.minimum((t1 / grid.d_xi1).astype(np.int64), grid.n_xi1 - 1)
    i2 = np.minimum((t2 / grid.d_xi2).astype(np.int64), grid.n_xi2 - 1)
    return (i_eta * grid.n_xi1 + i1) * grid.n_xi2 + i2


def locate(grid: HopfGrid, g: Rotation) -> int:
    return int(locate_many(grid, np.array(g))[0])


def cell_center(grid: HopfGrid, index: int) -> Rotation:
    q = quat_canonical(grid.centers[int(index)])[0]
    return Rotation(*(float(c) for c in q))


# ---------------------------------------------------------------------------
# rasterization
# ---------------------------------------------------------------------------

def rasterize(spec: st.SetSpec, grid: HopfGrid) -> CellSet:
    """Certified inner/outer classification from the 1-Lipschitz set value."""
    f = st.lipschitz_eval_many(spec, grid.centers)
    inner = f <= -grid.radii
    outer = f < grid.radii
    return CellSet(grid=grid, inner=inner, outer=outer)


# ---------------------------------------------------------------------------
# product dilation
# ---------------------------------------------------------------------------

def _edge_tables(grid: HopfGrid):
    sin2_eta = np.sin(np.linspace(0.0, math.pi / 2.0, grid.n_eta + 1)) ** 2
    b1 = np.arange(grid.n_xi1 + 1) * grid.d_xi1
    half = grid.n_xi2 // 2
    b2 = np.arange(half + 1) * grid.d_xi2
    return sin2_eta, np.cos(b1), np.sin(b1), np.cos(b2), np.sin(b2)


def _pair_visit_reference(aq: np.ndarray, bq: np.ndarray, grid: HopfGrid, visited: np.ndarray):
    """Vectorized reference for the pair kernels (also the odd-n_xi2 path)."""
    for i in range(aq.shape[0]):
        products = quat_mul(aq[i : i + 1], bq)
        visited[locate_many(grid, products)] = 1


def _orbit_groups(grid: HopfGrid, indices: np.ndarray, side: str):
    """Group cells into circle orbits for the orbit pair kernel.

    Under left multiplication by e_t the chart bins step (+1, +1), under
    right multiplication (+1, -1); the conserved bin combination is
    (k1 -/+ k2) mod n_xi2 per eta row, and the orbit member at offset
    s = k1 is the representative cell (eta, 0, k2_rep) moved s steps.
    """
    n1, n2 = grid.n_xi1, grid.n_xi2
    e = indices // (n1 * n2)
    rem = indices - e * (n1 * n2)
    k1 = rem // n2
    k2 = rem - k1 * n2
    if side == "left":
        rep_k2 = (k2 - k1) % n2
    else:
        rep_k2 = (k2 + k1) % n2
    key = e * n2 + rep_k2
    order = np.argsort(key, kind="stable")
    key_sorted = key[order]
    offsets = k1[order].astype(np.int64)
    boundaries = np.nonzero(np.diff(key_sorted))[0] + 1
    ptr = np.concatenate([[0], boundaries, [key_sorted.size]]).astype(np.int64)
    uniq = key_sorted[ptr[:-1]]
    rep_e = uniq // n2
    rep_xi2_bin = uniq - rep_e * n2
    eta = (rep_e + 0.5) * grid.d_eta
    xi1 = 0.5 * grid.d_xi1
    xi2 = (rep_xi2_bin + 0.5) * grid.d_xi2
    reps = np.stack(
        [
            np.cos(eta) * math.cos(xi1),
            np.cos(eta) * math.sin(xi1),
            np.sin(eta) * np.cos(xi2),
            np.sin(eta) * np.sin(xi2),
        ],
        axis=1,
    )
    return np.ascontiguousarray(reps), ptr, offsets


def _dilate_reference(u_indices: np.ndarray, grid: HopfGrid, reach: float, marked: np.ndarray):
    """Exact metric-ball dilation; a subset of the kernel's box dilation."""
    cos_threshold = math.cos(reach / 2.0)
    dots = np.abs(grid.centers @ grid.centers[u_indices].T)
    marked[np.any(dots >= cos_threshold, axis=1)] = 1


def product_outer(a: CellSet, b: CellSet, grid: HopfGrid) -> CellSet:
    """Certified outer cover of the product set of two rasterized sets.

    Every product of points of outer cells i, j lies within radius_i +
    radius_j of the center product (bi-invariance), hence within
    2r + r_m of the center of the product's own cell m; marking every
    cell k with d(c_k, c_m) <= 2r + r_m + r_k over the deduplicated
    product cells m covers the product set.
    """
    if a.grid is not grid or b.grid is not grid:
        if (
            a.grid.shape_tuple() != grid.shape_tuple()
            or b.grid.shape_tuple() != grid.shape_tuple()
            or not np.array_equal(a.grid.centers, grid.centers)
            or not np.array_equal(b.grid.centers, grid.centers)
        ):
            raise ValueError("cell sets must live on the given grid")

    n = grid.n_cells
    ia = np.nonzero(a.outer)[0]
    ib = np.nonzero(b.outer)[0]
    empty = np.zeros(n, dtype=bool)
    if ia.size == 0 or ib.size == 0:
        return CellSet(grid=grid, inner=empty.copy(), outer=empty)

    r = grid.radius
    reach = 4.0 * r + _DISTANCE_PAD  # 2r pair slack + r_m dedupe + r_k coverage
    if reach >= math.pi:
        return CellSet(grid=grid, inner=empty, outer=np.ones(n, dtype=bool))

    visited = np.zeros(n, dtype=np.uint8)
    if grid.n_xi2 == 2 * grid.n_xi1:
        sin2_eta, cos_b1, sin_b1, cos_b2, sin_b2 = _edge_tables(grid)
        rep_a, ptr_a, off_a = _orbit_groups(grid, ia, "left")
        rep_b, ptr_b, off_b = _orbit_groups(grid, ib, "right")
        _kernels.pair_visit_orbits(
            rep_a, ptr_a, off_a, rep_b, ptr_b, off_b,
            sin2_eta, cos_b1, sin_b1, cos_b2, sin_b2,
            grid.n_eta, grid.n_xi1, grid.n_xi2, visited,
        )
    elif grid.n_xi2 % 2 == 0:
        sin2_eta, cos_b1, sin_b1, cos_b2, sin_b2 = _edge_tables(grid)
        aq = np.ascontiguousarray(grid.centers[ia])
        bq = np.ascontiguousarray(grid.centers[ib])
        _kernels.pair_visit(
            aq, bq, sin2_eta, cos_b1, sin_b1, cos_b2, sin_b2,
            grid.n_eta, grid.n_xi1, grid.n_xi2, visited,
        )
    else:
        aq = np.ascontiguousarray(grid.centers[ia])
        bq = np.ascontiguousarray(grid.centers[ib])
        _pair_visit_reference(aq, bq, grid, visited)

    u_indices = np.nonzero(visited)[0]
    marked = np.zeros(n, dtype=np.uint8)
    if grid.n_xi2 % 2 == 0:
        s_bound = reach / 2.0
        chord = 2.0 * math.sin(min(reach, math.pi) / 4.0)
        _kernels.dilate(
            u_indices, grid.centers, grid.d_eta, grid.d_xi1, grid.d_xi2,
            grid.n_eta, grid.n_xi1, grid.n_xi2, s_bound, chord,
            math.cos(reach / 2.0), marked,
        )
    else:
        _dilate_reference(u_indices, grid, reach, marked)

    return CellSet(grid=grid, inner=empty, outer=marked.astype(bool))


# ---------------------------------------------------------------------------
# cache file
# ---------------------------------------------------------------------------

def save_grid(grid: HopfGrid, path) -> None:
    """Write magic, little-endian u32 counts, then centers/radii/weights as f64."""
    payload = b"".join(
        [
            MAGIC,
            struct.pack("<III", grid.n_eta, grid.n_xi1, grid.n_xi2),
            np.ascontiguousarray(grid.centers, dtype="<f8").tobytes(),
            np.ascontiguousarray(grid.radii, dtype="<f8").tobytes(),
            np.ascontiguousarray(grid.weights, dtype="<f8").tobytes(),
        ]
    )
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def load_grid(path) -> HopfGrid:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise CorruptCacheError(f"bad grid cache magic, expected {MAGIC.decode()!r}")
    header_end = len(MAGIC) + 12
    if len(blob) < header_end:
        raise CorruptCacheError(f"truncated {MAGIC.decode()!r} cache header")
    n_eta, n_xi1, n_xi2 = struct.unpack("<III", blob[len(MAGIC) : header_end])
    n = n_eta * n_xi1 * n_xi2
    expected = header_end + 8 * n * 6
    if len(blob) != expected:
        raise CorruptCacheError(
            f"corrupt {MAGIC.decode()!r} cache: expected {expected} bytes, found {len(blob)}"
        )
    body = np.frombuffer(blob[header_end:], dtype="<f8")
    centers = body[: 4 * n].reshape(n, 4).copy()
    radii = body[4 * n : 5 * n].copy()
    weights = body[5 * n :].copy()
    return HopfGrid(n_eta=int(n_eta), n_xi1=int(n_xi1), n_xi2=int(n_xi2), centers=centers, radii=radii, weights=weights)
