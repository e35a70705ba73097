"""Closed-form calculators on the model surfaces and the ball-volume series.

The rotation group fibers over the unit sphere (positive curvature) and the
hyperbolic plane is its negative-curvature counterpart via the 2x2 special
linear group.  Small geodesic balls in an n-manifold of constant scalar
curvature S have volume

    (1/n) * alpha_{n-1} * r^n * (1 - S r^2 / (6 (n + 2)) + O(r^3)),

with alpha_n the surface area of the unit n-sphere.  On the sphere side the
doubling ratio of small balls approaches 2^(d-m) from below; on the
hyperbolic side the tube-volume normalization m(r) = sinh^2(r/2) makes the
doubling identity sinh^2(r) = 4 m (1 + m) exact -- the sign-flipped mirror
of the spherical cap identity 4 m (1 - m).

Note the doubled normalization (cosh(r) - 1 = 2 sinh^2(r/2)) does not
satisfy the identity (the sides differ by 2 (cosh r - 1)^2); it is still
available behind ``halfplane_normalization=False`` for comparison.
"""

from __future__ import annotations

import math
from typing import NamedTuple


class BallSeriesQuery(NamedTuple):
    """Dimension, constant scalar curvature, and radius for the volume series."""

    n: int
    curvature: float
    r: float


class HyperbolicTube(NamedTuple):
    """Radius and measure m = sinh^2(r/2) of a hyperbolic-distance tube."""

    r: float
    m: float


def alpha_constant(n: int) -> float:
    """Surface area of the unit n-sphere: 2^(2k+1) pi^k k!/(2k)! for n=2k, 2 pi^(k+1)/k! for n=2k+1."""
    n = int(n)
    if n < 0:
        raise ValueError("dimension must be >= 0")
    k, odd = divmod(n, 2)
    if odd:
        return 2.0 * math.pi ** (k + 1) / math.factorial(k)
    return 2.0 ** (2 * k + 1) * math.pi**k * math.factorial(k) / math.factorial(2 * k)


def ball_volume_series(query: BallSeriesQuery) -> float:
    """Truncated small-ball volume (1/n) alpha_{n-1} r^n (1 - S r^2/(6(n+2))).

    No smallness cutoff is enforced; callers see the raw truncated series.
    """
    n, s, r = int(query.n), float(query.curvature), float(query.r)
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if r < 0.0:
        raise ValueError("radius must be >= 0")
    return (1.0 / n) * alpha_constant(n - 1) * r**n * (1.0 - s * r * r / (6.0 * (n + 2)))


def sphere_cap_area(r: float) -> float:
    """Area 2 pi (1 - cos r) of a geodesic cap of radius r on the unit 2-sphere."""
    r = float(r)
    if not 0.0 <= r <= math.pi:
        raise ValueError(f"cap radius must lie in [0, pi], got {r!r}")
    return 2.0 * math.pi * (1.0 - math.cos(r))


def doubling_ratio_limit(d: int, m: int) -> float:
    """Small-radius doubling limit 2^(d-m) for a group of dimension d over a stabilizer of dimension m."""
    d, m = int(d), int(m)
    if not d > m >= 0:
        raise ValueError(f"need d > m >= 0, got d={d}, m={m}")
    return 2.0 ** (d - m)


def hyperbolic_ball_volume(r: float, halfplane_normalization: bool = True) -> float:
    """Volume of a hyperbolic-plane ball of radius r.

    The default scaling sinh^2(r/2) is the one under which doubling the
    radius satisfies volume(2r) = 4 m (1 + m) exactly; the alternative
    cosh(r) - 1 (integral of sinh) is twice it.
    """
    r = float(r)
    if r <= 0.0:
        raise ValueError(f"radius must be > 0, got {r!r}")
    m = math.sinh(r / 2.0) ** 2
    return m if halfplane_normalization else 2.0 * m


def hyperbolic_tube(r: float) -> HyperbolicTube:
    return HyperbolicTube(r=float(r), m=hyperbolic_ball_volume(r))


def hyperbolic_double_check(r: float) -> tuple:
    """(volume at 2r, 4 m (1 + m)); the two sides agree to 1e-12 relative."""
    r = float(r)
    if r <= 0.0:
        raise ValueError(f"radius must be > 0, got {r!r}")
    m = hyperbolic_ball_volume(r)
    lhs = math.sinh(r) ** 2
    rhs = 4.0 * m * (1.0 + m)
    return lhs, rhs
