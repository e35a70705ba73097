"""Constructive measurable subsets of the rotation group.

Two leaf families with closed-form Haar measures:

* ``Cap(axis, theta)`` -- rotations displacing ``axis`` by an angle below
  ``theta``; a tube around the stabilizer circle of the axis, measure
  ``(1 - cos theta)/2``.  For ``theta <= pi/2`` the product of two caps
  about the same axis is again a cap with the angles added, which yields
  the exact doubling identity ``mu(A^2) = 4 mu(A) (1 - mu(A))``.
* ``Ball(radius)`` -- rotations of angle below ``radius`` (a metric ball
  at the identity), measure ``(r - sin r)/pi``.

Boolean ``Union``/``Intersection`` nodes combine leaves.  Every node
exposes a 1-Lipschitz signed value, negative exactly on the set, so grid
rasterization can certify inner and outer approximations.

Memberships are strict (open sets); boundaries are Haar-null, so the
closed forms are unaffected.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Union as TypingUnion

import numpy as np

from .rotations import (
    EZ,
    Rotation,
    compose,
    euler_decompose,
    from_axis_angle,
    inverse,
    quat_angle,
    quat_rotate,
    unit_vector,
)


class Cap(NamedTuple):
    """{ g : angle(axis, g(axis)) < theta }, with axis a unit 3-tuple, theta in (0, pi]."""

    axis: tuple
    theta: float


class Ball(NamedTuple):
    """{ g : rotation_angle(g) < radius }, radius in (0, pi]."""

    radius: float


class Union(NamedTuple):
    parts: tuple


class Intersection(NamedTuple):
    parts: tuple


SetSpec = TypingUnion[Cap, Ball, Union, Intersection]


class CapPair(NamedTuple):
    """Two cap angles in the closed-form product regime (0, pi/2]."""

    theta1: float
    theta2: float


def cap(axis, theta: float) -> Cap:
    theta = float(theta)
    if not 0.0 < theta <= math.pi:
        raise ValueError(f"cap angle must lie in (0, pi], got {theta!r}")
    u = unit_vector(axis)
    return Cap(axis=(float(u[0]), float(u[1]), float(u[2])), theta=theta)


def ball(radius: float) -> Ball:
    radius = float(radius)
    if not 0.0 < radius <= math.pi:
        raise ValueError(f"ball radius must lie in (0, pi], got {radius!r}")
    return Ball(radius=radius)


def union(*parts: SetSpec) -> Union:
    if not parts:
        raise ValueError("union needs at least one part")
    return Union(parts=tuple(parts))


def intersection(*parts: SetSpec) -> Intersection:
    if not parts:
        raise ValueError("intersection needs at least one part")
    return Intersection(parts=tuple(parts))


def cap_pair(theta1: float, theta2: float) -> CapPair:
    for t in (theta1, theta2):
        if not 0.0 < float(t) <= math.pi / 2:
            raise ValueError(f"cap-pair angles must lie in (0, pi/2], got {t!r}")
    return CapPair(float(theta1), float(theta2))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def lipschitz_eval_many(spec: SetSpec, quats: np.ndarray) -> np.ndarray:
    """Signed values f with {f < 0} = spec and |f(g) - f(h)| <= distance(g, h).

    Cap: angle(axis, g(axis)) - theta (displacement of a point is 1-Lipschitz
    in the rotation metric); Ball: rotation_angle - radius; min over unions,
    max over intersections (both preserve the Lipschitz constant).
    """
    quats = np.atleast_2d(np.asarray(quats, dtype=float))
    if isinstance(spec, Cap):
        axis = np.array(spec.axis)
        moved = quat_rotate(quats, axis)
        cosang = np.clip(moved @ axis, -1.0, 1.0)
        return np.arccos(cosang) - spec.theta
    if isinstance(spec, Ball):
        return quat_angle(quats) - spec.radius
    if isinstance(spec, Union):
        return np.minimum.reduce([lipschitz_eval_many(p, quats) for p in spec.parts])
    if isinstance(spec, Intersection):
        return np.maximum.reduce([lipschitz_eval_many(p, quats) for p in spec.parts])
    raise TypeError(f"not a set spec: {spec!r}")


def membership_many(spec: SetSpec, quats: np.ndarray) -> np.ndarray:
    """Boolean membership; arccos-free fast path used by the Monte Carlo loops."""
    quats = np.atleast_2d(np.asarray(quats, dtype=float))
    if isinstance(spec, Cap):
        axis = np.array(spec.axis)
        moved = quat_rotate(quats, axis)
        return (moved @ axis) > math.cos(spec.theta)
    if isinstance(spec, Ball):
        return np.abs(quats[:, 0]) > math.cos(spec.radius / 2.0)
    if isinstance(spec, Union):
        return np.logical_or.reduce([membership_many(p, quats) for p in spec.parts])
    if isinstance(spec, Intersection):
        return np.logical_and.reduce([membership_many(p, quats) for p in spec.parts])
    raise TypeError(f"not a set spec: {spec!r}")


def membership(spec: SetSpec, g: Rotation) -> bool:
    return bool(membership_many(spec, np.array(g))[0])


def lipschitz_eval(spec: SetSpec, g: Rotation) -> float:
    return float(lipschitz_eval_many(spec, np.array(g))[0])


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def cap_measure(theta: float) -> float:
    """Normalized Haar measure (1 - cos theta)/2 of a cap, independent of the axis.

    The cap is the preimage of a spherical cap of the unit sphere under the
    orbit map of the axis, and the pushforward of Haar is the normalized
    area measure sin(t) dt dphi / (4 pi).
    """
    theta = float(theta)
    if not 0.0 < theta <= math.pi:
        raise ValueError(f"cap angle must lie in (0, pi], got {theta!r}")
    return (1.0 - math.cos(theta)) / 2.0


def cap_radius_for_measure(m: float) -> float:
    """Invert the cap measure: theta = arccos(1 - 2m) for m in (0, 1]."""
    m = float(m)
    if not 0.0 < m <= 1.0:
        raise ValueError(f"measure must lie in (0, 1], got {m!r}")
    return math.acos(max(-1.0, 1.0 - 2.0 * m))


def cap_product_spec(theta1: float, theta2: float, axis=EZ) -> Cap:
    """The exact product Cap(u, theta1) * Cap(u, theta2) = Cap(u, theta1 + theta2).

    Valid for both angles in (0, pi/2] (up to a Haar-null boundary): one
    inclusion is displacement subadditivity, the other the constructive
    half-tilt factorization of :func:`cap_square_factor`.
    """
    for t in (theta1, theta2):
        if not 0.0 < float(t) <= math.pi / 2:
            raise ValueError(f"closed-form cap product needs angles in (0, pi/2], got {t!r}")
    return cap(axis, min(float(theta1) + float(theta2), math.pi))


def cap_square_factor(g: Rotation, u, theta: float) -> tuple:
    """Split g = g1 * g2 with both factors displacing u by less than theta.

    Write g = T * R_u(phi) with T the tilt carrying u to g(u) by the angle
    psi = angle(u, g(u)); then g1 = half tilt, g2 = half tilt followed by the
    twist, and each factor displaces u by exactly psi/2.
    Requires angle(u, g(u)) < min(2 theta, pi) and theta <= pi/2.
    """
    theta = float(theta)
    if not 0.0 < theta <= math.pi / 2:
        raise ValueError(f"factorization angle bound violated: theta must lie in (0, pi/2], got {theta!r}")
    d = euler_decompose(g, u)
    if d.theta >= min(2.0 * theta, math.pi):
        raise ValueError(
            f"displacement precondition violated: angle(u, g(u)) = {d.theta!r} "
            f"is not below min(2*theta, pi) = {min(2.0 * theta, math.pi)!r}"
        )
    half = from_axis_angle(d.v, d.theta / 2.0)
    g1 = half
    g2 = compose(half, from_axis_angle(u, d.phi))
    return g1, g2


def cap_doubling(theta: float) -> tuple:
    """(m, m2) for a cap with theta in (0, pi/2]: m = (1-cos theta)/2, m2 = 4m(1-m).

    The square of the cap is the cap of twice the angle, so m2 is also
    sin^2(theta); both evaluations must agree to 1e-14.
    """
    theta = float(theta)
    if not 0.0 < theta <= math.pi / 2:
        raise ValueError(f"doubling closed form needs theta in (0, pi/2], got {theta!r}")
    m = cap_measure(theta)
    m2 = 4.0 * m * (1.0 - m)
    if abs(m2 - math.sin(theta) ** 2) > 1e-14:
        raise ArithmeticError(f"doubling identity 4m(1-m) = sin^2(theta) violated at theta={theta!r}")
    return m, m2


def ball_product_spec(r1: float, r2: float) -> Ball:
    """The exact product Ball(r1) * Ball(r2) = Ball(r1 + r2) (clipped at pi)."""
    for r in (r1, r2):
        if not 0.0 < float(r) <= math.pi:
            raise ValueError(f"ball radius must lie in (0, pi], got {r!r}")
    return ball(min(float(r1) + float(r2), math.pi))


# ---------------------------------------------------------------------------
# JSON wire format
# ---------------------------------------------------------------------------

def spec_to_json(spec: SetSpec) -> dict:
    if isinstance(spec, Cap):
        return {"type": "cap", "axis": list(spec.axis), "theta": spec.theta}
    if isinstance(spec, Ball):
        return {"type": "ball", "radius": spec.radius}
    if isinstance(spec, Union):
        return {"type": "union", "parts": [spec_to_json(p) for p in spec.parts]}
    if isinstance(spec, Intersection):
        return {"type": "intersection", "parts": [spec_to_json(p) for p in spec.parts]}
    raise TypeError(f"not a set spec: {spec!r}")


def _finite(values) -> list:
    out = []
    for v in values:
        v = float(v)
        if not math.isfinite(v):
            raise ValueError(f"non-finite number in set spec: {v!r}")
        out.append(v)
    return out


def spec_from_json(obj: dict) -> SetSpec:
    """Parse the discriminated-node wire format; axis vectors are normalized on load."""
    if not isinstance(obj, dict) or "type" not in obj:
        raise ValueError(f"set spec node must be an object with a 'type': {obj!r}")
    kind = obj["type"]
    if kind == "cap":
        axis = _finite(obj["axis"])
        if len(axis) != 3:
            raise ValueError("cap axis must have 3 components")
        n = math.sqrt(sum(a * a for a in axis))
        if n == 0.0:
            raise ValueError("cap axis must be nonzero")
        (theta,) = _finite([obj["theta"]])
        return cap([a / n for a in axis], theta)
    if kind == "ball":
        (radius,) = _finite([obj["radius"]])
        return ball(radius)
    if kind in ("union", "intersection"):
        parts = [spec_from_json(p) for p in obj["parts"]]
        return union(*parts) if kind == "union" else intersection(*parts)
    raise ValueError(f"unknown set spec type {kind!r}")
