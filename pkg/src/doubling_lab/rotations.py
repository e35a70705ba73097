"""The 3D rotation group on unit quaternions.

Rotations are stored as sign-canonicalized unit quaternions (the double
cover identifies antipodal quaternions; canonicalization picks one), with
the group operation, the bi-invariant rotation-angle metric, normalized
Haar sampling, and the two-factor Euler-style decomposition about a
reference axis.

Scalar operations work on :class:`Rotation` values.  The module also
exposes an array layer (``quat_*`` functions and ``haar_quaternions``)
over ``(n, 4)`` float arrays in ``(w, x, y, z)`` order; the heavy Monte
Carlo and grid machinery elsewhere in the package is built on it.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

AXIS_NORM_TOL = 1e-6

_TWO_PI = 2.0 * math.pi


class Rotation(NamedTuple):
    """A rotation as a sign-canonicalized unit quaternion."""

    w: float
    x: float
    y: float
    z: float


class EulerDecomposition(NamedTuple):
    """g = (rotation about v by theta) o (rotation about u by phi), v perpendicular to u."""

    v: np.ndarray
    theta: float
    phi: float


IDENTITY = Rotation(1.0, 0.0, 0.0, 0.0)

EX = np.array([1.0, 0.0, 0.0])
EY = np.array([0.0, 1.0, 0.0])
EZ = np.array([0.0, 0.0, 1.0])


# ---------------------------------------------------------------------------
# vector helpers
# ---------------------------------------------------------------------------

def unit_vector(v) -> np.ndarray:
    """Validate and return ``v`` as a unit 3-vector (norm within 1e-6 of 1)."""
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    n = float(np.linalg.norm(v))
    if abs(n - 1.0) > AXIS_NORM_TOL:
        raise ValueError(f"axis is not a unit vector (norm {n!r})")
    return v / n


def angle_between(u, v) -> float:
    """Angle in [0, pi] between two unit vectors (dot product clamped)."""
    d = float(np.dot(u, v))
    return math.acos(min(1.0, max(-1.0, d)))


# ---------------------------------------------------------------------------
# array layer
# ---------------------------------------------------------------------------

def quat_canonical(q: np.ndarray) -> np.ndarray:
    """Canonicalize signs: w > 0, or w = 0 and the first nonzero of (x,y,z) > 0."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    s = np.where(
        w != 0.0,
        np.sign(w),
        np.where(x != 0.0, np.sign(x), np.where(y != 0.0, np.sign(y), np.where(z != 0.0, np.sign(z), 1.0))),
    )
    return q * s[:, None]


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product of quaternion arrays (broadcasting), no normalization."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    aw, ax, ay, az = a[:, 0], a[:, 1], a[:, 2], a[:, 3]
    bw, bx, by, bz = b[:, 0], b[:, 1], b[:, 2], b[:, 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=1,
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    """Conjugate (= inverse for unit quaternions)."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_rotate(q: np.ndarray, v) -> np.ndarray:
    """Apply the rotations in ``q`` (n, 4) to a single 3-vector ``v``; returns (n, 3)."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    v = np.asarray(v, dtype=float)
    w = q[:, 0:1]
    u = q[:, 1:4]
    cross1 = np.cross(u, v[None, :])
    cross2 = np.cross(u, cross1)
    return v[None, :] + 2.0 * w * cross1 + 2.0 * cross2


def quat_angle(q: np.ndarray) -> np.ndarray:
    """Rotation angle 2*arccos(|w|) in [0, pi] for each quaternion."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    return 2.0 * np.arccos(np.clip(np.abs(q[:, 0]), 0.0, 1.0))


# ---------------------------------------------------------------------------
# counter-based randomness (splitmix64)
# ---------------------------------------------------------------------------

_SM_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_M2 = np.uint64(0x94D049BB133111EB)


def _splitmix64(counters: np.ndarray) -> np.ndarray:
    z = counters * _SM_GAMMA  # wrapping uint64 arithmetic throughout
    z = (z ^ (z >> np.uint64(30))) * _SM_M1
    z = (z ^ (z >> np.uint64(27))) * _SM_M2
    return z ^ (z >> np.uint64(31))


def _uniforms(seed: int, start: int, count: int, per: int) -> np.ndarray:
    """Uniform (0, 1] draws, slot (i, j) a pure function of (seed, i, j)."""
    key = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    base = np.uint64(start) * np.uint64(per)
    slots = base + np.arange(count * per, dtype=np.uint64) + np.uint64(1)
    bits = _splitmix64(slots + _splitmix64(np.array([key], dtype=np.uint64)))
    u = ((bits >> np.uint64(11)).astype(np.float64) + 1.0) * (2.0 ** -53)
    return u.reshape(count, per)


def haar_quaternions(seed: int, count: int, start: int = 0) -> np.ndarray:
    """Canonicalized Haar-random unit quaternions, sample ``start + i`` of stream ``seed``.

    Four independent standard Gaussians (Box-Muller) normalized to a unit
    4-vector are exactly uniform on the 3-sphere, hence Haar on the rotation
    group after canonicalization.  Sample ``k`` depends only on ``(seed, k)``,
    so any chunking of the index range reproduces the same sequence.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    u = _uniforms(seed, start, count, 4)
    r1 = np.sqrt(-2.0 * np.log(u[:, 0]))
    r2 = np.sqrt(-2.0 * np.log(u[:, 2]))
    a1 = _TWO_PI * u[:, 1]
    a2 = _TWO_PI * u[:, 3]
    g = np.empty((count, 4))
    g[:, 0] = r1 * np.cos(a1)
    g[:, 1] = r1 * np.sin(a1)
    g[:, 2] = r2 * np.cos(a2)
    g[:, 3] = r2 * np.sin(a2)
    norms = np.linalg.norm(g, axis=1)
    norms[norms == 0.0] = 1.0  # probability-zero guard
    return quat_canonical(g / norms[:, None])


def derive_seed(seed: int, stream: int) -> int:
    """Decorrelated sub-seed for auxiliary streams (witnesses, per-row scans)."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    key ^= np.array([stream & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64) * _SM_M2
    return int(_splitmix64(key)[0])


class HaarSampler:
    """Deterministic stream of Haar rotations; sample ``k`` is a pure function of (seed, k)."""

    def __init__(self, seed: int, start: int = 0):
        self.seed = int(seed)
        self.index = int(start)

    def sample(self) -> Rotation:
        q = haar_quaternions(self.seed, 1, self.index)
        self.index += 1
        return Rotation(*(float(c) for c in q[0]))

    def sample_batch(self, count: int) -> np.ndarray:
        q = haar_quaternions(self.seed, count, self.index)
        self.index += count
        return q


# ---------------------------------------------------------------------------
# scalar group operations
# ---------------------------------------------------------------------------

def _from_array(q: np.ndarray) -> Rotation:
    n = float(np.linalg.norm(q))
    q = quat_canonical(q / n)[0]
    return Rotation(float(q[0]), float(q[1]), float(q[2]), float(q[3]))


def from_axis_angle(u, phi: float) -> Rotation:
    """Counter-clockwise rotation about the unit vector ``u`` by ``phi`` (right-hand rule)."""
    u = unit_vector(u)
    h = 0.5 * math.fmod(float(phi), _TWO_PI)
    c, s = math.cos(h), math.sin(h)
    return _from_array(np.array([c, s * u[0], s * u[1], s * u[2]]))


def compose(g: Rotation, h: Rotation) -> Rotation:
    """The rotation "h then g", matching the matrix product g*h."""
    return _from_array(quat_mul(np.array(g), np.array(h))[0])


def inverse(g: Rotation) -> Rotation:
    return _from_array(quat_conj(np.array(g))[0])


def act(g: Rotation, u) -> np.ndarray:
    """Image of the 3-vector ``u`` under ``g``."""
    return quat_rotate(np.array(g), np.asarray(u, dtype=float))[0]


def rotation_angle(g: Rotation) -> float:
    """Rotation angle in [0, pi]: 2*arccos(|w|)."""
    return 2.0 * math.acos(min(1.0, abs(g.w)))


def distance(g: Rotation, h: Rotation) -> float:
    """Bi-invariant distance: rotation angle of inverse(g)*h.

    The w-component of conj(q_g) * q_h is the 4-dot of the quaternions,
    so the angle is 2*arccos(|<q_g, q_h>|).
    """
    d = g.w * h.w + g.x * h.x + g.y * h.y + g.z * h.z
    return 2.0 * math.acos(min(1.0, abs(d)))


# ---------------------------------------------------------------------------
# Haar ball measure
# ---------------------------------------------------------------------------

def ball_measure(r: float) -> float:
    """Normalized Haar measure of {g : rotation_angle(g) <= r} for r in [0, pi].

    The rotation-angle density is (1 - cos(t))/pi on [0, pi]; integrating
    gives (r - sin r)/pi.
    """
    r = float(r)
    if not 0.0 <= r <= math.pi:
        raise ValueError(f"radius must lie in [0, pi], got {r!r}")
    return (r - math.sin(r)) / math.pi


# ---------------------------------------------------------------------------
# Euler-style decomposition about a reference axis
# ---------------------------------------------------------------------------

def perpendicular_axis(u) -> np.ndarray:
    """Deterministic unit vector orthogonal to ``u`` (cross with the smallest-component basis vector)."""
    u = np.asarray(u, dtype=float)
    basis = np.zeros(3)
    basis[int(np.argmin(np.abs(u)))] = 1.0
    v = np.cross(u, basis)
    return v / np.linalg.norm(v)


def _twist_angle(h: Rotation, u: np.ndarray) -> float:
    """Signed rotation angle of ``h`` about ``u``, assuming ``h`` fixes ``u``; in [-pi, pi)."""
    s = h.x * u[0] + h.y * u[1] + h.z * u[2]
    phi = 2.0 * math.atan2(s, h.w)
    if phi >= math.pi:
        phi -= _TWO_PI
    elif phi < -math.pi:
        phi += _TWO_PI
    return phi


def euler_decompose(g: Rotation, u) -> EulerDecomposition:
    """Split ``g`` as (rotation about v by theta) composed after (rotation about u by phi).

    v is the unit normal of span(u, g(u)) (v = normalize(u x g(u))) and
    theta = angle(u, g(u)), so the v-factor carries u onto g(u) and the
    residual fixes u, hence is a twist about u.  When g(u) = +/-u the
    normal is not determined; a fixed perpendicular axis is used.
    """
    u = unit_vector(u)
    gu = act(g, u)
    theta = angle_between(u, gu)
    cross = np.cross(u, gu)
    norm = float(np.linalg.norm(cross))
    if norm < 1e-9:
        v = perpendicular_axis(u)
        theta = 0.0 if theta < math.pi / 2 else math.pi
    else:
        v = cross / norm
    h = compose(inverse(from_axis_angle(v, theta)), g)  # fixes u
    phi = _twist_angle(h, u)
    return EulerDecomposition(v=v, theta=theta, phi=phi)
