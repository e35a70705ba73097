import math

import numpy as np
import pytest
from scipy import integrate, stats

from doubling_lab import rotations as rot


def rodrigues_matrix(axis, angle):
    """Independent 3x3 rotation-matrix oracle (Rodrigues formula)."""
    axis = np.asarray(axis, float)
    axis = axis / np.linalg.norm(axis)
    K = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def quat_fields(g):
    return np.array([g.w, g.x, g.y, g.z])


def random_unit_vectors(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# from_axis_angle
# ---------------------------------------------------------------------------

def test_axis_angle_identity():
    assert rot.from_axis_angle(rot.EZ, 0.0) == rot.IDENTITY


def test_axis_angle_half_turn():
    g = rot.from_axis_angle(rot.EZ, math.pi)
    assert np.allclose(rot.act(g, rot.EX), -rot.EX, atol=1e-15)


def test_axis_angle_matches_matrix_oracle():
    g = rot.from_axis_angle(rot.EX, 1.0)
    expected = rodrigues_matrix(rot.EX, 1.0) @ rot.EZ
    assert np.allclose(rot.act(g, rot.EZ), expected, atol=1e-15)
    assert np.allclose(expected, [0.0, -math.sin(1.0), math.cos(1.0)], atol=1e-15)


def test_axis_angle_random_against_matrix_oracle():
    rng = np.random.default_rng(3)
    for axis, angle, v in zip(
        random_unit_vectors(rng, 50),
        rng.uniform(-6, 6, 50),
        random_unit_vectors(rng, 50),
    ):
        g = rot.from_axis_angle(axis, angle)
        assert np.allclose(rot.act(g, v), rodrigues_matrix(axis, angle) @ v, atol=1e-12)


def test_axis_angle_rejects_non_unit_axis():
    with pytest.raises(ValueError):
        rot.from_axis_angle([1.0, 0.0, 0.01], 0.5)


def test_double_cover_identifications():
    rng = np.random.default_rng(11)
    for axis, angle in zip(random_unit_vectors(rng, 200), rng.uniform(-6, 6, 200)):
        a = quat_fields(rot.from_axis_angle(axis, angle))
        b = quat_fields(rot.from_axis_angle(-axis, -angle))
        assert np.array_equal(a, b), "opposite axis and angle must canonicalize identically"
        # phi + 2*pi is the same rotation; the caller-side addition already
        # rounds, so equality holds to a couple of ulps rather than exactly
        c = quat_fields(rot.from_axis_angle(axis, angle + 2 * math.pi))
        assert np.max(np.abs(a - c)) < 2e-15


# ---------------------------------------------------------------------------
# group operations and metric
# ---------------------------------------------------------------------------

def test_compose_inverse_gives_identity():
    g = rot.from_axis_angle([0.6, 0.0, 0.8], 1.3)
    assert rot.distance(rot.compose(g, rot.inverse(g)), rot.IDENTITY) < 1e-12


def test_act_identity():
    u = np.array([0.36, 0.48, 0.8])
    assert np.allclose(rot.act(rot.IDENTITY, u), u)


def test_same_axis_angles_add():
    a = rot.from_axis_angle(rot.EZ, math.pi / 2)
    assert rot.distance(rot.compose(a, a), rot.from_axis_angle(rot.EZ, math.pi)) < 1e-12


def test_compose_matches_matrix_product():
    rng = np.random.default_rng(5)
    for axis1, a1, axis2, a2, v in zip(
        random_unit_vectors(rng, 30),
        rng.uniform(-3, 3, 30),
        random_unit_vectors(rng, 30),
        rng.uniform(-3, 3, 30),
        random_unit_vectors(rng, 30),
    ):
        g, h = rot.from_axis_angle(axis1, a1), rot.from_axis_angle(axis2, a2)
        oracle = rodrigues_matrix(axis1, a1) @ rodrigues_matrix(axis2, a2) @ v
        assert np.allclose(rot.act(rot.compose(g, h), v), oracle, atol=1e-12)


def test_group_axioms_random_triples():
    sampler = rot.HaarSampler(2024)
    for _ in range(1000):
        a, b, c = sampler.sample(), sampler.sample(), sampler.sample()
        lhs = rot.compose(rot.compose(a, b), c)
        rhs = rot.compose(a, rot.compose(b, c))
        assert np.max(np.abs(quat_fields(lhs) - quat_fields(rhs))) < 1e-12
        assert rot.distance(rot.compose(a, rot.inverse(a)), rot.IDENTITY) < 1e-12
        assert rot.distance(rot.compose(rot.inverse(a), a), rot.IDENTITY) < 1e-12


def test_rotation_angle_examples():
    assert rot.rotation_angle(rot.IDENTITY) == 0.0
    assert rot.rotation_angle(rot.from_axis_angle(rot.EX, math.pi / 2)) == pytest.approx(math.pi / 2, abs=1e-15)
    assert rot.rotation_angle(rot.Rotation(0.0, 1.0, 0.0, 0.0)) == pytest.approx(math.pi)


def test_distance_examples():
    g = rot.from_axis_angle([0.0, 0.6, 0.8], 0.9)
    assert rot.distance(g, g) == 0.0
    for r in (0.0, 0.4, 1.5, math.pi):
        assert rot.distance(rot.IDENTITY, rot.from_axis_angle(rot.EY, r)) == pytest.approx(r, abs=1e-12)
    assert rot.distance(rot.from_axis_angle(rot.EZ, 0.3), rot.from_axis_angle(rot.EZ, 0.8)) == pytest.approx(0.5, abs=1e-12)


def test_bi_invariance():
    sampler = rot.HaarSampler(77)
    for _ in range(1000):
        a, g, h = sampler.sample(), sampler.sample(), sampler.sample()
        d = rot.distance(g, h)
        assert abs(rot.distance(rot.compose(a, g), rot.compose(a, h)) - d) < 1e-12
        assert abs(rot.distance(rot.compose(g, a), rot.compose(h, a)) - d) < 1e-12


def test_displacement_bounded_by_rotation_angle():
    sampler = rot.HaarSampler(15)
    rng = np.random.default_rng(15)
    for u in random_unit_vectors(rng, 500):
        g = sampler.sample()
        assert rot.angle_between(u, rot.act(g, u)) <= rot.rotation_angle(g) + 1e-12


def test_angle_between_examples():
    u = np.array([0.6, 0.8, 0.0])
    assert rot.angle_between(u, u) == 0.0
    assert rot.angle_between(u, -u) == pytest.approx(math.pi)
    assert rot.angle_between(rot.EX, rot.EY) == pytest.approx(math.pi / 2)


def test_angle_subadditive_along_orbit():
    # for g1, g2 displacing u by at most pi/2, displacements of u add subadditively
    sampler = rot.HaarSampler(99)
    rng = np.random.default_rng(99)
    checked = 0
    while checked < 10_000:
        u = random_unit_vectors(rng, 1)[0]
        g1, g2 = sampler.sample(), sampler.sample()
        a1 = rot.angle_between(u, rot.act(g1, u))
        a2 = rot.angle_between(u, rot.act(g2, u))
        if a1 > math.pi / 2 or a2 > math.pi / 2:
            continue
        a12 = rot.angle_between(u, rot.act(rot.compose(g1, g2), u))
        assert a12 <= a1 + a2 + 1e-9
        checked += 1


# ---------------------------------------------------------------------------
# Haar sampling
# ---------------------------------------------------------------------------

def test_haar_fixed_seed_reproducible():
    a = rot.haar_quaternions(42, 1000)
    b = rot.haar_quaternions(42, 1000)
    assert np.array_equal(a, b)
    # chunked generation is the same stream
    c = np.vstack([rot.haar_quaternions(42, 400, 0), rot.haar_quaternions(42, 600, 400)])
    assert np.array_equal(a, c)


def test_haar_matrix_entry_means_vanish():
    q = rot.haar_quaternions(8, 1_000_000)
    w, x, y, z = q.T
    entries = [
        1 - 2 * (y**2 + z**2), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x**2 + z**2), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x**2 + y**2),
    ]
    for e in entries:
        assert abs(e.mean()) < 4e-3


def gram_schmidt_rotation_angles(rng, n):
    """Independent Haar oracle: orthonormalize Gaussian 3x3 matrices, fix det, read the angle."""
    m = rng.standard_normal((n, 3, 3))
    q, r = np.linalg.qr(m)
    d = np.sign(np.einsum("nii->ni", r))
    q = q * d[:, None, :]
    det = np.linalg.det(q)
    q[det < 0, :, 2] *= -1.0
    tr = np.einsum("nii->n", q)
    return np.arccos(np.clip((tr - 1.0) / 2.0, -1.0, 1.0))


def test_haar_angle_law_closed_form_and_independent_sampler():
    closed = ((math.pi / 2) - 1.0) / math.pi  # 0.181690...
    q = rot.haar_quaternions(4242, 1_000_000)
    emp = float((rot.quat_angle(q) <= math.pi / 2).mean())
    se = math.sqrt(closed * (1 - closed) / 1_000_000)
    assert abs(emp - closed) <= 4 * se

    oracle_angles = gram_schmidt_rotation_angles(np.random.default_rng(7), 200_000)
    emp2 = float((oracle_angles <= math.pi / 2).mean())
    se2 = math.sqrt(closed * (1 - closed) / 200_000)
    assert abs(emp2 - closed) <= 4 * se2
    assert abs(emp - emp2) <= 4 * math.sqrt(se**2 + se2**2)


def test_haar_angle_histogram_chi2():
    q = rot.haar_quaternions(123, 1_000_000)
    angles = rot.quat_angle(q)
    edges = np.linspace(0.0, math.pi, 33)
    observed, _ = np.histogram(angles, bins=edges)
    # exact bin probabilities of the density (1 - cos t)/pi
    cdf = (edges - np.sin(edges)) / math.pi
    expected = np.diff(cdf) * 1_000_000
    chi2 = float(((observed - expected) ** 2 / expected).sum())
    assert chi2 < stats.chi2.ppf(0.999, df=31)


# ---------------------------------------------------------------------------
# ball measure
# ---------------------------------------------------------------------------

def test_ball_measure_whole_group():
    assert rot.ball_measure(math.pi) == pytest.approx(1.0, abs=1e-15)


def test_ball_measure_matches_monte_carlo():
    q = rot.haar_quaternions(31, 1_000_000)
    emp = float((rot.quat_angle(q) <= math.pi / 2).mean())
    closed = rot.ball_measure(math.pi / 2)
    assert closed == pytest.approx(0.1816901, abs=1e-7)
    assert abs(emp - closed) <= 4 * math.sqrt(closed * (1 - closed) / 1_000_000)


def test_ball_measure_matches_quadrature():
    val, err = integrate.quad(lambda t: (1.0 - math.cos(t)) / math.pi, 0.0, 0.1)
    assert err < 1e-12
    assert rot.ball_measure(0.1) == pytest.approx(val, rel=1e-10)
    assert rot.ball_measure(0.1) == pytest.approx(5.3025e-5, rel=1e-4)


def test_ball_measure_domain():
    with pytest.raises(ValueError):
        rot.ball_measure(-0.1)
    with pytest.raises(ValueError):
        rot.ball_measure(math.pi + 0.1)


# ---------------------------------------------------------------------------
# euler decomposition
# ---------------------------------------------------------------------------

def quat_distance(a, b):
    """Chordal distance of canonical quaternions, sign-insensitive."""
    fa, fb = quat_fields(a), quat_fields(b)
    return min(float(np.linalg.norm(fa - fb)), float(np.linalg.norm(fa + fb)))


def euler_roundtrip_error(g, u):
    d = rot.euler_decompose(g, u)
    rec = rot.compose(rot.from_axis_angle(d.v, d.theta), rot.from_axis_angle(u, d.phi))
    return quat_distance(rec, g), d


def test_euler_decompose_twist_only():
    u = np.array([0.0, 0.6, 0.8])
    err, d = euler_roundtrip_error(rot.from_axis_angle(u, 0.7), u)
    assert err < 1e-12
    assert d.theta == pytest.approx(0.0, abs=1e-9)
    assert d.phi == pytest.approx(0.7, abs=1e-9)
    assert abs(np.dot(d.v, u)) < 1e-9


def test_euler_decompose_tilt_only():
    u = rot.EZ
    v = rot.EX  # orthogonal to u
    err, d = euler_roundtrip_error(rot.from_axis_angle(v, 0.4), u)
    assert err < 1e-12
    assert d.theta == pytest.approx(0.4, abs=1e-9)
    assert d.phi == pytest.approx(0.0, abs=1e-9)


def test_euler_decompose_random_roundtrip():
    sampler = rot.HaarSampler(7)
    rng = np.random.default_rng(7)
    for u in random_unit_vectors(rng, 300):
        g = sampler.sample()
        err, d = euler_roundtrip_error(g, u)
        assert err < 1e-9
        assert abs(np.dot(d.v, u)) < 1e-9
        assert 0.0 <= d.theta <= math.pi
        assert -math.pi <= d.phi < math.pi


def test_euler_decompose_right_sided_via_inverse():
    # g = R_u(phi') R_w(theta') with w perpendicular to u is the mirror
    # decomposition, obtained by decomposing the inverse
    u = np.array([0.6, 0.0, 0.8])
    g = rot.HaarSampler(123).sample()
    d = rot.euler_decompose(rot.inverse(g), u)
    rec = rot.compose(rot.from_axis_angle(u, -d.phi), rot.from_axis_angle(d.v, -d.theta))
    assert quat_distance(rec, g) < 1e-9
    assert abs(np.dot(d.v, u)) < 1e-9


def test_euler_decompose_degenerate_antipodal():
    # g sends u to -u: theta = pi with the conventional perpendicular axis
    u = rot.EZ
    g = rot.from_axis_angle(rot.EX, math.pi)
    err, d = euler_roundtrip_error(g, u)
    assert err < 1e-9
    assert d.theta == pytest.approx(math.pi)
    assert abs(np.dot(d.v, u)) < 1e-9
