import numpy as np
import pytest

from src.exceptions import FrameMismatchError
from src.geometry import (
    Frame,
    RigidTransform,
    compose,
    exp_so3,
    hat,
    inverse,
    log_so3,
    orthonormality_error,
    renormalize,
    right_jacobian,
    right_jacobian_inv,
    rot_x,
    rot_y,
    rot_z,
    vee,
)


def _random_transform(rng, to_frame, from_frame):
    return RigidTransform(exp_so3(rng.normal(size=3)), rng.normal(size=3), to_frame, from_frame)


def test_compose_with_identity_returns_other_transform(rng):
    t_ol = _random_transform(rng, Frame.SHELL, Frame.LIDAR)
    t_wl = compose(RigidTransform.identity(Frame.WORLD, Frame.SHELL), t_ol)
    np.testing.assert_allclose(t_wl.rotation, t_ol.rotation, atol=1e-15)
    np.testing.assert_allclose(t_wl.translation, t_ol.translation, atol=1e-15)
    assert (t_wl.to_frame, t_wl.from_frame) == ("W", "L")


def test_compose_matches_homogeneous_matrices(rng):
    for _ in range(20):
        a = _random_transform(rng, "W", "O")
        b = _random_transform(rng, "O", "L")
        np.testing.assert_allclose((a @ b).as_matrix(), a.as_matrix() @ b.as_matrix(), atol=1e-12)


def test_compose_rejects_mismatched_frames(rng):
    a = _random_transform(rng, "W", "O")
    b = _random_transform(rng, "L", "O")
    with pytest.raises(FrameMismatchError):
        compose(a, b)


def test_inverse_composes_to_identity(rng):
    t = _random_transform(rng, "W", "O")
    identity = compose(t, inverse(t))
    np.testing.assert_allclose(identity.rotation, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(identity.translation, np.zeros(3), atol=1e-12)
    assert (inverse(t).to_frame, inverse(t).from_frame) == ("O", "W")


def test_apply_maps_points_and_arrays(rng):
    t = _random_transform(rng, "W", "O")
    points = rng.normal(size=(5, 3))
    expected = np.array([t.rotation @ p + t.translation for p in points])
    np.testing.assert_allclose(t.apply(points), expected, atol=1e-12)
    np.testing.assert_allclose(t.apply(points[0]), expected[0], atol=1e-12)


def test_hat_vee_and_cross_product(rng):
    v, w = rng.normal(size=3), rng.normal(size=3)
    np.testing.assert_allclose(hat(v) @ w, np.cross(v, w), atol=1e-15)
    np.testing.assert_allclose(vee(hat(v)), v)


def test_exp_of_axis_rotations_matches_elementary_rotations():
    np.testing.assert_allclose(exp_so3([0.3, 0.0, 0.0]), rot_x(0.3), atol=1e-15)
    np.testing.assert_allclose(exp_so3([0.0, -0.7, 0.0]), rot_y(-0.7), atol=1e-15)
    np.testing.assert_allclose(exp_so3([0.0, 0.0, 2.0]), rot_z(2.0), atol=1e-15)


@pytest.mark.parametrize("angle", [1e-10, 1e-4, 0.5, 2.0, np.pi - 1e-3])
def test_log_inverts_exp(rng, angle):
    axis = rng.normal(size=3)
    phi = angle * axis / np.linalg.norm(axis)
    np.testing.assert_allclose(log_so3(exp_so3(phi)), phi, atol=1e-9)


def test_log_at_pi_returns_rotation_of_pi():
    phi = log_so3(rot_y(np.pi))
    assert np.linalg.norm(phi) == pytest.approx(np.pi)
    np.testing.assert_allclose(exp_so3(phi), rot_y(np.pi), atol=1e-9)


def test_right_jacobian_linearises_exp(rng):
    phi = rng.normal(size=3)
    delta = 1e-6 * rng.normal(size=3)
    lhs = log_so3(exp_so3(phi).T @ exp_so3(phi + delta))
    np.testing.assert_allclose(lhs, right_jacobian(phi) @ delta, atol=1e-10)


def test_right_jacobian_inverse(rng):
    for phi in (rng.normal(size=3), np.array([1e-7, 0.0, 0.0])):
        np.testing.assert_allclose(right_jacobian_inv(phi) @ right_jacobian(phi), np.eye(3), atol=1e-10)


def test_renormalize_restores_orthonormality(rng):
    drifted = exp_so3(rng.normal(size=3)) + 1e-4 * rng.normal(size=(3, 3))
    fixed = renormalize(drifted)
    assert orthonormality_error(fixed) < 1e-12
    assert np.linalg.det(fixed) == pytest.approx(1.0)


def test_retract_applies_right_perturbation(rng):
    t = _random_transform(rng, "W", "O")
    moved = t.retract([0.1, 0.0, 0.0], [0.0, 0.0, 0.2])
    np.testing.assert_allclose(moved.rotation, t.rotation @ rot_z(0.2), atol=1e-12)
    np.testing.assert_allclose(moved.translation, t.translation + [0.1, 0.0, 0.0])


def test_compose_is_associative(rng):
    for _ in range(50):
        a = _random_transform(rng, "W", "O")
        b = _random_transform(rng, "O", "I")
        c = _random_transform(rng, "I", "L")
        left, right = compose(compose(a, b), c), compose(a, compose(b, c))
        np.testing.assert_allclose(left.rotation, right.rotation, atol=1e-12)
        np.testing.assert_allclose(left.translation, right.translation, atol=1e-12)
        assert (left.to_frame, left.from_frame) == (right.to_frame, right.from_frame) == ("W", "L")


def test_exp_matches_truncated_power_series(rng):
    for _ in range(100):
        omega = rng.normal(size=3)
        omega *= rng.uniform(0.0, 1.5) / np.linalg.norm(omega)
        term = np.eye(3)
        series = np.eye(3)
        for k in range(1, 20):
            term = term @ hat(omega) / k
            series = series + term
        np.testing.assert_allclose(exp_so3(omega), series, atol=1e-12)
