import math
from dataclasses import replace

import numpy as np
import pytest

from src.config import ExperimentConfig
from src.dynamics import VehicleParams, WheelCommand, initial_state, step
from src.environment import voxel_indices
from src.estimator import (
    LidarCorrespondences,
    LioEstimator,
    LioParams,
    LocalMap,
    RobotState,
    fit_plane,
    lio_update,
    map_insert,
    pack_keys,
    predict_state,
    preintegrate,
    residual_imu,
    residual_lidar,
)
from src.estimator.lio import STATE_DIM, residual_imu_prior_jacobian
from src.estimator.local_map import fit_planes
from src.exceptions import DegenerateRegistrationError, EmptyBufferError, NonMonotonicTimestampError
from src.geometry import Frame, RigidTransform, compose, exp_so3, log_so3, rot_z
from src.sensors import GRAVITY_WORLD, ImuBiases, ImuSample, LidarParams, ScanFrame, imu_over_interval, simulate_scan

WIDE_LIDAR = LidarParams(rays_per_frame=4000, elevation_min=math.radians(-60.0),
                         elevation_max=math.radians(60.0), range_noise=0.0)
DT = 0.01


def _samples(n=10, gyro=(0.0, 0.0, 0.0), accel=(0.0, 0.0, 9.81), t0=0.0):
    return [ImuSample(t0 + k * DT, np.array(gyro, dtype=float), np.array(accel, dtype=float)) for k in range(n)]


def _scan_at(scene, state):
    pose = compose(state.pose, WIDE_LIDAR.mount)
    return simulate_scan(pose, scene, WIDE_LIDAR, timestamp=state.t)


def _map_from(scan):
    return map_insert(scan, scan.true_pose, LocalMap())


# --- preintegration -------------------------------------------------------

def test_preintegration_without_motion():
    preint = preintegrate(_samples(accel=(0.0, 0.0, 0.0)), t_end=0.1)
    np.testing.assert_allclose(preint.delta_R, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(preint.delta_v, 0.0, atol=1e-15)
    np.testing.assert_allclose(preint.delta_p, 0.0, atol=1e-15)
    assert preint.duration == pytest.approx(0.1)


def test_preintegration_of_constant_rate():
    preint = preintegrate(_samples(gyro=(0.0, 0.0, 1.0)), t_end=0.1)
    np.testing.assert_allclose(preint.delta_R, rot_z(0.1), atol=1e-12)


def test_preintegration_of_constant_acceleration():
    preint = preintegrate(_samples(accel=(1.0, 0.0, 0.0)), t_end=0.1)
    np.testing.assert_allclose(preint.delta_v, [0.1, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(preint.delta_p, [0.005, 0.0, 0.0], atol=1e-12)


def test_preintegration_covariance_is_symmetric_positive():
    preint = preintegrate(_samples(gyro=(0.2, -0.1, 0.5), accel=(0.3, 0.1, 9.7)), t_end=0.1)
    np.testing.assert_allclose(preint.covariance, preint.covariance.T)
    assert np.all(np.linalg.eigvalsh(preint.covariance) > 0)


def test_bias_correction_matches_reintegration():
    rng = np.random.default_rng(3)
    samples = [ImuSample(k * DT, rng.normal(0.0, 0.5, 3), rng.normal([0.0, 0.0, 9.81], 0.5)) for k in range(10)]
    base = preintegrate(samples, ImuBiases(), t_end=0.1)
    shifted = ImuBiases(accel=[1e-4, -2e-4, 1e-4], gyro=[2e-4, 1e-4, -1e-4])
    exact = preintegrate(samples, shifted, t_end=0.1)
    delta_R, delta_v, delta_p = base.corrected(shifted)
    np.testing.assert_allclose(log_so3(exact.delta_R.T @ delta_R), 0.0, atol=1e-7)
    np.testing.assert_allclose(delta_v, exact.delta_v, atol=1e-7)
    np.testing.assert_allclose(delta_p, exact.delta_p, atol=1e-7)


def test_preintegration_rejects_bad_buffers():
    with pytest.raises(EmptyBufferError):
        preintegrate([])
    with pytest.raises(EmptyBufferError):
        preintegrate(_samples(n=1))
    with pytest.raises(NonMonotonicTimestampError):
        preintegrate(list(reversed(_samples(n=3))))
    with pytest.raises(NonMonotonicTimestampError):
        preintegrate(_samples(n=3), t_end=0.01)


# --- local map ------------------------------------------------------------

def test_fit_plane_of_coplanar_points(rng):
    points = np.column_stack([rng.uniform(0.0, 0.4, 50), rng.uniform(0.0, 0.4, 50), np.full(50, 0.2)])
    normal, centroid, flatness = fit_plane(len(points), points.sum(axis=0), points.T @ points)
    np.testing.assert_allclose(normal, [0.0, 0.0, 1.0], atol=1e-9)
    assert centroid[2] == pytest.approx(0.2)
    assert flatness < 1e-9


def test_map_is_independent_of_insertion_order(rng):
    points = np.column_stack([rng.uniform(-1.0, 1.0, 400), rng.uniform(-1.0, 1.0, 400), np.zeros(400)])
    forward = LocalMap().insert(points)
    backward = LocalMap().insert(points[::-1][:150]).insert(points[::-1][150:])
    assert forward.planes().keys() == backward.planes().keys()
    for key, plane in forward.planes().items():
        np.testing.assert_allclose(plane.normal, backward.planes()[key].normal, atol=1e-9)
        np.testing.assert_allclose(plane.centroid, backward.planes()[key].centroid, atol=1e-12)


def test_empty_scan_leaves_map_unchanged():
    local_map = LocalMap().insert(np.array([[0.0, 0.0, 0.0]]))
    empty = ScanFrame(0.0, np.zeros((0, 3)), RigidTransform.identity(Frame.WORLD, Frame.LIDAR),
                      RigidTransform.identity(Frame.SHELL, Frame.LIDAR))
    assert map_insert(empty, empty.true_pose, local_map) is local_map
    assert local_map.point_count == 1


# --- residuals ------------------------------------------------------------

@pytest.fixture
def corner_truth():
    return RobotState(p=[2.0, 2.0, 0.875], R=rot_z(0.3))


def test_lidar_residual_vanishes_at_true_pose(corner_scene, corner_truth):
    scan = _scan_at(corner_scene, corner_truth)
    result = residual_lidar(scan, _map_from(scan), corner_truth.pose)
    assert len(result.residuals) > 100
    assert np.max(np.abs(result.residuals)) < 1e-9


def test_lidar_residual_measures_offset_along_normal(corner_scene, corner_truth):
    scan = _scan_at(corner_scene, corner_truth)
    shifted = corner_truth.pose.retract([0.0, 0.0, 0.01], np.zeros(3))
    result = residual_lidar(scan, _map_from(scan), shifted)
    np.testing.assert_allclose(result.residuals, 0.01 * result.correspondences.normals[:, 2], atol=1e-9)


def test_lidar_jacobian_matches_finite_differences(corner_scene, corner_truth):
    scan = _scan_at(corner_scene, corner_truth)
    pose = corner_truth.pose.retract([0.02, -0.01, 0.01], [0.01, 0.0, -0.02])
    corr = residual_lidar(scan, _map_from(scan), pose).correspondences
    jac = corr.jacobian(pose)
    eps = 1e-6
    for i in range(6):
        delta = np.zeros(6)
        delta[i] = eps
        plus = corr.evaluate(pose.retract(delta[:3], delta[3:]))
        minus = corr.evaluate(pose.retract(-delta[:3], -delta[3:]))
        np.testing.assert_allclose((plus - minus) / (2 * eps), jac[:, i], atol=1e-6)


def test_lidar_residual_needs_a_map(corner_scene, corner_truth):
    scan = _scan_at(corner_scene, corner_truth)
    with pytest.raises(DegenerateRegistrationError):
        residual_lidar(scan, LocalMap(), corner_truth.pose)


def test_imu_residual_jacobian_matches_finite_differences(rng):
    samples = [ImuSample(k * DT, rng.normal(0.0, 0.5, 3), rng.normal([0.0, 0.0, 9.81], 0.5)) for k in range(10)]
    preint = preintegrate(samples, ImuBiases(gyro=[0.01, 0.0, 0.0]), t_end=0.1)
    prior = RobotState(p=[0.1, 0.2, 0.3], v=[0.5, 0.0, 0.0], R=exp_so3([0.1, -0.2, 0.3]))
    state = predict_state(prior, preint).retract(0.05 * rng.normal(size=15))
    _, jac = residual_imu(prior, state, preint)
    eps = 1e-6
    for i in range(15):
        delta = np.zeros(15)
        delta[i] = eps
        plus, _ = residual_imu(prior, state.retract(delta), preint)
        minus, _ = residual_imu(prior, state.retract(-delta), preint)
        np.testing.assert_allclose((plus - minus) / (2 * eps), jac[:, i], atol=1e-5)


def test_imu_residual_is_zero_for_the_prediction():
    preint = preintegrate(_samples(gyro=(0.1, 0.0, 0.3), accel=(0.5, 0.0, 9.81)), t_end=0.1)
    prior = RobotState(v=[0.3, 0.0, 0.0])
    residual, _ = residual_imu(prior, predict_state(prior, preint), preint)
    np.testing.assert_allclose(residual, 0.0, atol=1e-12)


# --- joint update ---------------------------------------------------------

def test_update_keeps_a_consistent_state(corner_scene, corner_truth):
    scan = _scan_at(corner_scene, corner_truth)
    preint = preintegrate(_samples(), t_end=0.1)
    result = lio_update(corner_truth, preint, scan, _map_from(scan))
    assert not result.degraded
    assert not result.degenerate
    np.testing.assert_allclose(result.state.p, corner_truth.p, atol=1e-6)
    np.testing.assert_allclose(log_so3(corner_truth.R.T @ result.state.R), 0.0, atol=1e-6)
    assert result.state.t == pytest.approx(0.1)


def test_update_recovers_perturbed_guess(corner_scene, corner_truth):
    scan = _scan_at(corner_scene, corner_truth)
    preint = preintegrate(_samples(), t_end=0.1)
    guess = corner_truth.retract(np.concatenate([[0.05, -0.03, 0.02], np.zeros(3),
                                                 np.radians([1.0, -1.0, 2.0]), np.zeros(6)]))
    result = lio_update(corner_truth, preint, scan, _map_from(scan), LioParams(), guess=guess)
    assert not result.degraded
    np.testing.assert_allclose(result.state.p, corner_truth.p, atol=1e-4)
    assert np.linalg.norm(log_so3(corner_truth.R.T @ result.state.R)) < 1e-4
    assert result.min_eigenvalue > 1.0


def test_corridor_without_end_walls_is_flagged_degenerate(long_corridor):
    truth = RobotState(p=[0.0, 0.0, 0.875])
    scan = _scan_at(long_corridor, truth)
    preint = preintegrate(_samples(), t_end=0.1)
    result = lio_update(truth, preint, scan, _map_from(scan))
    assert result.degenerate
    assert result.min_eigenvalue < 1.0
    assert result.state.is_finite()
    np.testing.assert_allclose(result.state.p, truth.p, atol=1e-3)


def test_update_without_correspondences_returns_guess(corner_scene, corner_truth):
    scan = _scan_at(corner_scene, corner_truth)
    preint = preintegrate(_samples(), t_end=0.1)
    result = lio_update(corner_truth, preint, scan, LocalMap())
    assert result.degraded and result.degenerate
    np.testing.assert_allclose(result.state.p, corner_truth.p, atol=1e-9)


def test_estimator_grows_map_at_estimated_pose(corner_scene, corner_truth):
    estimator = LioEstimator(ExperimentConfig().estimator, corner_truth)
    scan = _scan_at(corner_scene, corner_truth)
    estimator.initialize(scan)
    points = estimator.local_map.point_count
    result = estimator.process(preintegrate(_samples(), t_end=0.1), scan)
    assert estimator.local_map.point_count == 2 * points
    assert estimator.state is result.state
    np.testing.assert_allclose(result.state.p, corner_truth.p, atol=1e-6)


def test_lidar_jacobian_at_random_poses(rng):
    for _ in range(100):
        normals = rng.normal(size=(20, 3))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        corr = LidarCorrespondences(rng.uniform(-5.0, 5.0, (20, 3)), normals, rng.uniform(-5.0, 5.0, (20, 3)))
        pose = RigidTransform(exp_so3(rng.uniform(-3.0, 3.0, 3) / np.sqrt(3.0)), rng.uniform(-10.0, 10.0, 3),
                              Frame.WORLD, Frame.SHELL)
        jac = corr.jacobian(pose)
        eps = 1e-6
        numeric = np.zeros_like(jac)
        for i in range(6):
            delta = np.zeros(6)
            delta[i] = eps
            plus = corr.evaluate(pose.retract(delta[:3], delta[3:]))
            minus = corr.evaluate(pose.retract(-delta[:3], -delta[3:]))
            numeric[:, i] = (plus - minus) / (2 * eps)
        assert np.max(np.abs(numeric - jac)) <= 1e-5


def test_imu_residual_prior_jacobian_matches_finite_differences(rng):
    samples = [ImuSample(k * DT, rng.normal(0.0, 0.5, 3), rng.normal([0.0, 0.0, 9.81], 0.5)) for k in range(10)]
    preint = preintegrate(samples, t_end=0.1)
    prior = RobotState(p=[0.1, 0.2, 0.3], v=[0.5, 0.0, 0.0], R=exp_so3([0.1, -0.2, 0.3]))
    state = predict_state(prior, preint).retract(0.05 * rng.normal(size=15))
    jac = residual_imu_prior_jacobian(prior, state, preint)
    eps = 1e-6
    for i in range(15):
        delta = np.zeros(15)
        delta[i] = eps
        plus, _ = residual_imu(prior.retract(delta), state, preint)
        minus, _ = residual_imu(prior.retract(-delta), state, preint)
        np.testing.assert_allclose((plus - minus) / (2 * eps), jac[:, i], atol=1e-5)


def test_interval_imu_samples_reproduce_simulated_motion():
    params = VehicleParams()
    cmd = WheelCommand(6.0, 12.0)
    state = initial_state(params=params)
    for _ in range(500):
        state = step(state, cmd, 1e-3, params)
    first = state
    samples = []
    for _ in range(20):
        start = state
        for _ in range(5):
            state = step(state, cmd, 1e-3, params)
        samples.append(imu_over_interval(start, state))
    preint = preintegrate(samples, t_end=state.t)
    T = state.t - first.t
    R0 = first.T_WO.rotation
    assert abs(log_so3(R0.T @ state.T_WO.rotation)).max() > 1e-3
    np.testing.assert_allclose(preint.delta_R, R0.T @ state.T_WO.rotation, atol=1e-10)
    np.testing.assert_allclose(preint.delta_v, R0.T @ (state.v_O_world - first.v_O_world - GRAVITY_WORLD * T),
                               atol=1e-10)
    np.testing.assert_allclose(R0 @ preint.delta_p,
                               state.position - first.position - first.v_O_world * T - 0.5 * GRAVITY_WORLD * T ** 2,
                               atol=1e-3)


def test_estimator_covariance_stays_positive_definite_and_bounded(corner_scene, corner_truth):
    estimator = LioEstimator(ExperimentConfig().estimator, corner_truth)
    scan = _scan_at(corner_scene, corner_truth)
    estimator.initialize(scan)
    for k in range(1, 6):
        result = estimator.process(preintegrate(_samples(t0=(k - 1) * 0.1), t_end=k * 0.1), scan)
        covariance = estimator.covariance
        assert covariance is result.covariance
        assert covariance.shape == (STATE_DIM, STATE_DIM)
        np.testing.assert_allclose(covariance, covariance.T)
        assert np.linalg.eigvalsh(covariance)[0] > 0
        assert np.sqrt(np.diag(covariance)[0:3]).max() < 0.01
        assert np.sqrt(np.diag(covariance)[6:9]).max() < np.radians(1.0)


def test_update_at_the_truth_is_a_fixed_point(corner_scene, corner_truth):
    scan = _scan_at(corner_scene, corner_truth)
    preint = preintegrate(_samples(), t_end=0.1)
    truth = replace(corner_truth, t=0.1)
    result = lio_update(corner_truth, preint, scan, _map_from(scan), guess=truth)
    np.testing.assert_allclose(result.state.p, corner_truth.p, atol=1e-9)
    np.testing.assert_allclose(result.state.v, corner_truth.v, atol=1e-9)
    assert np.linalg.norm(log_so3(corner_truth.R.T @ result.state.R)) <= 1e-9
    np.testing.assert_allclose(result.state.b_a, 0.0, atol=1e-9)
    np.testing.assert_allclose(result.state.b_g, 0.0, atol=1e-9)


# --- map lookups ----------------------------------------------------------

def test_batched_plane_fits_match_single_fits(rng):
    counts = rng.integers(6, 50, 30)
    points = [rng.normal(size=(n, 3)) * [1.0, 0.5, 0.01] for n in counts]
    totals = np.array([p.sum(axis=0) for p in points])
    outers = np.array([p.T @ p for p in points])
    normals, centroids, flatness = fit_planes(counts, totals, outers)
    for i, n in enumerate(counts):
        normal, centroid, flat = fit_plane(int(n), totals[i], outers[i])
        np.testing.assert_allclose(normals[i], normal, atol=1e-12)
        np.testing.assert_allclose(centroids[i], centroid, atol=1e-12)
        assert flatness[i] == pytest.approx(flat, abs=1e-12)


def test_plane_lookup_agrees_with_plane_table(rng):
    floor = np.column_stack([rng.uniform(-2.0, 2.0, 3000), rng.uniform(-2.0, 2.0, 3000), np.full(3000, 0.1)])
    wall = np.column_stack([np.full(1500, 1.8), rng.uniform(-2.0, 2.0, 1500), rng.uniform(0.6, 1.9, 1500)])
    local_map = LocalMap().insert(floor[:1000]).insert(wall).insert(floor[1000:])
    planes = local_map.planes()
    queries = rng.uniform([-3.0, -3.0, -0.5], [3.0, 3.0, 2.5], (2000, 3))
    mask, normals, centroids = local_map.find_planes(queries)
    keys = pack_keys(voxel_indices(queries, local_map.voxel_size))
    assert mask.sum() > 100
    np.testing.assert_array_equal(mask, [int(k) in planes for k in keys])
    for key, normal, centroid in zip(keys[mask], normals, centroids):
        np.testing.assert_array_equal(normal, planes[int(key)].normal)
        np.testing.assert_array_equal(centroid, planes[int(key)].centroid)
