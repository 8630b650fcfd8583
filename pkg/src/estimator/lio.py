"""
Discrete-time LiDAR-inertial odometry.

Each frame minimises ``sum ||r_L||^2 / sigma_L^2 + ||r_I||^2_{Sigma_I}`` plus a
bias random-walk prior over the current state with Gauss-Newton and
backtracking. The state perturbation is ordered
``(dp, dv, dphi, dba, dbg)`` with ``p <- p + dp`` and ``R <- R Exp(dphi)``.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from ..exceptions import DegenerateRegistrationError
from ..geometry import Frame, RigidTransform, compose, exp_so3, hat, log_so3, renormalize, right_jacobian, right_jacobian_inv
from ..sensors import GRAVITY_WORLD, ImuBiases, ScanFrame
from .local_map import LocalMap
from .preintegration import Preintegrated

logger = logging.getLogger(__name__)

STATE_DIM = 15
P, V, PHI, BA, BG = (slice(0, 3), slice(3, 6), slice(6, 9), slice(9, 12), slice(12, 15))


@dataclass(frozen=True)
class RobotState:
    """Estimated state ``x = [p, v, R, b_a, b_g]`` at time ``t``."""
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    b_a: np.ndarray = field(default_factory=lambda: np.zeros(3))
    b_g: np.ndarray = field(default_factory=lambda: np.zeros(3))
    t: float = 0.0

    def __post_init__(self):
        for name in ("p", "v", "b_a", "b_g"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(3))
        object.__setattr__(self, "R", np.asarray(self.R, dtype=float).reshape(3, 3))

    @property
    def pose(self) -> RigidTransform:
        """Shell pose T_WO."""
        return RigidTransform(self.R, self.p, Frame.WORLD, Frame.SHELL)

    @property
    def biases(self) -> ImuBiases:
        return ImuBiases(self.b_a, self.b_g)

    def retract(self, delta: np.ndarray) -> "RobotState":
        delta = np.asarray(delta, dtype=float)
        return replace(self,
                       p=self.p + delta[P],
                       v=self.v + delta[V],
                       R=renormalize(self.R @ exp_so3(delta[PHI])),
                       b_a=self.b_a + delta[BA],
                       b_g=self.b_g + delta[BG])

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(x)) for x in (self.p, self.v, self.R, self.b_a, self.b_g))


@dataclass(frozen=True)
class LioParams:
    max_iterations: int = 10
    step_tolerance: float = 1e-6
    max_backtracks: int = 8
    min_correspondences: int = 10
    lidar_sigma: float = 0.02
    bias_random_walk: float = 1e-3
    degeneracy_threshold: float = 1.0
    max_points: int = 800

    @classmethod
    def from_config(cls, estimator_config) -> "LioParams":
        ec = estimator_config
        return cls(ec.max_iterations, ec.step_tolerance, ec.max_backtracks, ec.min_correspondences,
                   ec.lidar_sigma, ec.bias_random_walk, ec.degeneracy_threshold, ec.max_points)


@dataclass(frozen=True)
class LidarCorrespondences:
    """Scan points in O paired with map planes; fixed for one Gauss-Newton iteration."""
    points_O: np.ndarray
    normals: np.ndarray
    centroids: np.ndarray

    def __len__(self) -> int:
        return len(self.points_O)

    def evaluate(self, pose: RigidTransform) -> np.ndarray:
        """Point-to-plane residuals ``n^T (R q + p - c)`` at ``pose`` (T_WO)."""
        world = pose.apply(self.points_O)
        return np.einsum("ij,ij->i", self.normals, world - self.centroids)

    def jacobian(self, pose: RigidTransform) -> np.ndarray:
        """(N, 6) Jacobian with respect to (dp, dphi)."""
        jac = np.zeros((len(self), 6))
        jac[:, 0:3] = self.normals
        # d(R Exp(phi) q)/dphi = -R hat(q), so n^T of it is q x (R^T n)
        jac[:, 3:6] = np.cross(self.points_O, self.normals @ pose.rotation)
        return jac


@dataclass(frozen=True)
class LidarResidual:
    residuals: np.ndarray
    jacobian: np.ndarray
    correspondences: LidarCorrespondences


def _subsample(points: np.ndarray, max_points: Optional[int]) -> np.ndarray:
    if max_points is None or len(points) <= max_points:
        return points
    index = np.unique(np.linspace(0, len(points) - 1, max_points).astype(int))
    return points[index]


def find_correspondences(scan: ScanFrame, local_map: LocalMap, pose: RigidTransform,
                         max_points: Optional[int] = None) -> LidarCorrespondences:
    """Pair scan points, mapped through ``pose`` (T_WO) and the scan's mount, with map planes."""
    points_O = scan.mount.apply(_subsample(scan.points, max_points))
    mask, normals, centroids = local_map.find_planes(pose.apply(points_O))
    return LidarCorrespondences(points_O[mask], normals, centroids)


def residual_lidar(scan: ScanFrame, local_map: LocalMap, pose: RigidTransform,
                   min_correspondences: int = 10, max_points: Optional[int] = None) -> LidarResidual:
    """
    Point-to-plane residuals of a scan against the map at a pose guess.

    Args:
        scan: LiDAR frame (points in L, with its mount T_OL)
        local_map: Map to register against
        pose: Guess of the shell pose T_WO
        min_correspondences: Fewest plane matches accepted
        max_points: Evenly subsample the scan to at most this many points

    Returns:
        LidarResidual with residuals, (N, 6) Jacobian wrt (dp, dphi) and the correspondences

    Raises:
        DegenerateRegistrationError: if fewer than ``min_correspondences`` points find a plane
    """
    if local_map.is_empty():
        raise DegenerateRegistrationError(0, min_correspondences)
    corr = find_correspondences(scan, local_map, pose, max_points)
    if len(corr) < min_correspondences:
        raise DegenerateRegistrationError(len(corr), min_correspondences)
    return LidarResidual(corr.evaluate(pose), corr.jacobian(pose), corr)


def predict_state(prior: RobotState, preint: Preintegrated, gravity=GRAVITY_WORLD) -> RobotState:
    """Propagate a state through preintegrated increments."""
    delta_R, delta_v, delta_p = preint.corrected(prior.biases)
    T = preint.duration
    g = np.asarray(gravity, dtype=float)
    return replace(prior,
                   p=prior.p + prior.v * T + 0.5 * g * T ** 2 + prior.R @ delta_p,
                   v=prior.v + g * T + prior.R @ delta_v,
                   R=renormalize(prior.R @ delta_R),
                   t=prior.t + T)


def residual_imu(prior: RobotState, state: RobotState, preint: Preintegrated,
                 gravity=GRAVITY_WORLD) -> Tuple[np.ndarray, np.ndarray]:
    """
    Preintegration residual between a fixed prior and the current state.

    The increments are corrected to the current state's biases.

    Returns:
        (r, J): 9-residual ordered (rotation, velocity, position) and its
        (9, 15) Jacobian wrt the current state's perturbation
    """
    T = preint.duration
    g = np.asarray(gravity, dtype=float)
    delta_R, delta_v, delta_p = preint.corrected(state.biases)
    dbg = state.b_g - preint.bias.gyro
    Ri_T = prior.R.T

    r_R = log_so3(delta_R.T @ Ri_T @ state.R)
    r_v = Ri_T @ (state.v - prior.v - g * T) - delta_v
    r_p = Ri_T @ (state.p - prior.p - prior.v * T - 0.5 * g * T ** 2) - delta_p

    jac = np.zeros((9, STATE_DIM))
    jr_inv = right_jacobian_inv(r_R)
    jac[0:3, PHI] = jr_inv
    jac[0:3, BG] = -jr_inv @ exp_so3(r_R).T @ right_jacobian(preint.d_R_d_bg @ dbg) @ preint.d_R_d_bg
    jac[3:6, V] = Ri_T
    jac[3:6, BA] = -preint.d_v_d_ba
    jac[3:6, BG] = -preint.d_v_d_bg
    jac[6:9, P] = Ri_T
    jac[6:9, BA] = -preint.d_p_d_ba
    jac[6:9, BG] = -preint.d_p_d_bg
    return np.concatenate([r_R, r_v, r_p]), jac


def residual_imu_prior_jacobian(prior: RobotState, state: RobotState, preint: Preintegrated,
                                gravity=GRAVITY_WORLD) -> np.ndarray:
    """(9, 15) Jacobian of :func:`residual_imu` wrt the prior's perturbation."""
    T = preint.duration
    g = np.asarray(gravity, dtype=float)
    delta_R, _, _ = preint.corrected(state.biases)
    Ri_T = prior.R.T
    r_R = log_so3(delta_R.T @ Ri_T @ state.R)

    jac = np.zeros((9, STATE_DIM))
    jac[0:3, PHI] = -right_jacobian_inv(r_R) @ state.R.T @ prior.R
    jac[3:6, V] = -Ri_T
    jac[3:6, PHI] = hat(Ri_T @ (state.v - prior.v - g * T))
    jac[6:9, P] = -Ri_T
    jac[6:9, V] = -Ri_T * T
    jac[6:9, PHI] = hat(Ri_T @ (state.p - prior.p - prior.v * T - 0.5 * g * T ** 2))
    return jac


@dataclass(frozen=True)
class LioResult:
    """Outcome of one frame update; ``covariance`` is the 15x15 posterior in perturbation order."""
    state: RobotState
    degraded: bool = False
    degenerate: bool = False
    min_eigenvalue: float = float("nan")
    iterations: int = 0
    correspondences: int = 0
    cost: float = float("nan")
    covariance: Optional[np.ndarray] = None


def information_eigenvalues(jacobian: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of the LiDAR normal matrix ``J^T J`` (6x6)."""
    return np.linalg.eigvalsh(jacobian.T @ jacobian)


def _empty_correspondences() -> LidarCorrespondences:
    return LidarCorrespondences(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 3)))


class _JointProblem:
    """
    Whitened joint residual for a fixed set of correspondences.

    The IMU and bias-walk residuals tie the state to the prior; the prior's
    own covariance is folded into their weight, which marginalises the
    previous state in one step.
    """

    def __init__(self, prior: RobotState, preint: Preintegrated, corr: LidarCorrespondences,
                 params: LioParams, gravity, prior_covariance: Optional[np.ndarray] = None,
                 linearization: Optional[RobotState] = None):
        self.prior = prior
        self.preint = preint
        self.corr = corr
        self.params = params
        self.gravity = gravity
        walk_sigma = max(params.bias_random_walk * np.sqrt(preint.duration), 1e-9)
        link_covariance = np.zeros((STATE_DIM, STATE_DIM))
        link_covariance[0:9, 0:9] = preint.covariance
        link_covariance[9:15, 9:15] = walk_sigma ** 2 * np.eye(6)
        if prior_covariance is not None:
            j_prior = self._link_prior_jacobian(linearization or predict_state(prior, preint, gravity))
            link_covariance = link_covariance + j_prior @ prior_covariance @ j_prior.T
        info = np.linalg.inv(0.5 * (link_covariance + link_covariance.T))
        self.link_sqrt_info = np.linalg.cholesky(0.5 * (info + info.T)).T

    def _link_prior_jacobian(self, state: RobotState) -> np.ndarray:
        jac = np.zeros((STATE_DIM, STATE_DIM))
        jac[0:9] = residual_imu_prior_jacobian(self.prior, state, self.preint, self.gravity)
        jac[9:15, 9:15] = -np.eye(6)
        return jac

    def _link(self, state: RobotState) -> Tuple[np.ndarray, np.ndarray]:
        r_i, j_i = residual_imu(self.prior, state, self.preint, self.gravity)
        r_b = np.concatenate([state.b_a - self.prior.b_a, state.b_g - self.prior.b_g])
        jac = np.zeros((STATE_DIM, STATE_DIM))
        jac[0:9] = j_i
        jac[9:15, 9:15] = np.eye(6)
        return np.concatenate([r_i, r_b]), jac

    def residual(self, state: RobotState) -> np.ndarray:
        r_l = self.corr.evaluate(state.pose) / self.params.lidar_sigma
        r_link, _ = self._link(state)
        return np.concatenate([r_l, self.link_sqrt_info @ r_link])

    def linearize(self, state: RobotState) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Whitened residual, its Jacobian and the raw LiDAR Jacobian (N, 6)."""
        pose = state.pose
        j_lidar = self.corr.jacobian(pose)
        r_l = self.corr.evaluate(pose) / self.params.lidar_sigma
        j_l = np.zeros((len(self.corr), STATE_DIM))
        j_l[:, P] = j_lidar[:, 0:3] / self.params.lidar_sigma
        j_l[:, PHI] = j_lidar[:, 3:6] / self.params.lidar_sigma
        r_link, j_link = self._link(state)
        r = np.concatenate([r_l, self.link_sqrt_info @ r_link])
        jac = np.vstack([j_l, self.link_sqrt_info @ j_link])
        return r, jac, j_lidar

    def covariance(self, state: RobotState) -> np.ndarray:
        """Posterior covariance ``(J^T J)^-1`` at ``state``."""
        _, jac, _ = self.linearize(state)
        hessian = jac.T @ jac
        covariance = np.linalg.pinv(0.5 * (hessian + hessian.T))
        return 0.5 * (covariance + covariance.T)


def lio_update(prior: RobotState, preint: Preintegrated, scan: ScanFrame, local_map: LocalMap,
               params: Optional[LioParams] = None, guess: Optional[RobotState] = None,
               gravity=GRAVITY_WORLD, prior_covariance: Optional[np.ndarray] = None) -> LioResult:
    """
    Joint LiDAR-inertial Gauss-Newton update for one frame.

    Correspondences are searched once per iteration. A step is accepted only
    if it does not increase the cost under those correspondences; it is
    halved up to ``max_backtracks`` times, after which the last good state is
    returned with ``degraded`` set.

    Args:
        prior: Estimate at the previous frame
        preint: IMU increments from the prior to this frame
        scan: Current LiDAR frame
        local_map: Map built from earlier frames
        params: Solver parameters
        guess: Initial estimate; the IMU prediction by default
        gravity: World gravity vector
        prior_covariance: 15x15 covariance of the prior; the prior is held exact when None

    Returns:
        LioResult with the updated state, its covariance and registration diagnostics
    """
    params = params or LioParams()
    prediction = predict_state(prior, preint, gravity)
    state = guess if guess is not None else prediction
    state = replace(state, t=prior.t + preint.duration)
    degraded = False
    degenerate = False
    min_eigenvalue = float("nan")
    cost = float("nan")
    n_corr = 0
    iteration = 0
    problem = None

    for iteration in range(1, params.max_iterations + 1):
        try:
            corr = find_correspondences(scan, local_map, state.pose, params.max_points)
            if len(corr) < params.min_correspondences:
                raise DegenerateRegistrationError(len(corr), params.min_correspondences)
        except DegenerateRegistrationError as e:
            logger.warning(f"Frame at t={state.t:.2f} s not registered: {e}")
            inertial = _JointProblem(prior, preint, _empty_correspondences(), params, gravity,
                                     prior_covariance, prediction)
            return LioResult(state, degraded=True, degenerate=True, min_eigenvalue=0.0,
                             iterations=iteration - 1, correspondences=0, cost=cost,
                             covariance=inertial.covariance(state))

        problem = _JointProblem(prior, preint, corr, params, gravity, prior_covariance, prediction)
        r, jac, j_lidar = problem.linearize(state)
        n_corr = len(corr)
        cost = float(r @ r)
        eigenvalues = information_eigenvalues(j_lidar)
        min_eigenvalue = float(eigenvalues[0])
        degenerate = min_eigenvalue < params.degeneracy_threshold

        hessian = jac.T @ jac
        gradient = jac.T @ r
        try:
            delta = np.linalg.solve(hessian, -gradient)
        except np.linalg.LinAlgError:
            delta = np.linalg.lstsq(hessian, -gradient, rcond=None)[0]

        scale = 1.0
        accepted = None
        for _ in range(params.max_backtracks + 1):
            candidate = state.retract(scale * delta)
            r_new = problem.residual(candidate)
            new_cost = float(r_new @ r_new)
            if candidate.is_finite() and new_cost <= cost * (1.0 + 1e-12) + 1e-20:
                accepted = candidate
                cost = new_cost
                break
            scale *= 0.5
        if accepted is None:
            degraded = True
            logger.warning(f"No cost decrease at t={state.t:.2f} s after {params.max_backtracks} backtracks")
            break
        state = accepted
        step_norm = float(np.linalg.norm(scale * delta))
        logger.debug(f"LIO iteration {iteration}: cost={cost:.6g} step={step_norm:.3g} correspondences={n_corr}")
        if step_norm < params.step_tolerance:
            break

    if degenerate:
        logger.debug(f"Weak registration direction at t={state.t:.2f} s (min eigenvalue {min_eigenvalue:.3g})")
    covariance = problem.covariance(state) if problem is not None else None
    return LioResult(state, degraded, degenerate, min_eigenvalue, iteration, n_corr, cost, covariance)


class LioEstimator:
    """
    Frame-rate odometry: preintegrates, registers and grows the local map.

    The posterior covariance of each frame becomes the prior covariance of
    the next, so registration corrects drift the IMU has accumulated.

    Args:
        estimator_config: Estimator section of the experiment configuration
        initial_state: Known starting state
        initial_sigma: Standard deviation of every component of the starting state
    """

    def __init__(self, estimator_config, initial_state: RobotState, initial_sigma: float = 1e-3):
        ec = estimator_config
        self.config = ec
        self.params = LioParams.from_config(ec)
        self.state = initial_state
        self.covariance = initial_sigma ** 2 * np.eye(STATE_DIM)
        self.local_map = LocalMap(ec.voxel_size, ec.min_plane_points, ec.planarity_ratio)
        self.logger = logging.getLogger(__name__)

    def initialize(self, scan: ScanFrame) -> None:
        """Seed the map with a scan taken at the initial state."""
        self.local_map.insert(compose(self.state.pose, scan.mount).apply(scan.points))
        self.logger.debug(f"Map seeded with {len(scan)} points in {len(self.local_map)} voxels")

    def process(self, preint: Preintegrated, scan: ScanFrame) -> LioResult:
        """Update with one frame and insert it at the estimated pose."""
        result = lio_update(self.state, preint, scan, self.local_map, self.params,
                            prior_covariance=self.covariance)
        self.state = result.state
        if result.covariance is not None:
            self.covariance = result.covariance
        self.local_map.insert(compose(result.state.pose, scan.mount).apply(scan.points))
        return result
