#ifndef FAULTBENCH_ESTIMATOR_HPP_
#define FAULTBENCH_ESTIMATOR_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "faultbench/types.hpp"

namespace faultbench::estimator {

inline constexpr int kStateDim = 15;

// Error-state block offsets.
inline constexpr int kAttitude = 0;
inline constexpr int kVelocity = 3;
inline constexpr int kPosition = 6;
inline constexpr int kGyroBias = 9;
inline constexpr int kAccelBias = 12;

using Covariance = Eigen::Matrix<double, kStateDim, kStateDim>;

/// Filter state. The attitude error is local: q_true = q * Exp(dtheta).
struct NavState {
  TimestampNs t = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d gyro_bias = Eigen::Vector3d::Zero();
  Eigen::Vector3d accel_bias = Eigen::Vector3d::Zero();
  Covariance covariance = Covariance::Zero();

  TimedPose pose() const { return {t, position, orientation}; }
  bool is_finite() const;
};

struct EstimatorConfig {
  Eigen::Vector3d gravity = Eigen::Vector3d(0.0, 0.0, -9.81);

  // Continuous-time IMU noise model used by the filter.
  double gyro_noise_density = 1.6968e-4;   // rad/s/sqrt(Hz)
  double accel_noise_density = 2.0e-3;     // m/s^2/sqrt(Hz)
  double gyro_random_walk = 1.9393e-5;     // rad/s^2/sqrt(Hz)
  double accel_random_walk = 3.0e-3;       // m/s^3/sqrt(Hz)

  // Synthetic visual pose fix.
  double fix_position_noise = 0.02;     // m
  double fix_orientation_noise = 0.01;  // rad
  std::uint64_t fix_seed = 0;

  /// Chi-square gate on the 6-dof fix innovation; <= 0 disables gating.
  double gate_chi2 = 22.458;  // 0.999 quantile, 6 dof

  /// Longest single propagation step; longer gaps are sub-stepped.
  double max_step_s = 0.1;

  // Initial 1-sigma uncertainty used when the state comes from ground truth.
  double initial_attitude_std = 0.01;
  double initial_velocity_std = 0.05;
  double initial_position_std = 0.02;
  double initial_gyro_bias_std = 0.1;
  double initial_accel_bias_std = 0.2;

  // Deterministic perturbation of a truth-derived initial state.
  Eigen::Vector3d initial_position_offset = Eigen::Vector3d::Zero();  // m, world frame
  Eigen::Vector3d initial_attitude_offset = Eigen::Vector3d::Zero();  // rad, body frame

  /// If empty, run_closed_loop starts from ground truth at the first IMU
  /// sample with zero biases and the covariance above.
  std::optional<NavState> initial_state;

  /// Throws ConfigError unless every noise parameter is positive.
  void validate() const;

  Covariance initial_covariance() const;
};

/// Filter state at a truth pose: offsets from `config` applied, zero biases,
/// covariance from the initial_*_std fields.
NavState initial_state_from_truth(const TimedPose& truth, const Eigen::Vector3d& velocity,
                                  const EstimatorConfig& config);

/// Zero-order hold: integrates one sample held constant over `dt` seconds.
/// Gaps longer than config.max_step_s are split into equal sub-steps.
/// Throws NumericalError on non-finite input.
NavState propagate(const NavState& state, const ImuSample& sample, double dt, const EstimatorConfig& config);

/// Integrates from `from.t` to `to.t` (RK4 on attitude, velocity and
/// position). Readings are interpolated between the samples: quadratically
/// when `previous` is given and close enough, linearly otherwise. If the gap
/// exceeds config.max_step_s the sensor is treated as silent and `from` is
/// held instead, as after an IMU dropout.
NavState propagate(const NavState& state, const ImuSample& from, const ImuSample& to, const EstimatorConfig& config,
                   const ImuSample* previous = nullptr);

struct UpdateResult {
  NavState state;
  bool accepted = false;
  double mahalanobis = 0.0;  // r^T S^-1 r of the innovation
};

/// Position + attitude fix update (Joseph form). Rejected fixes leave the
/// state untouched. Throws NumericalError if the innovation covariance is
/// not positive definite.
UpdateResult visual_update(const NavState& state, const TimedPose& fix, const EstimatorConfig& config);

/// Pose of `trajectory` at `t`: linear in position, slerp in orientation.
/// Throws DataError if `t` lies outside the trajectory.
TimedPose interpolate_pose(const Trajectory& trajectory, TimestampNs t);

/// Truth pose perturbed by the configured fix noise. The perturbation
/// depends only on (fix_seed, frame_index).
TimedPose noisy_fix(const TimedPose& truth, std::int64_t frame_index, const EstimatorConfig& config);

struct ClosedLoopResult {
  Trajectory trajectory;  // one pose per processed IMU sample
  bool aborted = false;
  std::optional<TimestampNs> abort_time;
  std::string abort_reason;
  std::size_t fixes_accepted = 0;
  std::size_t fixes_rejected = 0;
  NavState final_state;  // filter state after the last processed sample
};

/// Runs the reference filter over the (possibly faulted) streams. Every
/// surviving camera frame inside the IMU time span triggers a fix update at
/// its own timestamp. Numerical failure ends the run early with the poses
/// produced so far.
ClosedLoopResult run_closed_loop(const std::vector<CameraFrame>& cameras, const std::vector<ImuSample>& imu,
                                 const Trajectory& truth, const EstimatorConfig& config);

/// SO(3) exponential / logarithm on quaternions.
Eigen::Quaterniond exp_quat(const Eigen::Vector3d& rotation_vector);
Eigen::Vector3d log_quat(const Eigen::Quaterniond& q);

}  // namespace faultbench::estimator

#endif  // FAULTBENCH_ESTIMATOR_HPP_
