#ifndef FAULTBENCH_SYNTHETIC_HPP_
#define FAULTBENCH_SYNTHETIC_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "faultbench/types.hpp"

namespace faultbench::io {

inline constexpr double kGravity = 9.81;

/// One sinusoid a * sin(2*pi*f*t + phase). Phases are drawn from the profile
/// seed; amplitude and frequency are part of the profile.
struct Harmonic {
  double amplitude = 0.0;
  double frequency_hz = 0.0;
};

/// Sum-of-sinusoids motion. Position harmonics are in metres around the
/// workspace centre; attitude harmonics are ZYX Euler angles in radians.
struct MotionParams {
  std::array<std::vector<Harmonic>, 3> position;  // x, y, z
  std::vector<Harmonic> yaw;
  std::vector<Harmonic> pitch;
  std::vector<Harmonic> roll;
};

/// Desk-scale stand-in for a EuRoC sequence: smooth closed-form motion plus
/// an IMU model (white noise and constant bias) and placeholder stereo frames.
struct SyntheticProfile {
  double duration_s = 60.0;
  Eigen::Vector3d workspace = Eigen::Vector3d(3.0, 3.0, 1.0);  // box extents, m
  Eigen::Vector3d workspace_center = Eigen::Vector3d(0.0, 0.0, 1.5);
  double imu_rate_hz = 200.0;
  double cam_rate_hz = 20.0;
  std::uint64_t seed = 1;
  TimestampNs start_time_ns = 0;
  MotionParams motion;

  // Continuous-time white noise densities (rad/s/sqrt(Hz), m/s^2/sqrt(Hz));
  // per-sample std is density * sqrt(imu_rate).
  double gyro_noise_density = 0.0;
  double accel_noise_density = 0.0;
  Eigen::Vector3d gyro_bias = Eigen::Vector3d::Zero();
  Eigen::Vector3d accel_bias = Eigen::Vector3d::Zero();

  int image_width = 752;
  int image_height = 480;
  std::uint8_t image_gray = 128;

  /// Throws ConfigError unless imu_rate > cam_rate > 0, duration > 0 and
  /// the position harmonics fit inside the workspace.
  void validate() const;

  /// Gentle head-motion profile in a 3 m x 3 m room with EuRoC-like IMU noise.
  static SyntheticProfile standard(std::uint64_t seed = 1);

  /// Same motion, noise-free and bias-free.
  static SyntheticProfile noiseless(std::uint64_t seed = 1);

  /// No motion at all: identity attitude at the workspace centre.
  static SyntheticProfile stationary();
};

/// Closed-form kinematics of a profile. All derivatives are analytic.
class SyntheticMotion {
 public:
  explicit SyntheticMotion(const SyntheticProfile& profile);

  Eigen::Vector3d position(double t) const;
  Eigen::Vector3d velocity(double t) const;
  Eigen::Vector3d acceleration(double t) const;
  Eigen::Quaterniond orientation(double t) const;
  /// Angular velocity expressed in the body frame.
  Eigen::Vector3d body_rate(double t) const;
  /// Accelerometer reading R^T (a - g) with g = (0, 0, -9.81).
  Eigen::Vector3d specific_force(double t) const;

 private:
  struct Term {
    double amplitude;
    double omega;
    double phase;
  };
  // value, first, second derivative of a sum of sinusoids
  static Eigen::Vector3d evaluate(const std::vector<Term>& terms, double t);
  Eigen::Vector3d euler_derivatives(int order, double t) const;  // (yaw, pitch, roll)

  Eigen::Vector3d center_;
  std::array<std::vector<Term>, 3> position_;
  std::array<std::vector<Term>, 3> euler_;  // yaw, pitch, roll
};

struct SyntheticStreams {
  Trajectory truth;                  // sampled at imu_rate
  std::vector<ImuSample> imu;
  std::vector<CameraFrame> cameras;  // flat mid-gray stereo placeholders
};

/// Samples the profile: ground truth and IMU at imu_rate, cameras at cam_rate,
/// all on an integer-nanosecond grid starting at `start_time_ns`.
SyntheticStreams synthesize(const SyntheticProfile& profile);

}  // namespace faultbench::io

#endif  // FAULTBENCH_SYNTHETIC_HPP_
