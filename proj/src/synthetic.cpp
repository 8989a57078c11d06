#include "faultbench/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "faultbench/error.hpp"
#include "faultbench/rng.hpp"

namespace faultbench::io {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Stream identifiers for derive_seed; fixed so profiles stay reproducible.
constexpr std::uint64_t kPhaseStream = 0x70686173;  // "phas"
constexpr std::uint64_t kNoiseStream = 0x6e6f6973;  // "nois"

std::int64_t sample_count(double duration_s, double rate_hz) {
  return static_cast<std::int64_t>(std::floor(duration_s * rate_hz + 1e-9));
}

TimestampNs grid_time(TimestampNs start, std::int64_t k, double rate_hz) {
  return start + static_cast<TimestampNs>(std::llround(static_cast<double>(k) * kNanosecondsPerSecond / rate_hz));
}

double amplitude_sum(const std::vector<Harmonic>& hs) {
  double sum = 0.0;
  for (const auto& h : hs) sum += std::abs(h.amplitude);
  return sum;
}

}  // namespace

void SyntheticProfile::validate() const {
  if (!(duration_s > 0.0)) throw ConfigError("synthetic profile: duration must be positive");
  if (!(cam_rate_hz > 0.0) || !(imu_rate_hz > cam_rate_hz)) {
    throw ConfigError("synthetic profile: require imu_rate > cam_rate > 0");
  }
  if (gyro_noise_density < 0.0 || accel_noise_density < 0.0) {
    throw ConfigError("synthetic profile: noise densities must be non-negative");
  }
  if (image_width <= 0 || image_height <= 0) throw ConfigError("synthetic profile: bad image size");
  for (int axis = 0; axis < 3; ++axis) {
    if (amplitude_sum(motion.position[axis]) > 0.5 * workspace[axis] + 1e-12) {
      throw ConfigError("synthetic profile: position harmonics exceed the workspace on axis " +
                        std::to_string(axis));
    }
  }
  auto finite = [](const std::vector<Harmonic>& hs) {
    for (const auto& h : hs) {
      if (!std::isfinite(h.amplitude) || !std::isfinite(h.frequency_hz) || h.frequency_hz < 0.0) return false;
    }
    return true;
  };
  for (const auto& hs : motion.position) {
    if (!finite(hs)) throw ConfigError("synthetic profile: non-finite position harmonic");
  }
  if (!finite(motion.yaw) || !finite(motion.pitch) || !finite(motion.roll)) {
    throw ConfigError("synthetic profile: non-finite attitude harmonic");
  }
}

SyntheticProfile SyntheticProfile::noiseless(std::uint64_t seed) {
  SyntheticProfile p;
  p.seed = seed;
  // Slow enough that central differences at 200 Hz resolve the velocity
  // to well under a micrometre per second.
  p.motion.position[0] = {{1.0, 0.05}, {0.25, 0.12}};
  p.motion.position[1] = {{0.9, 0.04}, {0.3, 0.11}};
  p.motion.position[2] = {{0.2, 0.08}, {0.1, 0.17}};
  p.motion.yaw = {{0.8, 0.06}, {0.35, 0.19}};
  p.motion.pitch = {{0.2, 0.09}, {0.1, 0.23}};
  p.motion.roll = {{0.12, 0.07}, {0.06, 0.29}};
  return p;
}

SyntheticProfile SyntheticProfile::standard(std::uint64_t seed) {
  SyntheticProfile p = noiseless(seed);
  // ADIS16448 datasheet figures as used for EuRoC.
  p.gyro_noise_density = 1.6968e-4;
  p.accel_noise_density = 2.0e-3;
  p.gyro_bias = Eigen::Vector3d(-0.0023, 0.0249, 0.0817);
  p.accel_bias = Eigen::Vector3d(-0.0235, 0.1217, 0.0748);
  return p;
}

SyntheticProfile SyntheticProfile::stationary() {
  SyntheticProfile p;
  p.motion = MotionParams{};
  return p;
}

SyntheticMotion::SyntheticMotion(const SyntheticProfile& profile) : center_(profile.workspace_center) {
  Xoshiro256StarStar rng(derive_seed(profile.seed, kPhaseStream));
  auto build = [&rng](const std::vector<Harmonic>& hs) {
    std::vector<Term> terms;
    for (const auto& h : hs) {
      terms.push_back({h.amplitude, kTwoPi * h.frequency_hz, kTwoPi * rng.uniform()});
    }
    return terms;
  };
  for (int axis = 0; axis < 3; ++axis) position_[axis] = build(profile.motion.position[axis]);
  euler_[0] = build(profile.motion.yaw);
  euler_[1] = build(profile.motion.pitch);
  euler_[2] = build(profile.motion.roll);
}

Eigen::Vector3d SyntheticMotion::evaluate(const std::vector<Term>& terms, double t) {
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  for (const auto& term : terms) {
    const double arg = term.omega * t + term.phase;
    const double s = std::sin(arg);
    const double c = std::cos(arg);
    out[0] += term.amplitude * s;
    out[1] += term.amplitude * term.omega * c;
    out[2] -= term.amplitude * term.omega * term.omega * s;
  }
  return out;
}

Eigen::Vector3d SyntheticMotion::position(double t) const {
  Eigen::Vector3d p;
  for (int axis = 0; axis < 3; ++axis) p[axis] = evaluate(position_[axis], t)[0];
  return center_ + p;
}

Eigen::Vector3d SyntheticMotion::velocity(double t) const {
  Eigen::Vector3d v;
  for (int axis = 0; axis < 3; ++axis) v[axis] = evaluate(position_[axis], t)[1];
  return v;
}

Eigen::Vector3d SyntheticMotion::acceleration(double t) const {
  Eigen::Vector3d a;
  for (int axis = 0; axis < 3; ++axis) a[axis] = evaluate(position_[axis], t)[2];
  return a;
}

Eigen::Vector3d SyntheticMotion::euler_derivatives(int order, double t) const {
  return {evaluate(euler_[0], t)[order], evaluate(euler_[1], t)[order], evaluate(euler_[2], t)[order]};
}

Eigen::Quaterniond SyntheticMotion::orientation(double t) const {
  const Eigen::Vector3d e = euler_derivatives(0, t);
  return Eigen::Quaterniond(Eigen::AngleAxisd(e[0], Eigen::Vector3d::UnitZ()) *
                            Eigen::AngleAxisd(e[1], Eigen::Vector3d::UnitY()) *
                            Eigen::AngleAxisd(e[2], Eigen::Vector3d::UnitX()))
      .normalized();
}

Eigen::Vector3d SyntheticMotion::body_rate(double t) const {
  const Eigen::Vector3d e = euler_derivatives(0, t);
  const Eigen::Vector3d de = euler_derivatives(1, t);
  const double pitch = e[1], roll = e[2];
  const double yaw_rate = de[0], pitch_rate = de[1], roll_rate = de[2];
  return {roll_rate - yaw_rate * std::sin(pitch),
          pitch_rate * std::cos(roll) + yaw_rate * std::sin(roll) * std::cos(pitch),
          -pitch_rate * std::sin(roll) + yaw_rate * std::cos(roll) * std::cos(pitch)};
}

Eigen::Vector3d SyntheticMotion::specific_force(double t) const {
  const Eigen::Vector3d gravity(0.0, 0.0, -kGravity);
  return orientation(t).conjugate() * (acceleration(t) - gravity);
}

SyntheticStreams synthesize(const SyntheticProfile& profile) {
  profile.validate();
  const SyntheticMotion motion(profile);
  SyntheticStreams out;

  const std::int64_t n_imu = sample_count(profile.duration_s, profile.imu_rate_hz);
  const double gyro_std = profile.gyro_noise_density * std::sqrt(profile.imu_rate_hz);
  const double accel_std = profile.accel_noise_density * std::sqrt(profile.imu_rate_hz);
  Xoshiro256StarStar noise(derive_seed(profile.seed, kNoiseStream));

  out.imu.reserve(static_cast<std::size_t>(n_imu));
  out.truth.poses.reserve(static_cast<std::size_t>(n_imu));
  for (std::int64_t k = 0; k < n_imu; ++k) {
    const TimestampNs t = grid_time(profile.start_time_ns, k, profile.imu_rate_hz);
    const double tr = to_seconds(t - profile.start_time_ns);

    TimedPose pose;
    pose.t = t;
    pose.position = motion.position(tr);
    pose.orientation = motion.orientation(tr);
    out.truth.poses.push_back(pose);

    ImuSample s;
    s.t = t;
    s.index = k;
    s.gyro = motion.body_rate(tr) + profile.gyro_bias;
    s.accel = motion.specific_force(tr) + profile.accel_bias;
    if (gyro_std > 0.0 || accel_std > 0.0) {
      for (int i = 0; i < 3; ++i) s.gyro[i] += gyro_std * noise.normal();
      for (int i = 0; i < 3; ++i) s.accel[i] += accel_std * noise.normal();
    }
    out.imu.push_back(s);
  }

  const std::int64_t n_cam = sample_count(profile.duration_s, profile.cam_rate_hz);
  const GrayImage gray = GrayImage::filled(profile.image_width, profile.image_height, profile.image_gray);
  out.cameras.reserve(static_cast<std::size_t>(n_cam));
  for (std::int64_t i = 0; i < n_cam; ++i) {
    out.cameras.push_back({grid_time(profile.start_time_ns, i, profile.cam_rate_hz), gray, gray, i});
  }
  return out;
}

}  // namespace faultbench::io
