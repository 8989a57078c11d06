#include "faultbench/estimator.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "faultbench/error.hpp"
#include "faultbench/rng.hpp"

namespace faultbench::estimator {

namespace {

using Eigen::Matrix3d;
using Eigen::Quaterniond;
using Eigen::Vector3d;

struct Reading {
  Vector3d gyro;
  Vector3d accel;
};

Reading reading_of(const ImuSample& s) { return {s.gyro, s.accel}; }

// Sensor readings over one IMU interval as a function of time. Between two
// regular samples the readings follow the quadratic through the previous,
// current and next sample (linear if there is no usable previous sample);
// across a gap longer than max_step_s the last sample is held.
class Segment {
 public:
  static Segment hold(const ImuSample& s) {
    Segment seg;
    seg.count_ = 1;
    seg.t_[0] = static_cast<double>(s.t);
    seg.r_[0] = reading_of(s);
    return seg;
  }

  Segment(const ImuSample* prev, const ImuSample& from, const ImuSample& to, const EstimatorConfig& config) {
    if (to_seconds(to.t - from.t) > config.max_step_s) {
      *this = hold(from);
      return;
    }
    if (prev != nullptr && prev->t < from.t && to_seconds(from.t - prev->t) <= config.max_step_s) {
      add(*prev);
    }
    add(from);
    add(to);
  }

  Reading at(double t) const {
    if (count_ == 1) return r_[0];
    Reading out{Vector3d::Zero(), Vector3d::Zero()};
    for (int i = 0; i < count_; ++i) {
      double w = 1.0;
      for (int j = 0; j < count_; ++j) {
        if (j != i) w *= (t - t_[j]) / (t_[i] - t_[j]);
      }
      out.gyro += w * r_[i].gyro;
      out.accel += w * r_[i].accel;
    }
    return out;
  }

 private:
  Segment() = default;
  void add(const ImuSample& s) {
    t_[count_] = static_cast<double>(s.t);
    r_[count_] = reading_of(s);
    ++count_;
  }

  int count_ = 0;
  double t_[3] = {0.0, 0.0, 0.0};
  Reading r_[3];
};

Matrix3d skew(const Vector3d& v) {
  Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

void check_finite(const ImuSample& s) {
  if (!s.gyro.allFinite() || !s.accel.allFinite()) {
    throw NumericalError("non-finite IMU reading at t=" + std::to_string(s.t));
  }
}

void symmetrize(Covariance& p) { p = 0.5 * (p + p.transpose()).eval(); }

// Time derivative of the nominal state for the RK4 integrator.
struct Derivative {
  Eigen::Vector4d q;  // quaternion coefficients (x, y, z, w)
  Vector3d v;
  Vector3d p;
};

struct Nominal {
  Eigen::Vector4d q;
  Vector3d v;
  Vector3d p;
};

Derivative derivative(const Nominal& x, const Vector3d& omega, const Vector3d& accel, const Vector3d& gravity) {
  const Quaterniond q = Quaterniond(x.q).normalized();
  const Quaterniond dq = q * Quaterniond(0.0, omega.x(), omega.y(), omega.z());
  return {0.5 * dq.coeffs(), q * accel + gravity, x.v};
}

Nominal advance(const Nominal& x, const Derivative& d, double h) {
  return {x.q + h * d.q, x.v + h * d.v, x.p + h * d.p};
}

// One RK4 step of length h given bias-corrected readings at the start,
// middle and end of the step, followed by the covariance update.
void step(NavState& s, const Reading& r0, const Reading& rm, const Reading& r1, double h,
          const EstimatorConfig& config) {
  const Vector3d& g = config.gravity;

  const Nominal x0{s.orientation.coeffs(), s.velocity, s.position};
  const Derivative k1 = derivative(x0, r0.gyro, r0.accel, g);
  const Derivative k2 = derivative(advance(x0, k1, 0.5 * h), rm.gyro, rm.accel, g);
  const Derivative k3 = derivative(advance(x0, k2, 0.5 * h), rm.gyro, rm.accel, g);
  const Derivative k4 = derivative(advance(x0, k3, h), r1.gyro, r1.accel, g);

  const Matrix3d rot = s.orientation.toRotationMatrix();

  s.orientation = Quaterniond(Eigen::Vector4d(x0.q + h / 6.0 * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q))).normalized();
  s.velocity = x0.v + h / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
  s.position = x0.p + h / 6.0 * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);

  Covariance f = Covariance::Zero();
  f.block<3, 3>(kAttitude, kAttitude) = -skew(rm.gyro);
  f.block<3, 3>(kAttitude, kGyroBias) = -Matrix3d::Identity();
  f.block<3, 3>(kVelocity, kAttitude) = -rot * skew(rm.accel);
  f.block<3, 3>(kVelocity, kAccelBias) = -rot;
  f.block<3, 3>(kPosition, kVelocity) = Matrix3d::Identity();

  const Covariance fh = f * h;
  const Covariance phi = Covariance::Identity() + fh + 0.5 * fh * fh;

  Eigen::Matrix<double, kStateDim, 1> q = Eigen::Matrix<double, kStateDim, 1>::Zero();
  q.segment<3>(kAttitude).setConstant(config.gyro_noise_density * config.gyro_noise_density * h);
  q.segment<3>(kVelocity).setConstant(config.accel_noise_density * config.accel_noise_density * h);
  q.segment<3>(kGyroBias).setConstant(config.gyro_random_walk * config.gyro_random_walk * h);
  q.segment<3>(kAccelBias).setConstant(config.accel_random_walk * config.accel_random_walk * h);

  s.covariance = phi * s.covariance * phi.transpose();
  s.covariance.diagonal() += q;
  symmetrize(s.covariance);
}

// Integrates from state.t to t_end along `seg`, in equal sub-steps no
// longer than max_step_s.
NavState integrate(const NavState& state, const Segment& seg, TimestampNs t_end, const EstimatorConfig& config) {
  const double dt = to_seconds(t_end - state.t);
  if (!(dt > 0.0)) throw NumericalError("propagation interval must be positive");
  const int n = std::max(1, static_cast<int>(std::ceil(dt / config.max_step_s - 1e-12)));
  const double h = dt / n;
  const double span = static_cast<double>(t_end - state.t);
  auto corrected = [&](double t) {
    const Reading r = seg.at(t);
    return Reading{r.gyro - state.gyro_bias, r.accel - state.accel_bias};
  };

  NavState s = state;
  const double t0 = static_cast<double>(state.t);
  for (int i = 0; i < n; ++i) {
    const double ta = t0 + span * i / n;
    const double tb = t0 + span * (i + 1) / n;
    step(s, corrected(ta), corrected(0.5 * (ta + tb)), corrected(tb), h, config);
  }
  s.t = t_end;
  return s;
}

Vector3d truth_velocity(const Trajectory& truth, TimestampNs t) {
  const TimestampNs h = 1'000'000;  // 1 ms
  const TimestampNs lo = std::max(truth.poses.front().t, t - h);
  const TimestampNs hi = std::min(truth.poses.back().t, t + h);
  if (hi <= lo) return Vector3d::Zero();
  return (interpolate_pose(truth, hi).position - interpolate_pose(truth, lo).position) / to_seconds(hi - lo);
}

}  // namespace

bool NavState::is_finite() const {
  return position.allFinite() && velocity.allFinite() && orientation.coeffs().allFinite() &&
         gyro_bias.allFinite() && accel_bias.allFinite() && covariance.allFinite();
}

void EstimatorConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("estimator.") + name + ": must be > 0");
  };
  positive(gyro_noise_density, "gyro_noise_density");
  positive(accel_noise_density, "accel_noise_density");
  positive(gyro_random_walk, "gyro_random_walk");
  positive(accel_random_walk, "accel_random_walk");
  positive(fix_position_noise, "fix_position_noise");
  positive(fix_orientation_noise, "fix_orientation_noise");
  positive(max_step_s, "max_step_s");
  positive(initial_attitude_std, "initial_attitude_std");
  positive(initial_velocity_std, "initial_velocity_std");
  positive(initial_position_std, "initial_position_std");
  positive(initial_gyro_bias_std, "initial_gyro_bias_std");
  positive(initial_accel_bias_std, "initial_accel_bias_std");
  if (!gravity.allFinite()) throw ConfigError("estimator.gravity: must be finite");
  if (!std::isfinite(gate_chi2)) throw ConfigError("estimator.gate_chi2: must be finite");
}

Covariance EstimatorConfig::initial_covariance() const {
  Covariance p = Covariance::Zero();
  p.diagonal().segment<3>(kAttitude).setConstant(initial_attitude_std * initial_attitude_std);
  p.diagonal().segment<3>(kVelocity).setConstant(initial_velocity_std * initial_velocity_std);
  p.diagonal().segment<3>(kPosition).setConstant(initial_position_std * initial_position_std);
  p.diagonal().segment<3>(kGyroBias).setConstant(initial_gyro_bias_std * initial_gyro_bias_std);
  p.diagonal().segment<3>(kAccelBias).setConstant(initial_accel_bias_std * initial_accel_bias_std);
  return p;
}

NavState initial_state_from_truth(const TimedPose& truth, const Vector3d& velocity, const EstimatorConfig& config) {
  NavState s;
  s.t = truth.t;
  s.position = truth.position + config.initial_position_offset;
  s.orientation = (truth.orientation * exp_quat(config.initial_attitude_offset)).normalized();
  s.velocity = velocity;
  s.covariance = config.initial_covariance();
  return s;
}

Quaterniond exp_quat(const Vector3d& v) {
  const double theta = v.norm();
  if (theta < 1e-8) return Quaterniond(1.0, 0.5 * v.x(), 0.5 * v.y(), 0.5 * v.z()).normalized();
  const Vector3d axis = v / theta;
  const double s = std::sin(0.5 * theta);
  return {std::cos(0.5 * theta), s * axis.x(), s * axis.y(), s * axis.z()};
}

Vector3d log_quat(const Quaterniond& q_in) {
  Quaterniond q = q_in.normalized();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vector3d u = q.vec();
  const double n = u.norm();
  if (n < 1e-12) return 2.0 * u / q.w();
  return 2.0 * std::atan2(n, q.w()) * u / n;
}

NavState propagate(const NavState& state, const ImuSample& sample, double dt, const EstimatorConfig& config) {
  check_finite(sample);
  if (!(dt > 0.0)) throw NumericalError("propagation interval must be positive");
  return integrate(state, Segment::hold(sample), state.t + to_nanoseconds(dt), config);
}

NavState propagate(const NavState& state, const ImuSample& from, const ImuSample& to, const EstimatorConfig& config,
                   const ImuSample* previous) {
  check_finite(from);
  check_finite(to);
  if (to.t <= from.t) throw OrderingError("IMU samples out of order at t=" + std::to_string(to.t));
  NavState start = state;
  start.t = from.t;
  return integrate(start, Segment(previous, from, to, config), to.t, config);
}

UpdateResult visual_update(const NavState& state, const TimedPose& fix, const EstimatorConfig& config) {
  using Matrix6d = Eigen::Matrix<double, 6, 6>;
  using Vector6d = Eigen::Matrix<double, 6, 1>;

  Vector6d r;
  r.head<3>() = log_quat(state.orientation.conjugate() * fix.orientation);
  r.tail<3>() = fix.position - state.position;

  // H selects the attitude and position blocks.
  Eigen::Matrix<double, 6, kStateDim> hm = Eigen::Matrix<double, 6, kStateDim>::Zero();
  hm.block<3, 3>(0, kAttitude).setIdentity();
  hm.block<3, 3>(3, kPosition).setIdentity();

  Matrix6d rn = Matrix6d::Zero();
  rn.diagonal().head<3>().setConstant(config.fix_orientation_noise * config.fix_orientation_noise);
  rn.diagonal().tail<3>().setConstant(config.fix_position_noise * config.fix_position_noise);

  const Eigen::Matrix<double, kStateDim, 6> pht = state.covariance * hm.transpose();
  const Matrix6d s = hm * pht + rn;
  const Eigen::LLT<Matrix6d> llt(s);
  if (llt.info() != Eigen::Success || !s.allFinite()) {
    throw NumericalError("innovation covariance is not positive definite at t=" + std::to_string(state.t));
  }

  UpdateResult out;
  out.state = state;
  out.mahalanobis = r.dot(llt.solve(r));
  if (!std::isfinite(out.mahalanobis)) {
    throw NumericalError("non-finite innovation at t=" + std::to_string(state.t));
  }
  if (config.gate_chi2 > 0.0 && out.mahalanobis > config.gate_chi2) return out;

  const Eigen::Matrix<double, kStateDim, 6> k = llt.solve(pht.transpose()).transpose();
  const Eigen::Matrix<double, kStateDim, 1> dx = k * r;

  NavState& n = out.state;
  n.orientation = (state.orientation * exp_quat(dx.segment<3>(kAttitude))).normalized();
  n.velocity += dx.segment<3>(kVelocity);
  n.position += dx.segment<3>(kPosition);
  n.gyro_bias += dx.segment<3>(kGyroBias);
  n.accel_bias += dx.segment<3>(kAccelBias);

  const Covariance ikh = Covariance::Identity() - k * hm;
  n.covariance = ikh * state.covariance * ikh.transpose() + k * rn * k.transpose();
  symmetrize(n.covariance);
  out.accepted = true;
  return out;
}

TimedPose interpolate_pose(const Trajectory& trajectory, TimestampNs t) {
  const auto& poses = trajectory.poses;
  if (poses.empty() || t < poses.front().t || t > poses.back().t) {
    throw DataError("time " + std::to_string(t) + " outside the reference trajectory");
  }
  const auto hi = std::lower_bound(poses.begin(), poses.end(), t,
                                   [](const TimedPose& p, TimestampNs value) { return p.t < value; });
  if (hi->t == t) return *hi;
  const auto lo = hi - 1;
  const double u = static_cast<double>(t - lo->t) / static_cast<double>(hi->t - lo->t);
  TimedPose out;
  out.t = t;
  out.position = lo->position + u * (hi->position - lo->position);
  out.orientation = lo->orientation.slerp(u, hi->orientation).normalized();
  return out;
}

TimedPose noisy_fix(const TimedPose& truth, std::int64_t frame_index, const EstimatorConfig& config) {
  Xoshiro256StarStar rng(derive_seed(config.fix_seed, static_cast<std::uint64_t>(frame_index)));
  Vector3d dp, dtheta;
  for (int i = 0; i < 3; ++i) dp[i] = config.fix_position_noise * rng.normal();
  for (int i = 0; i < 3; ++i) dtheta[i] = config.fix_orientation_noise * rng.normal();
  TimedPose fix = truth;
  fix.position += dp;
  fix.orientation = (truth.orientation * exp_quat(dtheta)).normalized();
  return fix;
}

ClosedLoopResult run_closed_loop(const std::vector<CameraFrame>& cameras, const std::vector<ImuSample>& imu,
                                 const Trajectory& truth, const EstimatorConfig& config) {
  config.validate();
  if (imu.empty()) throw DataError("closed loop: empty IMU stream");
  if (truth.empty()) throw DataError("closed loop: empty reference trajectory");

  ClosedLoopResult result;
  result.trajectory.poses.reserve(imu.size());

  NavState s;
  if (config.initial_state) {
    s = *config.initial_state;
    if (s.t > imu.front().t) throw ConfigError("closed loop: initial state is later than the first IMU sample");
  } else {
    const TimedPose p0 = interpolate_pose(truth, imu.front().t);
    s = initial_state_from_truth(p0, truth_velocity(truth, p0.t), config);
  }

  std::size_t cam = 0;
  while (cam < cameras.size() && cameras[cam].t < s.t) ++cam;

  auto apply_fix = [&](const CameraFrame& frame) {
    if (frame.t < truth.poses.front().t || frame.t > truth.poses.back().t) return;
    const TimedPose fix = noisy_fix(interpolate_pose(truth, frame.t), frame.index, config);
    const UpdateResult u = visual_update(s, fix, config);
    s = u.state;
    ++(u.accepted ? result.fixes_accepted : result.fixes_rejected);
  };

  auto abort_run = [&](TimestampNs t, std::string reason) {
    result.aborted = true;
    result.abort_time = t;
    result.abort_reason = std::move(reason);
  };

  try {
    check_finite(imu.front());
    if (s.t < imu.front().t) s = integrate(s, Segment::hold(imu.front()), imu.front().t, config);
    while (cam < cameras.size() && cameras[cam].t == s.t) apply_fix(cameras[cam++]);
    result.trajectory.poses.push_back(s.pose());

    for (std::size_t k = 1; k < imu.size(); ++k) {
      const ImuSample& from = imu[k - 1];
      const ImuSample& to = imu[k];
      check_finite(to);
      if (to.t <= from.t) throw OrderingError("IMU samples out of order at t=" + std::to_string(to.t));
      const Segment seg(k >= 2 ? &imu[k - 2] : nullptr, from, to, config);
      while (cam < cameras.size() && cameras[cam].t <= to.t) {
        const CameraFrame& frame = cameras[cam++];
        if (frame.t > s.t) s = integrate(s, seg, frame.t, config);
        apply_fix(frame);
      }
      if (s.t < to.t) s = integrate(s, seg, to.t, config);

      if (!s.is_finite()) {
        abort_run(to.t, "state became non-finite");
        break;
      }
      result.trajectory.poses.push_back(s.pose());
    }
  } catch (const NumericalError& e) {
    abort_run(s.t, e.what());
  }
  result.final_state = s;
  return result;
}

}  // namespace faultbench::estimator
