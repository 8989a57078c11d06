#ifndef FAULTBENCH_METRICS_HPP_
#define FAULTBENCH_METRICS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "faultbench/types.hpp"

namespace faultbench::metrics {

inline constexpr double kDefaultMaxGapS = 0.01;

struct PosePair {
  TimestampNs t = 0;  // estimate timestamp
  TimedPose est;
  TimedPose base;
};

/// Rigid transform A taking estimate coordinates into the reference frame.
struct Alignment {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Isometry3d transform() const;
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
};

struct AteEntry {
  TimestampNs t = 0;
  double translational = 0.0;  // m
  double rotational = 0.0;     // rad
};

struct AteResult {
  std::vector<AteEntry> per_pose;
  double mean_translational = 0.0;
  double rmse_translational = 0.0;
  double mean_rotational = 0.0;
  std::size_t n = 0;
  Alignment alignment;
};

/// RPE interval: a number of pose steps, or a duration resolved against the
/// median spacing of the associated pairs.
struct RpeInterval {
  bool in_seconds = true;
  std::int64_t steps = 1;
  double seconds = 0.05;

  static RpeInterval of_steps(std::int64_t n) { return {false, n, 0.0}; }
  static RpeInterval of_seconds(double s) { return {true, 0, s}; }
  std::string describe() const;
};

struct RpeEntry {
  TimestampNs t = 0;
  double translational = 0.0;
  double rotational = 0.0;
};

struct RpeResult {
  RpeInterval delta;
  std::int64_t delta_steps = 0;  // resolved step count
  std::vector<RpeEntry> per_pair;
  double mean_translational = 0.0;
  double mean_rotational = 0.0;
  std::size_t k = 0;
};

struct GrowthEntry {
  TimestampNs t = 0;  // left end of the difference
  double rate = 0.0;  // m/s
};

struct GrowthSeries {
  std::vector<GrowthEntry> per_step;
  double mean_rate = 0.0;
  double peak_rate = 0.0;
  /// Mean of (rate[i+1] - rate[i]) / dt: the average second derivative of
  /// the error. Positive when divergence accelerates.
  double mean_acceleration = 0.0;
};

struct AteOptions {
  bool align = true;
  double max_gap_s = kDefaultMaxGapS;
};

/// Nearest-timestamp matching. Each estimate pose claims its nearest
/// reference pose (earlier one on ties); a reference pose claimed several
/// times goes to the closest claimant (earliest on ties), and the others are
/// dropped. Pairs further apart than max_gap_s are discarded. Output is
/// ordered by estimate time. Throws AssociationError if nothing matches.
std::vector<PosePair> associate(const Trajectory& est, const Trajectory& base, double max_gap_s = kDefaultMaxGapS);

/// Least-squares rigid alignment of the estimate positions onto the
/// reference positions (no scale, det(R) = +1). Throws
/// DegenerateAlignmentError for fewer than 3 pairs or a collinear cloud.
Alignment align(const std::vector<PosePair>& pairs);

/// E_i = (X_i^b)^-1 * A * X_i; per-pose translational and rotational error.
AteResult ate(const std::vector<PosePair>& pairs, bool do_align = true);
AteResult ate(const Trajectory& est, const Trajectory& base, const AteOptions& options = {});

/// R_i = ((X_i^b)^-1 X_{i+d}^b)^-1 ((X_i)^-1 X_{i+d}) over associated pairs.
/// Throws EvaluationError when the interval leaves no pair.
RpeResult rpe(const std::vector<PosePair>& pairs, const RpeInterval& delta);
RpeResult rpe(const Trajectory& est, const Trajectory& base, const RpeInterval& delta,
              double max_gap_s = kDefaultMaxGapS);

/// Forward differences of the translational ATE series. Throws
/// EvaluationError for fewer than two entries or non-increasing times.
GrowthSeries growth_rate(const AteResult& ate);

/// Rotation angle in [0, pi] of a rotation matrix.
double rotation_angle(const Eigen::Matrix3d& r);

}  // namespace faultbench::metrics

#endif  // FAULTBENCH_METRICS_HPP_
