#include "faultbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SVD>

#include "faultbench/dataset_io.hpp"
#include "faultbench/error.hpp"

namespace faultbench::metrics {

namespace {

using Eigen::Matrix3d;
using Eigen::Quaterniond;
using Eigen::Vector3d;

constexpr double kCollinearTolerance = 1e-10;

double quaternion_angle(const Quaterniond& q) {
  return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
}

// Singular values of the centred scatter matrix of a point cloud.
Vector3d scatter_spectrum(const std::vector<Vector3d>& pts, const Vector3d& mean) {
  Matrix3d c = Matrix3d::Zero();
  for (const auto& p : pts) c += (p - mean) * (p - mean).transpose();
  return Eigen::JacobiSVD<Matrix3d>(c).singularValues();
}

void check_spread(const std::vector<Vector3d>& pts, const Vector3d& mean, const char* which) {
  const Vector3d s = scatter_spectrum(pts, mean);
  if (!(s[0] > 0.0)) {
    throw DegenerateAlignmentError(std::string("alignment: all ") + which + " positions coincide");
  }
  if (s[1] <= kCollinearTolerance * s[0]) {
    throw DegenerateAlignmentError(std::string("alignment: ") + which + " positions are collinear");
  }
}

std::int64_t resolve_steps(const std::vector<PosePair>& pairs, const RpeInterval& delta) {
  if (!delta.in_seconds) {
    if (delta.steps < 1) throw EvaluationError("rpe: interval must be at least one step");
    return delta.steps;
  }
  if (!(delta.seconds > 0.0)) throw EvaluationError("rpe: interval must be positive");
  if (pairs.size() < 2) throw EvaluationError("rpe: need at least two pairs to resolve a time interval");
  std::vector<TimestampNs> gaps;
  gaps.reserve(pairs.size() - 1);
  for (std::size_t i = 1; i < pairs.size(); ++i) gaps.push_back(pairs[i].t - pairs[i - 1].t);
  const auto mid = gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2);
  std::nth_element(gaps.begin(), mid, gaps.end());
  double median = static_cast<double>(*mid);
  if (gaps.size() % 2 == 0) {
    const auto lower = std::max_element(gaps.begin(), mid);
    median = 0.5 * (median + static_cast<double>(*lower));
  }
  if (!(median > 0.0)) throw EvaluationError("rpe: duplicate timestamps");
  return std::max<std::int64_t>(1, std::llround(delta.seconds * kNanosecondsPerSecond / median));
}

}  // namespace

Eigen::Isometry3d Alignment::transform() const {
  Eigen::Isometry3d a = Eigen::Isometry3d::Identity();
  a.linear() = rotation;
  a.translation() = translation;
  return a;
}

std::string RpeInterval::describe() const {
  if (in_seconds) return io::format_double(seconds) + " s";
  return std::to_string(steps) + " steps";
}

double rotation_angle(const Matrix3d& r) {
  const Vector3d axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (r.trace() - 1.0));
}

std::vector<PosePair> associate(const Trajectory& est, const Trajectory& base, double max_gap_s) {
  if (est.empty() || base.empty()) throw AssociationError("association: empty trajectory");
  if (!(max_gap_s >= 0.0)) throw AssociationError("association: max_gap must be >= 0");
  const double max_gap_ns = max_gap_s * kNanosecondsPerSecond;
  const auto& b = base.poses;

  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  // claim[j] = estimate index currently holding reference pose j
  std::vector<std::size_t> claim(b.size(), kNone);
  std::vector<TimestampNs> claim_gap(b.size(), 0);

  for (std::size_t i = 0; i < est.poses.size(); ++i) {
    const TimestampNs t = est.poses[i].t;
    const auto hi = std::lower_bound(b.begin(), b.end(), t,
                                     [](const TimedPose& p, TimestampNs v) { return p.t < v; });
    std::size_t j = kNone;
    TimestampNs gap = 0;
    if (hi != b.begin()) {
      j = static_cast<std::size_t>(hi - b.begin()) - 1;
      gap = t - b[j].t;
    }
    if (hi != b.end() && (j == kNone || hi->t - t < gap)) {
      j = static_cast<std::size_t>(hi - b.begin());
      gap = hi->t - t;
    }
    if (static_cast<double>(gap) > max_gap_ns) continue;
    if (claim[j] == kNone || gap < claim_gap[j]) {
      claim[j] = i;
      claim_gap[j] = gap;
    }
  }

  std::vector<std::size_t> owner(est.poses.size(), kNone);
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (claim[j] != kNone) owner[claim[j]] = j;
  }
  std::vector<PosePair> pairs;
  for (std::size_t i = 0; i < est.poses.size(); ++i) {
    if (owner[i] == kNone) continue;
    pairs.push_back({est.poses[i].t, est.poses[i], b[owner[i]]});
  }
  if (pairs.empty()) throw AssociationError("association: no pose pairs within max_gap");
  return pairs;
}

Alignment align(const std::vector<PosePair>& pairs) {
  if (pairs.size() < 3) {
    throw DegenerateAlignmentError("alignment: need at least 3 pose pairs, got " + std::to_string(pairs.size()));
  }
  std::vector<Vector3d> e, b;
  e.reserve(pairs.size());
  b.reserve(pairs.size());
  Vector3d me = Vector3d::Zero(), mb = Vector3d::Zero();
  for (const auto& p : pairs) {
    e.push_back(p.est.position);
    b.push_back(p.base.position);
    me += p.est.position;
    mb += p.base.position;
  }
  const double n = static_cast<double>(pairs.size());
  me /= n;
  mb /= n;
  check_spread(e, me, "estimate");
  check_spread(b, mb, "reference");

  Matrix3d h = Matrix3d::Zero();
  for (std::size_t i = 0; i < e.size(); ++i) h += (b[i] - mb) * (e[i] - me).transpose();
  if (!h.allFinite()) throw DegenerateAlignmentError("alignment: non-finite positions");

  const Eigen::JacobiSVD<Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3d d = Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;

  Alignment a;
  a.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  a.translation = mb - a.rotation * me;
  return a;
}

AteResult ate(const std::vector<PosePair>& pairs, bool do_align) {
  if (pairs.empty()) throw AssociationError("ate: no pose pairs");
  AteResult r;
  if (do_align) r.alignment = align(pairs);
  const Quaterniond qa(r.alignment.rotation);
  double sum = 0.0, sum_sq = 0.0, sum_rot = 0.0;
  r.per_pose.reserve(pairs.size());
  for (const auto& p : pairs) {
    const double et = (r.alignment.apply(p.est.position) - p.base.position).norm();
    const double er = quaternion_angle(p.base.orientation.conjugate() * qa * p.est.orientation);
    r.per_pose.push_back({p.t, et, er});
    sum += et;
    sum_sq += et * et;
    sum_rot += er;
  }
  r.n = pairs.size();
  const double n = static_cast<double>(r.n);
  r.mean_translational = sum / n;
  r.rmse_translational = std::sqrt(sum_sq / n);
  r.mean_rotational = sum_rot / n;
  return r;
}

AteResult ate(const Trajectory& est, const Trajectory& base, const AteOptions& options) {
  return ate(associate(est, base, options.max_gap_s), options.align);
}

RpeResult rpe(const std::vector<PosePair>& pairs, const RpeInterval& delta) {
  if (pairs.empty()) throw AssociationError("rpe: no pose pairs");
  RpeResult r;
  r.delta = delta;
  r.delta_steps = resolve_steps(pairs, delta);
  const auto d = static_cast<std::size_t>(r.delta_steps);
  if (d >= pairs.size()) {
    throw EvaluationError("rpe: interval of " + std::to_string(d) + " steps leaves no pairs among " +
                          std::to_string(pairs.size()) + " poses");
  }
  double sum = 0.0, sum_rot = 0.0;
  r.per_pair.reserve(pairs.size() - d);
  for (std::size_t i = 0; i + d < pairs.size(); ++i) {
    const auto& a = pairs[i];
    const auto& b = pairs[i + d];
    const Quaterniond qe = a.est.orientation.conjugate() * b.est.orientation;
    const Vector3d te = a.est.orientation.conjugate() * (b.est.position - a.est.position);
    const Quaterniond qb = a.base.orientation.conjugate() * b.base.orientation;
    const Vector3d tb = a.base.orientation.conjugate() * (b.base.position - a.base.position);
    // translation of rel_b^-1 * rel_e is qb^-1 (te - tb), whose norm is |te - tb|
    const double et = (te - tb).norm();
    const double er = quaternion_angle(qb.conjugate() * qe);
    r.per_pair.push_back({a.t, et, er});
    sum += et;
    sum_rot += er;
  }
  r.k = r.per_pair.size();
  r.mean_translational = sum / static_cast<double>(r.k);
  r.mean_rotational = sum_rot / static_cast<double>(r.k);
  return r;
}

RpeResult rpe(const Trajectory& est, const Trajectory& base, const RpeInterval& delta, double max_gap_s) {
  return rpe(associate(est, base, max_gap_s), delta);
}

GrowthSeries growth_rate(const AteResult& ate) {
  const auto& e = ate.per_pose;
  if (e.size() < 2) throw EvaluationError("growth rate: need at least two ATE entries");
  GrowthSeries g;
  g.per_step.reserve(e.size() - 1);
  double sum = 0.0;
  g.peak_rate = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < e.size(); ++i) {
    if (e[i + 1].t <= e[i].t) {
      throw EvaluationError("growth rate: non-increasing timestamps at " + std::to_string(e[i + 1].t));
    }
    const double rate = (e[i + 1].translational - e[i].translational) / to_seconds(e[i + 1].t - e[i].t);
    g.per_step.push_back({e[i].t, rate});
    sum += rate;
    g.peak_rate = std::max(g.peak_rate, rate);
  }
  g.mean_rate = sum / static_cast<double>(g.per_step.size());
  if (g.per_step.size() >= 2) {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < g.per_step.size(); ++i) {
      acc += (g.per_step[i + 1].rate - g.per_step[i].rate) / to_seconds(g.per_step[i + 1].t - g.per_step[i].t);
    }
    g.mean_acceleration = acc / static_cast<double>(g.per_step.size() - 1);
  }
  return g;
}

}  // namespace faultbench::metrics
