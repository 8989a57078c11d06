#ifndef FAULTBENCH_EXPERIMENT_HPP_
#define FAULTBENCH_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faultbench/estimator.hpp"
#include "faultbench/fault_injection.hpp"
#include "faultbench/metrics.hpp"
#include "faultbench/report.hpp"
#include "faultbench/types.hpp"

namespace faultbench::experiment {

/// Environment variable holding the root against which relative EuRoC
/// paths are resolved.
inline constexpr const char* kDataEnv = "FAULTBENCH_DATA";

struct DatasetSpec {
  enum class Kind { synthetic, euroc };
  Kind kind = Kind::synthetic;

  // synthetic
  std::string profile = "standard";  // standard | noiseless | stationary
  std::uint64_t seed = 1;
  std::optional<double> duration_s;

  // euroc: a mav0 directory or its parent
  std::filesystem::path path;

  /// Stable identifier, e.g. "synthetic/standard/seed=1" or "euroc/MH_01_easy".
  std::string id() const;
};

struct Dataset {
  std::string id;
  std::vector<CameraFrame> cameras;
  std::vector<ImuSample> imu;
  Trajectory truth;
  /// Exact velocity at the first IMU sample for synthetic data. EuRoC leaves
  /// it to the estimator's finite-difference estimate.
  std::optional<Eigen::Vector3d> initial_velocity;
};

/// Synthetic datasets are generated; EuRoC sequences are loaded without
/// pixels, trimmed to the ground-truth time span and re-indexed from 0.
/// Throws DataError for a missing or unreadable sequence.
Dataset load_dataset(const DatasetSpec& spec);

struct ExperimentSpec {
  std::string name;
  DatasetSpec dataset;
  faults::FaultConfig faults;
  int repetitions = 1;
  metrics::RpeInterval rpe_delta;
  estimator::EstimatorConfig estimator;
  bool align = true;
  double max_gap_s = metrics::kDefaultMaxGapS;

  /// Throws ConfigError: empty name, repetitions < 1, repetitions > 1 on a
  /// deterministic fault config, invalid faults or estimator parameters.
  void validate() const;
};

/// JSON experiment document:
///   { "name": str, "dataset": {...}, "faults": {fault config},
///     "repetitions": int, "rpe_delta": {"seconds": x} | {"steps": n},
///     "estimator": {...}, "align": bool, "max_gap_s": x }
/// Dataset objects are {"kind": "synthetic", "profile", "seed", "duration_s"}
/// or {"kind": "euroc", "path"}. Unknown keys are rejected.
ExperimentSpec parse_experiment(std::string_view json);
std::string experiment_to_json(const ExperimentSpec& spec);

/// Matrix document: {"defaults": {...}, "experiments": [...]}. Each
/// experiment is merged over `defaults` (JSON merge patch) before parsing.
/// Experiments that fail to parse are returned as errors, not thrown, so one
/// bad entry does not sink the whole matrix.
struct MatrixEntry {
  std::string name;
  std::optional<ExperimentSpec> spec;
  std::string error;  // set when spec is empty
};
std::vector<MatrixEntry> parse_matrix(std::string_view json);

/// Hex FNV-1a of the canonical dataset + estimator configuration. Fault runs
/// and their baseline must agree on it.
std::string config_hash(const ExperimentSpec& spec);

/// Estimator configuration for a spec. When the spec sets no initial state
/// and the dataset knows its initial velocity, the state is built from the
/// truth pose at the first IMU sample and that velocity.
estimator::EstimatorConfig effective_estimator(const ExperimentSpec& spec, const Dataset& dataset);

struct Baseline {
  Trajectory trajectory;
  std::string config_hash;
  std::string dataset;
};

/// Fault-free closed-loop run. Throws ConfigError if the estimator aborts on
/// nominal data.
Baseline run_baseline(const ExperimentSpec& spec, const Dataset& dataset);

/// Writes `baseline.csv` (trajectory) and `baseline.json` (hash, dataset)
/// into `dir`.
void write_baseline(const std::filesystem::path& dir, const Baseline& baseline);
/// Reads what write_baseline produced; `path` is the directory or either file.
Baseline read_baseline(const std::filesystem::path& path);

struct RunOptions {
  std::filesystem::path out_dir;  // empty: nothing persisted
  bool vs_groundtruth = false;
};

/// `repetitions` fault runs with global seeds faults.global_seed + r, each
/// scored against the baseline (or ground truth). Throws StaleBaselineError
/// if the baseline came from a different configuration.
std::vector<report::RunRecord> run_experiment(const ExperimentSpec& spec, const Dataset& dataset,
                                              const Baseline& baseline, const RunOptions& options = {});

struct MatrixOptions {
  std::filesystem::path out_dir;
  bool vs_groundtruth = false;
  unsigned parallel = 1;
};

/// Runs every entry, computing one baseline per configuration hash. A
/// failing experiment is recorded in the report's failures and does not
/// affect the others. Results are independent of `parallel`.
report::Report run_matrix(const std::vector<MatrixEntry>& entries, const MatrixOptions& options = {});

/// The bundled fault matrix on `dataset`: timing, blackout duration, IMU
/// dropout, random drop, IMU amplification, bias drift, camera noise and the
/// combined case. Global and fix seeds follow dataset.seed.
std::vector<ExperimentSpec> default_matrix(const DatasetSpec& dataset = {});
std::vector<MatrixEntry> as_entries(std::vector<ExperimentSpec> specs);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

/// Trend checks over default-matrix aggregates. Each inner vector is one
/// seed's aggregates; per-experiment values are the median across seeds of
/// the per-seed median ATE. Checks whose experiments are missing are skipped.
std::vector<report::TrendFlag> evaluate_trends(const std::vector<std::vector<report::Aggregate>>& per_seed);

/// Median across seeds of each experiment's median ATE, keyed by name.
std::vector<std::pair<std::string, double>> median_ate(const std::vector<std::vector<report::Aggregate>>& per_seed);

}  // namespace faultbench::experiment

#endif  // FAULTBENCH_EXPERIMENT_HPP_
