#ifndef FAULTBENCH_REPORT_HPP_
#define FAULTBENCH_REPORT_HPP_

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace faultbench::report {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class RunStatus { ok, aborted, failed };

std::string_view to_string(RunStatus s);
RunStatus parse_run_status(std::string_view s);

/// Summary of one fault run scored against its reference trajectory.
/// Aborted runs carry metrics over the prefix the estimator produced; a
/// metric that could not be computed on that prefix is NaN.
struct RunRecord {
  std::string experiment;
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::ok;
  std::optional<double> abort_time_s;  // seconds since the first IMU sample
  std::string message;

  std::string dataset;
  std::string config_hash;
  std::string reference;  // "baseline" or "groundtruth"

  std::size_t poses = 0;
  std::size_t fixes_accepted = 0;
  std::size_t fixes_rejected = 0;
  std::size_t fault_events = 0;

  double ate_mean_m = kNaN;
  double ate_rmse_m = kNaN;
  double ate_final_m = kNaN;
  double ate_rot_mean_rad = kNaN;
  double rpe_mean_m = kNaN;
  double rpe_rot_mean_rad = kNaN;
  std::int64_t rpe_delta_steps = 0;
  double growth_mean_mps = kNaN;
  double growth_peak_mps = kNaN;
  double growth_accel_mps2 = kNaN;

  std::string fault_log_path;    // relative to the output directory; empty if not persisted
  std::string fault_log_digest;  // FNV-1a of the fault log CSV
};

struct Stat {
  double median = kNaN;
  double mean = kNaN;
};

/// Median and mean over the finite values; NaN when there are none.
Stat summarize(std::vector<double> values);

struct Aggregate {
  std::string experiment;
  std::string dataset;
  std::string config_hash;
  std::size_t runs = 0;
  std::size_t ok = 0;
  std::size_t aborted = 0;
  std::size_t failed = 0;
  Stat ate_mean_m;
  Stat rpe_mean_m;
  Stat growth_mean_mps;
  Stat growth_accel_mps2;
};

/// One aggregate per experiment, ordered by experiment name.
std::vector<Aggregate> aggregate(const std::vector<RunRecord>& records);

struct Failure {
  std::string experiment;
  std::string error;  // "config", "data" or "evaluation"
  std::string message;
};

enum class TrendStatus { pass, fail, skipped };

std::string_view to_string(TrendStatus s);

struct TrendFlag {
  std::string name;
  TrendStatus status = TrendStatus::skipped;
  std::string detail;
};

struct Provenance {
  std::string tool_version;
  std::string statistic = "median";
  std::vector<std::string> datasets;
};

struct Report {
  std::vector<RunRecord> records;
  std::vector<Aggregate> aggregates;
  std::vector<Failure> failures;
  std::vector<TrendFlag> trends;
  Provenance provenance;

  /// Sorts records by (experiment, seed), failures by experiment, and
  /// recomputes the aggregates from the records.
  void finalize();
};

inline constexpr std::string_view kCsvHeader =
    "experiment,seed,ate_mean_m,ate_rmse_m,rpe_mean_m,growth_mean_mps,growth_peak_mps,status";

std::string to_json(const Report& report);
std::string to_csv(const Report& report);

/// Accepts a full report document or a bare JSON array of records. The
/// aggregates are always rebuilt from the records.
Report parse_json(std::string_view text);

/// Writes `report.json` and/or `report.csv` under `dir`.
void write(const std::filesystem::path& dir, const Report& report, bool json = true, bool csv = true);

}  // namespace faultbench::report

#endif  // FAULTBENCH_REPORT_HPP_
