#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "faultbench/dataset_io.hpp"
#include "faultbench/error.hpp"
#include "faultbench/experiment.hpp"
#include "faultbench/fault_injection.hpp"
#include "faultbench/metrics.hpp"
#include "faultbench/report.hpp"
#include "faultbench/synthetic.hpp"

namespace fb = faultbench;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw fb::IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw fb::IoError("cannot open " + path.string() + " for writing");
  out << text;
}

// "synthetic[:profile]" or a EuRoC path.
fb::experiment::DatasetSpec dataset_arg(const std::string& arg, std::uint64_t seed) {
  fb::experiment::DatasetSpec d;
  if (arg == "synthetic" || arg.rfind("synthetic:", 0) == 0) {
    if (arg.size() > 10) d.profile = arg.substr(10);
    d.seed = seed;
  } else {
    d.kind = fb::experiment::DatasetSpec::Kind::euroc;
    d.path = arg;
  }
  return d;
}

// "20steps" counts poses; "0.05", "0.05s" are seconds.
fb::metrics::RpeInterval rpe_arg(const std::string& arg) {
  try {
    std::size_t used = 0;
    if (arg.size() > 5 && arg.substr(arg.size() - 5) == "steps") {
      const long long n = std::stoll(arg.substr(0, arg.size() - 5), &used);
      if (used == arg.size() - 5) return fb::metrics::RpeInterval::of_steps(n);
    } else {
      const std::string num = !arg.empty() && arg.back() == 's' ? arg.substr(0, arg.size() - 1) : arg;
      const double s = std::stod(num, &used);
      if (used == num.size()) return fb::metrics::RpeInterval::of_seconds(s);
    }
  } catch (const std::logic_error&) {
  }
  throw fb::ConfigError("--rpe-delta: expected seconds (0.05, 0.05s) or steps (20steps), got '" + arg + "'");
}

nlohmann::ordered_json number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

int cmd_inject(const std::string& dataset, const fs::path& config_path, const fs::path& out_dir,
               std::optional<std::uint64_t> seed) {
  auto config = fb::faults::parse_fault_config(read_file(config_path));
  if (seed) config.global_seed = *seed;

  const auto spec = dataset_arg(dataset, seed.value_or(1));
  fb::io::EurocSequence seq;
  if (spec.kind == fb::experiment::DatasetSpec::Kind::synthetic) {
    auto d = fb::experiment::load_dataset(spec);
    seq = {std::move(d.imu), std::move(d.cameras), std::move(d.truth)};
  } else {
    const char* root = std::getenv(fb::experiment::kDataEnv);
    fs::path p = spec.path;
    if (p.is_relative() && root && *root) p = fs::path(root) / p;
    seq = fb::io::load_euroc_sequence(p);
  }
  const auto result = fb::faults::apply_all(seq.cameras, seq.imu, config);
  fb::io::write_euroc_sequence(out_dir / "mav0", {result.imu, result.cameras, seq.groundtruth});
  fb::faults::write_fault_log(out_dir / "fault_log.csv", result.log);
  std::cout << "injected " << result.log.size() << " fault events; " << result.cameras.size() << " frames, "
            << result.imu.size() << " IMU samples written to " << (out_dir / "mav0").string() << "\n";
  return 0;
}

int cmd_baseline(const fs::path& spec_path, const fs::path& out_dir) {
  const auto spec = fb::experiment::parse_experiment(read_file(spec_path));
  const auto dataset = fb::experiment::load_dataset(spec.dataset);
  const auto baseline = fb::experiment::run_baseline(spec, dataset);
  fb::experiment::write_baseline(out_dir, baseline);
  std::cout << "baseline " << baseline.config_hash << ": " << baseline.trajectory.size() << " poses\n";
  return 0;
}

int cmd_run(const fs::path& spec_path, const fs::path& baseline_path, const fs::path& out_dir,
            std::optional<std::uint64_t> seed, bool vs_groundtruth) {
  auto spec = fb::experiment::parse_experiment(read_file(spec_path));
  if (seed) spec.faults.global_seed = *seed;
  const auto dataset = fb::experiment::load_dataset(spec.dataset);
  const auto baseline = fb::experiment::read_baseline(baseline_path);
  fb::report::Report rep;
  rep.provenance.tool_version = FAULTBENCH_VERSION;
  rep.provenance.datasets = {dataset.id};
  rep.records = fb::experiment::run_experiment(spec, dataset, baseline, {out_dir, vs_groundtruth});
  rep.finalize();
  fb::report::write(out_dir, rep);
  for (const auto& r : rep.records) {
    std::cout << r.experiment << " seed " << r.seed << ": ATE " << r.ate_mean_m << " m, " << fb::report::to_string(r.status)
              << "\n";
  }
  return 0;
}

int cmd_eval(const fs::path& est_path, const fs::path& ref_path, bool align, const std::string& rpe_delta,
             double max_gap, const fs::path& out) {
  const auto est = fb::io::read_trajectory_csv(est_path);
  const auto ref = fb::io::read_trajectory_csv(ref_path);
  const auto pairs = fb::metrics::associate(est, ref, max_gap);
  const auto ate = fb::metrics::ate(pairs, align);
  const auto rpe = fb::metrics::rpe(pairs, rpe_arg(rpe_delta));
  const auto growth = fb::metrics::growth_rate(ate);

  nlohmann::ordered_json j;
  j["pairs"] = pairs.size();
  j["align"] = align;
  j["alignment"] = {{"rotation",
                     {{ate.alignment.rotation(0, 0), ate.alignment.rotation(0, 1), ate.alignment.rotation(0, 2)},
                      {ate.alignment.rotation(1, 0), ate.alignment.rotation(1, 1), ate.alignment.rotation(1, 2)},
                      {ate.alignment.rotation(2, 0), ate.alignment.rotation(2, 1), ate.alignment.rotation(2, 2)}}},
                    {"translation",
                     {ate.alignment.translation.x(), ate.alignment.translation.y(), ate.alignment.translation.z()}}};
  nlohmann::ordered_json ate_series = nlohmann::ordered_json::array();
  for (const auto& e : ate.per_pose) ate_series.push_back({e.t, number(e.translational), number(e.rotational)});
  j["ate"] = {{"mean_m", number(ate.mean_translational)},
              {"rmse_m", number(ate.rmse_translational)},
              {"rot_mean_rad", number(ate.mean_rotational)},
              {"n", ate.n},
              {"series", ate_series}};
  nlohmann::ordered_json rpe_series = nlohmann::ordered_json::array();
  for (const auto& e : rpe.per_pair) rpe_series.push_back({e.t, number(e.translational), number(e.rotational)});
  j["rpe"] = {{"delta", rpe.delta.describe()},
              {"delta_steps", rpe.delta_steps},
              {"mean_m", number(rpe.mean_translational)},
              {"rot_mean_rad", number(rpe.mean_rotational)},
              {"k", rpe.k},
              {"series", rpe_series}};
  nlohmann::ordered_json growth_series = nlohmann::ordered_json::array();
  for (const auto& e : growth.per_step) growth_series.push_back({e.t, number(e.rate)});
  j["growth"] = {{"mean_mps", number(growth.mean_rate)},
                 {"peak_mps", number(growth.peak_rate)},
                 {"accel_mps2", number(growth.mean_acceleration)},
                 {"series", growth_series}};
  const std::string text = j.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    write_file(out, text);
  }
  return 0;
}

int cmd_matrix(const std::string& matrix_path, const fs::path& out_dir, unsigned parallel, bool vs_groundtruth,
               std::optional<std::uint64_t> seed) {
  std::vector<fb::experiment::MatrixEntry> entries;
  if (matrix_path.empty() || matrix_path == "default") {
    fb::experiment::DatasetSpec d;
    d.seed = seed.value_or(1);
    entries = fb::experiment::as_entries(fb::experiment::default_matrix(d));
  } else {
    entries = fb::experiment::parse_matrix(read_file(matrix_path));
    if (seed) {
      for (auto& e : entries) {
        if (e.spec) e.spec->faults.global_seed = *seed;
      }
    }
  }
  const auto rep = fb::experiment::run_matrix(entries, {out_dir, vs_groundtruth, parallel});
  fb::report::write(out_dir, rep);
  std::cout << rep.records.size() << " runs over " << rep.aggregates.size() << " experiments, " << rep.failures.size()
            << " failed\n";
  for (const auto& f : rep.failures) std::cout << "  failed " << f.experiment << ": " << f.message << "\n";
  for (const auto& t : rep.trends) {
    std::cout << "  " << fb::report::to_string(t.status) << "  " << t.name << "  " << t.detail << "\n";
  }
  return 0;
}

int cmd_report(const fs::path& in, const fs::path& out_dir, const std::string& format) {
  const auto rep = fb::report::parse_json(read_file(in));
  fb::report::write(out_dir, rep, format != "csv", format != "json");
  std::cout << rep.records.size() << " records, " << rep.aggregates.size() << " experiments\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fault injection and trajectory evaluation for visual-inertial tracking"};
  app.set_version_flag("--version", FAULTBENCH_VERSION);
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  fs::path out_dir = ".";
  unsigned parallel = 1;
  bool vs_groundtruth = false;

  std::string dataset, inject_config;
  auto* inject = app.add_subcommand("inject", "Apply a fault config to a dataset and write the faulted streams");
  inject->add_option("dataset", dataset, "EuRoC sequence path or synthetic[:profile]")->required();
  inject->add_option("config", inject_config, "Fault config JSON")->required()->check(CLI::ExistingFile);
  inject->add_option("--seed", seed, "Global fault seed (also the synthetic dataset seed)");
  inject->add_option("--out-dir", out_dir, "Output directory");

  std::string spec_path;
  auto* baseline = app.add_subcommand("baseline", "Run the fault-free baseline for an experiment spec");
  baseline->add_option("spec", spec_path, "Experiment spec JSON")->required()->check(CLI::ExistingFile);
  baseline->add_option("--out-dir", out_dir, "Output directory");

  std::string baseline_path;
  auto* run = app.add_subcommand("run", "Run an experiment against a stored baseline");
  run->add_option("spec", spec_path, "Experiment spec JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--baseline", baseline_path, "Baseline directory or baseline.json")->required();
  run->add_option("--seed", seed, "Global fault seed");
  run->add_option("--out-dir", out_dir, "Output directory");
  run->add_flag("--vs-groundtruth", vs_groundtruth, "Score against ground truth instead of the baseline");

  std::string est_path, ref_path, rpe_delta = "0.05";
  bool align = true;
  double max_gap = fb::metrics::kDefaultMaxGapS;
  fs::path eval_out;
  auto* eval = app.add_subcommand("eval", "Compare two trajectory CSVs");
  eval->add_option("estimate", est_path, "Estimated trajectory CSV")->required();
  eval->add_option("reference", ref_path, "Reference trajectory CSV")->required();
  eval->add_flag("--align,!--no-align", align, "Rigidly align before ATE (default on)");
  eval->add_option("--rpe-delta", rpe_delta, "RPE interval: seconds (0.05) or steps (20steps)");
  eval->add_option("--max-gap", max_gap, "Association tolerance in seconds");
  eval->add_option("--out", eval_out, "Write JSON here instead of stdout");

  std::string matrix_path;
  auto* matrix = app.add_subcommand("matrix", "Run a matrix of experiments and write a report");
  matrix->add_option("matrix", matrix_path, "Matrix JSON; omit or 'default' for the bundled synthetic matrix");
  matrix->add_option("--seed", seed, "Global fault seed (default matrix: dataset and fault seed)");
  matrix->add_option("--out-dir", out_dir, "Output directory");
  matrix->add_option("--parallel", parallel, "Experiments run concurrently")->check(CLI::PositiveNumber);
  matrix->add_flag("--vs-groundtruth", vs_groundtruth, "Score against ground truth instead of the baseline");

  std::string records_path, format = "both";
  auto* rep = app.add_subcommand("report", "Re-aggregate run records into report.json / report.csv");
  rep->add_option("records", records_path, "report.json or a JSON array of records")->required();
  rep->add_option("--out-dir", out_dir, "Output directory");
  rep->add_option("--format", format, "json, csv or both")->check(CLI::IsMember({"json", "csv", "both"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*inject) return cmd_inject(dataset, inject_config, out_dir, seed);
    if (*baseline) return cmd_baseline(spec_path, out_dir);
    if (*run) return cmd_run(spec_path, baseline_path, out_dir, seed, vs_groundtruth);
    if (*eval) return cmd_eval(est_path, ref_path, align, rpe_delta, max_gap, eval_out);
    if (*matrix) return cmd_matrix(matrix_path, out_dir, parallel, vs_groundtruth, seed);
    if (*rep) return cmd_report(records_path, out_dir, format);
  } catch (const fb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const fb::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const fb::EvaluationError& e) {
    std::cerr << "evaluation error: " << e.what() << "\n";
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
