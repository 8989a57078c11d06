#include "faultbench/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <variant>

#include <json.hpp>

#include "faultbench/dataset_io.hpp"
#include "faultbench/error.hpp"
#include "faultbench/synthetic.hpp"

namespace faultbench::experiment {

namespace {

using nlohmann::json;
using report::RunRecord;
using report::RunStatus;

// ---------------------------------------------------------------------------
// JSON helpers

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

void reject_unknown(const json& j, const std::string& path, std::initializer_list<const char*> known) {
  if (!j.is_object()) bad(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      bad(path + "." + key, "unknown key");
    }
  }
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) bad(path, "expected a number");
  return j.get<double>();
}

std::int64_t get_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) bad(path, "expected an integer");
  return j.get<std::int64_t>();
}

std::uint64_t get_unsigned(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
    bad(path, "expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

Eigen::Vector3d get_vector(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) bad(path, "expected [x, y, z]");
  return {get_number(j[0], path + "[0]"), get_number(j[1], path + "[1]"), get_number(j[2], path + "[2]")};
}

json vector_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

json dataset_json(const DatasetSpec& d) {
  json j;
  if (d.kind == DatasetSpec::Kind::synthetic) {
    j["kind"] = "synthetic";
    j["profile"] = d.profile;
    j["seed"] = d.seed;
    if (d.duration_s) j["duration_s"] = *d.duration_s;
  } else {
    j["kind"] = "euroc";
    j["path"] = d.path.generic_string();
  }
  return j;
}

DatasetSpec dataset_from(const json& j, const std::string& path) {
  reject_unknown(j, path, {"kind", "profile", "seed", "duration_s", "path"});
  DatasetSpec d;
  const std::string kind = j.value("kind", "synthetic");
  if (kind == "synthetic") {
    if (j.contains("path")) bad(path + ".path", "not allowed for synthetic datasets");
    if (j.contains("profile")) {
      if (!j["profile"].is_string()) bad(path + ".profile", "expected a string");
      d.profile = j["profile"].get<std::string>();
    }
    if (j.contains("seed")) d.seed = get_unsigned(j["seed"], path + ".seed");
    if (j.contains("duration_s")) d.duration_s = get_number(j["duration_s"], path + ".duration_s");
  } else if (kind == "euroc") {
    for (const char* k : {"profile", "seed", "duration_s"}) {
      if (j.contains(k)) bad(path + "." + k, "not allowed for euroc datasets");
    }
    if (!j.contains("path") || !j["path"].is_string()) bad(path + ".path", "required string");
    d.kind = DatasetSpec::Kind::euroc;
    d.path = j["path"].get<std::string>();
  } else {
    bad(path + ".kind", "expected 'synthetic' or 'euroc', got '" + kind + "'");
  }
  return d;
}

json estimator_json(const estimator::EstimatorConfig& c) {
  return {{"gravity", vector_json(c.gravity)},
          {"gyro_noise_density", c.gyro_noise_density},
          {"accel_noise_density", c.accel_noise_density},
          {"gyro_random_walk", c.gyro_random_walk},
          {"accel_random_walk", c.accel_random_walk},
          {"fix_position_noise", c.fix_position_noise},
          {"fix_orientation_noise", c.fix_orientation_noise},
          {"fix_seed", c.fix_seed},
          {"gate_chi2", c.gate_chi2},
          {"max_step_s", c.max_step_s},
          {"initial_attitude_std", c.initial_attitude_std},
          {"initial_velocity_std", c.initial_velocity_std},
          {"initial_position_std", c.initial_position_std},
          {"initial_gyro_bias_std", c.initial_gyro_bias_std},
          {"initial_accel_bias_std", c.initial_accel_bias_std},
          {"initial_position_offset", vector_json(c.initial_position_offset)},
          {"initial_attitude_offset", vector_json(c.initial_attitude_offset)}};
}

estimator::EstimatorConfig estimator_from(const json& j, const std::string& path) {
  estimator::EstimatorConfig c;
  if (!j.is_object()) bad(path, "expected an object");
  const std::map<std::string, double*> scalars = {
      {"gyro_noise_density", &c.gyro_noise_density},
      {"accel_noise_density", &c.accel_noise_density},
      {"gyro_random_walk", &c.gyro_random_walk},
      {"accel_random_walk", &c.accel_random_walk},
      {"fix_position_noise", &c.fix_position_noise},
      {"fix_orientation_noise", &c.fix_orientation_noise},
      {"gate_chi2", &c.gate_chi2},
      {"max_step_s", &c.max_step_s},
      {"initial_attitude_std", &c.initial_attitude_std},
      {"initial_velocity_std", &c.initial_velocity_std},
      {"initial_position_std", &c.initial_position_std},
      {"initial_gyro_bias_std", &c.initial_gyro_bias_std},
      {"initial_accel_bias_std", &c.initial_accel_bias_std},
  };
  const std::map<std::string, Eigen::Vector3d*> vectors = {
      {"gravity", &c.gravity},
      {"initial_position_offset", &c.initial_position_offset},
      {"initial_attitude_offset", &c.initial_attitude_offset},
  };
  for (const auto& [key, value] : j.items()) {
    const std::string p = path + "." + key;
    if (const auto s = scalars.find(key); s != scalars.end()) {
      *s->second = get_number(value, p);
    } else if (const auto v = vectors.find(key); v != vectors.end()) {
      *v->second = get_vector(value, p);
    } else if (key == "fix_seed") {
      c.fix_seed = get_unsigned(value, p);
    } else {
      bad(p, "unknown key");
    }
  }
  return c;
}

json rpe_json(const metrics::RpeInterval& d) {
  if (d.in_seconds) return {{"seconds", d.seconds}};
  return {{"steps", d.steps}};
}

metrics::RpeInterval rpe_from(const json& j, const std::string& path) {
  reject_unknown(j, path, {"seconds", "steps"});
  if (j.size() != 1) bad(path, "give exactly one of 'seconds' or 'steps'");
  if (j.contains("steps")) return metrics::RpeInterval::of_steps(get_integer(j["steps"], path + ".steps"));
  return metrics::RpeInterval::of_seconds(get_number(j["seconds"], path + ".seconds"));
}

json spec_json(const ExperimentSpec& s) {
  json j;
  j["name"] = s.name;
  j["dataset"] = dataset_json(s.dataset);
  j["faults"] = json::parse(faults::fault_config_to_json(s.faults));
  j["repetitions"] = s.repetitions;
  j["rpe_delta"] = rpe_json(s.rpe_delta);
  j["estimator"] = estimator_json(s.estimator);
  j["align"] = s.align;
  j["max_gap_s"] = s.max_gap_s;
  return j;
}

ExperimentSpec spec_from(const json& j) {
  if (!j.is_object()) bad("experiment", "expected an object");
  if (!j.contains("name") || !j["name"].is_string()) bad("experiment.name", "required string");
  ExperimentSpec s;
  s.name = j["name"].get<std::string>();
  const std::string path = "experiment '" + s.name + "'";
  reject_unknown(j, path, {"name", "dataset", "faults", "repetitions", "rpe_delta", "estimator", "align", "max_gap_s"});
  if (j.contains("dataset")) s.dataset = dataset_from(j["dataset"], path + ".dataset");
  if (j.contains("faults")) {
    try {
      s.faults = faults::parse_fault_config(j["faults"].dump());
    } catch (const ConfigError& e) {
      bad(path + ".faults", e.what());
    }
  }
  if (j.contains("repetitions")) s.repetitions = static_cast<int>(get_integer(j["repetitions"], path + ".repetitions"));
  if (j.contains("rpe_delta")) s.rpe_delta = rpe_from(j["rpe_delta"], path + ".rpe_delta");
  if (j.contains("estimator")) s.estimator = estimator_from(j["estimator"], path + ".estimator");
  if (j.contains("align")) {
    if (!j["align"].is_boolean()) bad(path + ".align", "expected a boolean");
    s.align = j["align"].get<bool>();
  }
  if (j.contains("max_gap_s")) s.max_gap_s = get_number(j["max_gap_s"], path + ".max_gap_s");
  s.validate();
  return s;
}

json parse_document(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(what) + ": invalid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
  return s;
}

std::string fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return hex64(h);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void make_dirs(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

// Experiment names may carry '/' to group related rows; everything else
// outside [A-Za-z0-9._@-] becomes '_'.
std::filesystem::path name_to_path(const std::string& name) {
  std::filesystem::path p;
  std::string part;
  auto flush = [&] {
    if (part.empty() || part == "." || part == "..") part = "_";
    p /= part;
    part.clear();
  };
  for (char c : name) {
    if (c == '/') {
      flush();
    } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-' || c == '@') {
      part += c;
    } else {
      part += '_';
    }
  }
  flush();
  return p;
}

io::SyntheticProfile profile_by_name(const DatasetSpec& d) {
  io::SyntheticProfile p;
  if (d.profile == "standard") {
    p = io::SyntheticProfile::standard(d.seed);
  } else if (d.profile == "noiseless") {
    p = io::SyntheticProfile::noiseless(d.seed);
  } else if (d.profile == "stationary") {
    p = io::SyntheticProfile::stationary();
    p.seed = d.seed;
  } else {
    throw ConfigError("dataset: unknown synthetic profile '" + d.profile + "'");
  }
  if (d.duration_s) p.duration_s = *d.duration_s;
  return p;
}

std::filesystem::path resolve_euroc(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  if (p.is_relative()) {
    if (const char* root = std::getenv(kDataEnv); root != nullptr && *root != '\0') p = std::filesystem::path(root) / p;
  }
  if (!std::filesystem::exists(p)) throw IoError("dataset not found: " + p.string());
  return p;
}

template <typename T>
std::vector<T> trim_and_reindex(const std::vector<T>& in, TimestampNs lo, TimestampNs hi) {
  std::vector<T> out;
  for (const T& e : in) {
    if (e.t < lo || e.t > hi) continue;
    out.push_back(e);
    out.back().index = static_cast<std::int64_t>(out.size()) - 1;
  }
  return out;
}

double median_of(std::vector<double> v) { return report::summarize(std::move(v)).median; }

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const DataError*>(&e)) return "data";
  if (dynamic_cast<const EvaluationError*>(&e)) return "evaluation";
  return "internal";
}

}  // namespace

// ---------------------------------------------------------------------------

std::string DatasetSpec::id() const {
  if (kind == Kind::euroc) return "euroc/" + path.generic_string();
  std::string s = "synthetic/" + profile + "/seed=" + std::to_string(seed);
  if (duration_s) s += "/duration=" + io::format_double(*duration_s);
  return s;
}

Dataset load_dataset(const DatasetSpec& spec) {
  Dataset d;
  d.id = spec.id();
  if (spec.kind == DatasetSpec::Kind::synthetic) {
    const io::SyntheticProfile profile = profile_by_name(spec);
    io::SyntheticStreams s = io::synthesize(profile);
    if (s.imu.empty()) throw DataError("dataset " + d.id + ": no IMU samples");
    d.imu = std::move(s.imu);
    d.cameras = std::move(s.cameras);
    d.truth = std::move(s.truth);
    d.initial_velocity = io::SyntheticMotion(profile).velocity(to_seconds(d.imu.front().t - profile.start_time_ns));
    return d;
  }
  io::EurocSequence seq = io::load_euroc_sequence(resolve_euroc(spec.path), false);
  if (seq.groundtruth.size() < 2) throw DataError("dataset " + d.id + ": ground truth has fewer than 2 poses");
  const TimestampNs lo = seq.groundtruth.poses.front().t;
  const TimestampNs hi = seq.groundtruth.poses.back().t;
  d.imu = trim_and_reindex(seq.imu, lo, hi);
  d.cameras = trim_and_reindex(seq.cameras, lo, hi);
  d.truth = std::move(seq.groundtruth);
  if (d.imu.size() < 2) throw DataError("dataset " + d.id + ": fewer than 2 IMU samples inside the ground-truth span");
  return d;
}

void ExperimentSpec::validate() const {
  const std::string path = "experiment '" + name + "'";
  if (name.empty()) throw ConfigError("experiment: name must not be empty");
  if (repetitions < 1) bad(path + ".repetitions", "must be >= 1");
  faults::FaultConfig f = faults;
  try {
    f.validate();
  } catch (const ConfigError& e) {
    bad(path + ".faults", e.what());
  }
  if (repetitions > 1 && !f.is_stochastic()) {
    bad(path + ".repetitions", "must be 1 for a deterministic fault config");
  }
  if (rpe_delta.in_seconds ? !(rpe_delta.seconds > 0.0) : rpe_delta.steps < 1) {
    bad(path + ".rpe_delta", "interval must be positive");
  }
  if (!(max_gap_s >= 0.0)) bad(path + ".max_gap_s", "must be >= 0");
  if (dataset.kind == DatasetSpec::Kind::synthetic) {
    if (dataset.profile != "standard" && dataset.profile != "noiseless" && dataset.profile != "stationary") {
      bad(path + ".dataset.profile", "unknown synthetic profile '" + dataset.profile + "'");
    }
    if (dataset.duration_s && !(*dataset.duration_s > 0.0)) bad(path + ".dataset.duration_s", "must be positive");
  } else if (dataset.path.empty()) {
    bad(path + ".dataset.path", "required");
  }
  try {
    estimator.validate();
  } catch (const ConfigError& e) {
    bad(path + ".estimator", e.what());
  }
}

ExperimentSpec parse_experiment(std::string_view text) { return spec_from(parse_document(text, "experiment")); }

std::string experiment_to_json(const ExperimentSpec& spec) { return spec_json(spec).dump(2) + "\n"; }

std::vector<MatrixEntry> parse_matrix(std::string_view text) {
  const json doc = parse_document(text, "matrix");
  reject_unknown(doc, "matrix", {"defaults", "experiments"});
  if (!doc.contains("experiments") || !doc["experiments"].is_array()) bad("matrix.experiments", "required array");
  json defaults = json::object();
  if (doc.contains("defaults")) {
    if (!doc["defaults"].is_object()) bad("matrix.defaults", "expected an object");
    defaults = doc["defaults"];
  }
  std::vector<MatrixEntry> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < doc["experiments"].size(); ++i) {
    const json& e = doc["experiments"][i];
    MatrixEntry entry;
    entry.name = e.is_object() && e.contains("name") && e["name"].is_string() ? e["name"].get<std::string>()
                                                                              : "#" + std::to_string(i);
    try {
      json merged = defaults;
      merged.merge_patch(e);
      entry.spec = spec_from(merged);
      if (!seen.insert(entry.name).second) {
        entry.spec.reset();
        entry.error = "duplicate experiment name";
      }
    } catch (const ConfigError& err) {
      entry.error = err.what();
    }
    out.push_back(std::move(entry));
  }
  return out;
}

std::string config_hash(const ExperimentSpec& spec) {
  const json canonical = {{"dataset", dataset_json(spec.dataset)}, {"estimator", estimator_json(spec.estimator)}};
  return fnv1a(canonical.dump());
}

estimator::EstimatorConfig effective_estimator(const ExperimentSpec& spec, const Dataset& dataset) {
  estimator::EstimatorConfig c = spec.estimator;
  if (!c.initial_state && dataset.initial_velocity) {
    const TimedPose p0 = estimator::interpolate_pose(dataset.truth, dataset.imu.front().t);
    c.initial_state = estimator::initial_state_from_truth(p0, *dataset.initial_velocity, c);
  }
  return c;
}

Baseline run_baseline(const ExperimentSpec& spec, const Dataset& dataset) {
  spec.validate();
  const auto result = estimator::run_closed_loop(dataset.cameras, dataset.imu, dataset.truth,
                                                 effective_estimator(spec, dataset));
  if (result.aborted) {
    throw ConfigError("baseline for '" + spec.name + "' aborted at t=" + std::to_string(*result.abort_time) + ": " +
                      result.abort_reason);
  }
  return {result.trajectory, config_hash(spec), dataset.id};
}

void write_baseline(const std::filesystem::path& dir, const Baseline& baseline) {
  make_dirs(dir);
  io::write_trajectory_csv(dir / "baseline.csv", baseline.trajectory);
  const json meta = {{"config_hash", baseline.config_hash},
                     {"dataset", baseline.dataset},
                     {"poses", baseline.trajectory.size()},
                     {"trajectory", "baseline.csv"}};
  write_text(dir / "baseline.json", meta.dump(2) + "\n");
}

Baseline read_baseline(const std::filesystem::path& path) {
  std::filesystem::path meta_path = path;
  if (std::filesystem::is_directory(path)) {
    meta_path = path / "baseline.json";
  } else if (path.extension() != ".json") {
    meta_path = std::filesystem::path(path).replace_extension(".json");
  }
  json meta;
  try {
    meta = json::parse(read_text(meta_path));
  } catch (const json::parse_error& e) {
    throw ParseError(meta_path.string() + ": " + e.what());
  }
  if (!meta.is_object() || !meta.contains("config_hash") || !meta.contains("trajectory")) {
    throw ParseError(meta_path.string() + ": missing config_hash or trajectory");
  }
  Baseline b;
  b.config_hash = meta["config_hash"].get<std::string>();
  b.dataset = meta.value("dataset", "");
  b.trajectory = io::read_trajectory_csv(meta_path.parent_path() / meta["trajectory"].get<std::string>());
  return b;
}

std::vector<RunRecord> run_experiment(const ExperimentSpec& spec, const Dataset& dataset, const Baseline& baseline,
                                      const RunOptions& options) {
  spec.validate();
  const std::string hash = config_hash(spec);
  if (baseline.config_hash != hash) {
    throw StaleBaselineError("experiment '" + spec.name + "': baseline config hash " + baseline.config_hash +
                             " does not match " + hash);
  }
  const estimator::EstimatorConfig est = effective_estimator(spec, dataset);
  const Trajectory& reference = options.vs_groundtruth ? dataset.truth : baseline.trajectory;

  std::vector<RunRecord> records;
  for (int r = 0; r < spec.repetitions; ++r) {
    faults::FaultConfig cfg = spec.faults;
    cfg.global_seed = spec.faults.global_seed + static_cast<std::uint64_t>(r);
    const faults::InjectionResult injected = faults::apply_all(dataset.cameras, dataset.imu, cfg);
    const std::string log_csv = faults::fault_log_csv(injected.log);

    RunRecord rec;
    rec.experiment = spec.name;
    rec.seed = cfg.global_seed;
    rec.dataset = dataset.id;
    rec.config_hash = hash;
    rec.reference = options.vs_groundtruth ? "groundtruth" : "baseline";
    rec.fault_events = injected.log.size();
    rec.fault_log_digest = fnv1a(log_csv);

    const auto run = estimator::run_closed_loop(injected.cameras, injected.imu, dataset.truth, est);
    rec.poses = run.trajectory.size();
    rec.fixes_accepted = run.fixes_accepted;
    rec.fixes_rejected = run.fixes_rejected;
    if (run.aborted) {
      rec.status = RunStatus::aborted;
      rec.abort_time_s = to_seconds(*run.abort_time - dataset.imu.front().t);
      rec.message = run.abort_reason;
    }

    try {
      const auto pairs = metrics::associate(run.trajectory, reference, spec.max_gap_s);
      const metrics::AteResult a = metrics::ate(pairs, spec.align);
      rec.ate_mean_m = a.mean_translational;
      rec.ate_rmse_m = a.rmse_translational;
      rec.ate_final_m = a.per_pose.back().translational;
      rec.ate_rot_mean_rad = a.mean_rotational;
      const metrics::GrowthSeries g = metrics::growth_rate(a);
      rec.growth_mean_mps = g.mean_rate;
      rec.growth_peak_mps = g.peak_rate;
      rec.growth_accel_mps2 = g.mean_acceleration;
      const metrics::RpeResult p = metrics::rpe(pairs, spec.rpe_delta);
      rec.rpe_mean_m = p.mean_translational;
      rec.rpe_rot_mean_rad = p.mean_rotational;
      rec.rpe_delta_steps = p.delta_steps;
    } catch (const EvaluationError& e) {
      if (rec.status == RunStatus::ok) rec.status = RunStatus::failed;
      rec.message += (rec.message.empty() ? "" : "; ") + std::string(e.what());
    }

    if (!options.out_dir.empty()) {
      const std::filesystem::path rel = name_to_path(spec.name) / ("seed_" + std::to_string(rec.seed));
      const std::filesystem::path dir = options.out_dir / rel;
      make_dirs(dir);
      write_text(dir / "fault_log.csv", log_csv);
      if (!run.trajectory.empty()) io::write_trajectory_csv(dir / "trajectory.csv", run.trajectory);
      rec.fault_log_path = (rel / "fault_log.csv").generic_string();
    }
    records.push_back(std::move(rec));
  }
  return records;
}

report::Report run_matrix(const std::vector<MatrixEntry>& entries, const MatrixOptions& options) {
  report::Report rep;
  rep.provenance.tool_version = FAULTBENCH_VERSION;

  // Datasets and baselines are shared by id / config hash and built up front.
  std::map<std::string, std::variant<Dataset, report::Failure>> datasets;
  std::map<std::string, std::variant<Baseline, report::Failure>> baselines;

  struct Job {
    const ExperimentSpec* spec;
    const Dataset* dataset;
    const Baseline* baseline;
  };
  std::vector<Job> jobs;

  for (const auto& entry : entries) {
    if (!entry.spec) {
      rep.failures.push_back({entry.name, "config", entry.error});
      continue;
    }
    const ExperimentSpec& spec = *entry.spec;
    const std::string id = spec.dataset.id();
    auto d = datasets.find(id);
    if (d == datasets.end()) {
      try {
        d = datasets.emplace(id, load_dataset(spec.dataset)).first;
      } catch (const Error& e) {
        d = datasets.emplace(id, report::Failure{"", error_kind(e), e.what()}).first;
      }
    }
    if (const auto* f = std::get_if<report::Failure>(&d->second)) {
      rep.failures.push_back({spec.name, f->error, f->message});
      continue;
    }
    const Dataset& dataset = std::get<Dataset>(d->second);

    const std::string hash = config_hash(spec);
    auto b = baselines.find(hash);
    if (b == baselines.end()) {
      try {
        Baseline base = run_baseline(spec, dataset);
        if (!options.out_dir.empty()) write_baseline(options.out_dir / "baselines" / hash, base);
        b = baselines.emplace(hash, std::move(base)).first;
      } catch (const Error& e) {
        b = baselines.emplace(hash, report::Failure{"", error_kind(e), e.what()}).first;
      }
    }
    if (const auto* f = std::get_if<report::Failure>(&b->second)) {
      rep.failures.push_back({spec.name, f->error, f->message});
      continue;
    }
    rep.provenance.datasets.push_back(dataset.id);
    jobs.push_back({&spec, &dataset, &std::get<Baseline>(b->second)});
  }

  std::vector<std::variant<std::vector<RunRecord>, report::Failure>> results(jobs.size());
  std::atomic<std::size_t> next{0};
  const RunOptions run_options{options.out_dir, options.vs_groundtruth};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      try {
        results[i] = run_experiment(*job.spec, *job.dataset, *job.baseline, run_options);
      } catch (const std::exception& e) {
        results[i] = report::Failure{job.spec->name, error_kind(e), e.what()};
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(options.parallel, 1, std::max<std::size_t>(jobs.size(), 1));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  for (auto& r : results) {
    if (auto* recs = std::get_if<std::vector<RunRecord>>(&r)) {
      for (auto& rec : *recs) rep.records.push_back(std::move(rec));
    } else {
      rep.failures.push_back(std::get<report::Failure>(std::move(r)));
    }
  }
  rep.finalize();
  rep.trends = evaluate_trends({rep.aggregates});
  return rep;
}

// ---------------------------------------------------------------------------
// Bundled matrix

namespace {

faults::FaultSpec make_fault(faults::Modality m, faults::FaultKind k, std::int64_t start,
                             std::optional<std::int64_t> duration, double severity) {
  faults::FaultSpec f;
  f.modality = m;
  f.kind = k;
  f.start = start;
  f.duration = duration;
  f.severity = severity;
  return f;
}

faults::FaultSpec camera(faults::FaultKind k, std::int64_t start, std::int64_t duration, double severity = 0.0) {
  return make_fault(faults::Modality::camera, k, start, duration, severity);
}

faults::FaultSpec imu(faults::FaultKind k, std::int64_t start, std::optional<std::int64_t> duration,
                      double severity = 0.0) {
  return make_fault(faults::Modality::imu, k, start, duration, severity);
}

std::string trim_number(double v) { return io::format_double(v); }

constexpr int kStochasticRepetitions = 5;

// Full-length windows on the 60 s, 20 Hz / 200 Hz stream.
constexpr std::int64_t kAllFrames = 1200;
constexpr std::int64_t kSeverityStart = 5000;
constexpr std::int64_t kSeverityDuration = 7000;

}  // namespace

std::vector<ExperimentSpec> default_matrix(const DatasetSpec& dataset) {
  using K = faults::FaultKind;
  std::vector<ExperimentSpec> out;
  auto add = [&](std::string name, std::vector<faults::FaultSpec> cam, std::vector<faults::FaultSpec> inertial) {
    ExperimentSpec s;
    s.name = std::move(name);
    s.dataset = dataset;
    s.faults.camera_faults = std::move(cam);
    s.faults.imu_faults = std::move(inertial);
    s.faults.global_seed = dataset.seed;
    s.estimator.fix_seed = dataset.seed;
    s.repetitions = s.faults.is_stochastic() ? kStochasticRepetitions : 1;
    out.push_back(std::move(s));
  };

  for (std::int64_t start : {100, 600, 1000}) {
    add("timing/camera_drop@" + std::to_string(start), {camera(K::consecutive_drop, start, 50)}, {});
  }
  for (std::int64_t start : {1000, 6000, 10000}) {
    add("timing/imu_noise@" + std::to_string(start), {}, {imu(K::noise_amplification, start, 200, 5.0)});
  }
  for (std::int64_t n : {5, 10, 20, 50, 100, 200}) {
    add("duration/camera_drop_" + std::to_string(n), {camera(K::consecutive_drop, 500, n)}, {});
  }
  for (std::int64_t n : {50, 100, 200, 400, 800}) {
    add("dropout/imu_" + std::to_string(n), {}, {imu(K::dropout, 5000, n)});
  }
  for (int pct : {10, 20, 30, 50}) {
    add("random/camera_drop_" + std::to_string(pct), {camera(K::random_drop, 0, kAllFrames, pct / 100.0)}, {});
  }
  for (double k : {2.0, 5.0, 10.0}) {
    add("severity/imu_noise_" + trim_number(k) + "x", {},
        {imu(K::noise_amplification, kSeverityStart, kSeverityDuration, k)});
  }
  for (double beta : {0.01, 0.05, 0.1}) {
    add("drift/imu_bias_" + trim_number(beta), {}, {imu(K::bias_drift, 0, std::nullopt, beta)});
  }
  for (double sigma : {10.0, 30.0, 50.0}) {
    add("noise/camera_sigma_" + trim_number(sigma), {camera(K::gaussian_noise, 0, kAllFrames, sigma)}, {});
  }
  add("combined/cam_drop10_imu5x", {camera(K::random_drop, 0, kAllFrames, 0.1)},
      {imu(K::noise_amplification, kSeverityStart, kSeverityDuration, 5.0)});
  return out;
}

std::vector<MatrixEntry> as_entries(std::vector<ExperimentSpec> specs) {
  std::vector<MatrixEntry> out;
  out.reserve(specs.size());
  for (auto& s : specs) out.push_back({s.name, std::move(s), ""});
  return out;
}

// ---------------------------------------------------------------------------
// Trends

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

std::map<std::string, double> per_experiment_median(const std::vector<std::vector<report::Aggregate>>& per_seed,
                                                    double (*pick)(const report::Aggregate&)) {
  std::map<std::string, std::vector<double>> values;
  for (const auto& seed : per_seed) {
    for (const auto& a : seed) values[a.experiment].push_back(pick(a));
  }
  std::map<std::string, double> out;
  for (auto& [name, v] : values) out[name] = median_of(std::move(v));
  return out;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

struct TrendBuilder {
  const std::map<std::string, double>& ate;
  std::vector<report::TrendFlag> flags;

  // Values for `names`, or nullopt when any is missing or non-finite.
  std::optional<std::vector<double>> lookup(const std::vector<std::string>& names) const {
    std::vector<double> v;
    for (const auto& n : names) {
      const auto it = ate.find(n);
      if (it == ate.end() || !std::isfinite(it->second)) return std::nullopt;
      v.push_back(it->second);
    }
    return v;
  }

  void add(std::string name, std::optional<bool> pass, std::string detail) {
    report::TrendFlag f;
    f.name = std::move(name);
    f.status = !pass ? report::TrendStatus::skipped : *pass ? report::TrendStatus::pass : report::TrendStatus::fail;
    f.detail = std::move(detail);
    flags.push_back(std::move(f));
  }

  void non_increasing(std::string name, const std::vector<std::string>& names) {
    const auto v = lookup(names);
    if (!v) return add(std::move(name), std::nullopt, "missing experiments");
    bool ok = true;
    std::string detail = "ATE";
    for (std::size_t i = 0; i < v->size(); ++i) {
      const bool holds = i == 0 || (*v)[i - 1] >= (*v)[i];
      detail += (i == 0 ? " " : holds ? " >= " : " < ") + fmt((*v)[i]);
      ok = ok && holds;
    }
    add(std::move(name), ok, detail + " m");
  }
};

bool starts_with(const std::string& s, std::string_view prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw EvaluationError("spearman: need two equal-length series of size >= 2");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

std::vector<std::pair<std::string, double>> median_ate(const std::vector<std::vector<report::Aggregate>>& per_seed) {
  const auto m = per_experiment_median(per_seed, [](const report::Aggregate& a) { return a.ate_mean_m.median; });
  return {m.begin(), m.end()};
}

std::vector<report::TrendFlag> evaluate_trends(const std::vector<std::vector<report::Aggregate>>& per_seed) {
  const auto ate = per_experiment_median(per_seed, [](const report::Aggregate& a) { return a.ate_mean_m.median; });
  const auto accel =
      per_experiment_median(per_seed, [](const report::Aggregate& a) { return a.growth_accel_mps2.median; });
  TrendBuilder t{ate, {}};

  {
    const std::vector<double> durations = {5, 10, 20, 50, 100, 200};
    std::vector<std::string> names;
    for (double d : durations) names.push_back("duration/camera_drop_" + trim_number(d));
    if (const auto v = t.lookup(names)) {
      const double rho = spearman(durations, *v);
      t.add("blackout_monotone", rho >= 0.9, "spearman rho " + fmt(rho));
    } else {
      t.add("blackout_monotone", std::nullopt, "missing experiments");
    }
  }

  if (const auto v = t.lookup({"random/camera_drop_50", "duration/camera_drop_200"})) {
    t.add("random_below_blackout", (*v)[0] < (*v)[1],
          "random 50% " + fmt((*v)[0]) + " m vs blackout 200 " + fmt((*v)[1]) + " m");
  } else {
    t.add("random_below_blackout", std::nullopt, "missing experiments");
  }

  {
    double worst_camera = -1.0, weakest_imu = std::numeric_limits<double>::infinity();
    std::string worst_name, weakest_name;
    const std::set<std::string> severe = {"severity/imu_noise_5x", "severity/imu_noise_10x", "drift/imu_bias_0.05",
                                          "drift/imu_bias_0.1"};
    for (const auto& [name, v] : ate) {
      if (!std::isfinite(v)) continue;
      const bool is_camera = starts_with(name, "timing/camera_") || starts_with(name, "duration/") ||
                             starts_with(name, "random/") || starts_with(name, "noise/");
      const bool is_severe_imu = starts_with(name, "timing/imu_") || severe.count(name) > 0;
      if (is_camera && v > worst_camera) {
        worst_camera = v;
        worst_name = name;
      }
      if (is_severe_imu && v < weakest_imu) {
        weakest_imu = v;
        weakest_name = name;
      }
    }
    if (worst_camera < 0.0 || !std::isfinite(weakest_imu)) {
      t.add("imu_dominates_camera", std::nullopt, "missing experiments");
    } else {
      const double ratio = weakest_imu / worst_camera;
      t.add("imu_dominates_camera", ratio >= 100.0,
            "weakest " + weakest_name + " / worst " + worst_name + " = " + fmt(ratio));
    }
  }

  t.non_increasing("onset_order_camera", {"timing/camera_drop@100", "timing/camera_drop@600", "timing/camera_drop@1000"});
  t.non_increasing("onset_order_imu", {"timing/imu_noise@1000", "timing/imu_noise@6000", "timing/imu_noise@10000"});

  {
    const std::vector<std::string> names = {"drift/imu_bias_0.01", "drift/imu_bias_0.05", "drift/imu_bias_0.1"};
    std::string detail = "mean growth acceleration";
    std::optional<bool> ok = true;
    for (const auto& n : names) {
      const auto it = accel.find(n);
      if (it == accel.end() || !std::isfinite(it->second)) {
        ok.reset();
        detail = "missing experiments";
        break;
      }
      detail += " " + fmt(it->second);
      if (!(it->second > 0.0)) ok = false;
    }
    t.add("drift_accelerating", ok, ok ? detail + " m/s^2" : detail);
  }

  if (const auto v = t.lookup({"combined/cam_drop10_imu5x", "severity/imu_noise_5x", "random/camera_drop_10"})) {
    const auto [combined, imu_only, camera_only] = std::tuple((*v)[0], (*v)[1], (*v)[2]);
    const double rel = std::abs(combined - imu_only) / imu_only;
    const bool ok = rel <= 0.25 && combined >= 100.0 * camera_only;
    t.add("combined_dominance", ok,
          "vs imu-only " + fmt(100.0 * rel) + "%, vs camera-only x" + fmt(combined / camera_only));
  } else {
    t.add("combined_dominance", std::nullopt, "missing experiments");
  }
  return t.flags;
}

}  // namespace faultbench::experiment
