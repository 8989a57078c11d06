#include "faultbench/fault_injection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "faultbench/error.hpp"
#include "faultbench/rng.hpp"

namespace faultbench::faults {

using nlohmann::json;

namespace {

constexpr std::uint64_t kLeftEye = 0;
constexpr std::uint64_t kRightEye = 1;

FaultLogEntry make_entry(const FaultSpec& spec, FaultEvent event, TimestampNs t, std::int64_t index) {
  return {spec.id, event, t, index};
}

std::uint64_t stream_seed(const FaultSpec& spec) { return spec.seed.value_or(0); }

template <typename Element>
Faulted<Element> drop_where(const std::vector<Element>& in, const FaultSpec& spec, FaultEvent event,
                            auto&& should_drop) {
  Faulted<Element> out;
  out.stream.reserve(in.size());
  for (const auto& e : in) {
    if (spec.in_window(e.index) && should_drop(e)) {
      out.log.push_back(make_entry(spec, event, e.t, e.index));
    } else {
      out.stream.push_back(e);
    }
  }
  return out;
}

void require_kind(const FaultSpec& spec, FaultKind kind) {
  if (spec.kind != kind) {
    throw ConfigError("fault " + spec.id + ": expected kind " + std::string(to_string(kind)) + ", got " +
                      std::string(to_string(spec.kind)));
  }
}

// --- JSON -------------------------------------------------------------------

const std::set<std::string> kFaultKeys = {"kind",     "start", "duration",         "severity",
                                          "seed",     "mode",  "nominal_gyro_std", "nominal_accel_std",
                                          "axis"};

std::optional<FaultKind> kind_from_string(const std::string& s) {
  for (auto k : {FaultKind::consecutive_drop, FaultKind::random_drop, FaultKind::gaussian_noise,
                 FaultKind::noise_amplification, FaultKind::dropout, FaultKind::bias_drift}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::int64_t get_integer(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(path + "." + key + ": expected an integer");
  return v.get<std::int64_t>();
}

double get_number(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(path + "." + key + ": expected a number");
  return v.get<double>();
}

FaultSpec parse_fault(const json& obj, Modality modality, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (!kFaultKeys.contains(key)) throw ConfigError(path + "." + key + ": unknown key");
  }
  FaultSpec spec;
  spec.modality = modality;

  if (!obj.contains("kind") || !obj["kind"].is_string()) throw ConfigError(path + ".kind: required string");
  const auto kind = kind_from_string(obj["kind"].get<std::string>());
  if (!kind) throw ConfigError(path + ".kind: unknown fault kind '" + obj["kind"].get<std::string>() + "'");
  spec.kind = *kind;
  if (!is_valid_pair(modality, spec.kind)) {
    throw ConfigError(path + ".kind: '" + std::string(to_string(spec.kind)) + "' is not a " +
                      std::string(to_string(modality)) + " fault");
  }

  if (!obj.contains("start")) throw ConfigError(path + ".start: required");
  spec.start = get_integer(obj, "start", path);

  if (obj.contains("duration")) {
    spec.duration = get_integer(obj, "duration", path);
  } else if (spec.kind != FaultKind::bias_drift) {
    throw ConfigError(path + ".duration: required for " + std::string(to_string(spec.kind)));
  }

  const bool needs_severity = spec.kind != FaultKind::consecutive_drop && spec.kind != FaultKind::dropout;
  if (obj.contains("severity")) {
    spec.severity = get_number(obj, "severity", path);
  } else if (needs_severity) {
    throw ConfigError(path + ".severity: required for " + std::string(to_string(spec.kind)));
  }

  if (obj.contains("seed")) {
    const auto& v = obj["seed"];
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw ConfigError(path + ".seed: expected a non-negative integer");
    }
    spec.seed = v.get<std::uint64_t>();
  }

  const bool amplification = spec.kind == FaultKind::noise_amplification;
  if (obj.contains("mode")) {
    if (!amplification) throw ConfigError(path + ".mode: only valid for noise_amplification");
    const auto& v = obj["mode"];
    if (v == "scale") {
      spec.mode = AmplificationMode::scale;
    } else if (v == "additive") {
      spec.mode = AmplificationMode::additive;
    } else {
      throw ConfigError(path + ".mode: expected \"scale\" or \"additive\"");
    }
  }
  for (const char* key : {"nominal_gyro_std", "nominal_accel_std"}) {
    if (!obj.contains(key)) continue;
    if (!amplification || spec.mode != AmplificationMode::additive) {
      throw ConfigError(path + "." + key + ": only valid for additive noise_amplification");
    }
    (std::string(key) == "nominal_gyro_std" ? spec.nominal_gyro_std : spec.nominal_accel_std) =
        get_number(obj, key, path);
  }

  if (obj.contains("axis")) {
    if (spec.kind != FaultKind::bias_drift) throw ConfigError(path + ".axis: only valid for bias_drift");
    const auto& v = obj["axis"];
    if (!v.is_array() || v.size() != 3 || !std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); })) {
      throw ConfigError(path + ".axis: expected [x, y, z]");
    }
    Eigen::Vector3d axis(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
    if (!(axis.norm() > 0.0) || !axis.allFinite()) throw ConfigError(path + ".axis: must be a non-zero vector");
    spec.axis = axis.normalized();
  }
  return spec;
}

json fault_to_json(const FaultSpec& spec) {
  json obj;
  obj["kind"] = to_string(spec.kind);
  obj["start"] = spec.start;
  if (spec.duration) obj["duration"] = *spec.duration;
  obj["severity"] = spec.severity;
  if (spec.seed) obj["seed"] = *spec.seed;
  if (spec.kind == FaultKind::noise_amplification) {
    obj["mode"] = to_string(spec.mode);
    if (spec.mode == AmplificationMode::additive) {
      obj["nominal_gyro_std"] = spec.nominal_gyro_std;
      obj["nominal_accel_std"] = spec.nominal_accel_std;
    }
  }
  if (spec.kind == FaultKind::bias_drift) obj["axis"] = {spec.axis.x(), spec.axis.y(), spec.axis.z()};
  return obj;
}

}  // namespace

std::string_view to_string(Modality m) { return m == Modality::camera ? "camera" : "imu"; }

std::string_view to_string(FaultKind k) {
  switch (k) {
    case FaultKind::consecutive_drop: return "consecutive_drop";
    case FaultKind::random_drop: return "random_drop";
    case FaultKind::gaussian_noise: return "gaussian_noise";
    case FaultKind::noise_amplification: return "noise_amplification";
    case FaultKind::dropout: return "dropout";
    case FaultKind::bias_drift: return "bias_drift";
  }
  return "unknown";
}

std::string_view to_string(FaultEvent e) {
  switch (e) {
    case FaultEvent::frame_dropped: return "frame_dropped";
    case FaultEvent::sample_dropped: return "sample_dropped";
    case FaultEvent::frame_corrupted: return "frame_corrupted";
    case FaultEvent::sample_corrupted: return "sample_corrupted";
  }
  return "unknown";
}

std::string_view to_string(AmplificationMode m) { return m == AmplificationMode::scale ? "scale" : "additive"; }

bool is_valid_pair(Modality m, FaultKind k) {
  switch (k) {
    case FaultKind::consecutive_drop:
    case FaultKind::random_drop:
    case FaultKind::gaussian_noise:
      return m == Modality::camera;
    case FaultKind::noise_amplification:
    case FaultKind::dropout:
    case FaultKind::bias_drift:
      return m == Modality::imu;
  }
  return false;
}

bool FaultSpec::is_drop() const {
  return kind == FaultKind::consecutive_drop || kind == FaultKind::random_drop || kind == FaultKind::dropout;
}

bool FaultSpec::is_stochastic() const {
  return kind == FaultKind::random_drop || kind == FaultKind::gaussian_noise ||
         (kind == FaultKind::noise_amplification && mode == AmplificationMode::additive);
}

void FaultSpec::validate() const {
  const std::string where = "fault " + (id.empty() ? std::string(to_string(modality)) : id);
  if (!is_valid_pair(modality, kind)) {
    throw ConfigError(where + ": kind '" + std::string(to_string(kind)) + "' is not a " +
                      std::string(to_string(modality)) + " fault");
  }
  if (start < 0) throw ConfigError(where + ".start: must be >= 0");
  if (duration && *duration < 0) throw ConfigError(where + ".duration: must be >= 0");
  if (!duration && kind != FaultKind::bias_drift) {
    throw ConfigError(where + ".duration: required for " + std::string(to_string(kind)));
  }
  if (!std::isfinite(severity)) throw ConfigError(where + ".severity: must be finite");
  switch (kind) {
    case FaultKind::random_drop:
      if (severity < 0.0 || severity > 1.0) throw ConfigError(where + ".severity: drop probability must be in [0, 1]");
      break;
    case FaultKind::gaussian_noise:
      if (severity < 0.0) throw ConfigError(where + ".severity: noise sigma must be >= 0");
      break;
    case FaultKind::noise_amplification:
      if (severity < 1.0) throw ConfigError(where + ".severity: amplification factor must be >= 1");
      if (!(nominal_gyro_std >= 0.0) || !(nominal_accel_std >= 0.0)) {
        throw ConfigError(where + ": nominal noise std must be >= 0");
      }
      break;
    case FaultKind::bias_drift:
      if (severity < 0.0) throw ConfigError(where + ".severity: drift rate must be >= 0");
      if (std::abs(axis.norm() - 1.0) > 1e-9) throw ConfigError(where + ".axis: must be a unit vector");
      break;
    case FaultKind::consecutive_drop:
    case FaultKind::dropout:
      break;
  }
}

bool FaultConfig::is_stochastic() const {
  auto stochastic = [](const FaultSpec& s) { return s.is_stochastic(); };
  return std::any_of(camera_faults.begin(), camera_faults.end(), stochastic) ||
         std::any_of(imu_faults.begin(), imu_faults.end(), stochastic);
}

void FaultConfig::validate() {
  auto check = [](std::vector<FaultSpec>& specs, Modality modality) {
    for (std::size_t i = 0; i < specs.size(); ++i) {
      specs[i].id = std::string(to_string(modality)) + "." + std::to_string(i);
      if (specs[i].modality != modality) {
        throw ConfigError("fault " + specs[i].id + ": listed under the wrong modality");
      }
      specs[i].validate();
    }
    for (std::size_t i = 0; i < specs.size(); ++i) {
      for (std::size_t j = i + 1; j < specs.size(); ++j) {
        const auto& a = specs[i];
        const auto& b = specs[j];
        if (!a.is_drop() || !b.is_drop()) continue;
        const bool overlap = a.start < b.window_end() && b.start < a.window_end() &&
                             a.window_end() > a.start && b.window_end() > b.start;
        if (overlap) {
          throw ConfigError("faults " + a.id + " and " + b.id + ": drop windows overlap");
        }
      }
    }
  };
  check(camera_faults, Modality::camera);
  check(imu_faults, Modality::imu);
}

FaultConfig FaultConfig::resolved() const {
  FaultConfig out = *this;
  std::uint64_t position = 0;
  for (auto* specs : {&out.camera_faults, &out.imu_faults}) {
    for (auto& spec : *specs) {
      if (!spec.seed) spec.seed = derive_seed(global_seed, position);
      ++position;
    }
  }
  return out;
}

FaultConfig parse_fault_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("fault config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("fault config: expected a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "global_seed" && key != "camera_faults" && key != "imu_faults") {
      throw ConfigError(key + ": unknown key");
    }
  }
  FaultConfig config;
  if (doc.contains("global_seed")) {
    const auto& v = doc["global_seed"];
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw ConfigError("global_seed: expected a non-negative integer");
    }
    config.global_seed = v.get<std::uint64_t>();
  }
  for (const auto& [key, modality, target] :
       {std::tuple{"camera_faults", Modality::camera, &config.camera_faults},
        std::tuple{"imu_faults", Modality::imu, &config.imu_faults}}) {
    if (!doc.contains(key)) continue;
    const auto& arr = doc[key];
    if (!arr.is_array()) throw ConfigError(std::string(key) + ": expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      target->push_back(parse_fault(arr[i], modality, std::string(key) + "[" + std::to_string(i) + "]"));
    }
  }
  config.validate();
  return config;
}

std::string fault_config_to_json(const FaultConfig& config) {
  json doc;
  doc["global_seed"] = config.global_seed;
  doc["camera_faults"] = json::array();
  doc["imu_faults"] = json::array();
  for (const auto& s : config.camera_faults) doc["camera_faults"].push_back(fault_to_json(s));
  for (const auto& s : config.imu_faults) doc["imu_faults"].push_back(fault_to_json(s));
  return doc.dump();
}

// --- transforms -------------------------------------------------------------

Faulted<CameraFrame> apply_camera_consecutive_drop(const std::vector<CameraFrame>& frames, const FaultSpec& spec) {
  require_kind(spec, FaultKind::consecutive_drop);
  return drop_where(frames, spec, FaultEvent::frame_dropped, [](const CameraFrame&) { return true; });
}

Faulted<CameraFrame> apply_camera_random_drop(const std::vector<CameraFrame>& frames, const FaultSpec& spec) {
  require_kind(spec, FaultKind::random_drop);
  const std::uint64_t seed = stream_seed(spec);
  const double p = spec.severity;
  // Counter-based: the decision for a frame depends only on (seed, index),
  // so it is unaffected by what happened to other frames.
  return drop_where(frames, spec, FaultEvent::frame_dropped, [seed, p](const CameraFrame& f) {
    return unit_interval(derive_seed(seed, static_cast<std::uint64_t>(f.index))) <= p;
  });
}

Faulted<CameraFrame> apply_camera_noise(const std::vector<CameraFrame>& frames, const FaultSpec& spec) {
  require_kind(spec, FaultKind::gaussian_noise);
  const std::uint64_t seed = stream_seed(spec);
  Faulted<CameraFrame> out;
  out.stream = frames;
  for (auto& f : out.stream) {
    if (!spec.in_window(f.index)) continue;
    const std::uint64_t frame_key = derive_seed(seed, static_cast<std::uint64_t>(f.index));
    f.left = f.left.with_noise(spec.severity, derive_seed(frame_key, kLeftEye));
    f.right = f.right.with_noise(spec.severity, derive_seed(frame_key, kRightEye));
    out.log.push_back(make_entry(spec, FaultEvent::frame_corrupted, f.t, f.index));
  }
  return out;
}

Faulted<ImuSample> apply_imu_noise_amplification(const std::vector<ImuSample>& samples, const FaultSpec& spec) {
  require_kind(spec, FaultKind::noise_amplification);
  const double k = spec.severity;
  const std::uint64_t seed = stream_seed(spec);
  Faulted<ImuSample> out;
  out.stream = samples;
  for (auto& s : out.stream) {
    if (!spec.in_window(s.index)) continue;
    if (spec.mode == AmplificationMode::scale) {
      s.gyro *= k;
      s.accel *= k;
    } else {
      Xoshiro256StarStar rng(derive_seed(seed, static_cast<std::uint64_t>(s.index)));
      const double gyro_std = (k - 1.0) * spec.nominal_gyro_std;
      const double accel_std = (k - 1.0) * spec.nominal_accel_std;
      for (int i = 0; i < 3; ++i) s.gyro[i] += gyro_std * rng.normal();
      for (int i = 0; i < 3; ++i) s.accel[i] += accel_std * rng.normal();
    }
    out.log.push_back(make_entry(spec, FaultEvent::sample_corrupted, s.t, s.index));
  }
  return out;
}

Faulted<ImuSample> apply_imu_dropout(const std::vector<ImuSample>& samples, const FaultSpec& spec) {
  require_kind(spec, FaultKind::dropout);
  return drop_where(samples, spec, FaultEvent::sample_dropped, [](const ImuSample&) { return true; });
}

Faulted<ImuSample> apply_imu_bias_drift(const std::vector<ImuSample>& samples, const FaultSpec& spec,
                                        std::optional<TimestampNs> onset) {
  require_kind(spec, FaultKind::bias_drift);
  if (!onset) {
    const auto it = std::find_if(samples.begin(), samples.end(),
                                 [&spec](const ImuSample& s) { return s.index >= spec.start; });
    if (it != samples.end() && spec.in_window(it->index)) onset = it->t;
  }
  Faulted<ImuSample> out;
  out.stream = samples;
  if (!onset) return out;
  for (auto& s : out.stream) {
    if (!spec.in_window(s.index)) continue;
    const double elapsed = to_seconds(s.t - *onset);
    s.gyro += spec.severity * elapsed * spec.axis;
    out.log.push_back(make_entry(spec, FaultEvent::sample_corrupted, s.t, s.index));
  }
  return out;
}

Faulted<CameraFrame> apply_camera_fault(const std::vector<CameraFrame>& frames, const FaultSpec& spec) {
  switch (spec.kind) {
    case FaultKind::consecutive_drop: return apply_camera_consecutive_drop(frames, spec);
    case FaultKind::random_drop: return apply_camera_random_drop(frames, spec);
    case FaultKind::gaussian_noise: return apply_camera_noise(frames, spec);
    default:
      throw ConfigError("fault " + spec.id + ": '" + std::string(to_string(spec.kind)) + "' is not a camera fault");
  }
}

Faulted<ImuSample> apply_imu_fault(const std::vector<ImuSample>& samples, const FaultSpec& spec,
                                   std::optional<TimestampNs> onset) {
  switch (spec.kind) {
    case FaultKind::noise_amplification: return apply_imu_noise_amplification(samples, spec);
    case FaultKind::dropout: return apply_imu_dropout(samples, spec);
    case FaultKind::bias_drift: return apply_imu_bias_drift(samples, spec, onset);
    default:
      throw ConfigError("fault " + spec.id + ": '" + std::string(to_string(spec.kind)) + "' is not an imu fault");
  }
}

InjectionResult apply_all(const std::vector<CameraFrame>& cameras, const std::vector<ImuSample>& imu,
                          const FaultConfig& config) {
  FaultConfig cfg = config;
  cfg.validate();
  cfg = cfg.resolved();

  InjectionResult result;
  result.cameras = cameras;
  result.imu = imu;
  for (const auto& spec : cfg.camera_faults) {
    auto step = apply_camera_fault(result.cameras, spec);
    result.cameras = std::move(step.stream);
    result.log.insert(result.log.end(), step.log.begin(), step.log.end());
  }
  for (const auto& spec : cfg.imu_faults) {
    std::optional<TimestampNs> onset;
    if (spec.kind == FaultKind::bias_drift) {
      // onset from the original stream, so an overlapping dropout cannot move it
      const auto it = std::lower_bound(imu.begin(), imu.end(), spec.start,
                                       [](const ImuSample& s, std::int64_t idx) { return s.index < idx; });
      if (it != imu.end()) onset = it->t;
    }
    auto step = apply_imu_fault(result.imu, spec, onset);
    result.imu = std::move(step.stream);
    result.log.insert(result.log.end(), step.log.begin(), step.log.end());
  }
  std::stable_sort(result.log.begin(), result.log.end(),
                   [](const FaultLogEntry& a, const FaultLogEntry& b) { return a.t < b.t; });
  return result;
}

std::string fault_log_csv(const FaultLog& log) {
  std::ostringstream out;
  out << "spec_id,event,timestamp_ns,index\n";
  for (const auto& e : log) out << e.spec_id << ',' << to_string(e.event) << ',' << e.t << ',' << e.index << '\n';
  return out.str();
}

void write_fault_log(const std::filesystem::path& path, const FaultLog& log) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << fault_log_csv(log);
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace faultbench::faults
