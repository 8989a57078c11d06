#ifndef FAULTBENCH_FAULT_INJECTION_HPP_
#define FAULTBENCH_FAULT_INJECTION_HPP_

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "faultbench/types.hpp"

namespace faultbench::faults {

enum class Modality { camera, imu };

enum class FaultKind {
  consecutive_drop,     // camera
  random_drop,          // camera
  gaussian_noise,       // camera
  noise_amplification,  // imu
  dropout,              // imu
  bias_drift,           // imu
};

enum class AmplificationMode { scale, additive };

enum class FaultEvent { frame_dropped, sample_dropped, frame_corrupted, sample_corrupted };

std::string_view to_string(Modality m);
std::string_view to_string(FaultKind k);
std::string_view to_string(FaultEvent e);
std::string_view to_string(AmplificationMode m);

/// True for the six (modality, kind) combinations the injector supports.
bool is_valid_pair(Modality m, FaultKind k);

/// One fault scenario. `start` and `duration` count frames (camera) or
/// samples (imu) of the ORIGINAL stream; the window is [start, start+duration).
/// Severity is kind-specific: drop probability p, pixel sigma in gray levels,
/// amplification factor k, or gyro drift rate beta in rad/s^2.
struct FaultSpec {
  Modality modality = Modality::camera;
  FaultKind kind = FaultKind::consecutive_drop;
  std::int64_t start = 0;
  std::optional<std::int64_t> duration;  // empty = to end of stream (bias_drift only)
  double severity = 0.0;
  std::optional<std::uint64_t> seed;     // empty = derived from the config's global seed
  std::string id;                        // e.g. "camera.0"; filled by FaultConfig

  // noise_amplification only
  AmplificationMode mode = AmplificationMode::scale;
  double nominal_gyro_std = 1.6968e-4 * 14.142135623730951;   // density * sqrt(200 Hz)
  double nominal_accel_std = 2.0e-3 * 14.142135623730951;

  // bias_drift only: unit drift direction in the gyro frame
  Eigen::Vector3d axis = Eigen::Vector3d::Ones().normalized();

  std::int64_t window_end() const {
    return duration ? start + *duration : std::numeric_limits<std::int64_t>::max();
  }
  bool in_window(std::int64_t index) const { return index >= start && index < window_end(); }
  bool is_drop() const;
  bool is_stochastic() const;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct FaultLogEntry {
  std::string spec_id;
  FaultEvent event = FaultEvent::frame_dropped;
  TimestampNs t = 0;
  std::int64_t index = 0;

  bool operator==(const FaultLogEntry&) const = default;
};

using FaultLog = std::vector<FaultLogEntry>;

struct FaultConfig {
  std::vector<FaultSpec> camera_faults;
  std::vector<FaultSpec> imu_faults;
  std::uint64_t global_seed = 0;

  bool empty() const { return camera_faults.empty() && imu_faults.empty(); }
  bool is_stochastic() const;

  /// Per-spec validation plus: drop-type windows within one modality must be
  /// disjoint. Also assigns ids ("camera.<i>", "imu.<i>").
  void validate();

  /// Copy in which every spec without an explicit seed carries
  /// derive_seed(global_seed, position), position counting camera faults
  /// first, then imu faults.
  FaultConfig resolved() const;
};

/// Parses the JSON fault config document:
///   { "global_seed": int, "camera_faults": [...], "imu_faults": [...] }
/// Fault objects take `kind`, `start`, `duration` (optional for bias_drift
/// only), `severity`, and optionally `seed`, `mode` ("scale" | "additive",
/// noise_amplification), `nominal_gyro_std` / `nominal_accel_std` (additive
/// mode), `axis` ([x, y, z], bias_drift). Unknown keys are rejected.
FaultConfig parse_fault_config(std::string_view text);

/// Canonical JSON text for a config; parse_fault_config round-trips it.
std::string fault_config_to_json(const FaultConfig& config);

template <typename Element>
struct Faulted {
  std::vector<Element> stream;
  FaultLog log;
};

Faulted<CameraFrame> apply_camera_consecutive_drop(const std::vector<CameraFrame>& frames, const FaultSpec& spec);
Faulted<CameraFrame> apply_camera_random_drop(const std::vector<CameraFrame>& frames, const FaultSpec& spec);
Faulted<CameraFrame> apply_camera_noise(const std::vector<CameraFrame>& frames, const FaultSpec& spec);
Faulted<ImuSample> apply_imu_noise_amplification(const std::vector<ImuSample>& samples, const FaultSpec& spec);
Faulted<ImuSample> apply_imu_dropout(const std::vector<ImuSample>& samples, const FaultSpec& spec);

/// Gyro offset beta * (t - onset) * axis for samples in the window. `onset`
/// defaults to the timestamp of the sample whose index equals `start` (or
/// the first windowed sample if that one is absent).
Faulted<ImuSample> apply_imu_bias_drift(const std::vector<ImuSample>& samples, const FaultSpec& spec,
                                        std::optional<TimestampNs> onset = std::nullopt);

Faulted<CameraFrame> apply_camera_fault(const std::vector<CameraFrame>& frames, const FaultSpec& spec);
Faulted<ImuSample> apply_imu_fault(const std::vector<ImuSample>& samples, const FaultSpec& spec,
                                   std::optional<TimestampNs> onset = std::nullopt);

struct InjectionResult {
  std::vector<CameraFrame> cameras;
  std::vector<ImuSample> imu;
  FaultLog log;  // merged, ordered by timestamp
};

/// Applies every fault of `config` in config order per modality. Windows
/// always refer to original indices, and bias-drift onsets are taken from
/// the unfaulted stream. Pure function of its inputs.
InjectionResult apply_all(const std::vector<CameraFrame>& cameras, const std::vector<ImuSample>& imu,
                          const FaultConfig& config);

/// CSV `spec_id,event,timestamp_ns,index` with a header row.
std::string fault_log_csv(const FaultLog& log);
void write_fault_log(const std::filesystem::path& path, const FaultLog& log);

}  // namespace faultbench::faults

#endif  // FAULTBENCH_FAULT_INJECTION_HPP_
