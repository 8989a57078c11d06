#ifndef FAULTBENCH_DATASET_IO_HPP_
#define FAULTBENCH_DATASET_IO_HPP_

#include <filesystem>
#include <vector>

#include "faultbench/types.hpp"

namespace faultbench::io {

/// EuRoC `imu0/data.csv`: header line, then
/// `timestamp_ns, w_x, w_y, w_z, a_x, a_y, a_z`. Indices are assigned 0..N-1.
/// Throws ParseError (with the 1-based line number) on malformed rows and
/// OrderingError on non-increasing timestamps.
std::vector<ImuSample> load_euroc_imu(const std::filesystem::path& csv);

/// Writes samples in the same layout with shortest round-trip formatting, so
/// reloading yields bit-identical values.
void write_euroc_imu(const std::filesystem::path& csv, const std::vector<ImuSample>& samples);

/// EuRoC `cam0/data.csv` rows `timestamp_ns, filename`. Left and right images
/// are matched by identical filename under `left_dir` / `right_dir`.
std::vector<CameraFrame> load_euroc_cam_index(const std::filesystem::path& index_csv,
                                              const std::filesystem::path& left_dir,
                                              const std::filesystem::path& right_dir, bool load_pixels = true);

/// Writes `cam0/` and `cam1/` (index + PNG images) under `mav0_dir`.
/// Frames are named `<timestamp_ns>.png` as in EuRoC.
void write_euroc_cameras(const std::filesystem::path& mav0_dir, const std::vector<CameraFrame>& frames);

/// EuRoC `state_groundtruth_estimate0/data.csv`. Columns past the quaternion
/// (velocity, biases) are ignored. Quaternions within 1e-3 of unit norm are
/// renormalized; anything further off raises DataError.
Trajectory load_euroc_groundtruth(const std::filesystem::path& csv);

/// Writes ground truth with just the pose columns (a valid EuRoC prefix).
void write_euroc_groundtruth(const std::filesystem::path& csv, const Trajectory& trajectory);

/// Trajectory exchange CSV `timestamp_ns, px, py, pz, qw, qx, qy, qz`.
/// Lines beginning with '#' are comments.
Trajectory read_trajectory_csv(const std::filesystem::path& csv);
void write_trajectory_csv(const std::filesystem::path& csv, const Trajectory& trajectory);

/// Streams of one EuRoC ASL sequence rooted at a `mav0` directory.
struct EurocSequence {
  std::vector<ImuSample> imu;
  std::vector<CameraFrame> cameras;
  Trajectory groundtruth;
};

/// Loads `imu0`, `cam0`/`cam1` and `state_groundtruth_estimate0` from
/// `mav0_dir` (a path ending in `mav0`, or its parent).
/// With `load_pixels` false the camera frames carry timestamps and indices
/// only (empty images), which is all the reference estimator consumes.
EurocSequence load_euroc_sequence(const std::filesystem::path& root, bool load_pixels = true);

/// Writes the streams back as an EuRoC ASL folder under `mav0_dir`.
void write_euroc_sequence(const std::filesystem::path& mav0_dir, const EurocSequence& sequence);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

}  // namespace faultbench::io

#endif  // FAULTBENCH_DATASET_IO_HPP_
