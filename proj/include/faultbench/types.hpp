#ifndef FAULTBENCH_TYPES_HPP_
#define FAULTBENCH_TYPES_HPP_

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace faultbench {

/// Timestamps are integer nanoseconds end-to-end. Seconds and Hz only appear
/// in configuration and are converted once at that boundary.
using TimestampNs = std::int64_t;

inline constexpr double kNanosecondsPerSecond = 1e9;

inline double to_seconds(TimestampNs t) { return static_cast<double>(t) / kNanosecondsPerSecond; }

inline TimestampNs to_nanoseconds(double seconds) {
  return static_cast<TimestampNs>(std::llround(seconds * kNanosecondsPerSecond));
}

/// One inertial reading. `index` is the position in the original, pre-fault
/// stream and survives every fault transform unchanged.
struct ImuSample {
  TimestampNs t = 0;
  Eigen::Vector3d gyro = Eigen::Vector3d::Zero();   // rad/s
  Eigen::Vector3d accel = Eigen::Vector3d::Zero();  // m/s^2, specific force
  std::int64_t index = 0;

  bool operator==(const ImuSample& other) const = default;
};

/// 8-bit grayscale image with value semantics and shared, immutable storage.
///
/// Additive pixel noise is recorded as a deterministic layer (sigma, stream
/// key) on top of the shared base buffer and rendered by `pixels()`. The
/// rendered bytes are a pure function of the base pixels and the layers, so
/// two images with equal layers always render identically, while a full
/// EuRoC-length stream with noise costs no extra memory until read.
class GrayImage {
 public:
  struct NoiseLayer {
    double sigma = 0.0;
    std::uint64_t key = 0;
    bool operator==(const NoiseLayer&) const = default;
  };

  GrayImage() = default;
  GrayImage(int width, int height, std::vector<std::uint8_t> pixels);

  static GrayImage filled(int width, int height, std::uint8_t value);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const { return size() == 0; }

  /// Rendered pixels, row-major.
  std::vector<std::uint8_t> pixels() const;

  /// Base pixels before any noise layer.
  const std::vector<std::uint8_t>& base_pixels() const;

  const std::vector<NoiseLayer>& noise_layers() const { return layers_; }

  /// Copy of this image with one more additive Gaussian layer. Each pixel
  /// receives an independent N(0, sigma^2) draw from a xoshiro256** stream
  /// seeded by `key`, then is rounded to nearest and clamped to [0, 255].
  GrayImage with_noise(double sigma, std::uint64_t key) const;

  /// Two images are equal when their dimensions and rendered pixels match.
  friend bool operator==(const GrayImage& a, const GrayImage& b);

 private:
  int width_ = 0;
  int height_ = 0;
  std::shared_ptr<const std::vector<std::uint8_t>> base_;
  std::vector<NoiseLayer> layers_;
};

/// Stereo frame; both eyes are faulted as a unit.
struct CameraFrame {
  TimestampNs t = 0;
  GrayImage left;
  GrayImage right;
  std::int64_t index = 0;

  friend bool operator==(const CameraFrame& a, const CameraFrame& b) {
    return a.t == b.t && a.index == b.index && a.left == b.left && a.right == b.right;
  }
};

/// Body pose in the world frame; `orientation` rotates body vectors into the world.
struct TimedPose {
  TimestampNs t = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();

  Eigen::Isometry3d isometry() const;
};

struct Trajectory {
  std::vector<TimedPose> poses;
  std::string frame_id = "world";

  std::size_t size() const { return poses.size(); }
  bool empty() const { return poses.empty(); }

  /// Throws OrderingError on non-increasing timestamps and DataError on a
  /// non-unit quaternion (tolerance 1e-9).
  void validate() const;
};

}  // namespace faultbench

#endif  // FAULTBENCH_TYPES_HPP_
