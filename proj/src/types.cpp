#include "faultbench/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "faultbench/error.hpp"
#include "faultbench/rng.hpp"

namespace faultbench {

namespace {

const std::vector<std::uint8_t>& empty_buffer() {
  static const std::vector<std::uint8_t> empty;
  return empty;
}

void render_layer(std::vector<std::uint8_t>& pixels, const GrayImage::NoiseLayer& layer) {
  if (layer.sigma == 0.0) return;
  Xoshiro256StarStar rng(layer.key);
  for (auto& p : pixels) {
    const double v = std::floor(static_cast<double>(p) + layer.sigma * rng.normal() + 0.5);
    p = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
  }
}

}  // namespace

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height) {
  if (width < 0 || height < 0 ||
      pixels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw FormatError("image buffer size does not match " + std::to_string(width) + "x" +
                      std::to_string(height));
  }
  base_ = std::make_shared<const std::vector<std::uint8_t>>(std::move(pixels));
}

GrayImage GrayImage::filled(int width, int height, std::uint8_t value) {
  return GrayImage(width, height,
                   std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, value));
}

const std::vector<std::uint8_t>& GrayImage::base_pixels() const {
  return base_ ? *base_ : empty_buffer();
}

std::vector<std::uint8_t> GrayImage::pixels() const {
  std::vector<std::uint8_t> out = base_pixels();
  for (const auto& layer : layers_) render_layer(out, layer);
  return out;
}

GrayImage GrayImage::with_noise(double sigma, std::uint64_t key) const {
  GrayImage out = *this;
  if (sigma > 0.0) out.layers_.push_back({sigma, key});
  return out;
}

bool operator==(const GrayImage& a, const GrayImage& b) {
  if (a.width_ != b.width_ || a.height_ != b.height_) return false;
  if (a.base_ == b.base_ && a.layers_ == b.layers_) return true;
  return a.pixels() == b.pixels();
}

Eigen::Isometry3d TimedPose::isometry() const {
  Eigen::Isometry3d iso = Eigen::Isometry3d::Identity();
  iso.linear() = orientation.toRotationMatrix();
  iso.translation() = position;
  return iso;
}

void Trajectory::validate() const {
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (i > 0 && poses[i].t <= poses[i - 1].t) {
      std::ostringstream msg;
      msg << "trajectory timestamps not strictly increasing at pose " << i << " (" << poses[i - 1].t
          << " -> " << poses[i].t << ")";
      throw OrderingError(msg.str());
    }
    if (std::abs(poses[i].orientation.norm() - 1.0) > 1e-9) {
      throw DataError("trajectory pose " + std::to_string(i) + " has a non-unit quaternion");
    }
  }
}

}  // namespace faultbench
