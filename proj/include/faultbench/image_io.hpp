#ifndef FAULTBENCH_IMAGE_IO_HPP_
#define FAULTBENCH_IMAGE_IO_HPP_

#include <filesystem>

#include "faultbench/types.hpp"

namespace faultbench::io {

// 8-bit grayscale only. Readers dispatch on the file's magic bytes, not the
// extension. Missing files raise IoError, anything else unreadable raises
// FormatError.
GrayImage read_gray_image(const std::filesystem::path& path);

GrayImage read_pgm(const std::filesystem::path& path);
GrayImage read_png(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const GrayImage& image);
void write_png(const std::filesystem::path& path, const GrayImage& image);

}  // namespace faultbench::io

#endif  // FAULTBENCH_IMAGE_IO_HPP_
