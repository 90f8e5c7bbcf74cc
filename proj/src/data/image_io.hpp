#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lsen {

struct GrayImage {
  int64_t width = 0, height = 0;
  std::vector<uint8_t> pixels;  // row-major, width * height
};

// Reads an 8-bit grayscale PNG. Color images raise FormatError; unreadable
// files raise ArgumentError naming the path.
GrayImage read_gray_png(const std::string& path);

void write_gray_png(const std::string& path, const GrayImage& image);

}  // namespace lsen
