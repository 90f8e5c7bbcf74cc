#include "data/image_io.hpp"

#include <png.h>

#include <cstring>

#include "core/common.hpp"

namespace lsen {

GrayImage read_gray_png(const std::string& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    std::string msg = img.message;
    png_image_free(&img);
    throw ArgumentError("cannot read PNG '" + path + "': " + msg);
  }
  if (img.format & PNG_FORMAT_FLAG_COLOR) {
    png_image_free(&img);
    throw FormatError("'" + path + "' is not grayscale");
  }
  img.format = PNG_FORMAT_GRAY;  // folds 16-bit and alpha variants to gray8
  GrayImage out;
  out.width = img.width;
  out.height = img.height;
  out.pixels.resize(static_cast<size_t>(out.width) * static_cast<size_t>(out.height));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw FormatError("failed to decode PNG '" + path + "': " + msg);
  }
  return out;
}

void write_gray_png(const std::string& path, const GrayImage& image) {
  LSEN_CHECK_ARG(image.width > 0 && image.height > 0 &&
                     static_cast<int64_t>(image.pixels.size()) == image.width * image.height,
                 "write_gray_png: inconsistent image buffer");
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw ArgumentError("cannot write PNG '" + path + "': " + msg);
  }
}

}  // namespace lsen
