#pragma once

// Multi-channel images stored row-major from the top row down, channels interleaved.
//
// File formats:
//  * PFM: "PF" (3 channels) or "Pf" (1 channel), float32, scale -1 (little-endian).
//    Rows are stored top-down, unlike the bottom-up convention of some PFM writers.
//  * PGM: binary P5, 8-bit.
//  * PPM: binary P6, 8-bit RGB.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace footfit {

template <class T>
struct Image {
  int width = 0, height = 0, channels = 1;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, int c, T fill = T{})
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  T& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
  bool same_size(const Image& o) const { return width == o.width && height == o.height && channels == o.channels; }

  friend bool operator==(const Image& a, const Image& b) { return a.same_size(b) && a.data == b.data; }
};

using ImageD = Image<double>;
using Image8 = Image<std::uint8_t>;

void write_pfm(const std::filesystem::path& path, const ImageD& image);
ImageD read_pfm(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const Image8& image);
Image8 read_pgm(const std::filesystem::path& path);

void write_ppm(const std::filesystem::path& path, const Image8& image);
Image8 read_ppm(const std::filesystem::path& path);

/// Rounds every value through float32, matching what a PFM round trip stores.
ImageD to_float32_precision(const ImageD& image);

/// Camera-frame normal component in [-1, 1] to an 8-bit value: floor(127.5 (n + 1)),
/// clamped to [0, 255]. Zero vectors (background) map to 0.
std::uint8_t normal_component_to_byte(double n);
/// 8-bit RGB visualisation of a 3-channel normal map; uncovered pixels are black.
Image8 normals_to_rgb(const ImageD& normals);

}  // namespace footfit
