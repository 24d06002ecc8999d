#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "drivesim/common/math.hpp"

namespace drivesim {

/// Row-major float image with C interleaved channels; row 0 is the top.
template <int C>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, float fill = 0.0f) : width(w), height(h), data(std::size_t(w) * h * C, fill) {}

  float* at(int x, int y) { return data.data() + (std::size_t(y) * width + x) * C; }
  const float* at(int x, int y) const { return data.data() + (std::size_t(y) * width + x) * C; }
  float& operator()(int x, int y, int c = 0) { return at(x, y)[c]; }
  float operator()(int x, int y, int c = 0) const { return at(x, y)[c]; }
  bool same_shape(int w, int h) const { return width == w && height == h; }
  template <int D>
  bool same_shape(const Image<D>& o) const { return width == o.width && height == o.height; }
  bool operator==(const Image&) const = default;
};

using RgbImage = Image<3>;
using GrayImage = Image<1>;

inline Vec3 pixel_rgb(const RgbImage& img, int x, int y) {
  const float* p = img.at(x, y);
  return {p[0], p[1], p[2]};
}

/// Binary PPM (P6), values clamped to [0,1] and quantized to 8 bits.
void write_ppm(const std::filesystem::path& path, const RgbImage& img);
RgbImage read_ppm(const std::filesystem::path& path);
/// PFM, little-endian, bottom-to-top rows as the format prescribes.
void write_pfm(const std::filesystem::path& path, const RgbImage& img);
void write_pfm(const std::filesystem::path& path, const GrayImage& img);
RgbImage read_pfm_rgb(const std::filesystem::path& path);
GrayImage read_pfm_gray(const std::filesystem::path& path);

}  // namespace drivesim
