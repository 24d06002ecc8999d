#include "drivesim/common/image.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <string>

#include "drivesim/common/error.hpp"

namespace drivesim {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingAsset(path.string());
  return in;
}

template <int C>
void write_pfm_impl(const std::filesystem::path& path, const Image<C>& img) {
  static_assert(std::endian::native == std::endian::little);
  auto out = open_out(path);
  out << (C == 3 ? "PF" : "Pf") << '\n' << img.width << ' ' << img.height << "\n-1.0\n";
  for (int y = img.height - 1; y >= 0; --y)
    out.write(reinterpret_cast<const char*>(img.at(0, y)), std::streamsize(sizeof(float) * img.width * C));
  if (!out) throw IoError("short write to " + path.string());
}

template <int C>
Image<C> read_pfm_impl(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0;
  in >> magic >> w >> h >> scale;
  in.get();
  if (magic != (C == 3 ? "PF" : "Pf") || w <= 0 || h <= 0 || scale >= 0)
    throw IoError(path.string() + ": unsupported PFM header");
  Image<C> img(w, h);
  for (int y = h - 1; y >= 0; --y)
    if (!in.read(reinterpret_cast<char*>(img.at(0, y)), std::streamsize(sizeof(float) * w * C)))
      throw IoError(path.string() + ": truncated PFM data");
  return img;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  auto out = open_out(path);
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<unsigned char> bytes(img.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(img.data[i], 0.0f, 1.0f) * 255.0f));
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

RgbImage read_ppm(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  in.get();
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) throw IoError(path.string() + ": unsupported PPM header");
  std::vector<unsigned char> bytes(std::size_t(w) * h * 3);
  if (!in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size())))
    throw IoError(path.string() + ": truncated PPM data");
  RgbImage img(w, h);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = float(bytes[i]) / 255.0f;
  return img;
}

void write_pfm(const std::filesystem::path& path, const RgbImage& img) { write_pfm_impl(path, img); }
void write_pfm(const std::filesystem::path& path, const GrayImage& img) { write_pfm_impl(path, img); }
RgbImage read_pfm_rgb(const std::filesystem::path& path) { return read_pfm_impl<3>(path); }
GrayImage read_pfm_gray(const std::filesystem::path& path) { return read_pfm_impl<1>(path); }

}  // namespace drivesim
