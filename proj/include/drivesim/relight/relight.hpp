#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "drivesim/common/image.hpp"
#include "drivesim/geom/bvh.hpp"

namespace drivesim::relight {

/// Equirectangular environment maps. Row r spans polar angle
/// [r, r+1] * pi / rows measured from +z; column c spans azimuth
/// [c, c+1] * 2 pi / cols measured from +x towards +y.
struct LightMaps {
  RgbImage incident;  // L_i, radiance per steradian
  GrayImage shadow;   // L_s

  static constexpr int kMinRows = 8;
  static constexpr int kMinCols = 16;

  static LightMaps uniform(const Vec3& radiance, int rows = kMinRows, int cols = kMinCols);
  void validate() const;

  Vec3 radiance(const Vec3& dir) const;
  double shadow_radiance(const Vec3& dir) const;

  /// Texel containing `dir` and the unit direction through that texel's center.
  static std::pair<int, int> texel(const Vec3& dir, int rows, int cols);
  static Vec3 texel_direction(int row, int col, int rows, int cols);
};

/// incident is written to `<stem>.pfm` (RGB); shadow to `<stem>_shadow.pfm`.
/// Loading without a shadow file derives it as the luminance of incident.
void save_lightmaps(const std::filesystem::path& path, const LightMaps& maps);
LightMaps load_lightmaps(const std::filesystem::path& path);

struct Material {
  Vec3 albedo = Vec3::Constant(0.5);
  double roughness = 0.5;  // (0, 1]
  double metallic = 0.0;   // [0, 1]
  double specular = 0.5;   // [0, 1]; 0 with metallic 0 is pure Lambertian

  void validate() const;
  bool operator==(const Material&) const = default;
};

/// Diffuse + GGX specular. `wi`, `wo` and `n` are unit; both on the normal side.
Vec3 brdf(const Material& mat, const Vec3& n, const Vec3& wi, const Vec3& wo);

/// Cosine-weighted direction about `n` from two uniforms in [0,1).
Vec3 cosine_sample(const Vec3& n, double u1, double u2);

struct ShadeContext {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;  // e.g. pixel index
  /// Self-visibility geometry in world coordinates; null skips the test.
  const geom::SceneGeometry* occluder = nullptr;
};

/// Monte Carlo estimate of the reflected radiance at `x` towards `view_dir`
/// (unit, pointing from x to the viewer).
Vec3 shade_foreground(const Vec3& x, const Vec3& n, const Vec3& view_dir, const Material& mat, const LightMaps& light,
                      int samples, const ShadeContext& ctx);

struct ShadowResult {
  double value = 1.0;
  bool degenerate = false;  // full-hemisphere integral below 1e-12; value forced to 1
};

/// Fraction of L_s-weighted hemisphere illumination at ground point
/// `x_prime` left unoccluded by `occluder`. Numerator and denominator share
/// one sample set, so the value never exceeds 1.
ShadowResult shadow_intensity(const Vec3& x_prime, const Vec3& n_prime, const geom::SceneGeometry* occluder,
                              const LightMaps& light, int samples, std::uint64_t seed, std::uint64_t stream = 0);

/// C = C_bg * I * (1 - M) + C_fg * M per pixel, in float.
RgbImage composite(const RgbImage& bg, const RgbImage& fg, const GrayImage& mask, const GrayImage& shadow);

struct FitOptions {
  int rows = 16;
  int cols = 32;
  double sun_strength = 20.0;  // peak multiple of the sky luminance
  double sun_width = deg2rad(6.0);
};

/// Deterministic environment estimate from background images: sky color from
/// upper halves, ground bounce from lower halves, optional sun lobe.
LightMaps fit_lightmaps(const std::vector<RgbImage>& images, const std::optional<Vec3>& sun_direction,
                        const FitOptions& options = {});

}  // namespace drivesim::relight
