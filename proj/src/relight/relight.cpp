#include "drivesim/relight/relight.hpp"

#include <algorithm>
#include <cmath>

#include "drivesim/common/error.hpp"
#include "drivesim/common/rng.hpp"

namespace drivesim::relight {

namespace {

// Orthonormal basis with n as the third axis (Duff et al. 2017).
void basis(const Vec3& n, Vec3& t, Vec3& b) {
  double sign = std::copysign(1.0, n.z());
  double a = -1.0 / (sign + n.z());
  double c = n.x() * n.y() * a;
  t = Vec3(1.0 + sign * n.x() * n.x() * a, sign * c, -sign * n.x());
  b = Vec3(c, sign + n.y() * n.y() * a, -n.y());
}

constexpr double kSurfaceOffset = 1e-4;

}  // namespace

LightMaps LightMaps::uniform(const Vec3& radiance, int rows, int cols) {
  LightMaps m;
  m.incident = RgbImage(cols, rows);
  m.shadow = GrayImage(cols, rows, float(luminance(radiance)));
  for (int y = 0; y < rows; ++y)
    for (int x = 0; x < cols; ++x)
      for (int c = 0; c < 3; ++c) m.incident(x, y, c) = float(radiance[c]);
  return m;
}

void LightMaps::validate() const {
  if (incident.height < kMinRows || incident.width < kMinCols)
    throw ValidationError("light map resolution below 8x16");
  if (!shadow.same_shape(incident)) throw ValidationError("shadow light map shape differs from incident map");
  for (float v : incident.data)
    if (!std::isfinite(v) || v < 0) throw ValidationError("light map entry negative or non-finite");
  for (float v : shadow.data)
    if (!std::isfinite(v) || v < 0) throw ValidationError("shadow light map entry negative or non-finite");
}

std::pair<int, int> LightMaps::texel(const Vec3& dir, int rows, int cols) {
  Vec3 d = dir.normalized();
  double theta = std::acos(std::clamp(d.z(), -1.0, 1.0));
  double phi = std::atan2(d.y(), d.x());
  if (phi < 0) phi += 2 * kPi;
  int r = std::min(rows - 1, int(theta / kPi * rows));
  int c = std::min(cols - 1, int(phi / (2 * kPi) * cols));
  return {r, c};
}

Vec3 LightMaps::texel_direction(int row, int col, int rows, int cols) {
  double theta = (row + 0.5) * kPi / rows;
  double phi = (col + 0.5) * 2 * kPi / cols;
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

Vec3 LightMaps::radiance(const Vec3& dir) const {
  auto [r, c] = texel(dir, incident.height, incident.width);
  const float* p = incident.at(c, r);
  return {p[0], p[1], p[2]};
}

double LightMaps::shadow_radiance(const Vec3& dir) const {
  auto [r, c] = texel(dir, shadow.height, shadow.width);
  return shadow(c, r);
}

void save_lightmaps(const std::filesystem::path& path, const LightMaps& maps) {
  write_pfm(path, maps.incident);
  auto sp = path;
  sp.replace_filename(path.stem().string() + "_shadow.pfm");
  write_pfm(sp, maps.shadow);
}

LightMaps load_lightmaps(const std::filesystem::path& path) {
  LightMaps m;
  m.incident = read_pfm_rgb(path);
  auto sp = path;
  sp.replace_filename(path.stem().string() + "_shadow.pfm");
  if (std::filesystem::exists(sp)) {
    m.shadow = read_pfm_gray(sp);
  } else {
    m.shadow = GrayImage(m.incident.width, m.incident.height);
    for (int y = 0; y < m.incident.height; ++y)
      for (int x = 0; x < m.incident.width; ++x) m.shadow(x, y) = float(luminance(pixel_rgb(m.incident, x, y)));
  }
  m.validate();
  return m;
}

void Material::validate() const {
  if ((albedo.array() < 0).any() || (albedo.array() > 1).any()) throw ValidationError("albedo outside [0,1]");
  if (!(roughness > 0 && roughness <= 1)) throw ValidationError("roughness outside (0,1]");
  if (!(metallic >= 0 && metallic <= 1)) throw ValidationError("metallic outside [0,1]");
  if (!(specular >= 0 && specular <= 1)) throw ValidationError("specular outside [0,1]");
}

Vec3 brdf(const Material& mat, const Vec3& n, const Vec3& wi, const Vec3& wo) {
  Vec3 diffuse = (1.0 - mat.metallic) * mat.albedo / kPi;
  double ni = n.dot(wi), no = n.dot(wo);
  if (ni <= 0 || no <= 0) return diffuse;

  Vec3 f0 = (1.0 - mat.metallic) * Vec3::Constant(0.08 * mat.specular) + mat.metallic * mat.albedo;
  double f90 = (1.0 - mat.metallic) * mat.specular + mat.metallic;
  if (f0.isZero() && f90 == 0.0) return diffuse;

  Vec3 h = (wi + wo).normalized();
  double nh = std::max(0.0, n.dot(h)), vh = std::max(0.0, wo.dot(h));
  double a = mat.roughness * mat.roughness, a2 = a * a;
  double denom = nh * nh * (a2 - 1.0) + 1.0;
  double d = a2 / (kPi * denom * denom);
  auto g1 = [a2](double c) { return 2.0 * c / (c + std::sqrt(a2 + (1.0 - a2) * c * c)); };
  double g = g1(ni) * g1(no);
  double fw = std::pow(1.0 - vh, 5.0);
  Vec3 f = f0 + (Vec3::Constant(f90) - f0) * fw;
  return diffuse + f * (d * g / (4.0 * ni * no));
}

Vec3 cosine_sample(const Vec3& n, double u1, double u2) {
  Vec3 t, b;
  basis(n, t, b);
  double r = std::sqrt(u1), phi = 2.0 * kPi * u2;
  double z = std::sqrt(std::max(0.0, 1.0 - u1));
  return (r * std::cos(phi)) * t + (r * std::sin(phi)) * b + z * n;
}

Vec3 shade_foreground(const Vec3& x, const Vec3& n, const Vec3& view_dir, const Material& mat, const LightMaps& light,
                      int samples, const ShadeContext& ctx) {
  CounterRng rng(ctx.seed, ctx.stream);
  Vec3 sum = Vec3::Zero();
  const Vec3 origin = x + kSurfaceOffset * n;
  for (int s = 0; s < samples; ++s) {
    double u1 = rng.uniform(), u2 = rng.uniform();
    Vec3 wi = cosine_sample(n, u1, u2);
    if (ctx.occluder && ctx.occluder->occluded(origin, wi)) continue;
    // f * L * cos / pdf with pdf = cos / pi.
    sum += (brdf(mat, n, wi, view_dir).cwiseProduct(light.radiance(wi))) * kPi;
  }
  return sum / double(std::max(samples, 1));
}

ShadowResult shadow_intensity(const Vec3& x_prime, const Vec3& n_prime, const geom::SceneGeometry* occluder,
                              const LightMaps& light, int samples, std::uint64_t seed, std::uint64_t stream) {
  CounterRng rng(seed, stream);
  const Vec3 origin = x_prime + kSurfaceOffset * n_prime;
  // Cosine-weighted sampling: the cos/pdf factor is the same constant in both sums.
  double lit = 0.0, total = 0.0;
  for (int s = 0; s < samples; ++s) {
    double u1 = rng.uniform(), u2 = rng.uniform();
    Vec3 w = cosine_sample(n_prime, u1, u2);
    double ls = light.shadow_radiance(w);
    total += ls;
    lit += (occluder && occluder->occluded(origin, w)) ? 0.0 : ls;
  }
  if (total < 1e-12) return {1.0, true};
  return {lit / total, false};
}

RgbImage composite(const RgbImage& bg, const RgbImage& fg, const GrayImage& mask, const GrayImage& shadow) {
  if (!bg.same_shape(fg) || !bg.same_shape(mask) || !bg.same_shape(shadow))
    throw ShapeMismatch("composite inputs differ in shape");
  RgbImage out(bg.width, bg.height);
  const std::size_t n = std::size_t(bg.width) * bg.height;
  for (std::size_t i = 0; i < n; ++i) {
    float m = mask.data[i], s = shadow.data[i];
    for (int c = 0; c < 3; ++c) out.data[3 * i + c] = bg.data[3 * i + c] * s * (1.0f - m) + fg.data[3 * i + c] * m;
  }
  return out;
}

LightMaps fit_lightmaps(const std::vector<RgbImage>& images, const std::optional<Vec3>& sun_direction,
                        const FitOptions& opt) {
  if (images.empty()) throw ValidationError("fit_lightmaps needs at least one image");
  Vec3 sky = Vec3::Zero(), ground = Vec3::Zero();
  double n_sky = 0, n_ground = 0;
  for (const auto& img : images) {
    for (int y = 0; y < img.height; ++y) {
      // Rows above the middle are sky; an odd middle row counts as neither.
      bool top = 2 * y + 1 < img.height, bottom = 2 * y + 1 > img.height;
      if (!top && !bottom) continue;
      for (int x = 0; x < img.width; ++x) {
        Vec3 p = pixel_rgb(img, x, y);
        if (top) {
          sky += p;
          n_sky += 1;
        } else {
          ground += p;
          n_ground += 1;
        }
      }
    }
  }
  if (n_sky > 0) sky /= n_sky;
  if (n_ground > 0) ground /= n_ground;
  if (n_sky == 0) sky = ground;
  if (n_ground == 0) ground = sky;

  const int rows = std::max(opt.rows, LightMaps::kMinRows), cols = std::max(opt.cols, LightMaps::kMinCols);
  LightMaps m;
  m.incident = RgbImage(cols, rows);
  m.shadow = GrayImage(cols, rows);
  std::optional<Vec3> sun;
  if (sun_direction && sun_direction->norm() > 0) {
    auto [r, c] = LightMaps::texel(*sun_direction, rows, cols);
    sun = LightMaps::texel_direction(r, c, rows, cols);
  }
  const double peak = opt.sun_strength * std::max({luminance(sky), luminance(ground), 1e-3});
  for (int r = 0; r < rows; ++r) {
    const Vec3 base = (r + 0.5) * kPi / rows < kPi / 2 ? sky : ground;
    for (int c = 0; c < cols; ++c) {
      Vec3 v = base;
      if (sun) {
        double g = std::acos(std::clamp(LightMaps::texel_direction(r, c, rows, cols).dot(*sun), -1.0, 1.0));
        v += Vec3::Constant(peak * std::exp(-0.5 * (g * g) / (opt.sun_width * opt.sun_width)));
      }
      for (int k = 0; k < 3; ++k) m.incident(c, r, k) = float(v[k]);
      m.shadow(c, r) = float(luminance(v));
    }
  }
  return m;
}

}  // namespace drivesim::relight
