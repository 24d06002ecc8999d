#include "drivesim/geom/mesh.hpp"

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "drivesim/common/error.hpp"

namespace drivesim::geom {

void TriangleMesh::validate() const {
  if (faces.empty()) throw ValidationError("mesh has no faces");
  for (const auto& f : faces)
    for (auto i : f)
      if (i >= vertices.size()) throw ValidationError("mesh face index out of range");
  if (normals.size() != vertices.size()) throw ValidationError("mesh needs one normal per vertex");
  for (const auto& n : normals)
    if (std::abs(n.norm() - 1.0) > 1e-6) throw ValidationError("mesh normal is not unit length");
  if (albedo.size() != 1 && albedo.size() != vertices.size())
    throw ValidationError("mesh albedo must be uniform or per vertex");
  for (const auto& a : albedo)
    if ((a.array() < 0.0).any() || (a.array() > 1.0).any()) throw ValidationError("mesh albedo outside [0,1]");
  for (const auto& v : vertices)
    if (!v.allFinite()) throw ValidationError("mesh vertex is not finite");
}

void TriangleMesh::compute_normals() {
  normals.assign(vertices.size(), Vec3::Zero());
  for (const auto& f : faces) {
    const Vec3 n = (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]);
    for (auto i : f) normals[i] += n;
  }
  for (auto& n : normals) {
    const double len = n.norm();
    n = len > 0.0 ? Vec3(n / len) : Vec3::UnitZ();
  }
}

Vec3 TriangleMesh::albedo_at(std::size_t face, double u, double v) const {
  if (albedo.size() == 1) return albedo.front();
  const auto& f = faces[face];
  return (1.0 - u - v) * albedo[f[0]] + u * albedo[f[1]] + v * albedo[f[2]];
}

Vec3 TriangleMesh::normal_at(std::size_t face, double u, double v) const {
  const auto& f = faces[face];
  Vec3 n = (1.0 - u - v) * normals[f[0]] + u * normals[f[1]] + v * normals[f[2]];
  const double len = n.norm();
  return len > 0.0 ? Vec3(n / len) : face_normal(face);
}

Vec3 TriangleMesh::face_normal(std::size_t face) const {
  const auto& f = faces[face];
  return (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]).normalized();
}

namespace {

void add_quad(TriangleMesh& m, const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  const auto base = static_cast<std::uint32_t>(m.vertices.size());
  const Vec3 n = (b - a).cross(c - a).normalized();
  for (const Vec3* p : {&a, &b, &c, &d}) {
    m.vertices.push_back(*p);
    m.normals.push_back(n);
  }
  m.faces.push_back({base, base + 1, base + 2});
  m.faces.push_back({base, base + 2, base + 3});
}

void add_box(TriangleMesh& m, const Vec3& lo, const Vec3& hi) {
  const double x0 = lo.x(), y0 = lo.y(), z0 = lo.z(), x1 = hi.x(), y1 = hi.y(), z1 = hi.z();
  add_quad(m, {x0, y0, z1}, {x1, y0, z1}, {x1, y1, z1}, {x0, y1, z1});  // top
  add_quad(m, {x0, y0, z0}, {x0, y1, z0}, {x1, y1, z0}, {x1, y0, z0});  // bottom
  add_quad(m, {x1, y0, z0}, {x1, y1, z0}, {x1, y1, z1}, {x1, y0, z1});  // +x
  add_quad(m, {x0, y0, z0}, {x0, y0, z1}, {x0, y1, z1}, {x0, y1, z0});  // -x
  add_quad(m, {x0, y1, z0}, {x0, y1, z1}, {x1, y1, z1}, {x1, y1, z0});  // +y
  add_quad(m, {x0, y0, z0}, {x1, y0, z0}, {x1, y0, z1}, {x0, y0, z1});  // -y
}

}  // namespace

TriangleMesh make_box(const Vec3& half_extents, const Vec3& albedo) {
  TriangleMesh m;
  add_box(m, Vec3(-half_extents.x(), -half_extents.y(), 0.0),
          Vec3(half_extents.x(), half_extents.y(), 2.0 * half_extents.z()));
  m.albedo = {albedo};
  return m;
}

TriangleMesh make_quad(double half_size, double height, const Vec3& albedo) {
  TriangleMesh m;
  add_quad(m, {-half_size, -half_size, height}, {half_size, -half_size, height}, {half_size, half_size, height},
           {-half_size, half_size, height});
  m.albedo = {albedo};
  return m;
}

TriangleMesh make_cylinder_wall(double radius, double z0, double z1, int segments, const Vec3& albedo) {
  TriangleMesh m;
  for (int i = 0; i < segments; ++i) {
    const double a0 = 2.0 * kPi * i / segments;
    const double a1 = 2.0 * kPi * (i + 1) / segments;
    const Vec3 p0(radius * std::cos(a0), radius * std::sin(a0), z0);
    const Vec3 p1(radius * std::cos(a1), radius * std::sin(a1), z0);
    // Winding chosen so the face normal points towards the axis.
    add_quad(m, p0, Vec3(p0.x(), p0.y(), z1), Vec3(p1.x(), p1.y(), z1), p1);
  }
  m.albedo = {albedo};
  return m;
}

TriangleMesh make_vehicle(double length, double width, double height, const Vec3& albedo) {
  TriangleMesh m;
  const double hl = 0.5 * length, hw = 0.5 * width;
  const double body_top = 0.55 * height;
  add_box(m, Vec3(-hl, -hw, 0.0), Vec3(hl, hw, body_top));
  add_box(m, Vec3(-0.6 * hl, -0.9 * hw, body_top), Vec3(0.35 * hl, 0.9 * hw, height));
  m.albedo = {albedo};
  return m;
}

TriangleMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingAsset(path.string());
  TriangleMesh m;
  std::vector<Vec3> colors;
  std::optional<Vec3> uniform;
  std::string line;
  std::size_t line_no = 0;
  const auto file = path.string();
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ss >> p.x() >> p.y() >> p.z())) throw ParseError(file, line_no, "v", "expected three coordinates");
      m.vertices.push_back(p);
      Vec3 c;
      if (ss >> c.x()) {
        if (!(ss >> c.y() >> c.z())) throw ParseError(file, line_no, "v", "vertex color needs three components");
        colors.push_back(c);
      }
    } else if (tag == "f") {
      long a, b, c;
      if (!(ss >> a >> b >> c)) throw ParseError(file, line_no, "f", "expected three vertex indices");
      if (a < 1 || b < 1 || c < 1) throw ParseError(file, line_no, "f", "indices are 1-based and positive");
      m.faces.push_back({static_cast<std::uint32_t>(a - 1), static_cast<std::uint32_t>(b - 1),
                         static_cast<std::uint32_t>(c - 1)});
    } else if (tag == "albedo") {
      Vec3 c;
      if (!(ss >> c.x() >> c.y() >> c.z())) throw ParseError(file, line_no, "albedo", "expected three components");
      uniform = c;
    } else {
      throw ParseError(file, line_no, tag, "unknown record");
    }
  }
  if (!colors.empty()) {
    if (colors.size() != m.vertices.size())
      throw ParseError(file, line_no, "v", "either all or no vertices carry a color");
    m.albedo = std::move(colors);
  } else {
    m.albedo = {uniform.value_or(Vec3(0.5, 0.5, 0.5))};
  }
  m.compute_normals();
  try {
    m.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(file + ": " + e.what());
  }
  return m;
}

void save_mesh(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  char buf[256];
  const bool per_vertex = mesh.albedo.size() == mesh.vertices.size() && mesh.albedo.size() > 1;
  if (!per_vertex && !mesh.albedo.empty()) {
    const auto& a = mesh.albedo.front();
    std::snprintf(buf, sizeof buf, "albedo %.17g %.17g %.17g\n", a.x(), a.y(), a.z());
    out << buf;
  }
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    if (per_vertex) {
      const auto& c = mesh.albedo[i];
      std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g %.17g %.17g %.17g\n", v.x(), v.y(), v.z(), c.x(), c.y(),
                    c.z());
    } else {
      std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    }
    out << buf;
  }
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

}  // namespace drivesim::geom
