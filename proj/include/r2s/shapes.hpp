#pragma once

#include "r2s/bvh.hpp"
#include "r2s/collision.hpp"
#include "r2s/mesh.hpp"

#include <map>
#include <string>

namespace r2s {

// Parametric tabletop objects. Every shape lives in a local frame with the
// up axis along +z and its lowest point on z = 0, centred on the z axis.
enum class ShapeKind { Box, Can, Sphere, Bottle, Bowl, Mug };

inline std::string_view to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::Box: return "box";
    case ShapeKind::Can: return "can";
    case ShapeKind::Sphere: return "sphere";
    case ShapeKind::Bottle: return "bottle";
    case ShapeKind::Bowl: return "bowl";
    case ShapeKind::Mug: return "mug";
  }
  return "unknown";
}

inline ShapeKind shape_kind_from_string(std::string_view s) {
  for (ShapeKind k : {ShapeKind::Box, ShapeKind::Can, ShapeKind::Sphere, ShapeKind::Bottle, ShapeKind::Bowl,
                      ShapeKind::Mug})
    if (to_string(k) == s) return k;
  throw Error(ErrorKind::InvalidArgument, "unknown shape kind '" + std::string(s) + "'");
}

struct ShapeDescriptor {
  ShapeKind kind = ShapeKind::Box;
  std::map<std::string, double> params;

  double param(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw Error(ErrorKind::InvalidArgument, "shape parameter '" + name + "' missing");
    return it->second;
  }

  static ShapeDescriptor box(double sx, double sy, double sz) { return {ShapeKind::Box, {{"sx", sx}, {"sy", sy}, {"sz", sz}}}; }
  static ShapeDescriptor can(double radius, double height) {
    return {ShapeKind::Can, {{"radius", radius}, {"height", height}}};
  }
  static ShapeDescriptor sphere(double radius) { return {ShapeKind::Sphere, {{"radius", radius}}}; }
  static ShapeDescriptor bottle(double radius, double body_height, double neck_radius, double neck_height) {
    return {ShapeKind::Bottle,
            {{"radius", radius}, {"body_height", body_height}, {"neck_radius", neck_radius}, {"neck_height", neck_height}}};
  }
  static ShapeDescriptor bowl(double radius, double thickness, double base_cut) {
    return {ShapeKind::Bowl, {{"radius", radius}, {"thickness", thickness}, {"base_cut", base_cut}}};
  }
  static ShapeDescriptor mug(double radius, double height, double handle_radius, double handle_thickness) {
    return {ShapeKind::Mug,
            {{"radius", radius}, {"height", height}, {"handle_radius", handle_radius}, {"handle_thickness", handle_thickness}}};
  }

  friend bool operator==(const ShapeDescriptor&, const ShapeDescriptor&) = default;
};

namespace detail {

// Closed surface of revolution about +z. The profile runs in the (r, z)
// half-plane and must start and end on the axis (r = 0).
inline TriangleMesh revolve(const std::vector<std::array<double, 2>>& profile, int segments) {
  TriangleMesh m;
  const size_t n = profile.size();
  std::vector<uint32_t> ring_start(n);
  for (size_t i = 0; i < n; ++i) {
    ring_start[i] = static_cast<uint32_t>(m.vertices.size());
    const double r = profile[i][0], z = profile[i][1];
    if (r <= 1e-12) {
      m.vertices.emplace_back(0.0, 0.0, z);
      continue;
    }
    for (int s = 0; s < segments; ++s) {
      const double a = 2.0 * kPi * s / segments;
      m.vertices.emplace_back(r * std::cos(a), r * std::sin(a), z);
    }
  }
  auto at = [&](size_t i, int s) -> uint32_t {
    if (profile[i][0] <= 1e-12) return ring_start[i];
    return ring_start[i] + static_cast<uint32_t>(((s % segments) + segments) % segments);
  };
  for (size_t i = 0; i + 1 < n; ++i) {
    const bool pole0 = profile[i][0] <= 1e-12, pole1 = profile[i + 1][0] <= 1e-12;
    for (int s = 0; s < segments; ++s) {
      const uint32_t a = at(i, s), b = at(i, s + 1), c = at(i + 1, s), d = at(i + 1, s + 1);
      if (!pole0) m.triangles.push_back({a, b, d});
      if (!pole1) m.triangles.push_back({a, d, c});
    }
  }
  weld_and_clean(m, 1e-12, 1e-16);
  if (signed_volume(m) < 0) flip_orientation(m);
  return m;
}

inline TriangleMesh box_mesh(const Vec3& lo, const Vec3& hi) {
  Obb b = make_obb(Mat3::Identity(), Vec3::Zero(), lo, hi);
  TriangleMesh m = b.mesh();
  if (signed_volume(m) < 0) flip_orientation(m);
  return m;
}

// Tube of radius `tube` swept along an arc of radius `major` in the xz plane
// around `center`, for angles [a0, a1], closed with flat caps.
inline TriangleMesh arc_tube(const Vec3& center, double major, double tube, double a0, double a1, int arc_steps,
                             int tube_steps) {
  TriangleMesh m;
  for (int i = 0; i <= arc_steps; ++i) {
    const double phi = a0 + (a1 - a0) * i / arc_steps;
    const Vec3 radial(std::cos(phi), 0.0, std::sin(phi));
    const Vec3 spine = center + major * radial;
    for (int j = 0; j < tube_steps; ++j) {
      const double th = 2.0 * kPi * j / tube_steps;
      m.vertices.push_back(spine + tube * (std::cos(th) * radial + std::sin(th) * Vec3::UnitY()));
    }
  }
  auto at = [&](int i, int j) { return static_cast<uint32_t>(i * tube_steps + (j % tube_steps)); };
  for (int i = 0; i < arc_steps; ++i)
    for (int j = 0; j < tube_steps; ++j) {
      m.triangles.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
      m.triangles.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
    }
  for (int end = 0; end < 2; ++end) {
    const int i = end == 0 ? 0 : arc_steps;
    const double phi = end == 0 ? a0 : a1;
    const auto c = static_cast<uint32_t>(m.vertices.size());
    m.vertices.push_back(center + major * Vec3(std::cos(phi), 0.0, std::sin(phi)));
    for (int j = 0; j < tube_steps; ++j) {
      if (end == 0)
        m.triangles.push_back({c, at(i, j + 1), at(i, j)});
      else
        m.triangles.push_back({c, at(i, j), at(i, j + 1)});
    }
  }
  if (signed_volume(m) < 0) flip_orientation(m);
  return m;
}

inline std::vector<std::array<double, 2>> arc_profile(double cr, double cz, double radius, double a0, double a1, int steps) {
  std::vector<std::array<double, 2>> out;
  for (int i = 0; i <= steps; ++i) {
    const double a = a0 + (a1 - a0) * i / steps;
    out.push_back({cr + radius * std::cos(a), cz + radius * std::sin(a)});
  }
  return out;
}

}  // namespace detail

// Closed, outward-oriented parts whose union is the shape.
inline std::vector<TriangleMesh> shape_parts(const ShapeDescriptor& s, int segments = 64) {
  std::vector<TriangleMesh> parts;
  for (const auto& [name, value] : s.params)
    if (!(value > 0.0)) throw Error(ErrorKind::InvalidArgument, "shape parameter '" + name + "' must be positive");
  switch (s.kind) {
    case ShapeKind::Box: {
      const Vec3 h(0.5 * s.param("sx"), 0.5 * s.param("sy"), s.param("sz"));
      parts.push_back(detail::box_mesh(Vec3(-h.x(), -h.y(), 0.0), h));
      break;
    }
    case ShapeKind::Can: {
      const double r = s.param("radius"), h = s.param("height");
      parts.push_back(detail::revolve({{0, 0}, {r, 0}, {r, h}, {0, h}}, segments));
      break;
    }
    case ShapeKind::Sphere: {
      const double r = s.param("radius");
      parts.push_back(detail::revolve(detail::arc_profile(0, r, r, -kPi / 2, kPi / 2, segments / 2), segments));
      break;
    }
    case ShapeKind::Bottle: {
      const double r = s.param("radius"), hb = s.param("body_height");
      const double rn = s.param("neck_radius"), hn = s.param("neck_height");
      require(rn < r, "bottle neck must be narrower than the body");
      // Body, rounded shoulder (quarter ellipse), neck.
      std::vector<std::array<double, 2>> prof = {{0, 0}, {r, 0}, {r, hb}};
      const double sh = r - rn;
      const int steps = 12;
      for (int i = 1; i <= steps; ++i) {
        const double a = 0.5 * kPi * i / steps;
        prof.push_back({rn + sh * std::cos(a), hb + sh * std::sin(a)});
      }
      prof.push_back({rn, hb + sh + hn});
      prof.push_back({0, hb + sh + hn});
      parts.push_back(detail::revolve(prof, segments));
      break;
    }
    case ShapeKind::Bowl: {
      // Spherical shell cut by a flat base; opening faces up.
      const double R = s.param("radius"), t = s.param("thickness"), cut = s.param("base_cut");
      require(t < 0.5 * R && cut < 0.5, "bowl thickness/base_cut out of range");
      const double zc = R;                          // sphere centre height before the base shift
      const double zb = cut * R;                    // base plane
      const double rb = std::sqrt(R * R - (zc - zb) * (zc - zb));
      const double ri = R - t;
      const double zbi = zb + t;                    // inner floor
      const double rbi = std::sqrt(std::max(0.0, ri * ri - (zc - zbi) * (zc - zbi)));
      std::vector<std::array<double, 2>> prof = {{0, zb}, {rb, zb}};
      const double ao = std::asin((zb - zc) / R);
      const int steps = 24;
      for (int i = 1; i <= steps; ++i) {
        const double a = ao + (0.0 - ao) * i / steps;
        prof.push_back({R * std::cos(a), zc + R * std::sin(a)});
      }
      const double ai = std::asin((zbi - zc) / ri);
      for (int i = 0; i <= steps; ++i) {
        const double a = 0.0 + (ai - 0.0) * i / steps;
        prof.push_back({ri * std::cos(a), zc + ri * std::sin(a)});
      }
      prof.back() = {rbi, zbi};
      prof.push_back({0, zbi});
      TriangleMesh m = detail::revolve(prof, segments);
      for (Vec3& v : m.vertices) v.z() -= zb;
      parts.push_back(std::move(m));
      break;
    }
    case ShapeKind::Mug: {
      const double r = s.param("radius"), h = s.param("height");
      const double hr = s.param("handle_radius"), ht = s.param("handle_thickness");
      require(hr < 0.5 * h && ht < hr, "mug handle out of range");
      parts.push_back(detail::revolve({{0, 0}, {r, 0}, {r, h}, {0, h}}, segments));
      // Half torus on +x, ends sunk into the body wall.
      const double over = std::asin(std::min(1.0, ht / hr));
      parts.push_back(detail::arc_tube(Vec3(r, 0.0, 0.5 * h), hr, ht, -0.5 * kPi - over, 0.5 * kPi + over,
                                       std::max(8, segments / 2), std::max(8, segments / 4)));
      break;
    }
  }
  return parts;
}

inline TriangleMesh shape_mesh(const ShapeDescriptor& s, int segments = 64) {
  TriangleMesh out;
  for (const auto& p : shape_parts(s, segments)) append(out, p);
  return out;
}

// Conservative convex pieces for placement tests: each part is replaced by a
// circumscribing vertical prism (or its own box), so an empty SAT overlap
// between pieces implies the true shapes are disjoint.
inline std::vector<std::vector<Vec3>> shape_collision_pieces(const ShapeDescriptor& s) {
  constexpr int kSides = 16;
  const double circ = 1.0 / std::cos(kPi / kSides);
  auto prism = [&](double r, double z0, double z1, double cx = 0.0) {
    std::vector<Vec3> v;
    for (int i = 0; i < kSides; ++i) {
      const double a = 2.0 * kPi * i / kSides;
      for (double z : {z0, z1}) v.emplace_back(cx + r * circ * std::cos(a), r * circ * std::sin(a), z);
    }
    return v;
  };
  std::vector<std::vector<Vec3>> pieces;
  switch (s.kind) {
    case ShapeKind::Box: {
      const double hx = 0.5 * s.param("sx"), hy = 0.5 * s.param("sy"), h = s.param("sz");
      std::vector<Vec3> v;
      for (int i = 0; i < 8; ++i) v.emplace_back((i & 1) ? hx : -hx, (i & 2) ? hy : -hy, (i & 4) ? h : 0.0);
      pieces.push_back(v);
      break;
    }
    case ShapeKind::Can: pieces.push_back(prism(s.param("radius"), 0, s.param("height"))); break;
    case ShapeKind::Sphere: pieces.push_back(prism(s.param("radius"), 0, 2 * s.param("radius"))); break;
    case ShapeKind::Bottle: {
      const double r = s.param("radius"), hb = s.param("body_height"), rn = s.param("neck_radius");
      const double top = hb + (r - rn) + s.param("neck_height");
      pieces.push_back(prism(r, 0, hb + (r - rn)));
      pieces.push_back(prism(rn, hb, top));
      break;
    }
    case ShapeKind::Bowl: {
      const double R = s.param("radius"), cut = s.param("base_cut");
      pieces.push_back(prism(R, 0, R * (1.0 - cut)));
      break;
    }
    case ShapeKind::Mug: {
      const double r = s.param("radius"), h = s.param("height");
      const double hr = s.param("handle_radius"), ht = s.param("handle_thickness");
      pieces.push_back(prism(r, 0, h));
      std::vector<Vec3> v;
      for (int i = 0; i < 8; ++i)
        v.emplace_back((i & 1) ? r + hr + ht : r - ht, (i & 2) ? ht : -ht, (i & 4) ? 0.5 * h + hr + ht : 0.5 * h - hr - ht);
      pieces.push_back(v);
      break;
    }
  }
  return pieces;
}

// Radius of the smallest z-axis cylinder containing the shape footprint.
inline double footprint_radius(const ShapeDescriptor& s) {
  double r = 0.0;
  for (const auto& piece : shape_collision_pieces(s))
    for (const Vec3& v : piece) r = std::max(r, std::hypot(v.x(), v.y()));
  return r;
}

// ---------------------------------------------------------------------------

struct SceneObject {
  ShapeDescriptor shape;
  Mat4 pose = Mat4::Identity();  // local shape frame to world
  int instance_id = 1;
};

struct GroundTruthScene {
  std::vector<SceneObject> objects;
  double table_height = 0.0;
};

// Ground-truth geometry of one placed object, ready for ray casting.
struct PosedShape {
  int instance_id = 0;
  std::vector<TriangleMesh> parts;  // world frame
  std::vector<TriangleBvh> part_bvh;
  TriangleBvh bvh;                  // union of parts
  Aabb box;

  bool inside(const Vec3& p) const {
    for (const auto& b : part_bvh)
      if (b.contains(p)) return true;
    return false;
  }

  // Area-weighted samples of the visible union surface: points of a part
  // that fall inside another part are discarded.
  std::vector<Vec3> sample_surface(size_t count, uint64_t seed) const {
    std::vector<double> areas;
    double total = 0.0;
    for (const auto& p : parts) {
      areas.push_back(surface_area(p));
      total += areas.back();
    }
    std::vector<Vec3> out;
    Rng rng = make_rng(seed, "truth-sample");
    size_t guard = 0;
    while (out.size() < count && guard++ < count * 20) {
      double r = uniform01(rng) * total;
      size_t pi = 0;
      while (pi + 1 < parts.size() && r > areas[pi]) r -= areas[pi++];
      auto s = r2s::sample_surface(parts[pi], 1, rng);
      if (s.empty()) continue;
      bool hidden = false;
      for (size_t q = 0; q < parts.size() && !hidden; ++q)
        if (q != pi && part_bvh[q].contains(s.front().point)) hidden = true;
      if (!hidden) out.push_back(s.front().point);
    }
    return out;
  }

  // Sum of part volumes; overlaps between parts are small by construction.
  double volume() const {
    double v = 0.0;
    for (const auto& p : parts) v += signed_volume(p);
    return v;
  }
};

inline PosedShape pose_shape(const SceneObject& obj, int segments = 64) {
  PosedShape ps;
  ps.instance_id = obj.instance_id;
  TriangleMesh all;
  for (const auto& part : shape_parts(obj.shape, segments)) {
    TriangleMesh w = transformed(part, obj.pose, Frame::World);
    append(all, w);
    ps.part_bvh.emplace_back(w);
    ps.parts.push_back(std::move(w));
  }
  all.frame = Frame::World;
  ps.box = bounds(all);
  ps.bvh = TriangleBvh(std::move(all));
  return ps;
}

inline std::vector<PosedShape> pose_scene(const GroundTruthScene& scene, int segments = 64) {
  std::vector<PosedShape> out;
  out.reserve(scene.objects.size());
  for (const auto& o : scene.objects) out.push_back(pose_shape(o, segments));
  return out;
}

}  // namespace r2s
