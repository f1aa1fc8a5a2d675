#pragma once

#include "r2s/bvh.hpp"
#include "r2s/mesh.hpp"

#include <span>
#include <unordered_map>
#include <unordered_set>

namespace r2s {

// ---------------------------------------------------------------------------
// Convex hull (quickhull)

struct ConvexHull {
  std::vector<Vec3> vertices;
  std::vector<Triangle> faces;  // outward oriented; empty for flat inputs

  TriangleMesh mesh(Frame frame = Frame::World) const { return {vertices, faces, frame}; }
};

namespace detail {

struct HullFace {
  std::array<uint32_t, 3> v{};
  Vec3 normal = Vec3::Zero();
  double offset = 0.0;
  std::vector<uint32_t> outside;
  bool alive = true;

  double distance(const Vec3& p) const { return normal.dot(p) - offset; }
};

inline uint64_t directed(uint32_t a, uint32_t b) { return (static_cast<uint64_t>(a) << 32) | b; }

inline std::vector<Vec3> unique_points(std::span<const Vec3> pts) {
  std::vector<Vec3> u(pts.begin(), pts.end());
  std::sort(u.begin(), u.end(), [](const Vec3& a, const Vec3& b) {
    return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
  });
  u.erase(std::unique(u.begin(), u.end()), u.end());
  return u;
}

}  // namespace detail

inline ConvexHull convex_hull(std::span<const Vec3> input) {
  using detail::HullFace;
  ConvexHull hull;
  const std::vector<Vec3> pts = detail::unique_points(input);
  if (pts.size() < 4) {
    hull.vertices = pts;
    return hull;
  }
  const Aabb box = bounds_of(pts);
  const double eps = 1e-10 * std::max(1.0, box.extent().norm() + box.max.cwiseAbs().maxCoeff());

  // Initial simplex: extreme pair, farthest from their line, farthest from
  // that plane.
  std::array<uint32_t, 6> ext{};
  for (uint32_t i = 0; i < pts.size(); ++i)
    for (int a = 0; a < 3; ++a) {
      if (pts[i][a] < pts[ext[static_cast<size_t>(2 * a)]][a]) ext[static_cast<size_t>(2 * a)] = i;
      if (pts[i][a] > pts[ext[static_cast<size_t>(2 * a + 1)]][a]) ext[static_cast<size_t>(2 * a + 1)] = i;
    }
  uint32_t i0 = 0, i1 = 0;
  double best = -1.0;
  for (uint32_t a : ext)
    for (uint32_t b : ext) {
      const double d = (pts[a] - pts[b]).squaredNorm();
      if (d > best) {
        best = d;
        i0 = a;
        i1 = b;
      }
    }
  const Vec3 axis = (pts[i1] - pts[i0]).normalized();
  uint32_t i2 = i0;
  best = -1.0;
  for (uint32_t i = 0; i < pts.size(); ++i) {
    const Vec3 d = pts[i] - pts[i0];
    const double dist = (d - d.dot(axis) * axis).squaredNorm();
    if (dist > best) {
      best = dist;
      i2 = i;
    }
  }
  const Vec3 pn = (pts[i1] - pts[i0]).cross(pts[i2] - pts[i0]);
  uint32_t i3 = i0;
  best = -1.0;
  if (pn.norm() > eps) {
    const Vec3 n = pn.normalized();
    for (uint32_t i = 0; i < pts.size(); ++i) {
      const double dist = std::abs(n.dot(pts[i] - pts[i0]));
      if (dist > best) {
        best = dist;
        i3 = i;
      }
    }
  }
  if (pn.norm() <= eps || best <= eps) {
    // Flat or collinear: the point set is its own convex vertex set.
    hull.vertices = pts;
    return hull;
  }

  std::vector<HullFace> faces;
  std::unordered_map<uint64_t, uint32_t> edge_owner;
  const Vec3 inner = 0.25 * (pts[i0] + pts[i1] + pts[i2] + pts[i3]);

  auto make_face = [&](uint32_t a, uint32_t b, uint32_t c) {
    HullFace f;
    f.v = {a, b, c};
    Vec3 n = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
    n.normalize();
    f.normal = n;
    f.offset = n.dot(pts[a]);
    const auto idx = static_cast<uint32_t>(faces.size());
    for (int k = 0; k < 3; ++k) edge_owner[detail::directed(f.v[static_cast<size_t>(k)], f.v[static_cast<size_t>((k + 1) % 3)])] = idx;
    faces.push_back(std::move(f));
    return idx;
  };
  auto oriented = [&](uint32_t a, uint32_t b, uint32_t c) {
    const Vec3 n = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
    if (n.dot(inner - pts[a]) > 0) std::swap(b, c);
    return make_face(a, b, c);
  };
  std::vector<uint32_t> initial = {oriented(i0, i1, i2), oriented(i0, i1, i3), oriented(i0, i2, i3),
                                   oriented(i1, i2, i3)};

  auto assign = [&](const std::vector<uint32_t>& candidates, const std::vector<uint32_t>& to) {
    for (uint32_t p : candidates) {
      for (uint32_t f : to) {
        if (faces[f].distance(pts[p]) > eps) {
          faces[f].outside.push_back(p);
          break;
        }
      }
    }
  };
  {
    std::vector<uint32_t> all;
    for (uint32_t i = 0; i < pts.size(); ++i)
      if (i != i0 && i != i1 && i != i2 && i != i3) all.push_back(i);
    assign(all, initial);
  }

  std::vector<uint32_t> work(initial.begin(), initial.end());
  while (!work.empty()) {
    const uint32_t fi = work.back();
    work.pop_back();
    if (!faces[fi].alive || faces[fi].outside.empty()) continue;
    uint32_t eye = faces[fi].outside.front();
    double far = -1.0;
    for (uint32_t p : faces[fi].outside) {
      const double d = faces[fi].distance(pts[p]);
      if (d > far) {
        far = d;
        eye = p;
      }
    }
    // Visible region by flood fill across shared edges.
    std::vector<uint32_t> visible;
    std::unordered_set<uint32_t> seen{fi};
    std::vector<uint32_t> stack{fi};
    while (!stack.empty()) {
      const uint32_t f = stack.back();
      stack.pop_back();
      visible.push_back(f);
      for (int k = 0; k < 3; ++k) {
        const uint32_t a = faces[f].v[static_cast<size_t>(k)], b = faces[f].v[static_cast<size_t>((k + 1) % 3)];
        auto it = edge_owner.find(detail::directed(b, a));
        if (it == edge_owner.end()) continue;
        const uint32_t g = it->second;
        if (seen.count(g) || !faces[g].alive) continue;
        if (faces[g].distance(pts[eye]) > eps) {
          seen.insert(g);
          stack.push_back(g);
        }
      }
    }
    std::vector<std::pair<uint32_t, uint32_t>> horizon;
    for (uint32_t f : visible) {
      for (int k = 0; k < 3; ++k) {
        const uint32_t a = faces[f].v[static_cast<size_t>(k)], b = faces[f].v[static_cast<size_t>((k + 1) % 3)];
        auto it = edge_owner.find(detail::directed(b, a));
        if (it == edge_owner.end() || !seen.count(it->second)) horizon.emplace_back(a, b);
      }
    }
    std::vector<uint32_t> orphans;
    for (uint32_t f : visible) {
      faces[f].alive = false;
      for (int k = 0; k < 3; ++k) {
        const uint64_t key = detail::directed(faces[f].v[static_cast<size_t>(k)], faces[f].v[static_cast<size_t>((k + 1) % 3)]);
        auto it = edge_owner.find(key);
        if (it != edge_owner.end() && it->second == f) edge_owner.erase(it);
      }
      for (uint32_t p : faces[f].outside)
        if (p != eye) orphans.push_back(p);
      faces[f].outside.clear();
      faces[f].outside.shrink_to_fit();
    }
    std::vector<uint32_t> created;
    created.reserve(horizon.size());
    for (const auto& [a, b] : horizon) created.push_back(make_face(a, b, eye));
    assign(orphans, created);
    for (uint32_t f : created)
      if (!faces[f].outside.empty()) work.push_back(f);
  }

  std::vector<uint32_t> remap(pts.size(), UINT32_MAX);
  for (const auto& f : faces) {
    if (!f.alive) continue;
    Triangle t{};
    for (int k = 0; k < 3; ++k) {
      uint32_t& r = remap[f.v[static_cast<size_t>(k)]];
      if (r == UINT32_MAX) {
        r = static_cast<uint32_t>(hull.vertices.size());
        hull.vertices.push_back(pts[f.v[static_cast<size_t>(k)]]);
      }
      t[static_cast<size_t>(k)] = r;
    }
    hull.faces.push_back(t);
  }
  return hull;
}

// ---------------------------------------------------------------------------
// Oriented boxes

struct Obb {
  Vec3 center = Vec3::Zero();
  Mat3 axes = Mat3::Identity();  // columns are unit axes
  Vec3 half = Vec3::Zero();

  Vec3 support(const Vec3& d) const {
    Vec3 p = center;
    for (int i = 0; i < 3; ++i) p += (axes.col(i).dot(d) >= 0 ? half[i] : -half[i]) * axes.col(i);
    return p;
  }
  std::array<Vec3, 8> corners() const {
    std::array<Vec3, 8> c;
    for (int i = 0; i < 8; ++i) {
      const Vec3 s((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
      c[static_cast<size_t>(i)] = center + axes * s.cwiseProduct(half);
    }
    return c;
  }
  Aabb aabb() const {
    Aabb b;
    for (const Vec3& c : corners()) b.extend(c);
    return b;
  }
  TriangleMesh mesh() const {
    TriangleMesh m;
    const auto c = corners();
    m.vertices.assign(c.begin(), c.end());
    // Faces of the unit cube with corner bit layout (x=1, y=2, z=4).
    m.triangles = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                   {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
    if (axes.determinant() < 0) flip_orientation(m);
    m.frame = Frame::World;
    return m;
  }
};

// Box from a local-frame range [lo, hi] under rigid pose (r, t).
inline Obb make_obb(const Mat3& r, const Vec3& t, const Vec3& lo, const Vec3& hi) {
  Obb b;
  b.axes = r;
  b.half = 0.5 * (hi - lo);
  b.center = t + r * (0.5 * (lo + hi));
  return b;
}

// ---------------------------------------------------------------------------
// Separating-axis test between convex polytopes.

struct ConvexPolytope {
  std::vector<Vec3> vertices;
  std::vector<Vec3> normals;  // unique face directions
  std::vector<Vec3> edges;    // unique edge directions

  static ConvexPolytope from_hull(const ConvexHull& h) {
    ConvexPolytope p;
    p.vertices = h.vertices;
    auto add_unique = [](std::vector<Vec3>& dst, Vec3 d) {
      const double n = d.norm();
      if (n < 1e-12) return;
      d /= n;
      for (const Vec3& e : dst)
        if (std::abs(std::abs(e.dot(d)) - 1.0) < 1e-9) return;
      dst.push_back(d);
    };
    for (const auto& f : h.faces) {
      const Vec3 &a = h.vertices[f[0]], &b = h.vertices[f[1]], &c = h.vertices[f[2]];
      add_unique(p.normals, (b - a).cross(c - a));
      add_unique(p.edges, b - a);
      add_unique(p.edges, c - b);
      add_unique(p.edges, a - c);
    }
    return p;
  }
  static ConvexPolytope from_points(std::span<const Vec3> pts) { return from_hull(convex_hull(pts)); }

  void project(const Vec3& axis, double& lo, double& hi) const {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (const Vec3& v : vertices) {
      const double d = v.dot(axis);
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
};

// Largest gap found along any candidate axis; positive means separated by
// at least that distance along the axis, non-positive means overlapping.
inline double sat_separation(const ConvexPolytope& a, const ConvexPolytope& b) {
  double best = -std::numeric_limits<double>::infinity();
  auto test = [&](Vec3 axis) {
    const double n = axis.norm();
    if (n < 1e-12) return;
    axis /= n;
    double alo, ahi, blo, bhi;
    a.project(axis, alo, ahi);
    b.project(axis, blo, bhi);
    best = std::max(best, std::max(blo - ahi, alo - bhi));
  };
  for (const Vec3& n : a.normals) test(n);
  for (const Vec3& n : b.normals) test(n);
  for (const Vec3& ea : a.edges)
    for (const Vec3& eb : b.edges) test(ea.cross(eb));
  return best;
}

inline bool sat_overlap(const ConvexPolytope& a, const ConvexPolytope& b) { return sat_separation(a, b) <= 0.0; }

// ---------------------------------------------------------------------------
// GJK boolean intersection on support mappings.

namespace detail {

inline bool same_dir(const Vec3& a, const Vec3& b) { return a.dot(b) > 0; }

inline bool gjk_line(std::vector<Vec3>& s, Vec3& d) {
  const Vec3 a = s[1], b = s[0];
  const Vec3 ab = b - a, ao = -a;
  if (same_dir(ab, ao)) {
    d = ab.cross(ao).cross(ab);
    if (d.squaredNorm() < 1e-30) return true;  // origin on segment
  } else {
    s = {a};
    d = ao;
  }
  return false;
}

inline bool gjk_triangle(std::vector<Vec3>& s, Vec3& d) {
  const Vec3 a = s[2], b = s[1], c = s[0];
  const Vec3 ab = b - a, ac = c - a, ao = -a;
  const Vec3 abc = ab.cross(ac);
  if (same_dir(abc.cross(ac), ao)) {
    if (same_dir(ac, ao)) {
      s = {c, a};
      d = ac.cross(ao).cross(ac);
      if (d.squaredNorm() < 1e-30) return true;
    } else {
      s = {b, a};
      return gjk_line(s, d);
    }
  } else if (same_dir(ab.cross(abc), ao)) {
    s = {b, a};
    return gjk_line(s, d);
  } else {
    const double side = abc.dot(ao);
    if (std::abs(side) < 1e-30) return true;  // origin in triangle plane
    if (side > 0) {
      d = abc;
    } else {
      s = {b, c, a};
      d = -abc;
    }
  }
  return false;
}

inline bool gjk_tetra(std::vector<Vec3>& s, Vec3& d) {
  const Vec3 a = s[3], b = s[2], c = s[1], e = s[0];
  const Vec3 ab = b - a, ac = c - a, ae = e - a, ao = -a;
  const Vec3 abc = ab.cross(ac), ace = ac.cross(ae), aeb = ae.cross(ab);
  if (same_dir(abc, ao)) {
    s = {c, b, a};
    return gjk_triangle(s, d);
  }
  if (same_dir(ace, ao)) {
    s = {e, c, a};
    return gjk_triangle(s, d);
  }
  if (same_dir(aeb, ao)) {
    s = {b, e, a};
    return gjk_triangle(s, d);
  }
  return true;
}

}  // namespace detail

// True when the convex sets given by the two support functions intersect
// (touching counts as intersecting).
template <typename SupportA, typename SupportB>
bool gjk_intersect(const SupportA& sa, const SupportB& sb, Vec3 d = Vec3::UnitX()) {
  auto support = [&](const Vec3& dir) { return Vec3(sa(dir) - sb(-dir)); };
  if (d.squaredNorm() < 1e-30) d = Vec3::UnitX();
  std::vector<Vec3> s;
  s.reserve(4);
  s.push_back(support(d));
  d = -s.back();
  if (d.squaredNorm() < 1e-30) return true;
  for (int iter = 0; iter < 128; ++iter) {
    const Vec3 a = support(d);
    if (a.dot(d) < 0) return false;
    s.push_back(a);
    bool hit = false;
    switch (s.size()) {
      case 2: hit = detail::gjk_line(s, d); break;
      case 3: hit = detail::gjk_triangle(s, d); break;
      default: hit = detail::gjk_tetra(s, d); break;
    }
    if (hit) return true;
    if (d.squaredNorm() < 1e-30) return true;
  }
  return true;  // no separating direction found
}

// Support mapping of a convex vertex set, optionally swept by a translation.
struct PointSetSupport {
  std::span<const Vec3> points;
  Vec3 sweep = Vec3::Zero();
  Vec3 operator()(const Vec3& d) const {
    const Vec3* best = &points.front();
    double bd = best->dot(d);
    for (const Vec3& p : points) {
      const double v = p.dot(d);
      if (v > bd) {
        bd = v;
        best = &p;
      }
    }
    return *best + (sweep.dot(d) > 0 ? sweep : Vec3::Zero());
  }
};

struct ObbSupport {
  const Obb& box;
  Vec3 sweep = Vec3::Zero();
  Vec3 operator()(const Vec3& d) const { return box.support(d) + (sweep.dot(d) > 0 ? sweep : Vec3::Zero()); }
};

// ---------------------------------------------------------------------------
// Triangle-level tests

namespace detail {

inline bool separated_on(const Vec3& axis, std::span<const Vec3> a, std::span<const Vec3> b, double tol) {
  const double n2 = axis.squaredNorm();
  if (n2 < 1e-24) return false;
  double alo = std::numeric_limits<double>::infinity(), ahi = -alo, blo = alo, bhi = -alo;
  for (const Vec3& p : a) {
    const double d = p.dot(axis);
    alo = std::min(alo, d);
    ahi = std::max(ahi, d);
  }
  for (const Vec3& p : b) {
    const double d = p.dot(axis);
    blo = std::min(blo, d);
    bhi = std::max(bhi, d);
  }
  const double scaled = tol * std::sqrt(n2);
  return ahi < blo - scaled || bhi < alo - scaled;
}

}  // namespace detail

// Separating-axis test for two triangles, coplanar case included.
inline bool triangles_intersect(const std::array<Vec3, 3>& t1, const std::array<Vec3, 3>& t2, double tol = 0.0) {
  const std::array<Vec3, 3> e1 = {t1[1] - t1[0], t1[2] - t1[1], t1[0] - t1[2]};
  const std::array<Vec3, 3> e2 = {t2[1] - t2[0], t2[2] - t2[1], t2[0] - t2[2]};
  const Vec3 n1 = e1[0].cross(e1[1]), n2 = e2[0].cross(e2[1]);
  if (detail::separated_on(n1, t1, t2, tol) || detail::separated_on(n2, t1, t2, tol)) return false;
  for (const Vec3& a : e1)
    for (const Vec3& b : e2)
      if (detail::separated_on(a.cross(b), t1, t2, tol)) return false;
  for (const Vec3& a : e1)
    if (detail::separated_on(n1.cross(a), t1, t2, tol)) return false;
  for (const Vec3& b : e2)
    if (detail::separated_on(n2.cross(b), t1, t2, tol)) return false;
  return true;
}

// Box versus solid-triangle overlap (13 axes); catches containment as well.
inline bool obb_triangle_overlap(const Obb& box, const std::array<Vec3, 3>& tri) {
  const auto corners = box.corners();
  const std::array<Vec3, 3> e = {tri[1] - tri[0], tri[2] - tri[1], tri[0] - tri[2]};
  if (detail::separated_on(e[0].cross(e[1]), corners, tri, 0.0)) return false;
  for (int i = 0; i < 3; ++i) {
    if (detail::separated_on(box.axes.col(i), corners, tri, 0.0)) return false;
    for (const Vec3& ed : e)
      if (detail::separated_on(box.axes.col(i).cross(ed), corners, tri, 0.0)) return false;
  }
  return true;
}

inline bool obb_mesh_overlap(const Obb& box, const TriangleBvh& bvh) {
  bool hit = false;
  bvh.for_each_overlapping(box.aabb(), [&](uint32_t t) {
    const auto& m = bvh.mesh();
    if (obb_triangle_overlap(box, {m.corner(t, 0), m.corner(t, 1), m.corner(t, 2)})) hit = true;
    return hit;
  });
  return hit;
}

// Surface-surface intersection between two meshes (no containment check).
inline bool meshes_intersect(const TriangleMesh& a, const TriangleBvh& b) {
  for (size_t t = 0; t < a.triangles.size(); ++t) {
    const std::array<Vec3, 3> ta = {a.corner(t, 0), a.corner(t, 1), a.corner(t, 2)};
    Aabb box;
    for (const Vec3& p : ta) box.extend(p);
    bool hit = false;
    b.for_each_overlapping(box, [&](uint32_t s) {
      const auto& m = b.mesh();
      if (triangles_intersect(ta, {m.corner(s, 0), m.corner(s, 1), m.corner(s, 2)})) hit = true;
      return hit;
    });
    if (hit) return true;
  }
  return false;
}

}  // namespace r2s
