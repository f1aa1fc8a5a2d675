#pragma once

#include "r2s/common.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <iterator>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace r2s {

enum class Frame { Canonical, World };

inline std::string_view to_string(Frame f) { return f == Frame::Canonical ? "canonical" : "world"; }

using Triangle = std::array<uint32_t, 3>;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  Frame frame = Frame::Canonical;

  bool empty() const { return triangles.empty(); }
  Vec3 corner(size_t t, int k) const { return vertices[triangles[t][static_cast<size_t>(k)]]; }
};

inline Vec3 triangle_cross(const Vec3& a, const Vec3& b, const Vec3& c) { return (b - a).cross(c - a); }

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * triangle_cross(a, b, c).norm();
}

inline Vec3 face_normal(const TriangleMesh& m, size_t t) {
  const Vec3 n = triangle_cross(m.corner(t, 0), m.corner(t, 1), m.corner(t, 2));
  const double len = n.norm();
  return len > 0 ? Vec3(n / len) : Vec3::Zero();
}

inline double surface_area(const TriangleMesh& m) {
  double a = 0.0;
  for (size_t t = 0; t < m.triangles.size(); ++t)
    a += triangle_area(m.corner(t, 0), m.corner(t, 1), m.corner(t, 2));
  return a;
}

// Divergence theorem; positive for outward-oriented closed meshes.
inline double signed_volume(const TriangleMesh& m) {
  double v = 0.0;
  for (size_t t = 0; t < m.triangles.size(); ++t)
    v += m.corner(t, 0).dot(m.corner(t, 1).cross(m.corner(t, 2)));
  return v / 6.0;
}

inline uint64_t edge_key(uint32_t a, uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<uint64_t>(a) << 32) | b;
}

// Every undirected edge shared by exactly two triangles, traversed once in
// each direction.
inline bool is_watertight(const TriangleMesh& m) {
  if (m.triangles.empty()) return false;
  std::unordered_map<uint64_t, int> count;
  std::unordered_map<uint64_t, int> orient;
  count.reserve(m.triangles.size() * 2);
  for (const auto& tri : m.triangles) {
    for (int k = 0; k < 3; ++k) {
      const uint32_t a = tri[static_cast<size_t>(k)], b = tri[static_cast<size_t>((k + 1) % 3)];
      const uint64_t key = edge_key(a, b);
      ++count[key];
      orient[key] += (a < b) ? 1 : -1;
    }
  }
  for (const auto& [key, c] : count)
    if (c != 2 || orient[key] != 0) return false;
  return true;
}

inline std::optional<double> closed_volume(const TriangleMesh& m) {
  if (!is_watertight(m)) return std::nullopt;
  return signed_volume(m);
}

inline Aabb bounds(const TriangleMesh& m) { return bounds_of(m.vertices); }

inline TriangleMesh transformed(const TriangleMesh& m, const Mat4& t, Frame frame) {
  TriangleMesh out;
  out.vertices.reserve(m.vertices.size());
  for (const Vec3& v : m.vertices) out.vertices.push_back(apply(t, v));
  out.triangles = m.triangles;
  out.frame = frame;
  // A reflection would flip orientation.
  if (t.topLeftCorner<3, 3>().determinant() < 0)
    for (auto& tri : out.triangles) std::swap(tri[1], tri[2]);
  return out;
}

inline void append(TriangleMesh& dst, const TriangleMesh& src) {
  const auto base = static_cast<uint32_t>(dst.vertices.size());
  dst.vertices.insert(dst.vertices.end(), src.vertices.begin(), src.vertices.end());
  for (const auto& t : src.triangles) dst.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
}

inline void flip_orientation(TriangleMesh& m) {
  for (auto& tri : m.triangles) std::swap(tri[1], tri[2]);
}

// Drops unreferenced vertices, keeping first-use order stable.
inline void compact(TriangleMesh& m) {
  std::vector<uint32_t> remap(m.vertices.size(), UINT32_MAX);
  std::vector<Vec3> verts;
  verts.reserve(m.vertices.size());
  for (auto& tri : m.triangles) {
    for (auto& idx : tri) {
      if (remap[idx] == UINT32_MAX) {
        remap[idx] = static_cast<uint32_t>(verts.size());
        verts.push_back(m.vertices[idx]);
      }
      idx = remap[idx];
    }
  }
  m.vertices = std::move(verts);
}

namespace detail {

// Removes triangles with area below `min_area` without opening holes. When
// the shortest edge is under a tenth of the longest it is collapsed, provided
// its link allows it; otherwise the triangle is a needle and the triangle
// across its longest edge is split at the needle's middle vertex. Whatever
// cannot be repaired this way is dropped.
inline constexpr size_t kSpeckTriangles = 64;

inline void repair_degenerate(std::vector<Vec3>& verts, std::vector<Triangle>& tris, double min_area) {
  std::vector<std::vector<uint32_t>> incident(verts.size());
  std::vector<uint8_t> dead(tris.size(), 0);
  for (size_t t = 0; t < tris.size(); ++t)
    for (uint32_t v : tris[t]) incident[v].push_back(static_cast<uint32_t>(t));
  auto area = [&](const Triangle& t) { return triangle_area(verts[t[0]], verts[t[1]], verts[t[2]]); };
  auto has = [](const Triangle& t, uint32_t v) { return t[0] == v || t[1] == v || t[2] == v; };
  // Incidence lists go stale as triangles change; filter on use.
  auto around = [&](uint32_t v) {
    std::vector<uint32_t> out;
    for (uint32_t t : incident[v])
      if (!dead[t] && has(tris[t], v)) out.push_back(t);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  };
  auto collapse = [&](uint32_t u, uint32_t v) {
    const auto tu = around(u), tv = around(v);
    std::vector<uint32_t> shared, opposite, nu, nv;
    for (uint32_t t : tu) {
      for (uint32_t w : tris[t])
        if (w != u) nu.push_back(w);
      if (has(tris[t], v)) {
        shared.push_back(t);
        for (uint32_t w : tris[t])
          if (w != u && w != v) opposite.push_back(w);
      }
    }
    for (uint32_t t : tv)
      for (uint32_t w : tris[t])
        if (w != v) nv.push_back(w);
    for (auto* set : {&opposite, &nu, &nv}) {
      std::sort(set->begin(), set->end());
      set->erase(std::unique(set->begin(), set->end()), set->end());
    }
    if (shared.size() != 2 || opposite.size() != 2) return false;
    std::vector<uint32_t> common;
    std::set_intersection(nu.begin(), nu.end(), nv.begin(), nv.end(), std::back_inserter(common));
    if (common != opposite) return false;
    for (uint32_t t : shared) dead[t] = 1;
    for (uint32_t t : tu) {
      if (dead[t]) continue;
      for (auto& w : tris[t])
        if (w == u) w = v;
      incident[v].push_back(t);
    }
    return true;
  };
  auto split = [&](size_t t, int e) {
    const Triangle tri = tris[t];
    const uint32_t a = tri[e], c = tri[(e + 1) % 3], b = tri[(e + 2) % 3];
    uint32_t across = UINT32_MAX;
    for (uint32_t s : around(a)) {
      if (s == t || !has(tris[s], c)) continue;
      if (across != UINT32_MAX) return false;
      across = s;
    }
    if (across == UINT32_MAX) return false;
    const Triangle o = tris[across];
    int k = 0;
    while (!((o[k] == a || o[k] == c) && (o[(k + 1) % 3] == a || o[(k + 1) % 3] == c))) ++k;
    const uint32_t p = o[k], q = o[(k + 1) % 3], x = o[(k + 2) % 3];
    dead[t] = 1;
    tris[across] = {p, b, x};
    tris.push_back({b, q, x});
    dead.push_back(0);
    const auto added = static_cast<uint32_t>(tris.size() - 1);
    incident[b].push_back(across);
    for (uint32_t w : {b, q, x}) incident[w].push_back(added);
    return true;
  };
  for (int pass = 0; pass < 8; ++pass) {
    bool changed = false;
    for (size_t t = 0; t < tris.size(); ++t) {
      if (dead[t] || area(tris[t]) >= min_area) continue;
      double len[3];
      for (int k = 0; k < 3; ++k) len[k] = (verts[tris[t][k]] - verts[tris[t][(k + 1) % 3]]).norm();
      const int shortest = static_cast<int>(std::min_element(len, len + 3) - len);
      const int longest = static_cast<int>(std::max_element(len, len + 3) - len);
      bool done = false;
      if (len[shortest] <= 0.1 * len[longest])
        done = collapse(tris[t][shortest], tris[t][(shortest + 1) % 3]);
      if (!done) done = split(t, longest);
      changed = changed || done;
    }
    if (!changed) break;
  }
  // A small component still holding an unrepairable triangle is a speck
  // (a closed blob too thin to collapse); it goes whole rather than open.
  std::vector<uint32_t> parent(verts.size());
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (size_t t = 0; t < tris.size(); ++t)
    if (!dead[t])
      for (int k = 1; k < 3; ++k) parent[find(tris[t][k])] = find(tris[t][0]);
  std::unordered_map<uint32_t, size_t> size_of;
  std::vector<uint32_t> bad_roots;
  for (size_t t = 0; t < tris.size(); ++t) {
    if (dead[t]) continue;
    const uint32_t r = find(tris[t][0]);
    ++size_of[r];
    if (area(tris[t]) < min_area) bad_roots.push_back(r);
  }
  std::vector<uint32_t> specks;
  for (uint32_t r : bad_roots)
    if (size_of[r] <= kSpeckTriangles) specks.push_back(r);
  std::sort(specks.begin(), specks.end());
  std::vector<Triangle> alive;
  alive.reserve(tris.size());
  for (size_t t = 0; t < tris.size(); ++t) {
    const Triangle& tri = tris[t];
    if (dead[t] || tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] || area(tri) < min_area) continue;
    if (std::binary_search(specks.begin(), specks.end(), find(tri[0]))) continue;
    alive.push_back(tri);
  }
  tris = std::move(alive);
}

}  // namespace detail

// Merges vertices closer than `tol` (snapped to a tol-sized lattice, then
// compared against lattice neighbours), drops triangles that collapse onto a
// repeated index and repairs those whose area falls below `min_area`.
inline void weld_and_clean(TriangleMesh& m, double tol = 1e-9, double min_area = 1e-12) {
  using Key = std::array<int64_t, 3>;
  struct KeyHash {
    size_t operator()(const Key& k) const {
      uint64_t h = 1469598103934665603ULL;
      for (int64_t v : k) h = (h ^ static_cast<uint64_t>(v)) * 1099511628211ULL;
      return static_cast<size_t>(h);
    }
  };
  std::unordered_map<Key, uint32_t, KeyHash> cells;
  cells.reserve(m.vertices.size());
  std::vector<uint32_t> remap(m.vertices.size());
  const double inv = 1.0 / tol;
  for (size_t i = 0; i < m.vertices.size(); ++i) {
    const Vec3& p = m.vertices[i];
    const Key k{static_cast<int64_t>(std::floor(p.x() * inv)), static_cast<int64_t>(std::floor(p.y() * inv)),
                static_cast<int64_t>(std::floor(p.z() * inv))};
    uint32_t found = UINT32_MAX;
    for (int dx = -1; dx <= 1 && found == UINT32_MAX; ++dx)
      for (int dy = -1; dy <= 1 && found == UINT32_MAX; ++dy)
        for (int dz = -1; dz <= 1 && found == UINT32_MAX; ++dz) {
          auto it = cells.find(Key{k[0] + dx, k[1] + dy, k[2] + dz});
          if (it != cells.end() && (m.vertices[it->second] - p).norm() <= tol) found = it->second;
        }
    if (found == UINT32_MAX) {
      found = static_cast<uint32_t>(i);
      cells.emplace(k, found);
    }
    remap[i] = found;
  }
  std::vector<Triangle> kept;
  kept.reserve(m.triangles.size());
  for (auto tri : m.triangles) {
    for (auto& idx : tri) idx = remap[idx];
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) continue;
    kept.push_back(tri);
  }
  detail::repair_degenerate(m.vertices, kept, min_area);
  // Coincident triangles of opposite orientation enclose nothing; cancel
  // them in pairs so collapsed specks do not leave two-sided sheets.
  std::map<std::array<uint32_t, 3>, std::vector<size_t>> by_vertices;
  for (size_t t = 0; t < kept.size(); ++t) {
    auto key = kept[t];
    std::sort(key.begin(), key.end());
    by_vertices[key].push_back(t);
  }
  auto rotated = [](Triangle t) {
    while (t[0] > t[1] || t[0] > t[2]) std::rotate(t.begin(), t.begin() + 1, t.end());
    return t;
  };
  std::vector<uint8_t> drop(kept.size(), 0);
  for (const auto& [key, list] : by_vertices) {
    if (list.size() < 2) continue;
    std::vector<size_t> fwd, rev;
    for (size_t t : list) (rotated(kept[t]) == key ? fwd : rev).push_back(t);
    for (size_t i = 0; i < std::min(fwd.size(), rev.size()); ++i) drop[fwd[i]] = drop[rev[i]] = 1;
  }
  m.triangles.clear();
  for (size_t t = 0; t < kept.size(); ++t)
    if (!drop[t]) m.triangles.push_back(kept[t]);
  compact(m);
}

// Components connected through shared vertex indices.
inline std::vector<TriangleMesh> connected_components(const TriangleMesh& m) {
  std::vector<uint32_t> parent(m.vertices.size());
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& tri : m.triangles) {
    const uint32_t a = find(tri[0]);
    for (int k = 1; k < 3; ++k) {
      const uint32_t b = find(tri[static_cast<size_t>(k)]);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  std::map<uint32_t, size_t> slot;
  std::vector<TriangleMesh> parts;
  for (const auto& tri : m.triangles) {
    const uint32_t root = find(tri[0]);
    auto [it, inserted] = slot.try_emplace(root, parts.size());
    if (inserted) {
      parts.emplace_back();
      parts.back().frame = m.frame;
      parts.back().vertices = m.vertices;
    }
    parts[it->second].triangles.push_back(tri);
  }
  for (auto& p : parts) compact(p);
  return parts;
}

// Components whose surface area is below `fraction` of the largest
// component's, removed; the rest keep their relative order.
inline TriangleMesh drop_minor_components(const TriangleMesh& m, double fraction) {
  require(fraction >= 0.0 && fraction <= 1.0, "fragment fraction must lie in [0, 1]");
  const auto parts = connected_components(m);
  double largest = 0.0;
  std::vector<double> area(parts.size());
  for (size_t i = 0; i < parts.size(); ++i) largest = std::max(largest, area[i] = surface_area(parts[i]));
  TriangleMesh out;
  out.frame = m.frame;
  for (size_t i = 0; i < parts.size(); ++i)
    if (area[i] >= fraction * largest) append(out, parts[i]);
  return out;
}

struct SurfaceSample {
  Vec3 point;
  Vec3 normal;
  uint32_t triangle;
};

// Area-weighted uniform samples; deterministic for a given rng state.
inline std::vector<SurfaceSample> sample_surface(const TriangleMesh& m, size_t count, Rng& rng) {
  std::vector<SurfaceSample> out;
  if (m.triangles.empty() || count == 0) return out;
  std::vector<double> cdf(m.triangles.size());
  double total = 0.0;
  for (size_t t = 0; t < m.triangles.size(); ++t) {
    total += triangle_area(m.corner(t, 0), m.corner(t, 1), m.corner(t, 2));
    cdf[t] = total;
  }
  if (total <= 0.0) return out;
  out.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    const double r = uniform01(rng) * total;
    size_t t = static_cast<size_t>(std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
    t = std::min(t, cdf.size() - 1);
    double u = uniform01(rng), v = uniform01(rng);
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    const Vec3 a = m.corner(t, 0), b = m.corner(t, 1), c = m.corner(t, 2);
    out.push_back({a + u * (b - a) + v * (c - a), face_normal(m, t), static_cast<uint32_t>(t)});
  }
  return out;
}

inline std::vector<Vec3> sample_points(const TriangleMesh& m, size_t count, uint64_t seed) {
  Rng rng = make_rng(seed, "surface-sample");
  std::vector<Vec3> pts;
  for (const auto& s : sample_surface(m, count, rng)) pts.push_back(s.point);
  return pts;
}

}  // namespace r2s
