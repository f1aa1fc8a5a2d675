#pragma once

#include "r2s/mesh.hpp"

#include <optional>

namespace r2s {

struct RayHit {
  double t = 0.0;
  uint32_t triangle = 0;
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::Zero();  // unit face normal, mesh orientation
};

// Moller-Trumbore. Returns the ray parameter or nothing; both faces hit.
inline std::optional<double> intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                                                const Vec3& c) {
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 p = dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-300) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 s = origin - a;
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = dir.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  return e2.dot(q) * inv;
}

// Slab test; returns the entry parameter clipped to [tmin, tmax] if hit.
inline bool ray_box(const Vec3& origin, const Vec3& inv_dir, const Aabb& box, double tmin, double tmax) {
  for (int a = 0; a < 3; ++a) {
    double t0 = (box.min[a] - origin[a]) * inv_dir[a];
    double t1 = (box.max[a] - origin[a]) * inv_dir[a];
    if (t0 > t1) std::swap(t0, t1);
    // NaN from 0 * inf means the ray lies in the slab plane; keep it.
    if (!(t0 <= tmax)) {
      if (std::isnan(t0)) continue;
      return false;
    }
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return false;
  }
  return true;
}

// Bounding volume hierarchy over a triangle mesh (median split, leaves of up
// to four triangles). Holds its own copy of the geometry.
class TriangleBvh {
 public:
  TriangleBvh() = default;
  explicit TriangleBvh(TriangleMesh mesh) : mesh_(std::move(mesh)) { build(); }

  const TriangleMesh& mesh() const { return mesh_; }
  const Aabb& bounds() const { return nodes_.empty() ? empty_box_ : nodes_.front().box; }
  bool empty() const { return mesh_.triangles.empty(); }

  std::optional<RayHit> intersect(const Vec3& origin, const Vec3& dir, double tmin = 0.0,
                                  double tmax = std::numeric_limits<double>::infinity()) const {
    std::optional<RayHit> best;
    if (nodes_.empty()) return best;
    const Vec3 inv(1.0 / dir.x(), 1.0 / dir.y(), 1.0 / dir.z());
    uint32_t stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes_[stack[--top]];
      if (!ray_box(origin, inv, node.box, tmin, tmax)) continue;
      if (node.count > 0) {
        for (uint32_t i = node.first; i < node.first + node.count; ++i) {
          const uint32_t t = order_[i];
          const auto hit = intersect_triangle(origin, dir, mesh_.corner(t, 0), mesh_.corner(t, 1), mesh_.corner(t, 2));
          if (hit && *hit >= tmin && *hit <= tmax) {
            tmax = *hit;
            best = RayHit{*hit, t, origin + *hit * dir, face_normal(mesh_, t)};
          }
        }
      } else {
        stack[top++] = node.first;
        stack[top++] = node.first + 1;
      }
    }
    return best;
  }

  // Number of surface crossings along the ray beyond tmin.
  int count_crossings(const Vec3& origin, const Vec3& dir, double tmin = 0.0) const {
    int n = 0;
    if (nodes_.empty()) return 0;
    const Vec3 inv(1.0 / dir.x(), 1.0 / dir.y(), 1.0 / dir.z());
    const double tmax = std::numeric_limits<double>::infinity();
    uint32_t stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes_[stack[--top]];
      if (!ray_box(origin, inv, node.box, tmin, tmax)) continue;
      if (node.count > 0) {
        for (uint32_t i = node.first; i < node.first + node.count; ++i) {
          const uint32_t t = order_[i];
          const auto hit = intersect_triangle(origin, dir, mesh_.corner(t, 0), mesh_.corner(t, 1), mesh_.corner(t, 2));
          if (hit && *hit > tmin) ++n;
        }
      } else {
        stack[top++] = node.first;
        stack[top++] = node.first + 1;
      }
    }
    return n;
  }

  // Parity test voted over three skew directions; meaningful for closed meshes.
  bool contains(const Vec3& p) const {
    if (nodes_.empty() || !bounds().contains(p)) return false;
    static const Vec3 dirs[3] = {Vec3(0.5773, 0.5774, 0.5775).normalized(), Vec3(-0.6123, 0.4871, 0.6227).normalized(),
                                 Vec3(0.3271, -0.8112, 0.4849).normalized()};
    int votes = 0;
    for (const Vec3& d : dirs) votes += count_crossings(p, d) % 2;
    return votes >= 2;
  }

  // Visits every triangle whose node box overlaps `box`.
  template <typename Fn>
  void for_each_overlapping(const Aabb& box, Fn&& fn) const {
    if (nodes_.empty()) return;
    uint32_t stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes_[stack[--top]];
      if (!node.box.overlaps(box)) continue;
      if (node.count > 0) {
        for (uint32_t i = node.first; i < node.first + node.count; ++i) {
          if (fn(order_[i])) return;
        }
      } else {
        stack[top++] = node.first;
        stack[top++] = node.first + 1;
      }
    }
  }

 private:
  struct Node {
    Aabb box;
    uint32_t first = 0;  // child index (inner) or first triangle slot (leaf)
    uint32_t count = 0;  // triangles in leaf; zero for inner nodes
  };

  void build() {
    const size_t n = mesh_.triangles.size();
    if (n == 0) return;
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0u);
    centroids_.resize(n);
    tri_boxes_.resize(n);
    for (size_t t = 0; t < n; ++t) {
      Aabb b;
      for (int k = 0; k < 3; ++k) b.extend(mesh_.corner(t, k));
      tri_boxes_[t] = b;
      centroids_[t] = b.center();
    }
    nodes_.reserve(2 * n);
    nodes_.push_back(Node{});
    split(0, 0, static_cast<uint32_t>(n), 0);
    centroids_.clear();
    centroids_.shrink_to_fit();
    tri_boxes_.clear();
    tri_boxes_.shrink_to_fit();
  }

  void split(uint32_t node_index, uint32_t first, uint32_t count, int depth) {
    Aabb box, cbox;
    for (uint32_t i = first; i < first + count; ++i) {
      box.extend(tri_boxes_[order_[i]]);
      cbox.extend(centroids_[order_[i]]);
    }
    nodes_[node_index].box = box;
    if (count <= 4 || depth >= 60) {
      nodes_[node_index].first = first;
      nodes_[node_index].count = count;
      return;
    }
    int axis = 0;
    const Vec3 ext = cbox.extent();
    if (ext.y() > ext[axis]) axis = 1;
    if (ext.z() > ext[axis]) axis = 2;
    const uint32_t mid = first + count / 2;
    std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                     [&](uint32_t a, uint32_t b) {
                       if (centroids_[a][axis] != centroids_[b][axis]) return centroids_[a][axis] < centroids_[b][axis];
                       return a < b;
                     });
    const auto left = static_cast<uint32_t>(nodes_.size());
    nodes_.push_back(Node{});
    nodes_.push_back(Node{});
    nodes_[node_index].first = left;
    nodes_[node_index].count = 0;
    split(left, first, mid - first, depth + 1);
    split(left + 1, mid, first + count - mid, depth + 1);
  }

  TriangleMesh mesh_;
  std::vector<Node> nodes_;
  std::vector<uint32_t> order_;
  std::vector<Vec3> centroids_;
  std::vector<Aabb> tri_boxes_;
  Aabb empty_box_;
};

}  // namespace r2s
