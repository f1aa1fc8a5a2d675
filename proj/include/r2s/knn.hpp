#pragma once

#include "r2s/common.hpp"

#include <span>

namespace r2s {

struct Neighbor {
  double dist2 = 0.0;
  uint32_t index = 0;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
  }
  friend bool operator==(const Neighbor& a, const Neighbor& b) = default;
};

inline constexpr uint32_t kNoExclude = UINT32_MAX;

// Exhaustive k nearest neighbours, ordered by (distance, index).
inline std::vector<Neighbor> knn_brute_force(std::span<const Vec3> points, const Vec3& q, size_t k,
                                             uint32_t exclude = kNoExclude) {
  std::vector<Neighbor> all;
  all.reserve(points.size());
  for (uint32_t i = 0; i < points.size(); ++i)
    if (i != exclude) all.push_back({(points[i] - q).squaredNorm(), i});
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
  all.resize(k);
  return all;
}

// Exact k-NN on a uniform grid. Results are identical to knn_brute_force,
// tie-breaking included.
class KnnGrid {
 public:
  KnnGrid() = default;
  explicit KnnGrid(std::span<const Vec3> points) : points_(points.begin(), points.end()) { build(); }

  size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

  void query(const Vec3& q, size_t k, std::vector<Neighbor>& out, uint32_t exclude = kNoExclude) const {
    out.clear();
    const size_t available = points_.size() - (exclude < points_.size() ? 1 : 0);
    k = std::min(k, available);
    if (k == 0) return;
    int c[3];
    for (int a = 0; a < 3; ++a) c[a] = static_cast<int>(std::floor((q[a] - origin_[a]) / cell_));
    // Rings that lie entirely outside the grid can be skipped.
    int r0 = 0;
    for (int a = 0; a < 3; ++a) {
      if (c[a] < 0) r0 = std::max(r0, -c[a]);
      if (c[a] >= dims_[a]) r0 = std::max(r0, c[a] - dims_[a] + 1);
    }
    const int rmax = r0 + dims_[0] + dims_[1] + dims_[2];
    for (int r = r0; r <= rmax; ++r) {
      visit_ring(c, r, q, k, out, exclude);
      // Anything in ring r+1 or beyond is at least r cell widths away.
      if (out.size() == k) {
        const double bound = r * cell_;
        if (out.back().dist2 <= bound * bound) break;
      }
      if (ring_outside(c, r)) break;
    }
  }

  std::vector<Neighbor> query(const Vec3& q, size_t k, uint32_t exclude = kNoExclude) const {
    std::vector<Neighbor> out;
    query(q, k, out, exclude);
    return out;
  }

  Neighbor nearest(const Vec3& q) const {
    std::vector<Neighbor> out;
    query(q, 1, out);
    return out.empty() ? Neighbor{std::numeric_limits<double>::infinity(), 0} : out.front();
  }

 private:
  void build() {
    if (points_.empty()) return;
    const Aabb box = bounds_of(points_);
    const Vec3 ext = box.extent();
    const double span = std::max(ext.maxCoeff(), 1e-9);
    // About one point per cell for surface-like data.
    double cell = span / std::max(1.0, std::cbrt(static_cast<double>(points_.size())) * 1.5);
    for (int a = 0; a < 3; ++a)
      while (static_cast<double>(ext[a]) / cell > 256.0) cell *= 1.25;
    cell_ = std::max(cell, 1e-9);
    origin_ = box.min;
    for (int a = 0; a < 3; ++a) dims_[a] = std::max(1, static_cast<int>(std::floor(ext[a] / cell_)) + 1);
    const size_t ncells = static_cast<size_t>(dims_[0]) * static_cast<size_t>(dims_[1]) * static_cast<size_t>(dims_[2]);
    start_.assign(ncells + 1, 0);
    std::vector<uint32_t> cell_of(points_.size());
    for (uint32_t i = 0; i < points_.size(); ++i) {
      cell_of[i] = static_cast<uint32_t>(cell_index(points_[i]));
      ++start_[cell_of[i] + 1];
    }
    for (size_t i = 0; i < ncells; ++i) start_[i + 1] += start_[i];
    items_.resize(points_.size());
    std::vector<uint32_t> fill(start_.begin(), start_.end() - 1);
    for (uint32_t i = 0; i < points_.size(); ++i) items_[fill[cell_of[i]]++] = i;
  }

  size_t cell_index(const Vec3& p) const {
    int c[3];
    for (int a = 0; a < 3; ++a)
      c[a] = std::clamp(static_cast<int>(std::floor((p[a] - origin_[a]) / cell_)), 0, dims_[a] - 1);
    return (static_cast<size_t>(c[2]) * static_cast<size_t>(dims_[1]) + static_cast<size_t>(c[1])) *
               static_cast<size_t>(dims_[0]) +
           static_cast<size_t>(c[0]);
  }

  bool ring_outside(const int* c, int r) const {
    for (int a = 0; a < 3; ++a)
      if (c[a] - r > 0 || c[a] + r < dims_[a] - 1) return false;
    return true;
  }

  void visit_cell(int x, int y, int z, const Vec3& q, size_t k, std::vector<Neighbor>& out, uint32_t exclude) const {
    const size_t ci =
        (static_cast<size_t>(z) * static_cast<size_t>(dims_[1]) + static_cast<size_t>(y)) * static_cast<size_t>(dims_[0]) +
        static_cast<size_t>(x);
    for (uint32_t s = start_[ci]; s < start_[ci + 1]; ++s) {
      const uint32_t i = items_[s];
      if (i == exclude) continue;
      const Neighbor n{(points_[i] - q).squaredNorm(), i};
      if (out.size() < k) {
        out.insert(std::upper_bound(out.begin(), out.end(), n), n);
      } else if (n < out.back()) {
        out.pop_back();
        out.insert(std::upper_bound(out.begin(), out.end(), n), n);
      }
    }
  }

  void visit_ring(const int* c, int r, const Vec3& q, size_t k, std::vector<Neighbor>& out, uint32_t exclude) const {
    const int x0 = std::max(0, c[0] - r), x1 = std::min(dims_[0] - 1, c[0] + r);
    const int y0 = std::max(0, c[1] - r), y1 = std::min(dims_[1] - 1, c[1] + r);
    const int z0 = std::max(0, c[2] - r), z1 = std::min(dims_[2] - 1, c[2] + r);
    for (int x = x0; x <= x1; ++x) {
      const bool xedge = std::abs(x - c[0]) == r;
      for (int y = y0; y <= y1; ++y) {
        const bool edge = xedge || std::abs(y - c[1]) == r;
        if (edge) {
          for (int z = z0; z <= z1; ++z) visit_cell(x, y, z, q, k, out, exclude);
        } else {
          if (c[2] - r >= z0 && c[2] - r <= z1) visit_cell(x, y, c[2] - r, q, k, out, exclude);
          if (r > 0 && c[2] + r >= z0 && c[2] + r <= z1) visit_cell(x, y, c[2] + r, q, k, out, exclude);
        }
      }
    }
  }

  std::vector<Vec3> points_;
  Vec3 origin_ = Vec3::Zero();
  double cell_ = 1.0;
  int dims_[3] = {1, 1, 1};
  std::vector<uint32_t> start_;
  std::vector<uint32_t> items_;
};

}  // namespace r2s
