#pragma once

#include "r2s/common.hpp"
#include "r2s/knn.hpp"

#include <span>

namespace r2s {

// World-frame points of one object instance. `viewpoints`, when present,
// holds the position of the camera that observed each point.
struct ObjectCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> viewpoints;
  int instance_id = 1;

  size_t size() const { return points.size(); }
  bool has_viewpoints() const { return !viewpoints.empty() && viewpoints.size() == points.size(); }
};

inline ObjectCloud fuse(std::span<const ObjectCloud> clouds) {
  ObjectCloud out;
  if (clouds.empty()) return out;
  out.instance_id = clouds.front().instance_id;
  bool views = true;
  for (const auto& c : clouds) {
    if (c.instance_id != out.instance_id)
      throw Error(ErrorKind::InvalidArgument, "fuse: mismatched instance ids " + std::to_string(out.instance_id) +
                                                  " and " + std::to_string(c.instance_id));
    views = views && (c.points.empty() || c.has_viewpoints());
  }
  for (const auto& c : clouds) {
    out.points.insert(out.points.end(), c.points.begin(), c.points.end());
    if (views) out.viewpoints.insert(out.viewpoints.end(), c.viewpoints.begin(), c.viewpoints.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Statistical outlier removal

struct OutlierParams {
  int k = 20;
  double std_ratio = 2.0;
};

struct OutlierResult {
  ObjectCloud cloud;
  std::vector<uint32_t> removed;  // indices into the input cloud, ascending
};

// Above this size the grid index answers k-NN queries; both paths return the
// same neighbours, so the removal decision is identical.
inline constexpr size_t kExactKnnLimit = 20000;

// Mean distance from each point to its k nearest other points.
inline std::vector<double> mean_knn_distances(std::span<const Vec3> pts, int k, bool force_brute_force = false) {
  std::vector<double> means(pts.size(), 0.0);
  auto reduce = [&](const std::vector<Neighbor>& nn) {
    double s = 0.0;
    for (const auto& n : nn) s += std::sqrt(n.dist2);
    return nn.empty() ? 0.0 : s / static_cast<double>(nn.size());
  };
  if (force_brute_force || pts.size() <= kExactKnnLimit) {
    for (uint32_t i = 0; i < pts.size(); ++i) means[i] = reduce(knn_brute_force(pts, pts[i], static_cast<size_t>(k), i));
  } else {
    const KnnGrid grid(pts);
    std::vector<Neighbor> nn;
    for (uint32_t i = 0; i < pts.size(); ++i) {
      grid.query(pts[i], static_cast<size_t>(k), nn, i);
      means[i] = reduce(nn);
    }
  }
  return means;
}

inline OutlierResult remove_statistical_outliers(const ObjectCloud& cloud, const OutlierParams& params = {}) {
  require(params.k >= 1, "outlier k must be >= 1");
  require(params.std_ratio > 0.0, "outlier std_ratio must be positive");
  OutlierResult res;
  if (cloud.size() <= static_cast<size_t>(params.k)) {
    res.cloud = cloud;
    return res;
  }
  const std::vector<double> means = mean_knn_distances(cloud.points, params.k);
  const double n = static_cast<double>(means.size());
  double mu = 0.0;
  for (double m : means) mu += m;
  mu /= n;
  double var = 0.0;
  for (double m : means) var += (m - mu) * (m - mu);
  const double sigma = std::sqrt(var / (n - 1.0));
  const double limit = mu + params.std_ratio * sigma;
  res.cloud.instance_id = cloud.instance_id;
  const bool views = cloud.has_viewpoints();
  for (uint32_t i = 0; i < means.size(); ++i) {
    if (means[i] > limit) {
      res.removed.push_back(i);
      continue;
    }
    res.cloud.points.push_back(cloud.points[i]);
    if (views) res.cloud.viewpoints.push_back(cloud.viewpoints[i]);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Bounding-box normalisation and its inverse (the object placement).

inline constexpr double kDegenerateExtent = 1e-6;

struct NormalizationTransform {
  Vec3 center = Vec3::Zero();
  double scale = 1.0;

  Vec3 normalize(const Vec3& p) const { return (p - center) / scale; }
  Vec3 denormalize(const Vec3& p) const { return scale * p + center; }

  // Canonical -> world: [scale*I, center; 0, 1].
  Mat4 to_world() const {
    Mat4 t = Mat4::Identity();
    t.topLeftCorner<3, 3>() = scale * Mat3::Identity();
    t.topRightCorner<3, 1>() = center;
    return t;
  }
  Mat4 to_canonical() const {
    Mat4 t = Mat4::Identity();
    t.topLeftCorner<3, 3>() = (1.0 / scale) * Mat3::Identity();
    t.topRightCorner<3, 1>() = -center / scale;
    return t;
  }
};

inline NormalizationTransform compute_normalization(std::span<const Vec3> points) {
  if (points.empty()) throw Error(ErrorKind::DegenerateCloud, "empty cloud");
  const Aabb box = bounds_of(points);
  NormalizationTransform t;
  t.center = (box.max + box.min) / 2.0;
  t.scale = (box.max - box.min).maxCoeff();
  if (!(t.scale > kDegenerateExtent))
    throw Error(ErrorKind::DegenerateCloud, "cloud extent " + std::to_string(t.scale) + " m is too small to normalize");
  return t;
}

inline NormalizationTransform compute_normalization(const ObjectCloud& cloud) {
  return compute_normalization(std::span<const Vec3>(cloud.points));
}

inline std::vector<Vec3> normalize(std::span<const Vec3> points, const NormalizationTransform& t) {
  require(t.scale > 0.0, "normalization scale must be positive");
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const Vec3& p : points) out.push_back(t.normalize(p));
  return out;
}

inline std::vector<Vec3> denormalize(std::span<const Vec3> points, const NormalizationTransform& t) {
  require(t.scale > 0.0, "normalization scale must be positive");
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const Vec3& p : points) out.push_back(t.denormalize(p));
  return out;
}

inline ObjectCloud normalize(const ObjectCloud& cloud, const NormalizationTransform& t) {
  ObjectCloud out;
  out.instance_id = cloud.instance_id;
  out.points = normalize(std::span<const Vec3>(cloud.points), t);
  if (cloud.has_viewpoints()) out.viewpoints = normalize(std::span<const Vec3>(cloud.viewpoints), t);
  return out;
}

}  // namespace r2s
