#pragma once

#include "r2s/cloud.hpp"
#include "r2s/knn.hpp"

#include <Eigen/Eigenvalues>

#include <functional>
#include <memory>
#include <span>

namespace r2s {

// Occupancy over the canonical frame: 1 inside, 0 outside, 0.5 on the
// surface. Cheap to copy; the underlying evaluator is shared and immutable.
class OccupancyField {
 public:
  using PointFn = std::function<double(const Vec3&)>;

  OccupancyField() = default;
  static OccupancyField from_function(PointFn fn) {
    OccupancyField f;
    f.fn_ = std::make_shared<const PointFn>(std::move(fn));
    return f;
  }

  explicit operator bool() const { return fn_ != nullptr; }

  double eval(const Vec3& p) const {
    require(fn_ != nullptr, "evaluating an empty occupancy field");
    return (*fn_)(p);
  }

  std::vector<double> eval(std::span<const Vec3> queries, unsigned threads = 1) const {
    require(fn_ != nullptr, "evaluating an empty occupancy field");
    std::vector<double> out(queries.size());
    constexpr size_t kChunk = 4096;
    const size_t chunks = (queries.size() + kChunk - 1) / kChunk;
    parallel_for(chunks, threads, [&](size_t c) {
      const size_t end = std::min(queries.size(), (c + 1) * kChunk);
      for (size_t i = c * kChunk; i < end; ++i) out[i] = (*fn_)(queries[i]);
    });
    return out;
  }

 private:
  std::shared_ptr<const PointFn> fn_;
};

// ---------------------------------------------------------------------------
// Analytic primitives. Occupancy is a clamped linear ramp of the exact signed
// distance, so the 0.5 crossing is the analytic surface and marching cubes
// interpolation is exact within `kPrimitiveBand` of it.

inline constexpr double kPrimitiveBand = 0.02;

inline double ramp_occupancy(double sd, double band = kPrimitiveBand) {
  return std::clamp(0.5 - sd / (2.0 * band), 0.0, 1.0);
}

namespace sdf {

inline double sphere(const Vec3& p, double r) { return p.norm() - r; }

inline double box(const Vec3& p, const Vec3& half) {
  const Vec3 q = p.cwiseAbs() - half;
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

// Axis along z.
inline double cylinder(const Vec3& p, double r, double half_h) {
  const double qx = std::hypot(p.x(), p.y()) - r;
  const double qz = std::abs(p.z()) - half_h;
  return std::hypot(std::max(qx, 0.0), std::max(qz, 0.0)) + std::min(std::max(qx, qz), 0.0);
}

}  // namespace sdf

inline OccupancyField sphere_field(double r) {
  require(r > 0.0, "sphere radius must be positive");
  return OccupancyField::from_function([r](const Vec3& p) { return ramp_occupancy(sdf::sphere(p, r)); });
}

inline OccupancyField box_field(const Vec3& half_extents) {
  require(half_extents.minCoeff() > 0.0, "box half extents must be positive");
  return OccupancyField::from_function([h = half_extents](const Vec3& p) { return ramp_occupancy(sdf::box(p, h)); });
}

inline OccupancyField cylinder_field(double r, double half_h) {
  require(r > 0.0 && half_h > 0.0, "cylinder dimensions must be positive");
  return OccupancyField::from_function(
      [r, half_h](const Vec3& p) { return ramp_occupancy(sdf::cylinder(p, r, half_h)); });
}

// Occupied where normal·p <= offset.
inline OccupancyField halfspace_field(const Vec3& normal, double offset) {
  require(normal.norm() > 0.0, "halfspace normal must be non-zero");
  return OccupancyField::from_function(
      [n = normal.normalized(), offset](const Vec3& p) { return ramp_occupancy(n.dot(p) - offset); });
}

inline OccupancyField union_field(OccupancyField a, OccupancyField b) {
  return OccupancyField::from_function(
      [a = std::move(a), b = std::move(b)](const Vec3& p) { return std::max(a.eval(p), b.eval(p)); });
}

inline OccupancyField intersection_field(OccupancyField a, OccupancyField b) {
  return OccupancyField::from_function(
      [a = std::move(a), b = std::move(b)](const Vec3& p) { return std::min(a.eval(p), b.eval(p)); });
}

inline OccupancyField complement_field(OccupancyField a) {
  return OccupancyField::from_function([a = std::move(a)](const Vec3& p) { return 1.0 - a.eval(p); });
}

inline OccupancyField translated_field(OccupancyField a, const Vec3& offset) {
  return OccupancyField::from_function([a = std::move(a), offset](const Vec3& p) { return a.eval(p - offset); });
}

// ---------------------------------------------------------------------------
// Field fitted to a normalised point cloud: implicit moving least squares
// over tangent planes, squashed to occupancy by a logistic.

struct FittedFieldParams {
  int neighbor_count = 20;
  double sharpness = 200.0;  // logistic gain per normalised unit
  double smoothing = 0.02;   // weight regulariser, normalised units
  double reach = 0.02;       // lateral extent of each tangent patch, normalised units

  void validate() const {
    require(neighbor_count >= 3, "neighbor_count must be >= 3");
    require(sharpness > 0.0, "sharpness must be positive");
    require(smoothing >= 0.0, "smoothing must be non-negative");
    require(reach > 0.0, "reach must be positive");
  }
};

struct OrientedCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
};

// Unit normals from PCA of each point's neighbourhood (the point included),
// oriented toward the point's viewpoint when known, else away from the
// cloud centroid.
inline OrientedCloud estimate_normals(const ObjectCloud& cloud, int neighbor_count, unsigned threads = 1) {
  const size_t n = cloud.size();
  OrientedCloud out;
  out.points = cloud.points;
  out.normals.assign(n, Vec3::UnitZ());
  const KnnGrid grid(cloud.points);
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : cloud.points) centroid += p;
  centroid /= static_cast<double>(n);
  const bool views = cloud.has_viewpoints();
  parallel_for(n, threads, [&](size_t i) {
    std::vector<Neighbor> nn;
    grid.query(cloud.points[i], static_cast<size_t>(neighbor_count), nn);
    Vec3 mean = Vec3::Zero();
    for (const auto& nb : nn) mean += cloud.points[nb.index];
    mean /= static_cast<double>(nn.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& nb : nn) {
      const Vec3 d = cloud.points[nb.index] - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es;
    es.computeDirect(cov);
    Vec3 normal = es.eigenvectors().col(0);
    if (!normal.allFinite() || normal.norm() < 0.5) normal = Vec3::UnitZ();
    normal.normalize();
    const Vec3 toward = views ? Vec3(cloud.viewpoints[i] - cloud.points[i]) : Vec3(centroid - cloud.points[i]);
    const bool flip = views ? normal.dot(toward) < 0.0 : normal.dot(toward) > 0.0;
    out.normals[i] = flip ? Vec3(-normal) : normal;
  });
  return out;
}

// Signed distance (positive outside) blended over the tangent planes of the
// k nearest samples. Queries whose foot point lies more than `reach` (plus
// their depth below the planes) from the samples are pushed outside, so
// tangent planes do not extend into sheets away from the data.
inline double imls_distance(const KnnGrid& grid, const std::vector<Vec3>& normals, const Vec3& q, size_t k,
                            double smoothing2, double reach, std::vector<Neighbor>& scratch) {
  grid.query(q, k, scratch);
  double num = 0.0, lateral = 0.0, den = 0.0;
  for (const auto& nb : scratch) {
    const double w = 1.0 / (nb.dist2 + smoothing2 + 1e-300);
    const double along = normals[nb.index].dot(q - grid.points()[nb.index]);
    num += w * along;
    lateral += w * std::max(0.0, nb.dist2 - along * along);
    den += w;
  }
  const double sd = num / den;
  return std::max(sd, std::sqrt(lateral / den) - reach - std::max(-sd, 0.0));
}

inline OccupancyField fit_field(const ObjectCloud& normalized_cloud, const FittedFieldParams& params = {},
                                unsigned threads = 1) {
  params.validate();
  if (normalized_cloud.size() < static_cast<size_t>(params.neighbor_count))
    throw Error(ErrorKind::TooFewPoints, "fit_field needs at least " + std::to_string(params.neighbor_count) +
                                             " points, got " + std::to_string(normalized_cloud.size()));
  struct State {
    KnnGrid grid;
    std::vector<Vec3> normals;
    size_t k;
    double sharpness, smoothing2, reach;
  };
  OrientedCloud oriented = estimate_normals(normalized_cloud, params.neighbor_count, threads);
  auto state = std::make_shared<const State>(State{KnnGrid(oriented.points), std::move(oriented.normals),
                                                   static_cast<size_t>(params.neighbor_count), params.sharpness,
                                                   params.smoothing * params.smoothing, params.reach});
  return OccupancyField::from_function([state](const Vec3& q) {
    thread_local std::vector<Neighbor> scratch;
    const double sd = imls_distance(state->grid, state->normals, q, state->k, state->smoothing2, state->reach, scratch);
    const double x = state->sharpness * sd;
    // Stable logistic 1 / (1 + e^x).
    if (x >= 0.0) {
      const double e = std::exp(-x);
      return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(x));
  });
}

inline OccupancyField fit_field(std::span<const Vec3> normalized_points, const FittedFieldParams& params = {},
                                unsigned threads = 1) {
  ObjectCloud c;
  c.points.assign(normalized_points.begin(), normalized_points.end());
  return fit_field(c, params, threads);
}

}  // namespace r2s
