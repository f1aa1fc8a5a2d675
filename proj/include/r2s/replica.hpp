#pragma once

#include "r2s/camera.hpp"
#include "r2s/cloud.hpp"
#include "r2s/collision.hpp"
#include "r2s/field.hpp"
#include "r2s/mise.hpp"
#include "r2s/shapes.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>

namespace r2s {

struct PlacedMesh {
  int instance_id = 0;
  TriangleMesh mesh;                // world frame
  Mat4 transform = Mat4::Identity();  // canonical -> world, [scale*I, center]
  std::vector<std::vector<Vec3>> collision_hulls;
};

struct SceneReplica {
  std::vector<PlacedMesh> objects;  // ascending instance id
  double table_height = 0.0;

  const PlacedMesh* find(int instance_id) const {
    for (const auto& o : objects)
      if (o.instance_id == instance_id) return &o;
    return nullptr;
  }
};

// One convex hull per connected component.
inline std::vector<std::vector<Vec3>> simplify_collision(const TriangleMesh& mesh) {
  require(!mesh.empty(), "simplify_collision needs a non-empty mesh");
  std::vector<std::vector<Vec3>> hulls;
  for (const auto& comp : connected_components(mesh)) hulls.push_back(convex_hull(comp.vertices).vertices);
  return hulls;
}

using FieldBuilder = std::function<OccupancyField(const ObjectCloud& normalized)>;

inline FieldBuilder fitted_field_builder(const FittedFieldParams& params = {}, unsigned threads = 1) {
  return [params, threads](const ObjectCloud& c) { return fit_field(c, params, threads); };
}

// Convex hull of the xy projection, counter-clockwise (monotone chain).
inline std::vector<Eigen::Vector2d> footprint_hull(std::span<const Vec3> points) {
  std::vector<Eigen::Vector2d> p;
  p.reserve(points.size());
  for (const Vec3& v : points) p.emplace_back(v.x(), v.y());
  std::sort(p.begin(), p.end(), [](const auto& a, const auto& b) { return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y()); });
  p.erase(std::unique(p.begin(), p.end()), p.end());
  if (p.size() < 3) return p;
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a - o).x() * (b - o).y() - (a - o).y() * (b - o).x();
  };
  std::vector<Eigen::Vector2d> h(2 * p.size());
  size_t k = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  for (size_t i = p.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  h.resize(k - 1);
  return h;
}

// Occupied inside the vertical prism over a convex polygon grown by `margin`.
inline OccupancyField footprint_field(std::vector<Eigen::Vector2d> hull, double margin) {
  require(hull.size() >= 3, "footprint needs a polygon");
  return OccupancyField::from_function([hull = std::move(hull), margin](const Vec3& q) {
    double sd = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < hull.size(); ++i) {
      const Eigen::Vector2d e = hull[(i + 1) % hull.size()] - hull[i];
      const Eigen::Vector2d n = Eigen::Vector2d(e.y(), -e.x()).normalized();
      sd = std::max(sd, n.dot(Eigen::Vector2d(q.x(), q.y()) - hull[i]));
    }
    return ramp_occupancy(sd - margin);
  });
}

// Points whose mean distance to their 8 nearest neighbours is within
// `factor` times the median of that statistic; sparse strays fall out.
inline std::vector<Vec3> dense_core(std::span<const Vec3> points, double factor = 3.0) {
  if (points.size() <= 8) return {points.begin(), points.end()};
  const KnnGrid grid(points);
  std::vector<double> spread(points.size());
  std::vector<Neighbor> nn;
  for (uint32_t i = 0; i < points.size(); ++i) {
    grid.query(points[i], 8, nn, i);
    double s = 0.0;
    for (const auto& n : nn) s += std::sqrt(n.dist2);
    spread[i] = s / static_cast<double>(nn.size());
  }
  std::vector<double> sorted = spread;
  const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2);
  std::nth_element(sorted.begin(), mid, sorted.end());
  const double limit = factor * *mid;
  std::vector<Vec3> out;
  for (size_t i = 0; i < points.size(); ++i)
    if (spread[i] <= limit) out.push_back(points[i]);
  return out;
}

// Tabletop priors applied around the fitted field: objects rest on the
// support plane and their unobserved parts stay within the observed
// horizontal footprint.
struct ShapePriors {
  std::optional<double> table_height;  // world z of the support plane
  bool footprint = false;
  double footprint_margin = 0.0;       // normalised units
  double fragment_fraction = 0.0;      // drop components below this share of the largest one's area
};

// Normalise, build the field, extract in the canonical frame, then place by
// the inverse of the normalisation.
inline PlacedMesh reconstruct_object(const ObjectCloud& cloud, const FieldBuilder& builder, const MiseConfig& cfg = {},
                                     const ShapePriors& priors = {}, unsigned threads = 1) {
  const NormalizationTransform norm = compute_normalization(cloud);
  const ObjectCloud local = normalize(cloud, norm);
  OccupancyField field = builder(local);
  if (priors.table_height) {
    const double z = (*priors.table_height - norm.center.z()) / norm.scale;
    field = intersection_field(std::move(field), halfspace_field(-Vec3::UnitZ(), -z));
  }
  if (priors.footprint) {
    auto hull = footprint_hull(dense_core(local.points));
    if (hull.size() >= 3) field = intersection_field(std::move(field), footprint_field(std::move(hull), priors.footprint_margin));
  }
  TriangleMesh canonical = extract_mesh(field, cfg, threads, local.points);
  if (priors.fragment_fraction > 0.0) canonical = drop_minor_components(canonical, priors.fragment_fraction);
  PlacedMesh out;
  out.instance_id = cloud.instance_id;
  out.transform = norm.to_world();
  out.mesh = transformed(canonical, out.transform, Frame::World);
  out.collision_hulls = simplify_collision(out.mesh);
  return out;
}

// Per-instance clouds fused across views in observation order.
inline std::map<int, ObjectCloud> extract_object_clouds(std::span<const DepthObservation> observations) {
  std::map<int, std::vector<ObjectCloud>> per_view;
  for (const auto& obs : observations)
    for (auto& [id, cloud] : backproject(obs)) per_view[id].push_back(std::move(cloud));
  std::map<int, ObjectCloud> out;
  for (const auto& [id, views] : per_view) out[id] = fuse(views);
  return out;
}

// Median height of background returns; falls back to the lowest object point.
inline std::optional<double> estimate_table_height(std::span<const DepthObservation> observations) {
  std::vector<double> z;
  for (const auto& obs : observations)
    for (const Vec3& p : backproject_background(obs)) z.push_back(p.z());
  if (z.empty()) {
    for (const auto& obs : observations)
      for (const auto& [id, c] : backproject(obs))
        for (const Vec3& p : c.points) z.push_back(p.z());
    if (z.empty()) return std::nullopt;
    return *std::min_element(z.begin(), z.end());
  }
  const auto mid = z.begin() + static_cast<std::ptrdiff_t>(z.size() / 2);
  std::nth_element(z.begin(), mid, z.end());
  return *mid;
}

struct ReplicaOptions {
  FittedFieldParams field;
  FieldBuilder builder;  // overrides `field` when set
  MiseConfig mise;
  OutlierParams outliers;
  bool remove_outliers = true;
  bool clip_to_table = true;
  bool footprint_prior = true;
  double fragment_fraction = 0.05;
  unsigned threads = 1;
};

struct ReplicaBuild {
  SceneReplica replica;
  std::vector<std::string> warnings;
  std::map<int, size_t> points;            // fused cloud size per instance
  std::map<int, size_t> outliers_removed;  // per instance
};

inline ReplicaBuild build_replica_from_clouds(const std::map<int, ObjectCloud>& clouds, double table_height,
                                              const ReplicaOptions& opt = {}) {
  ReplicaBuild out;
  out.replica.table_height = table_height;
  if (clouds.empty()) throw Error(ErrorKind::NoObjects, "no object pixels in any observation");
  const FieldBuilder builder = opt.builder ? opt.builder : fitted_field_builder(opt.field);
  std::vector<int> ids;
  for (const auto& [id, c] : clouds) ids.push_back(id);
  std::vector<std::optional<PlacedMesh>> placed(ids.size());
  std::vector<std::string> failure(ids.size());
  std::vector<size_t> removed(ids.size(), 0);
  parallel_for(ids.size(), opt.threads, [&](size_t i) {
    const ObjectCloud& raw = clouds.at(ids[i]);
    try {
      ObjectCloud cloud = raw;
      if (opt.remove_outliers) {
        OutlierResult r = remove_statistical_outliers(raw, opt.outliers);
        removed[i] = r.removed.size();
        cloud = std::move(r.cloud);
      }
      ShapePriors priors;
      if (opt.clip_to_table) priors.table_height = table_height;
      priors.footprint = opt.footprint_prior;
      priors.fragment_fraction = opt.fragment_fraction;
      placed[i] = reconstruct_object(cloud, builder, opt.mise, priors);
    } catch (const Error& e) {
      failure[i] = std::string(to_string(e.kind())) + ": " + e.what();
    }
  });
  for (size_t i = 0; i < ids.size(); ++i) {
    out.points[ids[i]] = clouds.at(ids[i]).size();
    out.outliers_removed[ids[i]] = removed[i];
    if (placed[i])
      out.replica.objects.push_back(std::move(*placed[i]));
    else
      out.warnings.push_back("instance " + std::to_string(ids[i]) + " skipped (" + failure[i] + ")");
  }
  if (out.replica.objects.empty()) throw Error(ErrorKind::NoObjects, "every instance failed to reconstruct");
  return out;
}

inline ReplicaBuild build_replica(std::span<const DepthObservation> observations, const ReplicaOptions& opt = {}) {
  if (observations.empty()) throw Error(ErrorKind::NoObjects, "no observations");
  for (const auto& obs : observations) obs.validate();
  const std::map<int, ObjectCloud> clouds = extract_object_clouds(observations);
  if (clouds.empty()) throw Error(ErrorKind::NoObjects, "no object pixels in any observation");
  return build_replica_from_clouds(clouds, estimate_table_height(observations).value_or(0.0), opt);
}

// ---------------------------------------------------------------------------
// Ground-truth scene generation

// A shape kind with a uniform range for each parameter.
struct CatalogEntry {
  ShapeKind kind = ShapeKind::Can;
  std::map<std::string, std::array<double, 2>> ranges;

  ShapeDescriptor sample(Rng& rng) const {
    ShapeDescriptor s{kind, {}};
    for (const auto& [name, r] : ranges) s.params[name] = uniform(rng, r[0], r[1]);
    return s;
  }
};

// Tabletop categories: can, bottle, bowl, mug.
inline std::vector<CatalogEntry> default_catalog() {
  return {
      {ShapeKind::Can, {{"radius", {0.030, 0.045}}, {"height", {0.08, 0.14}}}},
      {ShapeKind::Bottle,
       {{"radius", {0.030, 0.040}}, {"body_height", {0.10, 0.15}}, {"neck_radius", {0.012, 0.016}},
        {"neck_height", {0.03, 0.05}}}},
      {ShapeKind::Bowl, {{"radius", {0.060, 0.080}}, {"thickness", {0.006, 0.010}}, {"base_cut", {0.20, 0.35}}}},
      {ShapeKind::Mug,
       {{"radius", {0.035, 0.045}}, {"height", {0.08, 0.11}}, {"handle_radius", {0.022, 0.030}},
        {"handle_thickness", {0.006, 0.008}}}},
  };
}

struct PlacementBounds {
  double x_min = -0.3, x_max = 0.3;
  double y_min = -0.3, y_max = 0.3;
};

inline constexpr int kMaxPlacementRejections = 10000;

inline std::vector<ConvexPolytope> placed_pieces(const ShapeDescriptor& s, const Mat4& pose) {
  std::vector<ConvexPolytope> out;
  for (const auto& piece : shape_collision_pieces(s)) {
    std::vector<Vec3> w;
    w.reserve(piece.size());
    for (const Vec3& p : piece) w.push_back(apply(pose, p));
    out.push_back(ConvexPolytope::from_points(w));
  }
  return out;
}

// Upright pose: yaw about +z, resting on the table.
inline Mat4 upright_pose(double x, double y, double yaw, double table_height) {
  return make_transform(Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix(), Vec3(x, y, table_height));
}

inline GroundTruthScene generate_scene(std::span<const CatalogEntry> catalog, int n_objects,
                                       const PlacementBounds& bounds, uint64_t seed, double table_height = 0.0) {
  require(n_objects >= 1, "n_objects must be >= 1");
  require(!catalog.empty(), "catalog must be non-empty");
  require(bounds.x_max > bounds.x_min && bounds.y_max > bounds.y_min, "placement bounds must have positive area");
  Rng rng = make_rng(seed, "scene");
  GroundTruthScene scene;
  scene.table_height = table_height;
  struct Placed {
    Vec3 center;
    double radius;
    std::vector<ConvexPolytope> pieces;
  };
  std::vector<Placed> placed;
  for (int n = 0; n < n_objects; ++n) {
    const auto& entry = catalog[static_cast<size_t>(rng() % catalog.size())];
    const ShapeDescriptor shape = entry.sample(rng);
    const double r = footprint_radius(shape);
    auto axis_range = [r](double lo, double hi) {
      return lo + r <= hi - r ? std::array<double, 2>{lo + r, hi - r} : std::array<double, 2>{0.5 * (lo + hi), 0.5 * (lo + hi)};
    };
    const auto xr = axis_range(bounds.x_min, bounds.x_max), yr = axis_range(bounds.y_min, bounds.y_max);
    bool ok = false;
    for (int attempt = 0; attempt <= kMaxPlacementRejections && !ok; ++attempt) {
      const double x = uniform(rng, xr[0], xr[1]), y = uniform(rng, yr[0], yr[1]);
      const double yaw = uniform(rng, -kPi, kPi);
      const Mat4 pose = upright_pose(x, y, yaw, table_height);
      const Vec3 c(x, y, table_height);
      std::vector<ConvexPolytope> pieces;
      bool clear = true;
      for (const auto& p : placed) {
        if ((p.center - c).norm() > p.radius + r) continue;
        if (pieces.empty()) pieces = placed_pieces(shape, pose);
        for (const auto& a : p.pieces)
          for (const auto& b : pieces)
            if (sat_separation(a, b) <= 0.0) clear = false;
        if (!clear) break;
      }
      if (!clear) continue;
      if (pieces.empty()) pieces = placed_pieces(shape, pose);
      placed.push_back({c, r, std::move(pieces)});
      scene.objects.push_back({shape, pose, n + 1});
      ok = true;
    }
    if (!ok)
      throw Error(ErrorKind::PlacementExhausted, "object " + std::to_string(n + 1) + " could not be placed after " +
                                                     std::to_string(kMaxPlacementRejections) + " rejections");
  }
  return scene;
}

inline GroundTruthScene generate_scene(int n_objects, uint64_t seed, const PlacementBounds& bounds = {},
                                       double table_height = 0.0) {
  const auto catalog = default_catalog();
  return generate_scene(catalog, n_objects, bounds, seed, table_height);
}

}  // namespace r2s
