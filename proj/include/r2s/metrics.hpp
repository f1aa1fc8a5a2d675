#pragma once

#include "r2s/knn.hpp"
#include "r2s/replica.hpp"

#include <cstdio>

namespace r2s {

inline constexpr size_t kMetricSamples = 10000;

namespace detail {

inline void require_samples(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::EmptySet, "distance metrics need two non-empty sample sets");
}

// Distance from each point of `from` to its nearest point of `to`.
inline std::vector<double> nearest_distances(std::span<const Vec3> from, std::span<const Vec3> to) {
  const KnnGrid grid(to);
  std::vector<double> d(from.size());
  for (size_t i = 0; i < from.size(); ++i) d[i] = std::sqrt(grid.nearest(from[i]).dist2);
  return d;
}

}  // namespace detail

// 1/2 mean_a min_b |a - b| + 1/2 mean_b min_a |a - b|.
inline double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
  detail::require_samples(a, b);
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  return 0.5 * mean(detail::nearest_distances(a, b)) + 0.5 * mean(detail::nearest_distances(b, a));
}

inline double hausdorff_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
  detail::require_samples(a, b);
  const auto ab = detail::nearest_distances(a, b), ba = detail::nearest_distances(b, a);
  return std::max(*std::max_element(ab.begin(), ab.end()), *std::max_element(ba.begin(), ba.end()));
}

inline double bbox_iou(const Aabb& a, const Aabb& b) {
  require(a.valid() && b.valid(), "bbox_iou needs valid boxes");
  const Aabb inter{a.min.cwiseMax(b.min), a.max.cwiseMin(b.max)};
  const double vi = inter.valid() ? inter.volume() : 0.0;
  const double vu = a.volume() + b.volume() - vi;
  return vu > 0.0 ? vi / vu : (vi > 0.0 ? 1.0 : 0.0);
}

struct ObjectReport {
  int instance_id = 0;
  bool reconstructed = false;
  double chamfer_distance = kNaN;
  double hausdorff_distance = kNaN;
  std::optional<double> volume_ratio;  // unavailable for open meshes
  double bbox_iou = kNaN;
};

struct ReconstructionReport {
  std::vector<ObjectReport> objects;  // one per ground-truth object
  double object_recall = 0.0;
  size_t samples = kMetricSamples;
};

// Ground-truth objects are matched to replica objects by instance id.
inline ObjectReport evaluate_object(const PlacedMesh& recon, const PosedShape& truth, size_t samples, uint64_t seed) {
  ObjectReport r;
  r.instance_id = truth.instance_id;
  r.reconstructed = true;
  const auto truth_pts = truth.sample_surface(samples, stream_seed(seed, "truth", static_cast<uint64_t>(truth.instance_id)));
  const auto recon_pts = sample_points(recon.mesh, samples, stream_seed(seed, "recon", static_cast<uint64_t>(truth.instance_id)));
  r.chamfer_distance = chamfer_distance(recon_pts, truth_pts);
  r.hausdorff_distance = hausdorff_distance(recon_pts, truth_pts);
  if (const auto v = closed_volume(recon.mesh)) r.volume_ratio = *v / truth.volume();
  r.bbox_iou = bbox_iou(bounds(recon.mesh), truth.box);
  return r;
}

inline ReconstructionReport evaluate_replica(const SceneReplica& replica, const GroundTruthScene& truth,
                                             size_t samples = kMetricSamples, uint64_t seed = 0, unsigned threads = 1) {
  require(!truth.objects.empty(), "ground truth scene has no objects");
  const auto posed = pose_scene(truth);
  ReconstructionReport report;
  report.samples = samples;
  report.objects.resize(posed.size());
  parallel_for(posed.size(), threads, [&](size_t i) {
    if (const PlacedMesh* m = replica.find(posed[i].instance_id))
      report.objects[i] = evaluate_object(*m, posed[i], samples, seed);
    else
      report.objects[i].instance_id = posed[i].instance_id;
  });
  size_t found = 0;
  for (const auto& o : report.objects) found += o.reconstructed ? 1 : 0;
  report.object_recall = static_cast<double>(found) / static_cast<double>(report.objects.size());
  return report;
}

inline std::string format_report(const ReconstructionReport& r) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%8s  %12s  %13s  %12s  %8s\n", "instance", "chamfer_mm", "hausdorff_mm",
                "volume_ratio", "bbox_iou");
  out += line;
  for (const auto& o : r.objects) {
    if (!o.reconstructed) {
      std::snprintf(line, sizeof line, "%8d  %12s  %13s  %12s  %8s\n", o.instance_id, "missing", "-", "-", "-");
    } else {
      char vol[32];
      if (o.volume_ratio)
        std::snprintf(vol, sizeof vol, "%.3f", *o.volume_ratio);
      else
        std::snprintf(vol, sizeof vol, "n/a");
      std::snprintf(line, sizeof line, "%8d  %12.3f  %13.3f  %12s  %8.3f\n", o.instance_id, 1e3 * o.chamfer_distance,
                    1e3 * o.hausdorff_distance, vol, o.bbox_iou);
    }
    out += line;
  }
  std::snprintf(line, sizeof line, "object_recall %.3f\n", r.object_recall);
  out += line;
  return out;
}

}  // namespace r2s
