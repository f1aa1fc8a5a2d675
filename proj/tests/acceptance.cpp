// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Each criterion's wall-clock budget is part of its pass condition.

#include "support.hpp"

#include "r2s/io.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace r2s;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// --- shared scene setup -------------------------------------------------------

constexpr int kViews = 4;
constexpr int kWidth = 320, kHeight = 240;
constexpr double kFovDeg = 55.0, kRingRadius = 0.55, kRingHeight = 0.65;

std::vector<DepthObservation> noisy_views(const GroundTruthScene& scene, uint64_t seed) {
  const auto k = CameraIntrinsics::from_fov(kWidth, kHeight, kFovDeg * kPi / 180.0);
  const auto rig = camera_ring(kViews, kRingRadius, kRingHeight, Vec3(0, 0, scene.table_height), k);
  const auto posed = pose_scene(scene);
  std::vector<DepthObservation> views;
  for (size_t i = 0; i < rig.poses.size(); ++i)
    views.push_back(inject_depth_noise(render_depth(posed, scene.table_height, k, rig.poses[i]),
                                       DepthNoiseModel::kinect_default(), stream_seed(seed, "noise", i)));
  return views;
}

int scene_size(uint64_t seed) { return 5 + static_cast<int>(seed % 4); }

// --- criterion 1 --------------------------------------------------------------

Outcome normalization_round_trip() {
  Rng rng = make_rng(1, "acceptance-normalization");
  double worst_matrix = 0.0, worst_point = 0.0;
  for (int c = 0; c < 100; ++c) {
    const size_t n = 2 + static_cast<size_t>(uniform(rng, 0, 2000));
    const Vec3 center(uniform(rng, -100, 100), uniform(rng, -100, 100), uniform(rng, -100, 100));
    const Vec3 extent = Vec3(uniform(rng, -3, 3), uniform(rng, -3, 3), uniform(rng, -3, 3)).unaryExpr(
        [](double e) { return std::pow(10.0, e); });
    std::vector<Vec3> pts(n);
    for (auto& p : pts)
      p = center + Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)).cwiseProduct(extent);
    const auto t = compute_normalization(pts);
    const Mat4 m = t.to_world() * t.to_canonical();
    worst_matrix = std::max(worst_matrix, (m - Mat4::Identity()).cwiseAbs().maxCoeff());
    const auto local = normalize(std::span<const Vec3>(pts), t);
    const double ref = std::max(t.scale, t.center.norm());
    for (size_t i = 0; i < n; ++i) {
      const Vec3 back = apply(t.to_world(), local[i]);
      worst_point = std::max(worst_point, (back - pts[i]).norm() / ref);
    }
  }
  return {worst_matrix <= 1e-9 && worst_point <= 1e-9,
          fmt("max |T_WO*N - I| %.2e, max relative point error %.2e", worst_matrix, worst_point)};
}

// --- criterion 2 --------------------------------------------------------------

bool vertex_less(const Vec3& a, const Vec3& b) {
  return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
}

OccupancyField random_primitive_field(Rng& rng) {
  const int parts = 1 + static_cast<int>(uniform(rng, 0, 3));
  OccupancyField f;
  for (int i = 0; i < parts; ++i) {
    const Vec3 at(uniform(rng, -0.15, 0.15), uniform(rng, -0.15, 0.15), uniform(rng, -0.15, 0.15));
    OccupancyField p;
    switch (static_cast<int>(uniform(rng, 0, 3))) {
      case 0: p = sphere_field(uniform(rng, 0.08, 0.25)); break;
      case 1: p = box_field(Vec3(uniform(rng, 0.05, 0.25), uniform(rng, 0.05, 0.25), uniform(rng, 0.05, 0.25))); break;
      default: p = cylinder_field(uniform(rng, 0.05, 0.2), uniform(rng, 0.05, 0.25)); break;
    }
    p = translated_field(std::move(p), at);
    f = f ? union_field(std::move(f), std::move(p)) : std::move(p);
  }
  return f;
}

Outcome mise_dense_equivalence() {
  Rng rng = make_rng(2, "acceptance-mise");
  const MiseConfig cfg{16, 128, 0.5, 0.1};
  int matched = 0;
  double worst_vertex = 0.0, worst_fraction = 0.0;
  for (int c = 0; c < 20; ++c) {
    const auto f = random_primitive_field(rng);
    const auto mise = extract_mesh_with_stats(f, cfg);
    const auto dense = marching_cubes(sample_lattice(f, cfg.final_lattice()), cfg.threshold);
    auto a = mise.mesh.vertices, b = dense.vertices;
    std::sort(a.begin(), a.end(), vertex_less);
    std::sort(b.begin(), b.end(), vertex_less);
    bool same = a.size() == b.size() && mise.mesh.triangles.size() == dense.triangles.size();
    for (size_t i = 0; same && i < a.size(); ++i) {
      worst_vertex = std::max(worst_vertex, (a[i] - b[i]).norm());
      same = (a[i] - b[i]).norm() <= 1e-6;
    }
    matched += same ? 1 : 0;
    worst_fraction = std::max(worst_fraction, static_cast<double>(mise.evaluations) /
                                                  static_cast<double>(mise.dense_evaluations));
  }
  return {matched == 20 && worst_fraction < 0.15,
          fmt("%d/20 vertex sets match (max deviation %.1e), max evaluation fraction %.3f", matched, worst_vertex,
              worst_fraction)};
}

// --- criterion 3 --------------------------------------------------------------

struct FidelityTally {
  int objects = 0, failing = 0;
  double min_recall = 1.0, max_chamfer = 0.0, min_iou = 1.0;

  void add(const ReconstructionReport& r) {
    min_recall = std::min(min_recall, r.object_recall);
    for (const auto& o : r.objects) {
      ++objects;
      if (!o.reconstructed) {
        ++failing;
        continue;
      }
      max_chamfer = std::max(max_chamfer, o.chamfer_distance);
      min_iou = std::min(min_iou, o.bbox_iou);
      if (!(o.chamfer_distance < 0.008 && o.bbox_iou > 0.7)) ++failing;
    }
  }
  bool pass() const { return min_recall == 1.0 && failing == 0; }
  std::string describe() const {
    return fmt("%d objects, min recall %.3f, max chamfer %.2f mm, min bbox_iou %.3f, %d out of bounds", objects,
               min_recall, 1e3 * max_chamfer, min_iou, failing);
  }
};

Outcome end_to_end_fidelity() {
  FidelityTally tally;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    const auto scene = generate_scene(scene_size(seed), seed);
    const auto build = build_replica(noisy_views(scene, seed));
    tally.add(evaluate_replica(build.replica, scene, kMetricSamples, seed));
  }
  return {tally.pass(), tally.describe()};
}

// --- criterion 4 --------------------------------------------------------------

// Appends ceil(1%) points in a cube of edge e/4 centred ten object extents
// above the cloud's bounding-box centre.
ObjectCloud with_far_cluster(ObjectCloud c, uint64_t seed) {
  const Aabb b = bounds_of(c.points);
  const double e = b.extent().maxCoeff();
  const Vec3 at = b.center() + Vec3(0, 0, 10.0 * e);
  const size_t n = (c.points.size() + 99) / 100;
  Rng rng = make_rng(seed, "acceptance-outliers");
  for (size_t i = 0; i < n; ++i) {
    c.points.push_back(at + 0.25 * e * Vec3(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5)));
    c.viewpoints.push_back(c.viewpoints[i]);
  }
  return c;
}

Outcome outlier_removal_necessity() {
  int inflated = 0;
  double min_ratio = 1e9;
  FidelityTally restored;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    const auto scene = generate_scene(scene_size(seed), seed);
    const auto clouds = extract_object_clouds(noisy_views(scene, seed));
    const auto& [id, cloud] = *clouds.begin();
    const std::map<int, ObjectCloud> one{{id, with_far_cluster(cloud, seed)}};
    const auto truth_obj = *std::find_if(scene.objects.begin(), scene.objects.end(),
                                         [&](const SceneObject& o) { return o.instance_id == id; });
    const GroundTruthScene truth{{truth_obj}, scene.table_height};
    const Aabb truth_box = pose_shape(truth_obj).box;

    ReplicaOptions off;
    off.remove_outliers = false;
    double ratio = 0.0;
    try {
      const auto b = build_replica_from_clouds(one, scene.table_height, off);
      if (!b.replica.objects.empty()) ratio = bounds(b.replica.objects[0].mesh).extent().norm() / truth_box.extent().norm();
    } catch (const Error&) {
    }
    min_ratio = std::min(min_ratio, ratio);
    inflated += ratio >= 2.0 ? 1 : 0;

    const auto on = build_replica_from_clouds(one, scene.table_height, ReplicaOptions{});
    restored.add(evaluate_replica(on.replica, truth, kMetricSamples, seed));
  }
  return {inflated >= 8 && restored.pass(),
          fmt("removal off: %d/10 inflated >= 2x (min ratio %.2f); removal on: ", inflated, min_ratio) +
              restored.describe()};
}

// --- criterion 5 --------------------------------------------------------------

Outcome label_filtering() {
  SceneReplica replica;
  const auto scene = generate_scene(3, 5);
  for (const auto& o : scene.objects) {
    PlacedMesh p;
    p.instance_id = o.instance_id;
    p.mesh = transformed(shape_mesh(o.shape), o.pose, Frame::World);
    p.collision_hulls = simplify_collision(p.mesh);
    replica.objects.push_back(std::move(p));
  }
  const GraspWorld world(replica);
  LabelingOptions opt;
  opt.candidates_per_object = 24;
  auto labels = label_scene(world, opt, 5).labels;
  GraspLabel boundary;
  boundary.trials = 10;
  boundary.successes = 7;
  boundary.mean_success = 7.0 / 10.0;
  labels.push_back(boundary);

  const auto start = std::chrono::steady_clock::now();
  std::vector<size_t> counts;
  for (double thr : {0.0, 0.3, 0.5, 0.7, 0.9, 1.0}) counts.push_back(count_positive(filter_labels(labels, thr)));
  const bool boundary_positive = filter_labels({boundary}, 0.7).front().positive;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const bool monotone = std::is_sorted(counts.rbegin(), counts.rend());
  std::ostringstream s;
  for (size_t c : counts) s << c << ' ';
  return {monotone && boundary_positive && counts.front() == labels.size() && secs < 1.0,
          "positives over thresholds: " + s.str() + (boundary_positive ? "; 0.7 is positive at 0.7" : "; boundary lost") +
              fmt("; filtering %.3f s", secs)};
}

// --- criterion 6 --------------------------------------------------------------

Outcome grasp_oracle_sanity() {
  const GripperModel g;
  // Face-pair grasp from above on an isolated 0.04 m box.
  const auto replica = test::box_replica(0.04, 0.04, 0.08);
  const GraspWorld box(replica);
  const GraspCandidate grasp = test::top_down_grasp(Vec3::Zero(), 0.08, 0.04);
  const double zero_jitter = evaluate_grasp(box, grasp, g, 10, JitterModel{0.0, 0.0}, 6).mean_success;

  bool no_candidates = false;
  try {
    sample_grasps(GraspWorld(test::box_replica(0.1, 0.1, 0.1)), 1, g, 64, 6);
  } catch (const Error& e) {
    no_candidates = e.kind() == ErrorKind::NoCandidates;
  }

  const double sigmas[] = {0.0, 0.002, 0.005, 0.010};
  std::vector<double> means(4, 0.0);
  for (uint64_t seed = 0; seed < 20; ++seed)
    for (size_t j = 0; j < 4; ++j)
      means[j] += evaluate_grasp(box, grasp, g, 10, JitterModel{sigmas[j], 0.0}, seed).mean_success / 20.0;
  int inversions = 0;
  for (size_t j = 1; j < 4; ++j) inversions += means[j] > means[j - 1] ? 1 : 0;
  return {zero_jitter == 1.0 && no_candidates && inversions <= 1,
          fmt("zero-jitter mean %.3f; wide box %s; means at 0/2/5/10 mm jitter %.3f %.3f %.3f %.3f, %d inversions",
              zero_jitter, no_candidates ? "gives NoCandidates" : "yielded candidates", means[0], means[1], means[2],
              means[3], inversions)};
}

// --- criterion 7 --------------------------------------------------------------

Outcome voxel_conservation() {
  Rng rng = make_rng(7, "acceptance-voxels");
  bool ok = true;
  size_t total_out = 0;
  const Vec3 center(0.1, -0.2, 0.05);
  const auto empty = rasterize_labels(std::vector<GraspLabel>{}, center);
  ok = ok && empty.negative_count() == 64000 && empty.positive_count() == 0;
  for (int set = 0; set < 50; ++set) {
    std::vector<GraspLabel> labels(static_cast<size_t>(uniform(rng, 0, 500)));
    size_t positive = 0, outside = 0;
    for (auto& l : labels) {
      l.candidate.pose.translation = center + Vec3(uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2));
      l.trials = 10;
      l.successes = static_cast<int>(uniform(rng, 0, 11));
      l.mean_success = l.successes / 10.0;
      l.positive = l.mean_success >= 0.7;
      if (!l.positive) continue;
      ++positive;
      // Independent containment test against the grid's half extent.
      const Vec3 d = (l.candidate.pose.translation - center) / 0.0075;
      if (!(d.array() >= -20.0).all() || !(d.array() < 20.0).all()) ++outside;
    }
    const auto grid = rasterize_labels(labels, center);
    ok = ok && grid.positive_count() + grid.negative_count() == 64000u;
    ok = ok && grid.claims + grid.out_of_grid == positive && grid.out_of_grid == outside;
    ok = ok && grid.positive_count() <= grid.claims;
    total_out += grid.out_of_grid;
  }
  return {ok && total_out > 0, fmt("50 random label sets conserve 40^3 cells; %zu out-of-grid labels counted", total_out)};
}

// --- criterion 8 --------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
    out[fs::relative(e.path(), root).string()] = io::read_text(e.path());
  }
  return out;
}

Outcome pipeline_determinism(const std::string& cli, const fs::path& work) {
  if (cli.empty()) return {false, "no --cli binary given"};
  fs::remove_all(work / "det");
  int codes[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path out = work / "det" / (i == 0 ? "threads1" : "threads4");
    const std::string cmd = "\"" + cli + "\" pipeline --seed 8 --threads " + (i == 0 ? "1" : "4") + " --out \"" +
                            out.string() + "\" 2>\"" + (work / "det").string() + "/stderr" + std::to_string(i) + ".txt\"";
    fs::create_directories(work / "det");
    const int status = std::system(cmd.c_str());
    codes[i] = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  if (codes[0] != 0 || codes[1] != 0) return {false, fmt("pipeline exit codes %d and %d", codes[0], codes[1])};
  const auto a = snapshot(work / "det" / "threads1"), b = snapshot(work / "det" / "threads4");
  size_t differing = 0, labels = 0, replica = 0;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != bytes) ++differing;
    if (name == "labels.jsonl") ++labels;
    if (name.rfind("replica", 0) == 0 || name.rfind("object_", 0) == 0) ++replica;
  }
  return {differing == 0 && a.size() == b.size() && labels == 1 && replica > 1,
          fmt("%zu files compared (labels %zu, replica files %zu), %zu differ", a.size(), labels, replica, differing)};
}

// --- criterion 9 --------------------------------------------------------------

DepthObservation flat_plane(double z) {
  DepthObservation obs;
  obs.intrinsics = CameraIntrinsics::from_fov(400, 250, 1.0);
  obs.depth = Raster<float>(400, 250, static_cast<float>(z));
  obs.segmentation = Raster<uint16_t>(400, 250, 1);
  return obs;
}

Outcome noise_moments() {
  bool ok = true;
  std::string detail;
  for (double z : {0.5, 1.0, 1.5}) {
    const auto model = DepthNoiseModel::kinect_default();
    const auto noisy = inject_depth_noise(flat_plane(z), model, 9);
    double sum = 0.0, sum2 = 0.0;
    size_t n = 0;
    for (float d : noisy.depth.data) {
      if (!valid_depth(d)) continue;
      sum += d - z;
      sum2 += (d - z) * (d - z);
      ++n;
    }
    const double mean = sum / static_cast<double>(n);
    const double sd = std::sqrt((sum2 - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1));
    const double rel = sd / model.sigma_z(z) - 1.0;
    ok = ok && std::abs(rel) <= 0.05;
    detail += fmt("std/sigma_z at %.1f m: %+.2f%%; ", z, 100.0 * rel);
  }
  DepthNoiseModel drop = DepthNoiseModel::kinect_default();
  drop.lateral_sigma = 0.0;  // keep every pixel on the raster so only dropout invalidates
  const auto noisy = inject_depth_noise(flat_plane(1.0), drop, 99);
  const double n = static_cast<double>(noisy.depth.data.size());
  const double dropped = static_cast<double>(
      std::count_if(noisy.depth.data.begin(), noisy.depth.data.end(), [](float d) { return !valid_depth(d); }));
  const double expect = n * drop.dropout_rate, bound = 3.0 * std::sqrt(n * drop.dropout_rate * (1 - drop.dropout_rate));
  ok = ok && std::abs(dropped - expect) <= bound;
  detail += fmt("dropout %.0f of %.0f pixels (expected %.0f +- %.0f)", dropped, n, expect, bound);
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  fs::path work = fs::temp_directory_path() / "r2s-acceptance";
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) cli = argv[++i];
    else if (a == "--work" && i + 1 < argc) work = argv[++i];
    else if (a == "--only" && i + 1 < argc) only.push_back(std::atoi(argv[++i]));
    else {
      std::cerr << "usage: r2s_acceptance [--cli PATH] [--work DIR] [--only N]...\n";
      return 1;
    }
  }
  fs::create_directories(work);

  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "pose-free placement exactness", 1.0, normalization_round_trip},
      {2, "MISE and dense extraction agree", 60.0, mise_dense_equivalence},
      {3, "end-to-end reconstruction fidelity", 300.0, end_to_end_fidelity},
      {4, "outlier removal necessity", 300.0, outlier_removal_necessity},
      {5, "label filtering semantics", 60.0, label_filtering},
      {6, "grasp oracle sanity", 120.0, grasp_oracle_sanity},
      {7, "voxel grid conservation", 1.0, voxel_conservation},
      {8, "pipeline determinism across threads", 600.0, [&] { return pipeline_determinism(cli, work); }},
      {9, "noise model moments", 10.0, noise_moments},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = o.pass && secs < c.budget_s;
    failures += pass ? 0 : 1;
    std::cout << "criterion " << c.id << ": " << (pass ? "PASS" : "FAIL") << "  " << c.name << "  ["
              << fmt("%.2f s of %.0f s", secs, c.budget_s) << "]  " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
