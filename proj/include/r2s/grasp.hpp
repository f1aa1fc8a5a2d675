#pragma once

#include "r2s/bvh.hpp"
#include "r2s/collision.hpp"
#include "r2s/replica.hpp"

namespace r2s {

// Parallel-jaw gripper. In the gripper frame y is the closing axis, z the
// approach axis and the origin the jaw midpoint; fingers are square-section
// bars spanning z in [-palm_clearance, finger_depth - palm_clearance] and
// the palm sits behind z = -palm_clearance.
struct GripperModel {
  double max_opening = 0.085;
  double finger_depth = 0.046;
  double finger_thickness = 0.01;
  double palm_clearance = 0.023;
  double friction_mu = 0.5;

  void validate() const {
    require(max_opening > 0 && finger_depth > 0 && finger_thickness > 0 && palm_clearance > 0,
            "gripper dimensions must be positive");
    require(palm_clearance < finger_depth, "palm_clearance must be smaller than finger_depth");
    require(friction_mu > 0 && friction_mu <= 2.0, "friction_mu must lie in (0, 2]");
  }

  double cone_cos() const { return std::cos(std::atan(friction_mu)); }
};

struct GraspCandidate {
  RigidPose pose;  // gripper to world; columns (closing x approach, closing, approach)
  int target_instance = 0;
  double opening = 0.0;

  Vec3 closing() const { return pose.rotation.col(1); }
  Vec3 approach() const { return pose.rotation.col(2); }
};

struct GraspLabel {
  GraspCandidate candidate;
  int trials = 0;
  int successes = 0;
  double mean_success = 0.0;
  bool positive = false;
};

struct JitterModel {
  double sigma_trans = 0.003;               // m, per axis
  double sigma_rot = 2.0 * kPi / 180.0;     // rad, per axis of a rotation vector

  void validate() const { require(sigma_trans >= 0 && sigma_rot >= 0, "jitter sigmas must be non-negative"); }
};

inline constexpr double kLiftHeight = 0.10;
inline constexpr int kProposalsPerCandidate = 100;

// Gripper boxes at `pose` with inner finger faces at y = lo and y = hi.
// `approach_sweep` extends every box backwards along the approach axis.
inline std::array<Obb, 3> gripper_boxes(const GripperModel& g, const RigidPose& pose, double lo, double hi,
                                        double approach_sweep = 0.0) {
  const double t = g.finger_thickness, half_open = 0.5 * g.max_opening;
  const double z0 = -g.palm_clearance - approach_sweep, z1 = g.finger_depth - g.palm_clearance;
  return {make_obb(pose.rotation, pose.translation, {-t / 2, hi, z0}, {t / 2, hi + t, z1}),
          make_obb(pose.rotation, pose.translation, {-t / 2, lo - t, z0}, {t / 2, lo, z1}),
          make_obb(pose.rotation, pose.translation, {-t / 2, -half_open - t, -g.palm_clearance - t - approach_sweep},
                   {t / 2, half_open + t, -g.palm_clearance})};
}

// Open gripper at the candidate's nominal pose, as a triangle mesh.
inline TriangleMesh gripper_mesh(const GripperModel& g, const RigidPose& pose) {
  TriangleMesh m;
  for (const Obb& b : gripper_boxes(g, pose, -0.5 * g.max_opening, 0.5 * g.max_opening)) append(m, b.mesh());
  m.frame = Frame::World;
  return m;
}

// Replica geometry prepared for repeated grasp queries. Read-only after
// construction and safe to share between threads.
class GraspWorld {
 public:
  struct Body {
    int instance_id;
    TriangleBvh bvh;
    std::vector<std::vector<Vec3>> hulls;
    Aabb box;
  };

  explicit GraspWorld(const SceneReplica& replica) : table_height_(replica.table_height) {
    for (const auto& o : replica.objects) {
      Aabb box = bounds(o.mesh);
      for (const auto& h : o.collision_hulls) box.extend(bounds_of(h));
      bodies_.push_back({o.instance_id, TriangleBvh(o.mesh), o.collision_hulls, box});
    }
  }

  double table_height() const { return table_height_; }
  const std::vector<Body>& bodies() const { return bodies_; }
  const Body* find(int id) const {
    for (const auto& b : bodies_)
      if (b.instance_id == id) return &b;
    return nullptr;
  }

 private:
  double table_height_;
  std::vector<Body> bodies_;
};

namespace detail {

inline bool box_hits_hulls(const Obb& box, const GraspWorld::Body& body, const Vec3& sweep = Vec3::Zero()) {
  Aabb swept = box.aabb();
  swept.extend(Aabb{swept.min + sweep, swept.max + sweep});
  if (!swept.overlaps(body.box)) return false;
  for (const auto& h : body.hulls)
    if (!h.empty() && gjk_intersect(ObbSupport{box, sweep}, PointSetSupport{h})) return true;
  return false;
}

inline bool box_below_table(const Obb& box, double table_height) {
  for (const Vec3& c : box.corners())
    if (c.z() < table_height) return true;
  return false;
}

// Approach with open jaws: the swept gripper must clear the table, every
// other body and the target itself.
inline bool approach_clear(const GraspWorld& world, const GraspWorld::Body& target, const GripperModel& g,
                           const RigidPose& pose) {
  for (const Obb& box : gripper_boxes(g, pose, -0.5 * g.max_opening, 0.5 * g.max_opening, g.finger_depth)) {
    if (box_below_table(box, world.table_height())) return false;
    if (obb_mesh_overlap(box, target.bvh)) return false;
    for (const auto& body : world.bodies())
      if (&body != &target && box_hits_hulls(box, body)) return false;
  }
  return true;
}

}  // namespace detail

// One quasi-static trial at an already perturbed pose.
inline bool grasp_trial(const GraspWorld& world, int target_instance, const GripperModel& g, const RigidPose& pose) {
  const GraspWorld::Body* target = world.find(target_instance);
  if (target == nullptr) return false;
  if (!detail::approach_clear(world, *target, g, pose)) return false;

  // Close: each pad travels inward along the closing axis until it meets the
  // target; meeting any other body first fails the trial.
  const Vec3 y = pose.rotation.col(1);
  const double half = 0.5 * g.max_opening;
  struct Contact {
    Vec3 point, normal;
    double travel;
  };
  auto close_pad = [&](double side) -> std::optional<Contact> {
    const Vec3 origin = pose.translation + side * half * y;
    const Vec3 dir = -side * y;
    const auto hit = target->bvh.intersect(origin, dir, 0.0, g.max_opening);
    if (!hit) return std::nullopt;
    for (const auto& body : world.bodies())
      if (&body != target && body.bvh.intersect(origin, dir, 0.0, hit->t)) return std::nullopt;
    return Contact{hit->point, hit->normal, hit->t};
  };
  const auto c_hi = close_pad(1.0), c_lo = close_pad(-1.0);
  if (!c_hi || !c_lo || c_hi->travel + c_lo->travel >= g.max_opening) return false;

  // Force closure: the contact line lies inside both friction cones.
  const Vec3 line = c_lo->point - c_hi->point;
  if (line.norm() < 1e-9) return false;
  const Vec3 d = line.normalized();
  const double cone = g.cone_cos();
  if (-c_hi->normal.dot(d) < cone || c_lo->normal.dot(d) < cone) return false;

  // Lift: the closed gripper and the held target sweep straight up without
  // touching any other body. Pairs already touching before the lift are
  // reconstruction contact, not a lift collision.
  const Vec3 lift(0.0, 0.0, kLiftHeight);
  const double lo = (c_lo->point - pose.translation).dot(y), hi = (c_hi->point - pose.translation).dot(y);
  for (const Obb& box : gripper_boxes(g, pose, lo, hi))
    for (const auto& body : world.bodies())
      if (&body != target && detail::box_hits_hulls(box, body, lift)) return false;
  for (const auto& body : world.bodies()) {
    if (&body == target || !Aabb{target->box.min, target->box.max + lift}.overlaps(body.box)) continue;
    for (const auto& th : target->hulls)
      for (const auto& bh : body.hulls) {
        if (th.empty() || bh.empty() || gjk_intersect(PointSetSupport{th}, PointSetSupport{bh})) continue;
        if (gjk_intersect(PointSetSupport{th, lift}, PointSetSupport{bh})) return false;
      }
  }
  return true;
}

inline RigidPose jitter_pose(const RigidPose& pose, const JitterModel& jitter, Rng& rng) {
  Vec3 dt, dr;
  for (int i = 0; i < 3; ++i) dt[i] = jitter.sigma_trans * gaussian(rng);
  for (int i = 0; i < 3; ++i) dr[i] = jitter.sigma_rot * gaussian(rng);
  RigidPose out = pose;
  const double angle = dr.norm();
  if (angle > 0.0) out.rotation = Eigen::AngleAxisd(angle, dr / angle).toRotationMatrix() * pose.rotation;
  out.translation += dt;
  return out;
}

// Trials share nothing but the seed, so labels are independent of the order
// or thread in which candidates are evaluated. A candidate whose nominal
// approach already collides scores zero.
inline GraspLabel evaluate_grasp(const GraspWorld& world, const GraspCandidate& candidate, const GripperModel& g,
                                 int trials, const JitterModel& jitter, uint64_t seed) {
  g.validate();
  jitter.validate();
  require(trials >= 1, "trials must be >= 1");
  GraspLabel label;
  label.candidate = candidate;
  label.trials = trials;
  const GraspWorld::Body* target = world.find(candidate.target_instance);
  if (target != nullptr && detail::approach_clear(world, *target, g, candidate.pose)) {
    for (int t = 0; t < trials; ++t) {
      Rng rng = make_rng(seed, "grasp-trial", static_cast<uint64_t>(t));
      if (grasp_trial(world, candidate.target_instance, g, jitter_pose(candidate.pose, jitter, rng))) ++label.successes;
    }
  }
  label.mean_success = static_cast<double>(label.successes) / static_cast<double>(trials);
  return label;
}

inline GraspLabel evaluate_grasp(const SceneReplica& scene, const GraspCandidate& candidate, const GripperModel& g,
                                 int trials, const JitterModel& jitter, uint64_t seed) {
  return evaluate_grasp(GraspWorld(scene), candidate, g, trials, jitter, seed);
}

// Candidate i is evaluated with its own stream derived from (seed, i).
inline std::vector<GraspLabel> evaluate_grasps(const GraspWorld& world, std::span<const GraspCandidate> candidates,
                                               const GripperModel& g, int trials, const JitterModel& jitter,
                                               uint64_t seed, unsigned threads = 1) {
  std::vector<GraspLabel> out(candidates.size());
  parallel_for(candidates.size(), threads, [&](size_t i) {
    out[i] = evaluate_grasp(world, candidates[i], g, trials, jitter, stream_seed(seed, "grasp-candidate", i));
  });
  return out;
}

// Antipodal sampling: a surface point, the opposite wall along the inward
// normal, and an approach direction drawn uniformly from the half circle
// orthogonal to the closing axis that does not come from below.
inline std::vector<GraspCandidate> sample_grasps(const GraspWorld& world, int target_instance, const GripperModel& g,
                                                 int n_candidates, uint64_t seed) {
  g.validate();
  require(n_candidates >= 1, "n_candidates must be >= 1");
  const GraspWorld::Body* target = world.find(target_instance);
  require(target != nullptr, "target instance " + std::to_string(target_instance) + " is not in the scene");
  const TriangleMesh& mesh = target->bvh.mesh();
  Rng surface_rng = make_rng(seed, "grasp-surface", static_cast<uint64_t>(target_instance));
  Rng approach_rng = make_rng(seed, "grasp-approach", static_cast<uint64_t>(target_instance));
  const double cone = g.cone_cos();
  constexpr double kSelfHit = 1e-6;
  const size_t budget = static_cast<size_t>(kProposalsPerCandidate) * static_cast<size_t>(n_candidates);
  const size_t batch = std::max<size_t>(256, 4 * static_cast<size_t>(n_candidates));
  std::vector<GraspCandidate> out;
  std::vector<SurfaceSample> pool;
  size_t used = 0;
  for (size_t proposal = 0; proposal < budget && out.size() < static_cast<size_t>(n_candidates); ++proposal) {
    if (used == pool.size()) {
      pool = sample_surface(mesh, batch, surface_rng);
      used = 0;
      if (pool.empty()) break;
    }
    const SurfaceSample& s = pool[used++];
    const Vec3 inward = -s.normal;
    const auto hit = target->bvh.intersect(s.point, inward, kSelfHit, g.max_opening);
    if (!hit || hit->t <= kSelfHit) continue;
    const Vec3 c = inward;  // closing axis, from s.point toward the opposite wall
    if (hit->normal.dot(c) < cone) continue;
    const Vec3 u = std::abs(c.z()) < 0.9 ? c.cross(Vec3::UnitZ()).normalized() : c.cross(Vec3::UnitX()).normalized();
    const Vec3 v = c.cross(u);
    const double theta = uniform(approach_rng, 0.0, 2.0 * kPi);
    Vec3 a = std::cos(theta) * u + std::sin(theta) * v;
    if (a.z() > 0.0) a = -a;
    GraspCandidate cand;
    cand.target_instance = target_instance;
    cand.opening = hit->t;
    cand.pose.rotation.col(0) = c.cross(a);
    cand.pose.rotation.col(1) = c;
    cand.pose.rotation.col(2) = a;
    cand.pose.translation = s.point + 0.5 * hit->t * c;
    out.push_back(cand);
  }
  if (out.empty())
    throw Error(ErrorKind::NoCandidates, "no antipodal grasp found on instance " + std::to_string(target_instance) +
                                             " after " + std::to_string(budget) + " proposals");
  return out;
}

inline std::vector<GraspCandidate> sample_grasps(const SceneReplica& scene, int target_instance, const GripperModel& g,
                                                 int n_candidates, uint64_t seed) {
  return sample_grasps(GraspWorld(scene), target_instance, g, n_candidates, seed);
}

// positive <=> mean_success >= threshold; order preserved.
inline std::vector<GraspLabel> filter_labels(std::vector<GraspLabel> labels, double threshold = 0.7) {
  require(threshold >= 0.0 && threshold <= 1.0, "threshold must lie in [0, 1]");
  for (auto& l : labels) l.positive = l.mean_success >= threshold;
  return labels;
}

inline size_t count_positive(std::span<const GraspLabel> labels) {
  return static_cast<size_t>(std::count_if(labels.begin(), labels.end(), [](const auto& l) { return l.positive; }));
}

// ---------------------------------------------------------------------------
// Per-scene labelling

struct LabelingOptions {
  GripperModel gripper;
  JitterModel jitter;
  int candidates_per_object = 64;
  int trials = 10;
  double threshold = 0.7;
  unsigned threads = 1;
};

struct SceneLabels {
  std::vector<GraspLabel> labels;  // grouped by ascending instance id
  std::vector<std::string> warnings;
};

inline SceneLabels label_scene(const GraspWorld& world, const LabelingOptions& opt, uint64_t seed) {
  SceneLabels out;
  for (const auto& body : world.bodies()) {
    const uint64_t object_seed = stream_seed(seed, "grasp-object", static_cast<uint64_t>(body.instance_id));
    std::vector<GraspCandidate> candidates;
    try {
      candidates = sample_grasps(world, body.instance_id, opt.gripper, opt.candidates_per_object, object_seed);
    } catch (const Error& e) {
      out.warnings.push_back("instance " + std::to_string(body.instance_id) + ": " + e.what());
      continue;
    }
    auto labels = filter_labels(
        evaluate_grasps(world, candidates, opt.gripper, opt.trials, opt.jitter, object_seed, opt.threads), opt.threshold);
    out.labels.insert(out.labels.end(), labels.begin(), labels.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Voxel label grids

struct VoxelGridSpec {
  int dimension = 40;
  double voxel_size = 0.0075;

  void validate() const {
    require(dimension >= 1, "grid dimension must be >= 1");
    require(voxel_size > 0.0, "voxel_size must be positive");
  }
  double span() const { return dimension * voxel_size; }
  size_t cell_count() const {
    const auto d = static_cast<size_t>(dimension);
    return d * d * d;
  }
};

struct VoxelCell {
  int label = -1;  // index of the representative positive label; -1 = negative
  double mean_success = 0.0;
  Mat4 pose = Mat4::Identity();

  bool positive() const { return label >= 0; }
};

struct VoxelLabelGrid {
  VoxelGridSpec spec;
  Vec3 origin = Vec3::Zero();  // grid centre in world
  std::vector<VoxelCell> cells;
  size_t claims = 0;        // in-grid positive labels
  size_t out_of_grid = 0;   // positive labels outside the grid, skipped

  size_t cell_index(int i, int j, int k) const {
    const auto d = static_cast<size_t>(spec.dimension);
    return (static_cast<size_t>(k) * d + static_cast<size_t>(j)) * d + static_cast<size_t>(i);
  }
  const VoxelCell& at(int i, int j, int k) const { return cells[cell_index(i, j, k)]; }

  // Voxel containing world point p, if inside the grid.
  std::optional<std::array<int, 3>> voxel_of(const Vec3& p) const {
    std::array<int, 3> v;
    for (int a = 0; a < 3; ++a) {
      const double f = std::floor((p[a] - origin[a]) / spec.voxel_size + 0.5 * spec.dimension);
      if (!(f >= 0.0 && f < spec.dimension)) return std::nullopt;
      v[static_cast<size_t>(a)] = static_cast<int>(f);
    }
    return v;
  }

  size_t positive_count() const {
    return static_cast<size_t>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.positive(); }));
  }
  size_t negative_count() const { return cells.size() - positive_count(); }
};

// Positive labels claim the voxel holding their translation; each voxel keeps
// the claim with the highest mean success (lowest index on ties). Every
// unclaimed voxel is negative.
inline VoxelLabelGrid rasterize_labels(std::span<const GraspLabel> labels, const Vec3& center,
                                       const VoxelGridSpec& spec = {}) {
  spec.validate();
  VoxelLabelGrid grid;
  grid.spec = spec;
  grid.origin = center;
  grid.cells.assign(spec.cell_count(), VoxelCell{});
  for (size_t i = 0; i < labels.size(); ++i) {
    const GraspLabel& l = labels[i];
    if (!l.positive) continue;
    const auto v = grid.voxel_of(l.candidate.pose.translation);
    if (!v) {
      ++grid.out_of_grid;
      continue;
    }
    ++grid.claims;
    VoxelCell& cell = grid.cells[grid.cell_index((*v)[0], (*v)[1], (*v)[2])];
    if (!cell.positive() || l.mean_success > cell.mean_success) {
      cell.label = static_cast<int>(i);
      cell.mean_success = l.mean_success;
      cell.pose = l.candidate.pose.matrix();
    }
  }
  return grid;
}

// One grid per object, centred on its bounding box and fed with that
// object's labels only.
inline std::map<int, VoxelLabelGrid> rasterize_scene(const SceneReplica& replica, std::span<const GraspLabel> labels,
                                                     const VoxelGridSpec& spec = {}) {
  std::map<int, VoxelLabelGrid> out;
  for (const auto& o : replica.objects) {
    std::vector<GraspLabel> mine;
    for (const auto& l : labels)
      if (l.candidate.target_instance == o.instance_id) mine.push_back(l);
    out.emplace(o.instance_id, rasterize_labels(mine, bounds(o.mesh).center(), spec));
  }
  return out;
}

}  // namespace r2s
