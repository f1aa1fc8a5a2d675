#pragma once

#include "r2s/r2s.hpp"

#include <unistd.h>

#include <filesystem>
#include <string>

namespace r2s::test {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(fs::temp_directory_path() / ("r2s-test-" + name + "-" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  fs::path path_;
};

// Uniform samples of a sphere surface, each seen from a viewpoint straight
// out along its normal.
inline ObjectCloud sphere_cloud(const Vec3& center, double radius, size_t n, uint64_t seed, int id = 1) {
  Rng rng = make_rng(seed, "sphere-cloud");
  ObjectCloud c;
  c.instance_id = id;
  for (size_t i = 0; i < n; ++i) {
    Vec3 d(gaussian(rng), gaussian(rng), gaussian(rng));
    d.normalize();
    c.points.push_back(center + radius * d);
    c.viewpoints.push_back(center + 5.0 * radius * d);
  }
  return c;
}

// Replica holding one axis-aligned box resting on the table at z = 0.
inline SceneReplica box_replica(double sx, double sy, double sz, const Vec3& base = Vec3::Zero(), int id = 1) {
  SceneReplica r;
  r.table_height = 0.0;
  PlacedMesh p;
  p.instance_id = id;
  p.mesh = detail::box_mesh(base + Vec3(-sx / 2, -sy / 2, 0.0), base + Vec3(sx / 2, sy / 2, sz));
  p.mesh.frame = Frame::World;
  p.transform = make_transform(Mat3::Identity(), base);
  p.collision_hulls = simplify_collision(p.mesh);
  r.objects.push_back(std::move(p));
  return r;
}

// Top-down face-pair grasp closing along world y on a box of height sz and
// width sy resting at `base`; the jaw midpoint sits 2 cm below the top face.
inline GraspCandidate top_down_grasp(const Vec3& base, double sz, double sy, int id = 1) {
  GraspCandidate c;
  c.target_instance = id;
  c.opening = sy;
  const Vec3 approach = -Vec3::UnitZ(), closing = Vec3::UnitY();
  c.pose.rotation.col(0) = closing.cross(approach);
  c.pose.rotation.col(1) = closing;
  c.pose.rotation.col(2) = approach;
  c.pose.translation = base + Vec3(0.0, 0.0, sz - 0.02);
  return c;
}

}  // namespace r2s::test
