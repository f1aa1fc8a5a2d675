#include "support.hpp"

#include <gtest/gtest.h>

namespace r2s {
namespace {

std::vector<Vec3> plane_grid(int n, double z) {
  std::vector<Vec3> out;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.emplace_back((i + 0.5) / n, (j + 0.5) / n, z);
  return out;
}

TEST(Chamfer, IdenticalSetsAreZero) {
  const auto a = test::sphere_cloud(Vec3::Zero(), 1.0, 500, 1).points;
  EXPECT_EQ(chamfer_distance(a, a), 0.0);
  EXPECT_EQ(hausdorff_distance(a, a), 0.0);
}

TEST(Chamfer, ParallelPlanesGiveOffset) {
  const double d = 0.05;
  EXPECT_NEAR(chamfer_distance(plane_grid(100, 0.0), plane_grid(100, d)), d, 0.02 * d);
}

TEST(Chamfer, SparseSubsetBoundedBySpacing) {
  const auto dense = test::sphere_cloud(Vec3::Zero(), 1.0, 20000, 2).points;
  std::vector<Vec3> sparse;
  for (size_t i = 0; i < dense.size(); i += 40) sparse.push_back(dense[i]);
  // Covering radius of the sparse set over the dense one.
  const KnnGrid grid(sparse);
  double spacing = 0.0;
  for (const Vec3& p : dense) spacing = std::max(spacing, std::sqrt(grid.nearest(p).dist2));
  const double c = chamfer_distance(sparse, dense);
  EXPECT_GT(c, 0.0);
  EXPECT_LE(c, spacing);
}

TEST(Chamfer, SymmetricAndNonNegative) {
  const auto a = test::sphere_cloud(Vec3::Zero(), 1.0, 700, 3).points;
  const auto b = test::sphere_cloud(Vec3(0.1, 0, 0), 0.9, 400, 4).points;
  EXPECT_DOUBLE_EQ(chamfer_distance(a, b), chamfer_distance(b, a));
  EXPECT_DOUBLE_EQ(hausdorff_distance(a, b), hausdorff_distance(b, a));
  EXPECT_GT(chamfer_distance(a, b), 0.0);
  EXPECT_GE(hausdorff_distance(a, b), chamfer_distance(a, b));
}

TEST(Chamfer, EmptySetRejected) {
  const std::vector<Vec3> a = {Vec3::Zero()}, none;
  try {
    chamfer_distance(a, none);
    FAIL() << "expected EmptySet";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptySet);
  }
  EXPECT_THROW(hausdorff_distance(none, a), Error);
}

TEST(BboxIou, HandValues) {
  const Aabb unit{Vec3::Zero(), Vec3::Ones()};
  const Aabb shifted{Vec3(0.5, 0, 0), Vec3(1.5, 1, 1)};
  const Aabb far{Vec3(3, 3, 3), Vec3(4, 4, 4)};
  EXPECT_DOUBLE_EQ(bbox_iou(unit, unit), 1.0);
  EXPECT_DOUBLE_EQ(bbox_iou(unit, far), 0.0);
  EXPECT_NEAR(bbox_iou(unit, shifted), 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(bbox_iou(shifted, unit), bbox_iou(unit, shifted));
  EXPECT_THROW(bbox_iou(Aabb{}, unit), Error);
}

TEST(BboxIou, InUnitInterval) {
  Rng rng = make_rng(5, "iou");
  for (int i = 0; i < 200; ++i) {
    Aabb a, b;
    for (int k = 0; k < 2; ++k) {
      a.extend(Vec3(uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1)));
      b.extend(Vec3(uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1)));
    }
    const double v = bbox_iou(a, b);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_DOUBLE_EQ(v, bbox_iou(b, a));
  }
}

TEST(EvaluateReplica, ExactReplicaScoresWell) {
  const auto scene = generate_scene(3, 4);
  SceneReplica replica;
  for (const auto& o : scene.objects) {
    PlacedMesh p;
    p.instance_id = o.instance_id;
    p.mesh = transformed(shape_mesh(o.shape), o.pose, Frame::World);
    replica.objects.push_back(p);
  }
  const auto report = evaluate_replica(replica, scene, 5000, 1);
  EXPECT_EQ(report.object_recall, 1.0);
  EXPECT_EQ(report.samples, 5000u);
  for (const auto& o : report.objects) {
    EXPECT_TRUE(o.reconstructed);
    EXPECT_LT(o.chamfer_distance, 0.002);
    EXPECT_GT(o.bbox_iou, 0.99);
    EXPECT_GE(o.hausdorff_distance, o.chamfer_distance);
  }
  const std::string table = format_report(report);
  EXPECT_NE(table.find("object_recall 1.000"), std::string::npos);
}

TEST(EvaluateReplica, MissingObjectLowersRecall) {
  const auto scene = generate_scene(2, 9);
  SceneReplica replica;
  PlacedMesh p;
  p.instance_id = scene.objects[0].instance_id;
  p.mesh = transformed(shape_mesh(scene.objects[0].shape), scene.objects[0].pose, Frame::World);
  replica.objects.push_back(p);
  const auto report = evaluate_replica(replica, scene, 2000, 1);
  EXPECT_DOUBLE_EQ(report.object_recall, 0.5);
  EXPECT_FALSE(report.objects[1].reconstructed);
  EXPECT_NE(format_report(report).find("missing"), std::string::npos);
}

TEST(EvaluateReplica, VolumeRatioOnlyForClosedMeshes) {
  SceneObject box{ShapeDescriptor::box(0.05, 0.05, 0.05), upright_pose(0, 0, 0, 0), 1};
  const GroundTruthScene scene{{box}, 0.0};
  SceneReplica replica;
  PlacedMesh p;
  p.instance_id = 1;
  p.mesh = transformed(shape_mesh(box.shape), box.pose, Frame::World);
  replica.objects.push_back(p);
  EXPECT_NEAR(evaluate_replica(replica, scene, 1000).objects[0].volume_ratio.value(), 1.0, 1e-9);
  replica.objects[0].mesh.triangles.pop_back();
  EXPECT_FALSE(evaluate_replica(replica, scene, 1000).objects[0].volume_ratio.has_value());
}

}  // namespace
}  // namespace r2s
