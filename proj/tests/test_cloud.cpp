#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>

namespace r2s {
namespace {

std::vector<Vec3> random_points(size_t n, uint64_t seed, double spread = 1.0) {
  Rng rng = make_rng(seed, "test-points");
  std::vector<Vec3> pts;
  for (size_t i = 0; i < n; ++i)
    pts.emplace_back(uniform(rng, -spread, spread), uniform(rng, -spread, spread), uniform(rng, -spread, spread));
  return pts;
}

// Independent per-point k-NN mean: full sort of all distances.
std::vector<double> knn_means_by_sort(const std::vector<Vec3>& pts, int k) {
  std::vector<double> out;
  for (size_t i = 0; i < pts.size(); ++i) {
    std::vector<double> d;
    for (size_t j = 0; j < pts.size(); ++j)
      if (j != i) d.push_back((pts[i] - pts[j]).norm());
    std::sort(d.begin(), d.end());
    double s = 0.0;
    for (int q = 0; q < k; ++q) s += d[static_cast<size_t>(q)];
    out.push_back(s / k);
  }
  return out;
}

TEST(Fuse, ConcatenatesInOrder) {
  ObjectCloud a, b;
  a.points = {Vec3(0, 0, 0)};
  b.points = {Vec3(1, 1, 1)};
  const ObjectCloud f = fuse(std::vector<ObjectCloud>{a, b});
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f.points[0], Vec3(0, 0, 0));
  EXPECT_EQ(f.points[1], Vec3(1, 1, 1));
}

TEST(Fuse, SingleCloudIsIdentity) {
  const ObjectCloud c = test::sphere_cloud(Vec3::Zero(), 0.1, 50, 1, 4);
  const ObjectCloud f = fuse(std::vector<ObjectCloud>{c});
  EXPECT_EQ(f.points, c.points);
  EXPECT_EQ(f.viewpoints, c.viewpoints);
  EXPECT_EQ(f.instance_id, 4);
}

TEST(Fuse, RejectsMismatchedIds) {
  ObjectCloud a, b;
  a.instance_id = 1;
  b.instance_id = 2;
  EXPECT_THROW(fuse(std::vector<ObjectCloud>{a, b}), Error);
}

TEST(Fuse, FourViewsCoverMostOfASphere) {
  const double r = 0.05;
  SceneObject obj{ShapeDescriptor::sphere(r), upright_pose(0, 0, 0, 0), 1};
  const auto posed = std::vector<PosedShape>{pose_shape(obj, 128)};
  const auto k = CameraIntrinsics::from_fov(160, 120, 55.0 * kPi / 180.0);
  const auto rig = camera_ring(4, 0.55, 0.15, Vec3(0, 0, r), k);
  std::vector<ObjectCloud> views;
  for (const auto& pose : rig.poses) views.push_back(backproject(render_depth(posed, -1.0, k, pose)).at(1));
  const ObjectCloud fused = fuse(views);
  ASSERT_TRUE(fused.has_viewpoints());
  // Coverage: fraction of uniform sphere directions with a fused point
  // within a small cap around them.
  const Vec3 c(0, 0, r);
  const KnnGrid grid(fused.points);
  Rng rng = make_rng(3, "coverage");
  int covered = 0;
  const int probes = 4000;
  for (int i = 0; i < probes; ++i) {
    Vec3 d(gaussian(rng), gaussian(rng), gaussian(rng));
    d.normalize();
    if (std::sqrt(grid.nearest(c + r * d).dist2) < 0.2 * r) ++covered;
  }
  // Oracle: union of the four visible caps. Each camera sees the cap within
  // acos(r / dist) of its direction; the union over four elevated views
  // misses only a polar cap below the horizon.
  int visible = 0;
  Rng rng2 = make_rng(3, "coverage");
  for (int i = 0; i < probes; ++i) {
    Vec3 d(gaussian(rng2), gaussian(rng2), gaussian(rng2));
    d.normalize();
    bool seen = false;
    for (const auto& pose : rig.poses) {
      const Vec3 to_cam = pose.translation - c;
      if (d.dot(to_cam.normalized()) > r / to_cam.norm()) seen = true;
    }
    visible += seen ? 1 : 0;
  }
  EXPECT_GE(covered, visible - probes / 50);
  EXPECT_GT(static_cast<double>(visible) / probes, 0.9);
  EXPECT_GT(static_cast<double>(covered) / probes, 0.9);
}

TEST(Outliers, FarPointIsTheOnlyRemoval) {
  ObjectCloud c = test::sphere_cloud(Vec3::Zero(), 1.0, 100, 2);
  c.points.push_back(Vec3(10, 10, 10));
  c.viewpoints.push_back(Vec3(20, 20, 20));
  const auto res = remove_statistical_outliers(c, {8, 2.0});
  ASSERT_EQ(res.removed.size(), 1u);
  EXPECT_EQ(res.removed[0], 100u);
  EXPECT_EQ(res.cloud.size(), 100u);
  EXPECT_TRUE(res.cloud.has_viewpoints());

  // Same decision from an independent computation of the rule.
  const auto means = knn_means_by_sort(c.points, 8);
  double mu = 0.0;
  for (double m : means) mu += m;
  mu /= means.size();
  double var = 0.0;
  for (double m : means) var += (m - mu) * (m - mu);
  const double limit = mu + 2.0 * std::sqrt(var / (means.size() - 1));
  std::vector<uint32_t> expected;
  for (uint32_t i = 0; i < means.size(); ++i)
    if (means[i] > limit) expected.push_back(i);
  EXPECT_EQ(res.removed, expected);
}

TEST(Outliers, EqualMeansRemoveNothing) {
  ObjectCloud c;
  for (int i = 0; i < 8; ++i) c.points.emplace_back(i & 1 ? 1.0 : -1.0, i & 2 ? 1.0 : -1.0, i & 4 ? 1.0 : -1.0);
  const auto res = remove_statistical_outliers(c, {3, 2.0});
  EXPECT_TRUE(res.removed.empty());
  EXPECT_EQ(res.cloud.points, c.points);
}

TEST(Outliers, SmallAndEmptyCloudsPassThrough) {
  const auto empty = remove_statistical_outliers(ObjectCloud{});
  EXPECT_EQ(empty.cloud.size(), 0u);
  EXPECT_TRUE(empty.removed.empty());
  ObjectCloud few = test::sphere_cloud(Vec3::Zero(), 1.0, 20, 1);
  few.points[0] = Vec3(100, 0, 0);
  const auto res = remove_statistical_outliers(few, {20, 2.0});
  EXPECT_EQ(res.cloud.points, few.points);
  EXPECT_TRUE(res.removed.empty());
}

TEST(Outliers, RejectsBadParameters) {
  const ObjectCloud c = test::sphere_cloud(Vec3::Zero(), 1.0, 30, 1);
  EXPECT_THROW(remove_statistical_outliers(c, {0, 2.0}), Error);
  EXPECT_THROW(remove_statistical_outliers(c, {8, 0.0}), Error);
}

TEST(Outliers, OutputIsSubsetAndNeverGrows) {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    ObjectCloud c;
    c.points = random_points(400, seed);
    for (int i = 0; i < 8; ++i) c.points.push_back(Vec3(5.0 + i, 0, 0));
    const auto first = remove_statistical_outliers(c);
    const auto second = remove_statistical_outliers(first.cloud);
    EXPECT_LE(second.cloud.size(), first.cloud.size());
    size_t j = 0;
    for (const Vec3& p : first.cloud.points) {
      while (j < c.points.size() && c.points[j] != p) ++j;
      ASSERT_LT(j, c.points.size()) << "output point not found in input order";
    }
    EXPECT_EQ(first.cloud.size() + first.removed.size(), c.size());
  }
}

TEST(Outliers, GridAndExactNeighboursAgree) {
  const auto pts = random_points(kExactKnnLimit + 500, 9, 0.2);
  const auto exact = mean_knn_distances(pts, 20, true);
  const auto grid = mean_knn_distances(pts, 20, false);
  ASSERT_EQ(exact.size(), grid.size());
  for (size_t i = 0; i < exact.size(); ++i) ASSERT_EQ(exact[i], grid[i]) << "point " << i;
}

TEST(Normalization, SymmetricCube) {
  std::vector<Vec3> corners;
  for (int i = 0; i < 8; ++i) corners.emplace_back(i & 1 ? 0.5 : -0.5, i & 2 ? 0.5 : -0.5, i & 4 ? 0.5 : -0.5);
  const auto t = compute_normalization(corners);
  EXPECT_EQ(t.center, Vec3::Zero());
  EXPECT_EQ(t.scale, 1.0);
}

TEST(Normalization, HandEvaluatedBounds) {
  const std::vector<Vec3> pts = {Vec3(1, 2, 3), Vec3(3, 6, 7)};
  const auto t = compute_normalization(pts);
  EXPECT_EQ(t.center, Vec3(2, 4, 5));
  EXPECT_EQ(t.scale, 4.0);
  EXPECT_EQ(t.normalize(Vec3(2, 4, 5)), Vec3::Zero());
  EXPECT_EQ(t.denormalize(Vec3(0.25, 0.5, 0.5)), Vec3(3, 6, 7));
}

TEST(Normalization, DegenerateClouds) {
  const std::vector<Vec3> one = {Vec3(1, 2, 3)};
  try {
    compute_normalization(one);
    FAIL() << "expected DegenerateCloud";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateCloud);
  }
  EXPECT_THROW(compute_normalization(std::vector<Vec3>{}), Error);
  const std::vector<Vec3> sliver = {Vec3(0, 0, 0), Vec3(5e-7, 0, 0)};
  EXPECT_THROW(compute_normalization(sliver), Error);
}

TEST(Normalization, FitsUnitCubeAndTouchesIt) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    auto pts = random_points(200, seed, 0.3);
    for (Vec3& p : pts) p = Vec3(0.2, -1.0, 3.0) + Vec3(0.5, 1.0, 2.0).cwiseProduct(p);
    const auto t = compute_normalization(pts);
    const auto n = normalize(pts, t);
    double reach = 0.0;
    for (const Vec3& p : n) {
      EXPECT_LE(p.cwiseAbs().maxCoeff(), 0.5 + 1e-12);
      reach = std::max(reach, p.cwiseAbs().maxCoeff());
    }
    EXPECT_NEAR(reach, 0.5, 1e-12);
  }
}

TEST(Normalization, RoundTripIsExactToRounding) {
  const auto pts = random_points(1000, 4, 0.4);
  const auto t = compute_normalization(pts);
  const auto back = denormalize(normalize(pts, t), t);
  for (size_t i = 0; i < pts.size(); ++i) EXPECT_LE((back[i] - pts[i]).norm(), 1e-9 * std::max(1.0, pts[i].norm()));
}

TEST(Normalization, MatricesAreInverse) {
  const auto pts = random_points(50, 8, 2.0);
  const auto t = compute_normalization(pts);
  EXPECT_LT((t.to_world() * t.to_canonical() - Mat4::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((apply(t.to_canonical(), pts[3]) - t.normalize(pts[3])).norm(), 1e-12);
}

TEST(Normalization, SimilarityEquivariant) {
  const auto pts = random_points(300, 12, 0.1);
  std::vector<Vec3> moved;
  for (const Vec3& p : pts) moved.push_back(3.7 * p + Vec3(-0.4, 1.3, 0.25));
  const auto a = normalize(pts, compute_normalization(pts));
  const auto b = normalize(moved, compute_normalization(moved));
  for (size_t i = 0; i < a.size(); ++i) EXPECT_LT((a[i] - b[i]).norm(), 1e-9);
}

TEST(Normalization, CarriesViewpoints) {
  const ObjectCloud c = test::sphere_cloud(Vec3(1, 2, 3), 0.1, 40, 5, 9);
  const auto t = compute_normalization(c);
  const ObjectCloud n = normalize(c, t);
  ASSERT_TRUE(n.has_viewpoints());
  EXPECT_EQ(n.instance_id, 9);
  EXPECT_LT((n.viewpoints[7] - t.normalize(c.viewpoints[7])).norm(), 1e-15);
}

}  // namespace
}  // namespace r2s
