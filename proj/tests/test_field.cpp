#include "support.hpp"

#include <gtest/gtest.h>

namespace r2s {
namespace {

// Locates the 0.5 crossing between an inside point and an outside point.
double bisect(const OccupancyField& f, const Vec3& in, const Vec3& out) {
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f.eval(in + mid * (out - in)) >= 0.5 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<Vec3> unit_directions(size_t n, uint64_t seed) {
  Rng rng = make_rng(seed, "directions");
  std::vector<Vec3> out;
  for (size_t i = 0; i < n; ++i) {
    Vec3 d(gaussian(rng), gaussian(rng), gaussian(rng));
    out.push_back(d.normalized());
  }
  return out;
}

TEST(Primitives, SphereValues) {
  const auto f = sphere_field(0.3);
  EXPECT_EQ(f.eval(Vec3::Zero()), 1.0);
  EXPECT_DOUBLE_EQ(f.eval(Vec3(0.3, 0, 0)), 0.5);
  EXPECT_EQ(f.eval(Vec3(0.5, 0, 0)), 0.0);
}

TEST(Primitives, UnionTakesMaximum) {
  const auto u = union_field(sphere_field(0.2), box_field(Vec3(0.3, 0.1, 0.1)));
  EXPECT_EQ(u.eval(Vec3(0.25, 0, 0)), 1.0);
  EXPECT_EQ(sphere_field(0.2).eval(Vec3(0.25, 0, 0)), 0.0);
}

TEST(Primitives, FieldAndComplementNeverBothInside) {
  const auto a = union_field(sphere_field(0.25), translated_field(cylinder_field(0.1, 0.3), Vec3(0.1, 0, 0)));
  const auto both = intersection_field(a, complement_field(a));
  for (int i = -14; i <= 14; ++i)
    for (int j = -14; j <= 14; ++j)
      for (int k = -14; k <= 14; ++k) {
        const Vec3 p(0.05 * i, 0.05 * j, 0.05 * k);
        const double v = both.eval(p);
        EXPECT_LE(v, 0.5);
        EXPECT_DOUBLE_EQ(v, std::min(a.eval(p), 1.0 - a.eval(p)));
      }
}

TEST(Primitives, ValuesInUnitIntervalOverPaddedCube) {
  const auto f = intersection_field(box_field(Vec3(0.3, 0.2, 0.25)), halfspace_field(Vec3(1, 1, 0), 0.1));
  for (int i = -7; i <= 7; ++i)
    for (int j = -7; j <= 7; ++j)
      for (int k = -7; k <= 7; ++k) {
        const double v = f.eval(Vec3(0.1 * i, 0.1 * j, 0.1 * k));
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
}

TEST(Primitives, RejectNonPositiveDimensions) {
  EXPECT_THROW(sphere_field(0.0), Error);
  EXPECT_THROW(box_field(Vec3(0.1, -0.1, 0.1)), Error);
  EXPECT_THROW(cylinder_field(0.1, 0.0), Error);
  EXPECT_THROW(halfspace_field(Vec3::Zero(), 0.0), Error);
  EXPECT_THROW(OccupancyField{}.eval(Vec3::Zero()), Error);
}

TEST(Primitives, BisectionFindsAnalyticSurface) {
  const auto dirs = unit_directions(200, 1);
  const Vec3 half(0.3, 0.2, 0.1);
  const Vec3 shift(0.05, -0.02, 0.0);
  struct Case {
    OccupancyField f;
    std::function<double(const Vec3&)> sd;
    Vec3 inside;
  };
  const std::vector<Case> cases = {
      {sphere_field(0.3), [](const Vec3& p) { return sdf::sphere(p, 0.3); }, Vec3::Zero()},
      {box_field(half), [&](const Vec3& p) { return sdf::box(p, half); }, Vec3::Zero()},
      {cylinder_field(0.2, 0.25), [](const Vec3& p) { return sdf::cylinder(p, 0.2, 0.25); }, Vec3::Zero()},
      {translated_field(sphere_field(0.2), shift), [&](const Vec3& p) { return sdf::sphere(p - shift, 0.2); }, shift},
  };
  for (const auto& c : cases)
    for (const Vec3& d : dirs) {
      const Vec3 out = c.inside + 0.65 * d;
      const double t = bisect(c.f, c.inside, out);
      EXPECT_LT(std::abs(c.sd(c.inside + t * (out - c.inside))), 1e-6);
    }
}

TEST(Primitives, BatchMatchesPointwise) {
  const auto f = union_field(sphere_field(0.2), box_field(Vec3(0.3, 0.05, 0.1)));
  Rng rng = make_rng(2, "batch");
  std::vector<Vec3> q;
  for (int i = 0; i < 10000; ++i) q.emplace_back(uniform(rng, -0.7, 0.7), uniform(rng, -0.7, 0.7), uniform(rng, -0.7, 0.7));
  const auto one = f.eval(q, 1), four = f.eval(q, 4);
  for (size_t i = 0; i < q.size(); ++i) {
    ASSERT_EQ(one[i], f.eval(q[i]));
    ASSERT_EQ(four[i], one[i]);
  }
}

// Dense enough that neighbour spacing sits well inside the lateral reach.
ObjectCloud canonical_sphere_cloud(size_t n, uint64_t seed) { return test::sphere_cloud(Vec3::Zero(), 0.3, n, seed); }

TEST(FittedField, LevelSetTracksSampledSphere) {
  const auto f = fit_field(canonical_sphere_cloud(20000, 1));
  for (const Vec3& d : unit_directions(1000, 5)) {
    const double t = bisect(f, Vec3::Zero(), 0.6 * d);
    EXPECT_NEAR(0.6 * t, 0.3, 0.01);
  }
}

TEST(FittedField, CloudPointsSitNearHalf) {
  const auto cloud = canonical_sphere_cloud(20000, 2);
  const auto f = fit_field(cloud);
  for (size_t i = 0; i < cloud.size(); i += 37) {
    const double v = f.eval(cloud.points[i]);
    EXPECT_GE(v, 0.4);
    EXPECT_LE(v, 0.6);
  }
}

TEST(FittedField, FarOutsideEmptyDeepInsideFull) {
  const auto f = fit_field(canonical_sphere_cloud(3000, 3));
  for (const Vec3& d : unit_directions(100, 6)) EXPECT_LT(f.eval(0.6 * d), 0.1);  // twice the hull radius
  EXPECT_GT(f.eval(Vec3::Zero()), 0.9);
  EXPECT_GT(f.eval(Vec3(0.1, -0.05, 0.08)), 0.9);
}

TEST(FittedField, OrientationFallsBackToCentroid) {
  ObjectCloud c = canonical_sphere_cloud(3000, 4);
  c.viewpoints.clear();
  const auto oriented = estimate_normals(c, 20);
  for (size_t i = 0; i < c.size(); i += 11) EXPECT_GT(oriented.normals[i].dot(c.points[i].normalized()), 0.9);
  const auto f = fit_field(c);
  EXPECT_GT(f.eval(Vec3::Zero()), 0.9);
  EXPECT_LT(f.eval(Vec3(0.5, 0.0, 0.0)), 0.1);
}

TEST(FittedField, RigidInvariant) {
  const ObjectCloud c = canonical_sphere_cloud(2000, 7);
  ObjectCloud base = c;
  for (Vec3& p : base.points) p = p.cwiseProduct(Vec3(1.0, 0.7, 0.5));  // anisotropic, so rotation matters
  for (size_t i = 0; i < base.size(); ++i) base.viewpoints[i] = 4.0 * base.points[i];
  const Mat3 r = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  ObjectCloud rotated = base;
  for (Vec3& p : rotated.points) p = r * p;
  for (Vec3& v : rotated.viewpoints) v = r * v;
  const auto fa = fit_field(base), fb = fit_field(rotated);
  Rng rng = make_rng(1, "rigid");
  for (int i = 0; i < 500; ++i) {
    const Vec3 q(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5));
    EXPECT_NEAR(fa.eval(q), fb.eval(r * q), 1e-6);
  }
}

TEST(FittedField, TooFewPoints) {
  try {
    fit_field(canonical_sphere_cloud(10, 1));
    FAIL() << "expected TooFewPoints";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooFewPoints);
  }
  FittedFieldParams bad;
  bad.neighbor_count = 2;
  EXPECT_THROW(fit_field(canonical_sphere_cloud(100, 1), bad), Error);
  bad = {};
  bad.sharpness = 0.0;
  EXPECT_THROW(fit_field(canonical_sphere_cloud(100, 1), bad), Error);
}

TEST(FittedField, DeterministicAcrossThreads) {
  const ObjectCloud c = canonical_sphere_cloud(2000, 8);
  const auto fa = fit_field(c, {}, 1), fb = fit_field(c, {}, 3);
  std::vector<Vec3> q;
  for (const Vec3& d : unit_directions(300, 9)) q.push_back(0.31 * d);
  EXPECT_EQ(fa.eval(q, 1), fb.eval(q, 3));
}

}  // namespace
}  // namespace r2s
