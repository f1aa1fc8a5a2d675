#include "support.hpp"

#include <gtest/gtest.h>

namespace r2s {
namespace {

TriangleMesh unit_box() { return detail::box_mesh(Vec3::Zero(), Vec3::Ones()); }

TEST(Mesh, BoxMeasures) {
  const TriangleMesh m = unit_box();
  EXPECT_TRUE(is_watertight(m));
  EXPECT_NEAR(surface_area(m), 6.0, 1e-12);
  EXPECT_NEAR(closed_volume(m).value(), 1.0, 1e-12);
  EXPECT_EQ(bounds(m).min, Vec3::Zero());
  EXPECT_EQ(bounds(m).max, Vec3::Ones());
}

TEST(Mesh, OpenMeshHasNoVolume) {
  TriangleMesh m = unit_box();
  m.triangles.pop_back();
  EXPECT_FALSE(is_watertight(m));
  EXPECT_FALSE(closed_volume(m).has_value());
}

TEST(Mesh, WeldMergesDuplicatesAndDropsSlivers) {
  TriangleMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1e-12, 0, 0), Vec3(0.5, 0, 0)};
  m.triangles = {{0, 1, 2}, {3, 2, 1}, {0, 4, 1}};
  weld_and_clean(m);
  // Vertex 3 welds onto 0, turning the second triangle into a reversed copy
  // of the first; the zero-area sliver (0, 4, 1) goes too.
  for (size_t t = 0; t < m.triangles.size(); ++t)
    EXPECT_GE(triangle_area(m.corner(t, 0), m.corner(t, 1), m.corner(t, 2)), 1e-12);
  for (const auto& t : m.triangles) EXPECT_TRUE(t[0] != t[1] && t[1] != t[2] && t[0] != t[2]);
}

TEST(Mesh, WeldKeepsClosedMeshClosed) {
  TriangleMesh m = shape_mesh(ShapeDescriptor::can(0.04, 0.1), 32);
  const size_t before = m.triangles.size();
  weld_and_clean(m);
  EXPECT_TRUE(is_watertight(m));
  EXPECT_EQ(m.triangles.size(), before);
}

TEST(Mesh, ComponentsSplitDisjointParts) {
  TriangleMesh m = unit_box();
  append(m, detail::box_mesh(Vec3(3, 0, 0), Vec3(4, 2, 1)));
  const auto parts = connected_components(m);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_NEAR(closed_volume(parts[0]).value() + closed_volume(parts[1]).value(), 3.0, 1e-12);
}

TEST(Mesh, MinorComponentsDropped) {
  TriangleMesh m = unit_box();
  append(m, detail::box_mesh(Vec3(3, 0, 0), Vec3(3.1, 0.1, 0.1)));
  EXPECT_EQ(connected_components(drop_minor_components(m, 0.05)).size(), 1u);
  EXPECT_EQ(connected_components(drop_minor_components(m, 0.0)).size(), 2u);
  EXPECT_THROW(drop_minor_components(m, 1.5), Error);
}

TEST(Mesh, SamplesLieOnSurface) {
  const TriangleMesh m = unit_box();
  const auto pts = sample_points(m, 2000, 3);
  ASSERT_EQ(pts.size(), 2000u);
  for (const Vec3& p : pts) {
    const double face = std::min(p.cwiseAbs().minCoeff(), (Vec3::Ones() - p).cwiseAbs().minCoeff());
    EXPECT_LT(face, 1e-12);
  }
  EXPECT_EQ(pts, sample_points(m, 2000, 3));
}

TEST(Mesh, TransformedMovesVertices) {
  const Mat4 t = make_transform(2.0 * Mat3::Identity(), Vec3(1, 2, 3));
  const TriangleMesh w = transformed(unit_box(), t, Frame::World);
  EXPECT_EQ(w.frame, Frame::World);
  EXPECT_EQ(bounds(w).min, Vec3(1, 2, 3));
  EXPECT_EQ(bounds(w).max, Vec3(3, 4, 5));
  EXPECT_NEAR(closed_volume(w).value(), 8.0, 1e-12);
}

TEST(Hull, CubeHullHasEightVertices) {
  const ConvexHull h = convex_hull(unit_box().vertices);
  EXPECT_EQ(h.vertices.size(), 8u);
  EXPECT_NEAR(closed_volume(h.mesh()).value(), 1.0, 1e-12);
}

TEST(Hull, ContainsAllInputPoints) {
  Rng rng = make_rng(1, "hull");
  std::vector<Vec3> pts;
  for (int i = 0; i < 500; ++i) pts.emplace_back(gaussian(rng), gaussian(rng), 0.3 * gaussian(rng));
  const TriangleMesh hm = convex_hull(pts).mesh();
  EXPECT_TRUE(is_watertight(hm));
  for (const Vec3& p : pts)
    for (size_t t = 0; t < hm.triangles.size(); ++t)
      EXPECT_LE(face_normal(hm, t).dot(p - hm.corner(t, 0)), 1e-9);
}

}  // namespace
}  // namespace r2s
