#pragma once

#include "r2s/cloud.hpp"
#include "r2s/shapes.hpp"

#include <map>

namespace r2s {

// Pinhole model. Pixel (u, v) has its centre at image coordinates (u, v),
// so the pixel at (cx, cy) looks straight down the optical axis.
struct CameraIntrinsics {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  int width = 1, height = 1;

  void validate() const {
    require(fx > 0 && fy > 0, "focal lengths must be positive");
    require(width > 0 && height > 0, "raster dimensions must be positive");
    require(cx >= 0 && cx < width && cy >= 0 && cy < height, "principal point must lie inside the raster");
  }

  static CameraIntrinsics from_fov(int width, int height, double hfov_rad) {
    CameraIntrinsics k;
    k.width = width;
    k.height = height;
    k.fx = k.fy = 0.5 * width / std::tan(0.5 * hfov_rad);
    k.cx = 0.5 * (width - 1);
    k.cy = 0.5 * (height - 1);
    return k;
  }
};

// Camera-to-world rigid transform; camera looks along +z, x right, y down.
struct RigidPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 inverse_apply(const Vec3& p) const { return rotation.transpose() * (p - translation); }
  Mat4 matrix() const { return make_transform(rotation, translation); }

  static RigidPose from_matrix(const Mat4& m) {
    RigidPose p;
    p.rotation = m.topLeftCorner<3, 3>();
    p.translation = m.topRightCorner<3, 1>();
    return p;
  }

  void validate() const {
    require((rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-6,
            "pose rotation is not orthonormal");
    require(std::abs(rotation.determinant() - 1.0) < 1e-6, "pose rotation must have determinant +1");
  }

  static RigidPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ()) {
    const Vec3 z = (target - eye).normalized();
    Vec3 y = -up + up.dot(z) * z;
    if (y.norm() < 1e-9) y = Vec3::UnitY() - Vec3::UnitY().dot(z) * z;
    y.normalize();
    const Vec3 x = y.cross(z);
    RigidPose p;
    p.rotation.col(0) = x;
    p.rotation.col(1) = y;
    p.rotation.col(2) = z;
    p.translation = eye;
    return p;
  }
};

template <typename T>
struct Raster {
  int width = 0, height = 0;
  std::vector<T> data;

  Raster() = default;
  Raster(int w, int h, T fill) : width(w), height(h), data(static_cast<size_t>(w) * static_cast<size_t>(h), fill) {}
  T& at(int u, int v) { return data[static_cast<size_t>(v) * static_cast<size_t>(width) + static_cast<size_t>(u)]; }
  const T& at(int u, int v) const {
    return data[static_cast<size_t>(v) * static_cast<size_t>(width) + static_cast<size_t>(u)];
  }
};

inline bool valid_depth(float d) { return std::isfinite(d) && d > 0.0f; }
inline constexpr float kInvalidDepth = std::numeric_limits<float>::quiet_NaN();

struct DepthObservation {
  Raster<float> depth;            // meters along the optical axis; NaN = no return
  Raster<uint16_t> segmentation;  // instance ids; 0 = background / table
  CameraIntrinsics intrinsics;
  RigidPose pose;

  void validate() const {
    intrinsics.validate();
    pose.validate();
    require(depth.width == intrinsics.width && depth.height == intrinsics.height, "depth raster size mismatch");
    require(segmentation.width == depth.width && segmentation.height == depth.height,
            "segmentation raster size mismatch");
  }
};

inline Vec3 pixel_to_camera(const CameraIntrinsics& k, double u, double v, double d) {
  return {(u - k.cx) * d / k.fx, (v - k.cy) * d / k.fy, d};
}

// World point -> (u, v, depth).
inline Vec3 project(const CameraIntrinsics& k, const RigidPose& pose, const Vec3& world) {
  const Vec3 c = pose.inverse_apply(world);
  return {k.fx * c.x() / c.z() + k.cx, k.fy * c.y() / c.z() + k.cy, c.z()};
}

// Per-instance world points from one view; background and invalid pixels
// contribute nothing. Each point records the camera position as viewpoint.
inline std::map<int, ObjectCloud> backproject(const DepthObservation& obs) {
  obs.validate();
  std::map<int, ObjectCloud> out;
  const CameraIntrinsics& k = obs.intrinsics;
  for (int v = 0; v < k.height; ++v)
    for (int u = 0; u < k.width; ++u) {
      const float d = obs.depth.at(u, v);
      const int id = obs.segmentation.at(u, v);
      if (!valid_depth(d) || id == 0) continue;
      ObjectCloud& c = out[id];
      c.instance_id = id;
      c.points.push_back(obs.pose.apply(pixel_to_camera(k, u, v, d)));
      c.viewpoints.push_back(obs.pose.translation);
    }
  return out;
}

// World-frame points of pixels labelled background (the support surface).
inline std::vector<Vec3> backproject_background(const DepthObservation& obs) {
  std::vector<Vec3> out;
  const CameraIntrinsics& k = obs.intrinsics;
  for (int v = 0; v < k.height; ++v)
    for (int u = 0; u < k.width; ++u) {
      const float d = obs.depth.at(u, v);
      if (valid_depth(d) && obs.segmentation.at(u, v) == 0) out.push_back(obs.pose.apply(pixel_to_camera(k, u, v, d)));
    }
  return out;
}

// Exact ray casting against the posed ground-truth meshes and the table
// plane z = table_height.
inline DepthObservation render_depth(const std::vector<PosedShape>& shapes, double table_height,
                                     const CameraIntrinsics& k, const RigidPose& pose, unsigned threads = 1) {
  k.validate();
  pose.validate();
  for (const auto& s : shapes)
    if (s.box.contains(pose.translation))
      throw Error(ErrorKind::InvalidArgument,
                  "camera lies inside the bounding box of object " + std::to_string(s.instance_id));
  DepthObservation obs;
  obs.intrinsics = k;
  obs.pose = pose;
  obs.depth = Raster<float>(k.width, k.height, kInvalidDepth);
  obs.segmentation = Raster<uint16_t>(k.width, k.height, 0);
  const Vec3 origin = pose.translation;
  parallel_for(static_cast<size_t>(k.height), threads, [&](size_t row) {
    const int v = static_cast<int>(row);
    for (int u = 0; u < k.width; ++u) {
      // Unnormalised direction with unit z in camera frame: t equals depth.
      const Vec3 dir = pose.rotation * pixel_to_camera(k, u, v, 1.0);
      double best = std::numeric_limits<double>::infinity();
      int id = 0;
      if (dir.z() < 0.0) {
        const double t = (table_height - origin.z()) / dir.z();
        if (t > 0.0) best = t;
      }
      for (const auto& s : shapes) {
        const auto hit = s.bvh.intersect(origin, dir, 0.0, best);
        if (hit && hit->t < best) {
          best = hit->t;
          id = s.instance_id;
        }
      }
      if (std::isfinite(best)) {
        obs.depth.at(u, v) = static_cast<float>(best);
        obs.segmentation.at(u, v) = static_cast<uint16_t>(id);
      }
    }
  });
  return obs;
}

inline DepthObservation render_depth(const GroundTruthScene& scene, const CameraIntrinsics& k, const RigidPose& pose,
                                     unsigned threads = 1) {
  require(!scene.objects.empty(), "render_depth needs a non-empty scene");
  return render_depth(pose_scene(scene), scene.table_height, k, pose, threads);
}

struct CameraRig {
  CameraIntrinsics intrinsics;
  std::vector<RigidPose> poses;
};

// Cameras evenly spaced on a ring above the table, all aimed at `target`.
inline CameraRig camera_ring(int count, double radius, double height, const Vec3& target,
                             const CameraIntrinsics& intrinsics) {
  require(count >= 1, "camera count must be >= 1");
  CameraRig rig;
  rig.intrinsics = intrinsics;
  for (int i = 0; i < count; ++i) {
    const double a = 2.0 * kPi * (i + 0.125) / count;
    const Vec3 eye = target + Vec3(radius * std::cos(a), radius * std::sin(a), height);
    rig.poses.push_back(RigidPose::look_at(eye, target));
  }
  return rig;
}

}  // namespace r2s
