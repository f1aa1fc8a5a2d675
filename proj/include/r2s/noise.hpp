#pragma once

#include "r2s/camera.hpp"

namespace r2s {

// Structured-light depth noise: axial Gaussian with depth-dependent spread,
// lateral pixel jitter, quantisation and random dropout.
struct DepthNoiseModel {
  double axial_a = 0.0;            // m
  double axial_b = 0.0;            // 1/m, scales (z - 0.4)^2
  double lateral_sigma = 0.0;      // px
  double dropout_rate = 0.0;       // probability per valid pixel
  double quantization_step = 0.0;  // m; 0 disables

  static DepthNoiseModel off() { return {}; }
  static DepthNoiseModel kinect_default() { return {0.0012, 0.0019, 0.5, 0.01, 0.001}; }

  double sigma_z(double z) const { return axial_a + axial_b * (z - 0.4) * (z - 0.4); }

  bool is_off() const {
    return axial_a == 0.0 && axial_b == 0.0 && lateral_sigma == 0.0 && dropout_rate == 0.0 &&
           quantization_step == 0.0;
  }

  void validate() const {
    require(axial_a >= 0.0 && axial_b >= 0.0, "axial noise coefficients must be non-negative");
    require(lateral_sigma >= 0.0, "lateral_sigma must be non-negative");
    require(dropout_rate >= 0.0 && dropout_rate <= 1.0, "dropout_rate must lie in [0, 1]");
    require(quantization_step >= 0.0, "quantization_step must be non-negative");
  }

  bool operator==(const DepthNoiseModel&) const = default;
};

namespace detail {

// Bilinear depth read at a sub-pixel location; NaN when the location is off
// the raster or any contributing pixel is invalid.
inline double bilinear_depth(const Raster<float>& depth, double x, double y) {
  if (!(x >= 0.0 && y >= 0.0 && x <= depth.width - 1 && y <= depth.height - 1)) return kNaN;
  const int x0 = std::min(static_cast<int>(std::floor(x)), std::max(depth.width - 2, 0));
  const int y0 = std::min(static_cast<int>(std::floor(y)), std::max(depth.height - 2, 0));
  const int x1 = std::min(x0 + 1, depth.width - 1), y1 = std::min(y0 + 1, depth.height - 1);
  const double fx = x - x0, fy = y - y0;
  const double d00 = depth.at(x0, y0), d10 = depth.at(x1, y0), d01 = depth.at(x0, y1), d11 = depth.at(x1, y1);
  for (double d : {d00, d10, d01, d11})
    if (!valid_depth(static_cast<float>(d))) return kNaN;
  return (1 - fy) * ((1 - fx) * d00 + fx * d10) + fy * ((1 - fx) * d01 + fx * d11);
}

}  // namespace detail

// Each pixel draws from its own stream keyed by its raster index, so the
// output does not depend on evaluation order or thread count.
inline DepthObservation inject_depth_noise(const DepthObservation& obs, const DepthNoiseModel& model, uint64_t seed,
                                           unsigned threads = 1) {
  obs.validate();
  model.validate();
  DepthObservation out = obs;
  if (model.is_off()) return out;
  const int w = obs.depth.width;
  parallel_for(static_cast<size_t>(obs.depth.height), threads, [&](size_t row) {
    const int v = static_cast<int>(row);
    for (int u = 0; u < w; ++u) {
      const float original = obs.depth.at(u, v);
      if (!valid_depth(original)) continue;
      Rng rng = make_rng(seed, "depth-noise", static_cast<uint64_t>(v) * static_cast<uint64_t>(w) + static_cast<uint64_t>(u));
      double d = original;
      if (model.lateral_sigma > 0.0) {
        const double du = model.lateral_sigma * gaussian(rng);
        const double dv = model.lateral_sigma * gaussian(rng);
        d = detail::bilinear_depth(obs.depth, u + du, v + dv);
      }
      if (std::isfinite(d) && (model.axial_a > 0.0 || model.axial_b > 0.0)) d += model.sigma_z(d) * gaussian(rng);
      if (std::isfinite(d) && model.quantization_step > 0.0)
        d = std::round(d / model.quantization_step) * model.quantization_step;
      if (model.dropout_rate > 0.0 && uniform01(rng) < model.dropout_rate) d = kNaN;
      out.depth.at(u, v) = std::isfinite(d) && d > 0.0 ? static_cast<float>(d) : kInvalidDepth;
    }
  });
  return out;
}

}  // namespace r2s
