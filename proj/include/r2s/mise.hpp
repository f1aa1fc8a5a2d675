#pragma once

#include "r2s/detail/mc_tables.hpp"
#include "r2s/field.hpp"
#include "r2s/mesh.hpp"

#include <unordered_map>

namespace r2s {

// Cubic lattice of resolution^3 cells over [lo, lo + span]^3. Node
// coordinates are lo + span * i / resolution on every axis, so a coarse node
// and the fine node it coincides with have bit-identical coordinates.
struct LatticeSpec {
  int resolution = 1;
  double lo = -0.6;
  double span = 1.2;

  size_t nodes_per_axis() const { return static_cast<size_t>(resolution) + 1; }
  size_t node_count() const { return nodes_per_axis() * nodes_per_axis() * nodes_per_axis(); }
  double coord(int i) const { return lo + span * static_cast<double>(i) / static_cast<double>(resolution); }
  Vec3 node(int i, int j, int k) const { return {coord(i), coord(j), coord(k)}; }
  size_t node_index(int i, int j, int k) const {
    const size_t n = nodes_per_axis();
    return (static_cast<size_t>(k) * n + static_cast<size_t>(j)) * n + static_cast<size_t>(i);
  }
  double cell_size() const { return span / resolution; }

  static LatticeSpec padded_unit_cube(int resolution, double padding) {
    return {resolution, -0.5 - padding, 1.0 + 2.0 * padding};
  }
};

struct SampledLattice {
  LatticeSpec spec;
  std::vector<double> values;  // node_count() entries, indexed by node_index

  double at(int i, int j, int k) const { return values[spec.node_index(i, j, k)]; }
};

inline SampledLattice sample_lattice(const OccupancyField& field, const LatticeSpec& spec, unsigned threads = 1) {
  std::vector<Vec3> nodes;
  nodes.reserve(spec.node_count());
  const int n = spec.resolution;
  for (int k = 0; k <= n; ++k)
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i) nodes.push_back(spec.node(i, j, k));
  return {spec, field.eval(nodes, threads)};
}

namespace detail {

struct CellCoord {
  int i, j, k;
};

// Marching cubes over the listed cells, visited in the given order. Corner
// values come from `value(i, j, k)`. Vertices are shared through a key made
// of the lower edge endpoint and the edge axis, so identical cell lists give
// identical meshes.
template <typename ValueFn>
TriangleMesh march_cells(const LatticeSpec& spec, const std::vector<CellCoord>& cells, ValueFn&& value,
                         double threshold) {
  TriangleMesh mesh;
  mesh.frame = Frame::Canonical;
  std::unordered_map<uint64_t, uint32_t> edge_vertex;
  double v[8];
  for (const CellCoord& c : cells) {
    int cube = 0;
    for (int q = 0; q < 8; ++q) {
      const auto& o = kCornerOffset[q];
      v[q] = value(c.i + o[0], c.j + o[1], c.k + o[2]);
      if (v[q] < threshold) cube |= 1 << q;
    }
    if (cube == 0 || cube == 255) continue;
    auto vertex_on = [&](int e) {
      const int a = kEdgeCorners[e][0], b = kEdgeCorners[e][1];
      const auto& oa = kCornerOffset[a];
      const auto& ob = kCornerOffset[b];
      const int axis = ob[0] != oa[0] ? 0 : (ob[1] != oa[1] ? 1 : 2);
      const int ai = c.i + oa[0], aj = c.j + oa[1], ak = c.k + oa[2];
      const int bi = c.i + ob[0], bj = c.j + ob[1], bk = c.k + ob[2];
      const double t = (threshold - v[a]) / (v[b] - v[a]);
      const uint64_t key = static_cast<uint64_t>(spec.node_index(ai, aj, ak)) * 3 + static_cast<uint64_t>(axis);
      const auto [it, inserted] = edge_vertex.try_emplace(key, static_cast<uint32_t>(mesh.vertices.size()));
      if (inserted) {
        const Vec3 pa = spec.node(ai, aj, ak);
        const Vec3 pb = spec.node(bi, bj, bk);
        mesh.vertices.push_back(pa + t * (pb - pa));
      }
      return it->second;
    };
    const auto& row = kTriTable[static_cast<size_t>(cube)];
    for (int t = 0; t < 16 && row[static_cast<size_t>(t)] >= 0; t += 3) {
      const uint32_t x = vertex_on(row[static_cast<size_t>(t)]);
      const uint32_t y = vertex_on(row[static_cast<size_t>(t) + 1]);
      const uint32_t z = vertex_on(row[static_cast<size_t>(t) + 2]);
      // Table order is counter-clockwise seen from the low-occupancy side.
      mesh.triangles.push_back({x, y, z});
    }
  }
  weld_and_clean(mesh);
  return mesh;
}

}  // namespace detail

// Dense marching cubes. Normals face decreasing occupancy.
inline TriangleMesh marching_cubes(const SampledLattice& grid, double threshold = 0.5) {
  const LatticeSpec& spec = grid.spec;
  require(spec.resolution >= 1, "lattice needs at least 2 samples per axis");
  require(grid.values.size() == spec.node_count(), "lattice value count does not match its spec");
  for (double x : grid.values) require(std::isfinite(x), "lattice values must be finite");
  std::vector<detail::CellCoord> cells;
  cells.reserve(static_cast<size_t>(spec.resolution) * spec.resolution * spec.resolution);
  for (int k = 0; k < spec.resolution; ++k)
    for (int j = 0; j < spec.resolution; ++j)
      for (int i = 0; i < spec.resolution; ++i) cells.push_back({i, j, k});
  return detail::march_cells(spec, cells, [&](int i, int j, int k) { return grid.at(i, j, k); }, threshold);
}

// ---------------------------------------------------------------------------
// Multiresolution extraction

struct MiseConfig {
  int initial_resolution = 32;
  int final_resolution = 128;
  double threshold = 0.5;
  double padding = 0.1;

  void validate() const {
    auto pow2 = [](int x) { return x > 0 && (x & (x - 1)) == 0; };
    require(pow2(initial_resolution), "initial_resolution must be a power of two");
    require(pow2(final_resolution), "final_resolution must be a power of two");
    require(final_resolution >= initial_resolution, "final_resolution must be >= initial_resolution");
    require(threshold > 0.0 && threshold < 1.0, "threshold must lie in (0, 1)");
    require(padding >= 0.0, "padding must be non-negative");
  }

  LatticeSpec final_lattice() const { return LatticeSpec::padded_unit_cube(final_resolution, padding); }
};

struct MiseResult {
  TriangleMesh mesh;
  size_t evaluations = 0;        // distinct lattice nodes evaluated
  size_t dense_evaluations = 0;  // nodes of the dense final lattice
};

// `hints` are canonical points the surface is known to pass near (the fitted
// cloud); coarse cells holding one are refined even when their corners agree,
// so features thinner than a coarse cell are not skipped. Hints only add
// refined cells, so the result still matches the dense extraction.
inline MiseResult extract_mesh_with_stats(const OccupancyField& field, const MiseConfig& cfg, unsigned threads = 1,
                                          std::span<const Vec3> hints = {}) {
  cfg.validate();
  const LatticeSpec fine = cfg.final_lattice();
  const int R = cfg.final_resolution;
  std::vector<double> values(fine.node_count(), kNaN);
  MiseResult res;
  res.dense_evaluations = fine.node_count();

  // Evaluate the corners of `cells` (given at resolution R/step) that are
  // still unknown, in ascending node order.
  std::vector<uint8_t> pending(fine.node_count(), 0);
  auto evaluate_corners = [&](const std::vector<detail::CellCoord>& cells, int step) {
    std::vector<size_t> todo;
    for (const auto& c : cells)
      for (const auto& o : detail::kCornerOffset) {
        const size_t idx = fine.node_index((c.i + o[0]) * step, (c.j + o[1]) * step, (c.k + o[2]) * step);
        if (std::isnan(values[idx]) && !pending[idx]) {
          pending[idx] = 1;
          todo.push_back(idx);
        }
      }
    std::sort(todo.begin(), todo.end());
    std::vector<Vec3> pts;
    pts.reserve(todo.size());
    const size_t n = fine.nodes_per_axis();
    for (size_t idx : todo)
      pts.push_back(fine.node(static_cast<int>(idx % n), static_cast<int>((idx / n) % n), static_cast<int>(idx / (n * n))));
    const std::vector<double> out = field.eval(pts, threads);
    for (size_t t = 0; t < todo.size(); ++t) {
      values[todo[t]] = out[t];
      pending[todo[t]] = 0;
    }
    res.evaluations += todo.size();
  };

  int n = cfg.initial_resolution;
  std::vector<detail::CellCoord> cells;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) cells.push_back({i, j, k});

  while (true) {
    const int step = R / n;
    evaluate_corners(cells, step);
    if (n == R) break;
    // Mark cells whose corners straddle the threshold, then dilate by one.
    auto straddles = [&](const detail::CellCoord& c) {
      bool below = false, above = false;
      for (const auto& o : detail::kCornerOffset) {
        const double x = values[fine.node_index((c.i + o[0]) * step, (c.j + o[1]) * step, (c.k + o[2]) * step)];
        (x < cfg.threshold ? below : above) = true;
      }
      return below && above;
    };
    const size_t nn = static_cast<size_t>(n);
    std::vector<uint8_t> active(nn * nn * nn, 0);
    auto cell_id = [&](int i, int j, int k) { return (static_cast<size_t>(k) * nn + static_cast<size_t>(j)) * nn + static_cast<size_t>(i); };
    bool any = false;
    auto mark = [&](const detail::CellCoord& c) {
      any = true;
      for (int dk = -1; dk <= 1; ++dk)
        for (int dj = -1; dj <= 1; ++dj)
          for (int di = -1; di <= 1; ++di) {
            const int i = c.i + di, j = c.j + dj, k = c.k + dk;
            if (i >= 0 && j >= 0 && k >= 0 && i < n && j < n && k < n) active[cell_id(i, j, k)] = 1;
          }
    };
    for (const auto& c : cells)
      if (straddles(c)) mark(c);
    const double h = fine.span / n;
    for (const Vec3& p : hints) {
      int idx[3];
      bool inside = true;
      for (int a = 0; a < 3; ++a) {
        const double f = std::floor((p[a] - fine.lo) / h);
        inside = inside && f >= 0.0 && f < n;
        idx[a] = static_cast<int>(f);
      }
      if (inside) mark({idx[0], idx[1], idx[2]});
    }
    if (!any) throw Error(ErrorKind::EmptyField, "occupancy field never crosses the threshold");
    std::vector<detail::CellCoord> next;
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
          if (active[cell_id(i, j, k)])
            for (const auto& o : detail::kCornerOffset) next.push_back({2 * i + o[0], 2 * j + o[1], 2 * k + o[2]});
    std::sort(next.begin(), next.end(), [](const auto& a, const auto& b) {
      return std::tie(a.k, a.j, a.i) < std::tie(b.k, b.j, b.i);
    });
    cells = std::move(next);
    n *= 2;
  }

  // Close the final active set under face crossings: a cell whose face has
  // corners on both sides of the threshold pulls in the neighbour across that
  // face, so no surface leaves through an unmarched cell and closed fields
  // stay watertight even where the coarse pass missed a small feature.
  {
    const size_t rr = static_cast<size_t>(R);
    auto cell_id = [&](const detail::CellCoord& c) {
      return (static_cast<size_t>(c.k) * rr + static_cast<size_t>(c.j)) * rr + static_cast<size_t>(c.i);
    };
    std::vector<uint8_t> active(rr * rr * rr, 0);
    for (const auto& c : cells) active[cell_id(c)] = 1;
    auto below = [&](int i, int j, int k) { return values[fine.node_index(i, j, k)] < cfg.threshold; };
    std::vector<detail::CellCoord> frontier = cells;
    while (!frontier.empty()) {
      std::vector<detail::CellCoord> added;
      for (const auto& c : frontier)
        for (int axis = 0; axis < 3; ++axis)
          for (int side = 0; side < 2; ++side) {
            // Corners of the face at offset `side` along `axis`.
            int lo = 0, hi = 0;
            for (int a = 0; a < 2; ++a)
              for (int b = 0; b < 2; ++b) {
                int o[3];
                o[axis] = side;
                o[(axis + 1) % 3] = a;
                o[(axis + 2) % 3] = b;
                (below(c.i + o[0], c.j + o[1], c.k + o[2]) ? lo : hi)++;
              }
            if (lo == 0 || hi == 0) continue;
            detail::CellCoord nb = c;
            int* coord[3] = {&nb.i, &nb.j, &nb.k};
            *coord[axis] += side == 0 ? -1 : 1;
            if (*coord[axis] < 0 || *coord[axis] >= R || active[cell_id(nb)]) continue;
            active[cell_id(nb)] = 1;
            added.push_back(nb);
          }
      evaluate_corners(added, 1);
      frontier = std::move(added);
    }
    cells.clear();
    for (int k = 0; k < R; ++k)
      for (int j = 0; j < R; ++j)
        for (int i = 0; i < R; ++i)
          if (active[cell_id({i, j, k})]) cells.push_back({i, j, k});
  }

  res.mesh = detail::march_cells(
      fine, cells, [&](int i, int j, int k) { return values[fine.node_index(i, j, k)]; }, cfg.threshold);
  if (res.mesh.triangles.empty()) throw Error(ErrorKind::EmptyField, "no active cell at final resolution");
  return res;
}

inline TriangleMesh extract_mesh(const OccupancyField& field, const MiseConfig& cfg = {}, unsigned threads = 1,
                                 std::span<const Vec3> hints = {}) {
  return extract_mesh_with_stats(field, cfg, threads, hints).mesh;
}

}  // namespace r2s
