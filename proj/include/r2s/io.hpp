#pragma once

#include "r2s/grasp.hpp"
#include "r2s/metrics.hpp"
#include "r2s/noise.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace r2s::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace fs = std::filesystem;
using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Raw files

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorKind::Io, "short write to " + path.string());
}

inline Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Io, "malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

template <typename T>
void append_pod(std::string& buf, const T& v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::string_view buf, size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw Error(ErrorKind::Io, "unexpected end of binary data");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

inline Json matrix_json(const Mat4& m) { return to_row_major(m); }

inline Mat4 matrix_from_json(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 16) throw Error(ErrorKind::Io, "expected 16 matrix entries");
  return from_row_major(v);
}

// ---------------------------------------------------------------------------
// PLY (binary little endian)

namespace detail {

struct PlyProperty {
  std::string name, type, count_type;  // count_type set for list properties
};

struct PlyElement {
  std::string name;
  size_t count = 0;
  std::vector<PlyProperty> props;
};

inline size_t ply_type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32") return 4;
  if (t == "double" || t == "float64") return 8;
  throw Error(ErrorKind::Io, "unsupported PLY type " + t);
}

inline double ply_read_scalar(std::string_view buf, size_t& pos, const std::string& t) {
  if (t == "char" || t == "int8") return read_pod<int8_t>(buf, pos);
  if (t == "uchar" || t == "uint8") return read_pod<uint8_t>(buf, pos);
  if (t == "short" || t == "int16") return read_pod<int16_t>(buf, pos);
  if (t == "ushort" || t == "uint16") return read_pod<uint16_t>(buf, pos);
  if (t == "int" || t == "int32") return read_pod<int32_t>(buf, pos);
  if (t == "uint" || t == "uint32") return read_pod<uint32_t>(buf, pos);
  if (t == "float" || t == "float32") return read_pod<float>(buf, pos);
  if (t == "double" || t == "float64") return read_pod<double>(buf, pos);
  throw Error(ErrorKind::Io, "unsupported PLY type " + t);
}

// Parsed binary PLY: per element, one row of values per item (list
// properties flattened after their count).
struct PlyData {
  std::vector<PlyElement> elements;
  std::map<std::string, std::vector<std::vector<double>>> rows;
};

inline PlyData parse_ply(const std::string& bytes, const std::string& what) {
  const size_t end = bytes.find("end_header\n");
  if (bytes.rfind("ply\n", 0) != 0 || end == std::string::npos) throw Error(ErrorKind::Io, what + " is not a PLY file");
  PlyData d;
  std::istringstream header(bytes.substr(0, end));
  std::string line;
  while (std::getline(header, line)) {
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "binary_little_endian") throw Error(ErrorKind::Io, what + ": only binary_little_endian PLY is supported");
    } else if (kw == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      d.elements.push_back(e);
    } else if (kw == "property") {
      if (d.elements.empty()) throw Error(ErrorKind::Io, what + ": property before element");
      PlyProperty p;
      ls >> p.type;
      if (p.type == "list") ls >> p.count_type >> p.type;
      ls >> p.name;
      ply_type_size(p.type);
      d.elements.back().props.push_back(p);
    }
  }
  const std::string_view body(bytes.data() + end + 11, bytes.size() - end - 11);
  size_t pos = 0;
  for (const auto& e : d.elements) {
    auto& rows = d.rows[e.name];
    rows.reserve(e.count);
    for (size_t i = 0; i < e.count; ++i) {
      std::vector<double> row;
      for (const auto& p : e.props) {
        if (p.count_type.empty()) {
          row.push_back(ply_read_scalar(body, pos, p.type));
        } else {
          const auto n = static_cast<size_t>(ply_read_scalar(body, pos, p.count_type));
          row.push_back(static_cast<double>(n));
          for (size_t k = 0; k < n; ++k) row.push_back(ply_read_scalar(body, pos, p.type));
        }
      }
      rows.push_back(std::move(row));
    }
  }
  return d;
}

inline int property_index(const PlyData& d, const std::string& element, const std::string& name) {
  for (const auto& e : d.elements)
    if (e.name == element)
      for (size_t i = 0; i < e.props.size(); ++i)
        if (e.props[i].name == name) return static_cast<int>(i);
  return -1;
}

inline void require_scalar_layout(const PlyData& d, const std::string& element, const std::string& what) {
  for (const auto& e : d.elements)
    if (e.name == element)
      for (const auto& p : e.props)
        if (!p.count_type.empty()) throw Error(ErrorKind::Io, what + ": list property in " + element);
}

}  // namespace detail

// Vertices as float64 so files reproduce in-memory meshes exactly, faces as uchar-counted int32 lists. An optional
// per-vertex uint16 `tag` property (for example a hull index) is appended.
inline std::string encode_mesh_ply(const TriangleMesh& m, const std::vector<uint16_t>* tags = nullptr,
                                   const std::string& tag_name = "hull") {
  std::string out = "ply\nformat binary_little_endian 1.0\ncomment frame " + std::string(to_string(m.frame)) +
                    "\nelement vertex " + std::to_string(m.vertices.size()) +
                    "\nproperty double x\nproperty double y\nproperty double z\n";
  if (tags) out += "property ushort " + tag_name + "\n";
  out += "element face " + std::to_string(m.triangles.size()) + "\nproperty list uchar int vertex_indices\nend_header\n";
  for (size_t i = 0; i < m.vertices.size(); ++i) {
    for (int a = 0; a < 3; ++a) append_pod(out, m.vertices[i][a]);
    if (tags) append_pod(out, (*tags)[i]);
  }
  for (const auto& t : m.triangles) {
    append_pod(out, static_cast<uint8_t>(3));
    for (uint32_t v : t) append_pod(out, static_cast<int32_t>(v));
  }
  return out;
}

inline void write_mesh_ply(const fs::path& path, const TriangleMesh& m) { write_text(path, encode_mesh_ply(m)); }

inline TriangleMesh read_mesh_ply(const fs::path& path) {
  const std::string bytes = read_text(path);
  const detail::PlyData d = detail::parse_ply(bytes, path.string());
  const int x = detail::property_index(d, "vertex", "x"), y = detail::property_index(d, "vertex", "y"),
            z = detail::property_index(d, "vertex", "z");
  if (x < 0 || y < 0 || z < 0) throw Error(ErrorKind::Io, path.string() + ": vertex element lacks x, y, z");
  detail::require_scalar_layout(d, "vertex", path.string());
  TriangleMesh m;
  const std::string_view header(bytes.data(), bytes.find("end_header"));
  m.frame = header.find("comment frame canonical") != std::string_view::npos ? Frame::Canonical : Frame::World;
  if (d.rows.count("vertex"))
    for (const auto& r : d.rows.at("vertex"))
      m.vertices.emplace_back(r[static_cast<size_t>(x)], r[static_cast<size_t>(y)], r[static_cast<size_t>(z)]);
  if (d.rows.count("face"))
    for (const auto& r : d.rows.at("face")) {
      if (r.empty() || r[0] < 3) throw Error(ErrorKind::Io, path.string() + ": face with fewer than 3 vertices");
      // Fan-triangulate polygons.
      for (size_t k = 2; k < static_cast<size_t>(r[0]); ++k)
        m.triangles.push_back({static_cast<uint32_t>(r[1]), static_cast<uint32_t>(r[k]), static_cast<uint32_t>(r[k + 1])});
    }
  for (const auto& t : m.triangles)
    for (uint32_t v : t)
      if (v >= m.vertices.size()) throw Error(ErrorKind::Io, path.string() + ": face index out of range");
  return m;
}

// Convex hulls stored as one PLY: hull triangles, each vertex tagged with
// its hull index.
inline void write_hulls_ply(const fs::path& path, const std::vector<std::vector<Vec3>>& hulls) {
  TriangleMesh all;
  all.frame = Frame::World;
  std::vector<uint16_t> tags;
  for (size_t h = 0; h < hulls.size(); ++h) {
    const ConvexHull hull = convex_hull(hulls[h]);
    const auto base = static_cast<uint32_t>(all.vertices.size());
    all.vertices.insert(all.vertices.end(), hull.vertices.begin(), hull.vertices.end());
    tags.insert(tags.end(), hull.vertices.size(), static_cast<uint16_t>(h));
    for (const auto& f : hull.faces) all.triangles.push_back({base + f[0], base + f[1], base + f[2]});
  }
  write_text(path, encode_mesh_ply(all, &tags));
}

inline std::vector<std::vector<Vec3>> read_hulls_ply(const fs::path& path) {
  const detail::PlyData d = detail::parse_ply(read_text(path), path.string());
  const int x = detail::property_index(d, "vertex", "x"), tag = detail::property_index(d, "vertex", "hull");
  if (x < 0 || tag < 0) throw Error(ErrorKind::Io, path.string() + ": not a hull file");
  std::map<int, std::vector<Vec3>> by_hull;
  if (d.rows.count("vertex"))
    for (const auto& r : d.rows.at("vertex"))
      by_hull[static_cast<int>(r[static_cast<size_t>(tag)])].emplace_back(r[static_cast<size_t>(x)],
                                                                          r[static_cast<size_t>(x) + 1],
                                                                          r[static_cast<size_t>(x) + 2]);
  std::vector<std::vector<Vec3>> out;
  for (auto& [h, pts] : by_hull) out.push_back(std::move(pts));
  return out;
}

inline void write_cloud_ply(const fs::path& path, const ObjectCloud& c) {
  std::string out = "ply\nformat binary_little_endian 1.0\nelement vertex " + std::to_string(c.points.size()) +
                    "\nproperty float x\nproperty float y\nproperty float z\nproperty ushort instance\nend_header\n";
  for (const Vec3& p : c.points) {
    for (int a = 0; a < 3; ++a) append_pod(out, static_cast<float>(p[a]));
    append_pod(out, static_cast<uint16_t>(c.instance_id));
  }
  write_text(path, out);
}

inline ObjectCloud read_cloud_ply(const fs::path& path) {
  const detail::PlyData d = detail::parse_ply(read_text(path), path.string());
  const int x = detail::property_index(d, "vertex", "x"), inst = detail::property_index(d, "vertex", "instance");
  if (x < 0) throw Error(ErrorKind::Io, path.string() + ": vertex element lacks x, y, z");
  ObjectCloud c;
  if (d.rows.count("vertex"))
    for (const auto& r : d.rows.at("vertex")) {
      c.points.emplace_back(r[static_cast<size_t>(x)], r[static_cast<size_t>(x) + 1], r[static_cast<size_t>(x) + 2]);
      if (inst >= 0) c.instance_id = static_cast<int>(r[static_cast<size_t>(inst)]);
    }
  return c;
}

inline void write_mesh_obj(const fs::path& path, const TriangleMesh& m) {
  std::string out = "# frame " + std::string(to_string(m.frame)) + "\n";
  char line[128];
  for (const Vec3& v : m.vertices) {
    std::snprintf(line, sizeof line, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
    out += line;
  }
  for (const auto& t : m.triangles) {
    std::snprintf(line, sizeof line, "f %u %u %u\n", t[0] + 1, t[1] + 1, t[2] + 1);
    out += line;
  }
  write_text(path, out);
}

// Mesh plus its frame sidecar: <stem>.ply, <stem>.obj, <stem>.json.
inline void write_mesh_files(const fs::path& stem, const TriangleMesh& m) {
  write_mesh_ply(fs::path(stem.string() + ".ply"), m);
  write_mesh_obj(fs::path(stem.string() + ".obj"), m);
  write_json(fs::path(stem.string() + ".json"), Json{{"frame", to_string(m.frame)},
                                                     {"vertices", m.vertices.size()},
                                                     {"triangles", m.triangles.size()}});
}

// ---------------------------------------------------------------------------
// Observations: <stem>.depth (float32), <stem>.seg (uint16), <stem>.json.

inline Json intrinsics_json(const CameraIntrinsics& k) {
  return {{"width", k.width}, {"height", k.height}, {"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}};
}

inline CameraIntrinsics intrinsics_from_json(const Json& j) {
  CameraIntrinsics k;
  k.width = j.at("width").get<int>();
  k.height = j.at("height").get<int>();
  k.fx = j.at("fx").get<double>();
  k.fy = j.at("fy").get<double>();
  k.cx = j.at("cx").get<double>();
  k.cy = j.at("cy").get<double>();
  k.validate();
  return k;
}

inline void write_observation(const fs::path& stem, const DepthObservation& obs) {
  obs.validate();
  std::string depth, seg;
  depth.reserve(obs.depth.data.size() * 4);
  for (float d : obs.depth.data) append_pod(depth, d);
  for (uint16_t s : obs.segmentation.data) append_pod(seg, s);
  write_text(fs::path(stem.string() + ".depth"), depth);
  write_text(fs::path(stem.string() + ".seg"), seg);
  Json side = intrinsics_json(obs.intrinsics);
  side["pose"] = matrix_json(obs.pose.matrix());
  write_json(fs::path(stem.string() + ".json"), side);
}

inline DepthObservation read_observation(const fs::path& stem) {
  try {
    const Json side = read_json(fs::path(stem.string() + ".json"));
    DepthObservation obs;
    obs.intrinsics = intrinsics_from_json(side);
    obs.pose = RigidPose::from_matrix(matrix_from_json(side.at("pose")));
    const int w = obs.intrinsics.width, h = obs.intrinsics.height;
    const size_t n = static_cast<size_t>(w) * static_cast<size_t>(h);
    const std::string depth = read_text(fs::path(stem.string() + ".depth"));
    const std::string seg = read_text(fs::path(stem.string() + ".seg"));
    if (depth.size() != n * 4 || seg.size() != n * 2)
      throw Error(ErrorKind::Io, stem.string() + ": raster sizes do not match the sidecar");
    obs.depth = Raster<float>(w, h, 0.0f);
    obs.segmentation = Raster<uint16_t>(w, h, 0);
    std::memcpy(obs.depth.data.data(), depth.data(), depth.size());
    std::memcpy(obs.segmentation.data.data(), seg.data(), seg.size());
    obs.validate();
    return obs;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Io, stem.string() + ": bad sidecar: " + e.what());
  }
}

// Observation stems listed in <dir>/observations.json.
inline std::vector<DepthObservation> read_observations(const fs::path& dir) {
  const Json index = read_json(dir / "observations.json");
  std::vector<DepthObservation> out;
  for (const auto& s : index.at("views")) out.push_back(read_observation(dir / s.get<std::string>()));
  return out;
}

inline void write_observations(const fs::path& dir, std::span<const DepthObservation> views) {
  Json names = Json::array();
  for (size_t i = 0; i < views.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "view_%03zu", i);
    write_observation(dir / stem, views[i]);
    names.push_back(stem);
  }
  write_json(dir / "observations.json", Json{{"views", names}});
}

// ---------------------------------------------------------------------------
// Scenes and replicas

inline Json scene_json(const GroundTruthScene& s) {
  Json objs = Json::array();
  for (const auto& o : s.objects) {
    Json params = Json::object();
    for (const auto& [k, v] : o.shape.params) params[k] = v;
    objs.push_back({{"instance_id", o.instance_id},
                    {"shape", {{"kind", to_string(o.shape.kind)}, {"params", params}}},
                    {"pose", matrix_json(o.pose)}});
  }
  return {{"table_height", s.table_height}, {"objects", objs}};
}

inline GroundTruthScene scene_from_json(const Json& j) {
  try {
    GroundTruthScene s;
    s.table_height = j.at("table_height").get<double>();
    for (const auto& o : j.at("objects")) {
      SceneObject so;
      so.instance_id = o.at("instance_id").get<int>();
      require(so.instance_id > 0, "instance ids must be positive");
      so.shape.kind = shape_kind_from_string(o.at("shape").at("kind").get<std::string>());
      for (const auto& [k, v] : o.at("shape").at("params").items()) so.shape.params[k] = v.get<double>();
      so.pose = matrix_from_json(o.at("pose"));
      s.objects.push_back(std::move(so));
    }
    return s;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Io, std::string("bad scene JSON: ") + e.what());
  }
}

inline void write_scene(const fs::path& path, const GroundTruthScene& s) { write_json(path, scene_json(s)); }
inline GroundTruthScene read_scene(const fs::path& path) { return scene_from_json(read_json(path)); }

// Writes <dir>/<name>.json plus per-object mesh and hull files beside it.
inline void write_replica(const fs::path& path, const SceneReplica& r) {
  const fs::path dir = path.parent_path();
  Json objs = Json::array();
  for (const auto& o : r.objects) {
    const std::string stem = "object_" + std::to_string(o.instance_id);
    write_mesh_files(dir / stem, o.mesh);
    write_hulls_ply(dir / (stem + "_hulls.ply"), o.collision_hulls);
    objs.push_back({{"instance_id", o.instance_id},
                    {"mesh_file", stem + ".ply"},
                    {"transform", matrix_json(o.transform)},
                    {"hulls_file", stem + "_hulls.ply"}});
  }
  write_json(path, Json{{"table_height", r.table_height}, {"objects", objs}});
}

inline SceneReplica read_replica(const fs::path& path) {
  const Json j = read_json(path);
  const fs::path dir = path.parent_path();
  try {
    SceneReplica r;
    r.table_height = j.at("table_height").get<double>();
    for (const auto& o : j.at("objects")) {
      PlacedMesh m;
      m.instance_id = o.at("instance_id").get<int>();
      m.mesh = read_mesh_ply(dir / o.at("mesh_file").get<std::string>());
      m.mesh.frame = Frame::World;
      m.transform = matrix_from_json(o.at("transform"));
      m.collision_hulls = read_hulls_ply(dir / o.at("hulls_file").get<std::string>());
      r.objects.push_back(std::move(m));
    }
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Io, path.string() + ": bad replica JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Grasp labels (JSON Lines) and voxel grids

inline Json label_json(const GraspLabel& l) {
  return {{"instance", l.candidate.target_instance},
          {"pose", matrix_json(l.candidate.pose.matrix())},
          {"opening", l.candidate.opening},
          {"trials", l.trials},
          {"successes", l.successes},
          {"mean_success", l.mean_success},
          {"positive", l.positive}};
}

inline GraspLabel label_from_json(const Json& j) {
  GraspLabel l;
  l.candidate.target_instance = j.at("instance").get<int>();
  l.candidate.pose = RigidPose::from_matrix(matrix_from_json(j.at("pose")));
  l.candidate.opening = j.at("opening").get<double>();
  l.trials = j.at("trials").get<int>();
  l.successes = j.at("successes").get<int>();
  l.mean_success = j.at("mean_success").get<double>();
  l.positive = j.at("positive").get<bool>();
  return l;
}

inline void write_labels(const fs::path& path, std::span<const GraspLabel> labels) {
  std::string out;
  for (const auto& l : labels) out += label_json(l).dump() + "\n";
  write_text(path, out);
}

inline std::vector<GraspLabel> read_labels(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<GraspLabel> out;
  std::string line;
  size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(label_from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::Io, path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

// Binary layout: "R2SVOXL1", int32 dimension, float64 voxel_size,
// float64 origin[3], then per cell (index order i fastest) uint8 label
// (1 positive, 0 negative), float32 mean_success, float32 pose[16].
inline std::string encode_voxel_grid(const VoxelLabelGrid& g) {
  std::string out = "R2SVOXL1";
  append_pod(out, static_cast<int32_t>(g.spec.dimension));
  append_pod(out, g.spec.voxel_size);
  for (int a = 0; a < 3; ++a) append_pod(out, g.origin[a]);
  for (const auto& c : g.cells) {
    append_pod(out, static_cast<uint8_t>(c.positive() ? 1 : 0));
    append_pod(out, static_cast<float>(c.mean_success));
    for (double v : to_row_major(c.pose)) append_pod(out, static_cast<float>(v));
  }
  return out;
}

inline VoxelLabelGrid decode_voxel_grid(std::string_view bytes) {
  if (bytes.substr(0, 8) != "R2SVOXL1") throw Error(ErrorKind::Io, "not a voxel grid file");
  size_t pos = 8;
  VoxelLabelGrid g;
  g.spec.dimension = read_pod<int32_t>(bytes, pos);
  g.spec.voxel_size = read_pod<double>(bytes, pos);
  g.spec.validate();
  for (int a = 0; a < 3; ++a) g.origin[a] = read_pod<double>(bytes, pos);
  g.cells.resize(g.spec.cell_count());
  for (auto& c : g.cells) {
    const bool positive = read_pod<uint8_t>(bytes, pos) != 0;
    c.mean_success = read_pod<float>(bytes, pos);
    std::vector<double> m(16);
    for (double& v : m) v = read_pod<float>(bytes, pos);
    c.pose = from_row_major(m);
    c.label = positive ? 0 : -1;
  }
  if (pos != bytes.size()) throw Error(ErrorKind::Io, "trailing bytes after voxel grid");
  return g;
}

inline Json voxel_grid_json(const VoxelLabelGrid& g) {
  Json cells = Json::array();
  const int d = g.spec.dimension;
  for (int k = 0; k < d; ++k)
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) {
        const VoxelCell& c = g.at(i, j, k);
        if (c.positive())
          cells.push_back({{"voxel", {i, j, k}}, {"label", c.label}, {"mean_success", c.mean_success},
                           {"pose", matrix_json(c.pose)}});
      }
  return {{"dimension", d},
          {"voxel_size", g.spec.voxel_size},
          {"origin", {g.origin.x(), g.origin.y(), g.origin.z()}},
          {"positive", g.positive_count()},
          {"negative", g.negative_count()},
          {"claims", g.claims},
          {"out_of_grid", g.out_of_grid},
          {"positive_cells", cells}};
}

// ---------------------------------------------------------------------------
// Noise model and report

inline Json noise_json(const DepthNoiseModel& m) {
  return {{"axial_a", m.axial_a},
          {"axial_b", m.axial_b},
          {"lateral_sigma", m.lateral_sigma},
          {"dropout_rate", m.dropout_rate},
          {"quantization_step", m.quantization_step}};
}

inline DepthNoiseModel noise_from_json(const Json& j) {
  DepthNoiseModel m;
  try {
    m.axial_a = j.value("axial_a", 0.0);
    m.axial_b = j.value("axial_b", 0.0);
    m.lateral_sigma = j.value("lateral_sigma", 0.0);
    m.dropout_rate = j.value("dropout_rate", 0.0);
    m.quantization_step = j.value("quantization_step", 0.0);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("bad noise profile: ") + e.what());
  }
  m.validate();
  return m;
}

// "off", "kinect-default", or a path to a JSON profile.
inline DepthNoiseModel noise_profile(const std::string& spec) {
  if (spec == "off") return DepthNoiseModel::off();
  if (spec == "kinect-default") return DepthNoiseModel::kinect_default();
  if (!fs::exists(spec)) throw Error(ErrorKind::InvalidArgument, "unknown noise profile '" + spec + "'");
  return noise_from_json(read_json(spec));
}

inline Json report_json(const ReconstructionReport& r) {
  Json objs = Json::array();
  for (const auto& o : r.objects) {
    Json j = {{"instance_id", o.instance_id}, {"reconstructed", o.reconstructed}};
    if (o.reconstructed) {
      j["chamfer_distance"] = o.chamfer_distance;
      j["hausdorff_distance"] = o.hausdorff_distance;
      j["volume_ratio"] = o.volume_ratio ? Json(*o.volume_ratio) : Json(nullptr);
      j["bbox_iou"] = o.bbox_iou;
    }
    objs.push_back(j);
  }
  return {{"object_recall", r.object_recall}, {"samples_per_mesh", r.samples}, {"objects", objs}};
}

}  // namespace r2s::io
