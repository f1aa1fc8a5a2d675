// Command-line front end: file-to-file pipeline stages.
//
// Exit codes: 0 success, 1 invalid flags or inputs, 2 pipeline failure.
// Diagnostics go to stderr; results only to files under --out.

#include "r2s/r2s.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>

namespace fs = std::filesystem;
using r2s::io::Json;

namespace {

constexpr const char* kToolVersion = "r2s 0.1.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Params {
  uint64_t seed = 0;
  unsigned threads = 1;
  std::string out, config;

  // scene
  int objects = 5;
  double table_height = 0.0;
  double bounds = 0.3;

  // cameras
  int cameras = 4, width = 320, height = 240;
  double fov_deg = 55.0, ring_radius = 0.55, ring_height = 0.65;

  // inputs
  std::string scene, observations, replica, labels, truth;

  std::string noise_profile = "kinect-default";

  // reconstruction
  int mise_initial = 32, mise_final = 128;
  int outlier_k = 20;
  double outlier_std = 2.0;
  bool no_outlier_removal = false;

  // labelling
  std::string gripper;
  int candidates = 64, trials = 10;
  double jitter_trans = 0.003, jitter_rot = 2.0 * r2s::kPi / 180.0, threshold = 0.7;

  // rasterisation
  int grid_dim = 40;
  double voxel_size = 0.0075;

  // evaluation
  int samples = static_cast<int>(r2s::kMetricSamples);
};

// --- option registration ----------------------------------------------------

void add_common(CLI::App* s, Params& p) {
  s->add_option("--seed", p.seed, "Root seed for every random stream");
  s->add_option("--threads", p.threads, "Worker threads (outputs do not depend on it)")->check(CLI::Range(1u, 1024u));
  s->add_option("--out", p.out, "Output directory");
  s->add_option("--config", p.config, "JSON file supplying any flag; command-line flags win");
}

void add_scene(CLI::App* s, Params& p) {
  s->add_option("--objects", p.objects, "Objects per scene")->check(CLI::PositiveNumber);
  s->add_option("--table-height", p.table_height, "Support plane height (m)");
  s->add_option("--bounds", p.bounds, "Half-width of the square placement area (m)")->check(CLI::PositiveNumber);
}

void add_render(CLI::App* s, Params& p) {
  s->add_option("--cameras", p.cameras, "Cameras on the ring")->check(CLI::PositiveNumber);
  s->add_option("--width", p.width, "Raster width (px)")->check(CLI::PositiveNumber);
  s->add_option("--height", p.height, "Raster height (px)")->check(CLI::PositiveNumber);
  s->add_option("--fov", p.fov_deg, "Horizontal field of view (deg)")->check(CLI::Range(1.0, 179.0));
  s->add_option("--ring-radius", p.ring_radius, "Camera ring radius (m)")->check(CLI::PositiveNumber);
  s->add_option("--ring-height", p.ring_height, "Camera height above the table (m)")->check(CLI::PositiveNumber);
}

void add_noise(CLI::App* s, Params& p) {
  s->add_option("--noise-profile", p.noise_profile, "off, kinect-default, or a JSON profile path");
}

void add_reconstruct(CLI::App* s, Params& p) {
  s->add_option("--mise-initial", p.mise_initial, "Initial lattice resolution (power of two)");
  s->add_option("--mise-final", p.mise_final, "Final lattice resolution (power of two)");
  s->add_option("--outlier-k", p.outlier_k, "Neighbours for outlier statistics")->check(CLI::PositiveNumber);
  s->add_option("--outlier-std", p.outlier_std, "Standard deviations above the mean to reject")
      ->check(CLI::PositiveNumber);
  s->add_flag("--no-outlier-removal", p.no_outlier_removal, "Skip statistical outlier removal");
}

void add_label(CLI::App* s, Params& p) {
  s->add_option("--gripper", p.gripper, "JSON gripper model (defaults to a generic parallel jaw)");
  s->add_option("--candidates", p.candidates, "Candidates sampled per object")->check(CLI::PositiveNumber);
  s->add_option("--trials", p.trials, "Jittered trials per candidate")->check(CLI::PositiveNumber);
  s->add_option("--jitter-trans", p.jitter_trans, "Translation jitter sigma (m)")->check(CLI::NonNegativeNumber);
  s->add_option("--jitter-rot", p.jitter_rot, "Rotation jitter sigma (rad)")->check(CLI::NonNegativeNumber);
  s->add_option("--threshold", p.threshold, "Mean success needed for a positive label")->check(CLI::Range(0.0, 1.0));
}

void add_rasterize(CLI::App* s, Params& p) {
  s->add_option("--grid-dim", p.grid_dim, "Voxels per axis")->check(CLI::PositiveNumber);
  s->add_option("--voxel-size", p.voxel_size, "Voxel edge (m)")->check(CLI::PositiveNumber);
}

void add_eval(CLI::App* s, Params& p) {
  s->add_option("--samples", p.samples, "Surface samples per mesh")->check(CLI::PositiveNumber);
}

// Fills options not given on the command line from the --config file.
void apply_config(CLI::App* sub, const std::string& path) {
  if (path.empty()) return;
  if (!fs::exists(path)) throw UsageError("config file not found: " + path);
  const Json cfg = r2s::io::read_json(path);
  if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    CLI::Option* opt = nullptr;
    try {
      opt = sub->get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      continue;  // belongs to another subcommand
    }
    if (opt->count() > 0 || key == "config") continue;
    const std::string text = value.is_string() ? value.get<std::string>() : value.dump();
    opt->add_result(text);
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError("config key '" + key + "': " + e.what());
    }
  }
}

void require_flag(const std::string& value, const std::string& flag) {
  if (value.empty()) throw UsageError("missing required flag " + flag);
}

void require_file(const std::string& path, const std::string& flag) {
  require_flag(path, flag);
  if (!fs::exists(path)) throw UsageError(flag + " refers to a missing path: " + path);
}

// --- stage implementations ---------------------------------------------------

struct Run {
  const Params& p;
  fs::path stage;  // staging directory inside --out
  Json outputs = Json::array();
  Json warnings = Json::array();

  void produced(const std::string& rel) { outputs.push_back(rel); }
  void warn(const std::string& w) {
    std::cerr << "warning: " << w << "\n";
    warnings.push_back(w);
  }
};

r2s::CameraRig make_rig(const Params& p, double table_height) {
  const auto k = r2s::CameraIntrinsics::from_fov(p.width, p.height, p.fov_deg * r2s::kPi / 180.0);
  return r2s::camera_ring(p.cameras, p.ring_radius, p.ring_height, r2s::Vec3(0.0, 0.0, table_height), k);
}

r2s::GroundTruthScene stage_gen_scene(Run& run) {
  const Params& p = run.p;
  r2s::PlacementBounds b{-p.bounds, p.bounds, -p.bounds, p.bounds};
  auto scene = r2s::generate_scene(p.objects, p.seed, b, p.table_height);
  r2s::io::write_scene(run.stage / "scene.json", scene);
  run.produced("scene.json");
  std::cerr << "placed " << scene.objects.size() << " objects\n";
  return scene;
}

std::vector<r2s::DepthObservation> stage_render(Run& run, const r2s::GroundTruthScene& scene) {
  const auto rig = make_rig(run.p, scene.table_height);
  const auto posed = r2s::pose_scene(scene);
  std::vector<r2s::DepthObservation> views;
  for (const auto& pose : rig.poses)
    views.push_back(r2s::render_depth(posed, scene.table_height, rig.intrinsics, pose, run.p.threads));
  r2s::io::write_observations(run.stage / "observations", views);
  run.produced("observations/");
  std::cerr << "rendered " << views.size() << " views\n";
  return views;
}

std::vector<r2s::DepthObservation> stage_noise(Run& run, std::vector<r2s::DepthObservation> views,
                                               const std::string& dir_name) {
  const auto model = r2s::io::noise_profile(run.p.noise_profile);
  for (size_t i = 0; i < views.size(); ++i)
    views[i] = r2s::inject_depth_noise(views[i], model, r2s::stream_seed(run.p.seed, "noise", i), run.p.threads);
  r2s::io::write_observations(run.stage / dir_name, views);
  r2s::io::write_json(run.stage / dir_name / "noise.json", r2s::io::noise_json(model));
  run.produced(dir_name + "/");
  return views;
}

r2s::SceneReplica stage_reconstruct(Run& run, const std::vector<r2s::DepthObservation>& views) {
  const Params& p = run.p;
  r2s::ReplicaOptions opt;
  opt.mise.initial_resolution = p.mise_initial;
  opt.mise.final_resolution = p.mise_final;
  opt.mise.validate();
  opt.outliers = {p.outlier_k, p.outlier_std};
  opt.remove_outliers = !p.no_outlier_removal;
  opt.threads = p.threads;
  auto build = r2s::build_replica(views, opt);
  for (const auto& w : build.warnings) run.warn(w);
  for (const auto& [id, n] : build.outliers_removed)
    std::cerr << "instance " << id << ": " << build.points.at(id) << " points, " << n << " outliers removed\n";
  r2s::io::write_replica(run.stage / "replica.json", build.replica);
  run.produced("replica.json");
  for (const auto& o : build.replica.objects) {
    const std::string stem = "object_" + std::to_string(o.instance_id);
    for (const char* ext : {".ply", ".obj", ".json", "_hulls.ply"}) run.produced(stem + ext);
  }
  return build.replica;
}

r2s::GripperModel load_gripper(const std::string& path) {
  r2s::GripperModel g;
  if (!path.empty()) {
    const Json j = r2s::io::read_json(path);
    g.max_opening = j.value("max_opening", g.max_opening);
    g.finger_depth = j.value("finger_depth", g.finger_depth);
    g.finger_thickness = j.value("finger_thickness", g.finger_thickness);
    g.palm_clearance = j.value("palm_clearance", g.palm_clearance);
    g.friction_mu = j.value("friction_mu", g.friction_mu);
  }
  g.validate();
  return g;
}

std::vector<r2s::GraspLabel> stage_label(Run& run, const r2s::SceneReplica& replica) {
  const Params& p = run.p;
  r2s::LabelingOptions opt;
  opt.gripper = load_gripper(p.gripper);
  opt.jitter = {p.jitter_trans, p.jitter_rot};
  opt.candidates_per_object = p.candidates;
  opt.trials = p.trials;
  opt.threshold = p.threshold;
  opt.threads = p.threads;
  const r2s::GraspWorld world(replica);
  auto result = r2s::label_scene(world, opt, p.seed);
  for (const auto& w : result.warnings) run.warn(w);
  r2s::io::write_labels(run.stage / "labels.jsonl", result.labels);
  run.produced("labels.jsonl");
  std::cerr << result.labels.size() << " labels, " << r2s::count_positive(result.labels) << " positive\n";
  return result.labels;
}

void stage_rasterize(Run& run, const r2s::SceneReplica& replica, const std::vector<r2s::GraspLabel>& labels) {
  const r2s::VoxelGridSpec spec{run.p.grid_dim, run.p.voxel_size};
  for (const auto& [id, grid] : r2s::rasterize_scene(replica, labels, spec)) {
    const std::string stem = "grids/object_" + std::to_string(id);
    r2s::io::write_text(run.stage / (stem + ".vox"), r2s::io::encode_voxel_grid(grid));
    r2s::io::write_json(run.stage / (stem + ".json"), r2s::io::voxel_grid_json(grid));
    run.produced(stem + ".vox");
    run.produced(stem + ".json");
    if (grid.out_of_grid > 0)
      run.warn("instance " + std::to_string(id) + ": " + std::to_string(grid.out_of_grid) +
               " positive labels fall outside the grid");
  }
}

void stage_eval(Run& run, const r2s::SceneReplica& replica, const r2s::GroundTruthScene& truth) {
  const auto report =
      r2s::evaluate_replica(replica, truth, static_cast<size_t>(run.p.samples), run.p.seed, run.p.threads);
  r2s::io::write_json(run.stage / "report.json", r2s::io::report_json(report));
  const std::string table = r2s::format_report(report);
  r2s::io::write_text(run.stage / "report.txt", table);
  run.produced("report.json");
  run.produced("report.txt");
  std::cerr << table;
}

Json params_json(const Params& p, const std::string& sub) {
  Json j = {{"seed", p.seed}, {"threads", p.threads}, {"out", p.out}};
  if (!p.config.empty()) j["config"] = p.config;
  if (sub == "gen-scene" || sub == "pipeline")
    j.update({{"objects", p.objects}, {"table-height", p.table_height}, {"bounds", p.bounds}});
  if (sub == "render" || sub == "pipeline")
    j.update({{"cameras", p.cameras}, {"width", p.width}, {"height", p.height}, {"fov", p.fov_deg},
              {"ring-radius", p.ring_radius}, {"ring-height", p.ring_height}});
  if (sub == "noise" || sub == "pipeline") j["noise-profile"] = p.noise_profile;
  if (sub == "reconstruct" || sub == "pipeline")
    j.update({{"mise-initial", p.mise_initial}, {"mise-final", p.mise_final}, {"outlier-k", p.outlier_k},
              {"outlier-std", p.outlier_std}, {"no-outlier-removal", p.no_outlier_removal}});
  if (sub == "label" || sub == "pipeline") {
    const auto g = load_gripper(p.gripper);
    j.update({{"candidates", p.candidates}, {"trials", p.trials}, {"jitter-trans", p.jitter_trans},
              {"jitter-rot", p.jitter_rot}, {"threshold", p.threshold},
              {"gripper", {{"max_opening", g.max_opening}, {"finger_depth", g.finger_depth},
                           {"finger_thickness", g.finger_thickness}, {"palm_clearance", g.palm_clearance},
                           {"friction_mu", g.friction_mu}}}});
  }
  if (sub == "rasterize" || sub == "pipeline") j.update({{"grid-dim", p.grid_dim}, {"voxel-size", p.voxel_size}});
  if (sub == "eval" || sub == "pipeline") j["samples"] = p.samples;
  for (const auto& [k, v] : {std::pair{"scene", p.scene}, {"observations", p.observations}, {"replica", p.replica},
                             {"labels", p.labels}, {"truth", p.truth}})
    if (!v.empty()) j[k] = v;
  return j;
}

void validate_inputs(const std::string& sub, const Params& p) {
  require_flag(p.out, "--out");
  if (sub == "render") require_file(p.scene, "--scene");
  if (sub == "noise" || sub == "reconstruct") require_file(p.observations, "--observations");
  if (sub == "label") require_file(p.replica, "--replica");
  if (sub == "rasterize") {
    require_file(p.replica, "--replica");
    require_file(p.labels, "--labels");
  }
  if (sub == "eval") {
    require_file(p.replica, "--replica");
    require_file(p.truth, "--truth");
  }
  if (!p.gripper.empty()) require_file(p.gripper, "--gripper");
  if (p.noise_profile != "off" && p.noise_profile != "kinect-default" && (sub == "noise" || sub == "pipeline"))
    require_file(p.noise_profile, "--noise-profile");
  r2s::MiseConfig{p.mise_initial, p.mise_final}.validate();
}

void execute(const std::string& sub, Run& run) {
  const Params& p = run.p;
  if (sub == "gen-scene") {
    stage_gen_scene(run);
  } else if (sub == "render") {
    stage_render(run, r2s::io::read_scene(p.scene));
  } else if (sub == "noise") {
    stage_noise(run, r2s::io::read_observations(p.observations), "observations_noisy");
  } else if (sub == "reconstruct") {
    stage_reconstruct(run, r2s::io::read_observations(p.observations));
  } else if (sub == "label") {
    stage_label(run, r2s::io::read_replica(p.replica));
  } else if (sub == "rasterize") {
    stage_rasterize(run, r2s::io::read_replica(p.replica), r2s::io::read_labels(p.labels));
  } else if (sub == "eval") {
    stage_eval(run, r2s::io::read_replica(p.replica), r2s::io::read_scene(p.truth));
  } else if (sub == "pipeline") {
    const auto scene = stage_gen_scene(run);
    const auto clean = stage_render(run, scene);
    const auto noisy = stage_noise(run, clean, "observations_noisy");
    const auto replica = stage_reconstruct(run, noisy);
    const auto labels = stage_label(run, replica);
    stage_rasterize(run, replica, labels);
    stage_eval(run, replica, scene);
  }
}

// Moves staged outputs into place, replacing earlier results of the same name.
void commit(const fs::path& stage, const fs::path& out) {
  for (const auto& entry : fs::directory_iterator(stage)) {
    const fs::path dst = out / entry.path().filename();
    fs::remove_all(dst);
    fs::rename(entry.path(), dst);
  }
  fs::remove_all(stage);
}

int exit_code_for(r2s::ErrorKind k) {
  return k == r2s::ErrorKind::InvalidArgument || k == r2s::ErrorKind::Io ? 1 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Real-to-sim tabletop replicas and grasp labels from posed depth views"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  Params p;
  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"gen-scene", "Sample a ground-truth tabletop scene"},
      {"render", "Render depth and segmentation views of a scene"},
      {"noise", "Corrupt observations with a depth noise profile"},
      {"reconstruct", "Build a replica from observations"},
      {"label", "Sample and evaluate grasps on a replica"},
      {"rasterize", "Rasterise labels into per-object voxel grids"},
      {"eval", "Compare a replica against its ground-truth scene"},
      {"pipeline", "Run every stage from one seed"},
  };
  for (const auto& s : subs) {
    CLI::App* c = app.add_subcommand(s.name, s.help);
    const std::string n = s.name;
    add_common(c, p);
    if (n == "gen-scene" || n == "pipeline") add_scene(c, p);
    if (n == "render" || n == "pipeline") add_render(c, p);
    if (n == "noise" || n == "pipeline") add_noise(c, p);
    if (n == "reconstruct" || n == "pipeline") add_reconstruct(c, p);
    if (n == "label" || n == "pipeline") add_label(c, p);
    if (n == "rasterize" || n == "pipeline") add_rasterize(c, p);
    if (n == "eval" || n == "pipeline") add_eval(c, p);
    if (n == "render") c->add_option("--scene", p.scene, "Scene JSON");
    if (n == "noise" || n == "reconstruct") c->add_option("--observations", p.observations, "Observation directory");
    if (n == "label" || n == "rasterize" || n == "eval") c->add_option("--replica", p.replica, "Replica JSON");
    if (n == "rasterize") c->add_option("--labels", p.labels, "Labels JSONL");
    if (n == "eval") c->add_option("--truth", p.truth, "Ground-truth scene JSON");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();

  try {
    apply_config(sub, p.config);
    validate_inputs(name, p);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << sub->help();
    return 1;
  } catch (const r2s::Error& e) {
    std::cerr << "error: " << e.what() << "\n\n" << sub->help();
    return 1;
  }

  const auto start = std::chrono::steady_clock::now();
  const fs::path out(p.out);
  const fs::path stage = out / ".r2s-staging";
  Run run{p, stage};
  try {
    fs::remove_all(stage);
    fs::create_directories(stage);
    execute(name, run);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    Json manifest = {{"tool_version", kToolVersion},
                     {"subcommand", name},
                     {"parameters", params_json(p, name)},
                     {"seeds", {{"root", p.seed},
                                {"streams", {"scene", "noise", "grasp-object", "grasp-candidate", "grasp-trial"}}}},
                     {"outputs", run.outputs},
                     {"warnings", run.warnings},
                     {"wall_time_s", wall}};
    r2s::io::write_json(stage / "manifest.json", manifest);
    commit(stage, out);
  } catch (const r2s::Error& e) {
    std::error_code ec;
    fs::remove_all(stage, ec);
    std::cerr << "error: " << r2s::to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::error_code ec;
    fs::remove_all(stage, ec);
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
