#include "support.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <map>

namespace r2s {
namespace {

namespace fs = std::filesystem;
using test::TempDir;

struct CliResult {
  int code = -1;
  std::string err;
};

CliResult run_cli(const std::string& args, const fs::path& scratch) {
  const fs::path err = scratch / "stderr.txt";
  const std::string cmd = std::string("\"") + R2S_CLI_PATH + "\" " + args + " 2>\"" + err.string() + "\" >/dev/null";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (fs::exists(err)) r.err = io::read_text(err);
  return r;
}

// Every regular file under root except the run manifest, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
    out[fs::relative(e.path(), root).string()] = io::read_text(e.path());
  }
  return out;
}

TEST(Cli, UsageErrorsExitOne) {
  TempDir dir("cli-usage");
  EXPECT_EQ(run_cli("", dir.path()).code, 1);
  EXPECT_EQ(run_cli("gen-scene --bogus 3 --out " + (dir / "a").string(), dir.path()).code, 1);
  EXPECT_EQ(run_cli("gen-scene --threads 0 --out " + (dir / "a").string(), dir.path()).code, 1);
  const auto missing_out = run_cli("gen-scene --seed 1", dir.path());
  EXPECT_EQ(missing_out.code, 1);
  EXPECT_NE(missing_out.err.find("--out"), std::string::npos);
  const auto missing_in = run_cli("render --scene " + (dir / "nope.json").string() + " --out " + (dir / "b").string(),
                                  dir.path());
  EXPECT_EQ(missing_in.code, 1);
  EXPECT_FALSE(fs::exists(dir / "b" / "manifest.json"));
}

TEST(Cli, BlankObservationsReportNoObjects) {
  TempDir dir("cli-blank");
  DepthObservation obs;
  obs.intrinsics = CameraIntrinsics::from_fov(16, 12, 1.0);
  obs.pose = RigidPose::look_at(Vec3(0, 0, 1), Vec3::Zero(), Vec3::UnitY());
  obs.depth = Raster<float>(16, 12, 1.0f);
  obs.segmentation = Raster<uint16_t>(16, 12, 0);
  io::write_observations(dir / "obs", std::vector<DepthObservation>{obs});
  const auto r = run_cli("reconstruct --observations " + (dir / "obs").string() + " --out " + (dir / "rec").string(),
                         dir.path());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("NoObjects"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "rec" / "replica.json"));
  EXPECT_FALSE(fs::exists(dir / "rec" / ".r2s-staging"));
}

TEST(Cli, GenSceneWritesOnlyUnderOut) {
  TempDir dir("cli-gen");
  const auto r = run_cli("gen-scene --seed 7 --objects 3 --out " + (dir / "out").string(), dir.path());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "out" / "scene.json"));
  const auto manifest = io::read_json(dir / "out" / "manifest.json");
  EXPECT_EQ(manifest.at("seeds").at("root"), 7);
  EXPECT_EQ(io::read_scene(dir / "out" / "scene.json").objects.size(), 3u);
  EXPECT_FALSE(fs::exists(dir / "out" / ".r2s-staging"));
  const auto scene = generate_scene(3, 7);
  EXPECT_EQ(io::read_scene(dir / "out" / "scene.json").objects[2].pose, scene.objects[2].pose);
}

TEST(Cli, NoiseStageKeepsCleanViews) {
  TempDir dir("cli-noise");
  const std::string out = (dir / "run").string();
  ASSERT_EQ(run_cli("gen-scene --seed 2 --objects 2 --out " + out, dir.path()).code, 0);
  ASSERT_EQ(run_cli("render --scene " + out + "/scene.json --cameras 2 --width 64 --height 48 --out " + out,
                    dir.path()).code, 0);
  const std::string clean = io::read_text(dir / "run" / "observations" / "view_000.depth");
  const auto r = run_cli("noise --observations " + out + "/observations --seed 2 --out " + out, dir.path());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(io::read_text(dir / "run" / "observations" / "view_000.depth"), clean);
  const std::string noisy = io::read_text(dir / "run" / "observations_noisy" / "view_000.depth");
  EXPECT_EQ(noisy.size(), clean.size());
  EXPECT_NE(noisy, clean);
}

TEST(Cli, ConfigFileFlagsWin) {
  TempDir dir("cli-config");
  io::write_json(dir / "cfg.json", {{"seed", 3}, {"objects", 2}});
  auto r = run_cli("gen-scene --config " + (dir / "cfg.json").string() + " --objects 4 --out " + (dir / "o").string(),
                   dir.path());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto scene = io::read_scene(dir / "o" / "scene.json");
  EXPECT_EQ(scene.objects.size(), 4u);
  EXPECT_EQ(scene.objects[0].pose, generate_scene(4, 3).objects[0].pose);
  io::write_json(dir / "bad.json", {{"objects", "many"}});
  r = run_cli("gen-scene --config " + (dir / "bad.json").string() + " --out " + (dir / "p").string(), dir.path());
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, PipelineIndependentOfThreadCount) {
  TempDir dir("cli-pipeline");
  const std::string common =
      "pipeline --seed 5 --objects 2 --cameras 3 --width 160 --height 120 --candidates 8 --trials 3 "
      "--mise-final 64 --samples 2000 --out ";
  auto a = run_cli(common + (dir / "a").string() + " --threads 1", dir.path());
  ASSERT_EQ(a.code, 0) << a.err;
  auto b = run_cli(common + (dir / "b").string() + " --threads 3", dir.path());
  ASSERT_EQ(b.code, 0) << b.err;
  const auto sa = snapshot(dir / "a"), sb = snapshot(dir / "b");
  EXPECT_TRUE(sa.count("labels.jsonl"));
  EXPECT_TRUE(sa.count("replica.json"));
  EXPECT_TRUE(sa.count("report.json"));
  ASSERT_EQ(sa.size(), sb.size());
  for (const auto& [name, bytes] : sa) {
    ASSERT_TRUE(sb.count(name)) << name;
    EXPECT_TRUE(bytes == sb.at(name)) << name << " differs";
  }
}

}  // namespace
}  // namespace r2s
