#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "volsplat");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = volsplat::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spill(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

constexpr const char* kWallSpec = R"({"kind": "textured-wall", "seed": 2, "width": 32, "height": 32,
                                     "rig": {"count": 3, "baseline": 0.1}})";

constexpr const char* kSmallConfig = R"({"feature": {"channels": 8}, "unet": {"levels": 2, "blocks": 1},
                                        "depth": {"num_hypotheses": 16, "near": 1, "far": 4}})";

constexpr const char* kGardenSpec = R"({"kind": "gaussian-garden", "seed": 4, "width": 64, "height": 64,
                                       "rig": {"count": 4, "baseline": 0.1}, "garden": {"spacing": 0.04}})";

constexpr const char* kCopyConfig = R"({"feature": {"kind": "gradient-descriptor", "channels": 3, "normalize": false},
                                       "depth": {"use_gt": true}, "unet": {"enabled": false}, "voxel": {"size": 0.02},
                                       "head": {"kind": "color-copy", "copy_opacity": 0.95, "copy_log_scale": -0.4}})";

fs::path synth_scene(const fs::path& root, const char* spec) {
  spill(root / "spec.json", spec);
  const Outcome r = invoke({"synth", "--spec", (root / "spec.json").string(), "--out", (root / "scene").string()});
  REQUIRE(r.code == 0);
  return root / "scene";
}

}  // namespace

TEST_CASE("version flag") {
  const Outcome r = invoke({"--version"});
  CHECK(r.code == 0);
  CHECK(r.out.find("volsplat 0.3.0 (config schema 1)") != std::string::npos);
}

TEST_CASE("synth writes a reproducible scene directory") {
  const fs::path root = testing::scratch_dir("cli_synth");
  const fs::path a = synth_scene(root, kWallSpec);
  CHECK(fs::exists(a / "scene.json"));
  CHECK(fs::exists(a / "view_002.ppm"));
  CHECK(fs::exists(a / "view_002.depth"));
  const Outcome again =
      invoke({"synth", "--spec", (root / "spec.json").string(), "--out", (root / "again").string()});
  REQUIRE(again.code == 0);
  for (const char* name : {"scene.json", "view_000.ppm", "view_001.json", "view_002.depth"}) {
    CHECK(slurp(a / name) == slurp(root / "again" / name));
  }

  CHECK(invoke({"synth", "--out", (root / "x").string()}).code == 2);
  CHECK(invoke({"synth", "--spec", (root / "missing.json").string(), "--out", (root / "x").string()}).code == 2);
  spill(root / "bad.json", R"({"kind": "volcano"})");
  CHECK(invoke({"synth", "--spec", (root / "bad.json").string(), "--out", (root / "x").string()}).code == 2);
  CHECK(invoke({"frobnicate"}).code == 2);
}

TEST_CASE("run writes outputs and honours overrides") {
  const fs::path root = testing::scratch_dir("cli_run");
  const fs::path scene = synth_scene(root, kWallSpec);
  spill(root / "config.json", kSmallConfig);
  const std::string config = (root / "config.json").string();

  const Outcome r = invoke({"run", "--config", config, "--scene", scene.string(), "--out", (root / "plain").string()});
  REQUIRE(r.code == 0);
  for (const char* name : {"gaussians.ply", "diagnostics.json", "timings.json", "config.json", "renders/view_000.ppm"}) {
    CHECK(fs::exists(root / "plain" / name));
  }
  CHECK_FALSE(fs::exists(root / "plain" / "report.json"));

  const Outcome ab = invoke({"run", "--config", config, "--scene", scene.string(), "--out", (root / "ablate").string(),
                             "--ablate", "no-decoder", "--voxel-size", "0.25", "--holdout", "1", "--depth.temperature",
                             "0.1"});
  REQUIRE(ab.code == 0);
  const auto used = nlohmann::json::parse(slurp(root / "ablate" / "config.json"));
  CHECK(used["unet"]["enabled"] == false);
  CHECK(used["voxel"]["size"] == 0.25);
  CHECK(used["depth"]["temperature"] == 0.1);
  const auto diag = nlohmann::json::parse(slurp(root / "ablate" / "diagnostics.json"));
  CHECK(diag["refinement_applied"] == false);
  CHECK(diag["voxel_size"] == 0.25);
  CHECK(diag["num_views"] == 2);
  CHECK(fs::exists(root / "ablate" / "report.json"));
  CHECK(fs::exists(root / "ablate" / "renders" / "view_002.ppm"));
}

TEST_CASE("run exit codes") {
  const fs::path root = testing::scratch_dir("cli_codes");
  const fs::path scene = synth_scene(root, kWallSpec);
  spill(root / "bad.json", R"({"voxel": {"size": "large"}})");
  const std::string out = (root / "out").string();
  CHECK(invoke({"run", "--config", (root / "bad.json").string(), "--scene", scene.string(), "--out", out}).code == 2);
  CHECK(invoke({"run", "--scene", scene.string(), "--out", out, "--unet.colour", "1"}).code == 2);
  CHECK(invoke({"run", "--scene", (root / "nowhere").string(), "--out", out}).code == 2);
  CHECK(invoke({"inspect", "--gaussians", "x.ply", "--voxel.size", "1"}).code == 2);

  const Outcome stage = invoke({"run", "--scene", scene.string(), "--out", out, "--feature.kind", "external-file",
                                "--feature.path", (root / "none_{index}.vsfm").string()});
  CHECK(stage.code == 1);
  CHECK(stage.err.find("extract_features") != std::string::npos);
}

TEST_CASE("garden reconstruction evaluates above 30 dB") {
  const fs::path root = testing::scratch_dir("cli_eval");
  const fs::path scene = synth_scene(root, kGardenSpec);
  spill(root / "config.json", kCopyConfig);
  REQUIRE(invoke({"run", "--config", (root / "config.json").string(), "--scene", scene.string(), "--out",
                  (root / "out").string()})
              .code == 0);
  const fs::path ply = root / "out" / "gaussians.ply";
  const Outcome e = invoke({"eval", "--gaussians", ply.string(), "--targets", scene.string(), "--out",
                            (root / "report.json").string(), "--input-views", "4"});
  REQUIRE(e.code == 0);
  const auto report = nlohmann::json::parse(slurp(root / "report.json"));
  CHECK(report["mean"]["psnr"].get<double>() >= 30.0);
  CHECK(report["targets"].size() == 4);
  CHECK(e.out.find("mean") != std::string::npos);

  const Outcome inspect = invoke({"inspect", "--gaussians", ply.string()});
  CHECK(inspect.code == 0);
  CHECK(inspect.out.find("\"count\"") != std::string::npos);

  const Outcome rend = invoke({"render", "--gaussians", ply.string(), "--camera", (scene / "view_001.json").string(),
                               "--out", (root / "view.ppm").string()});
  CHECK(rend.code == 0);
  CHECK(fs::file_size(root / "view.ppm") > 64 * 64 * 3);

  fs::create_directories(root / "empty");
  spill(root / "empty" / "scene.json", R"({"views": []})");
  CHECK(invoke({"eval", "--gaussians", ply.string(), "--targets", (root / "empty").string()}).code == 2);
  spill(root / "junk.ply", "not a ply");
  CHECK(invoke({"eval", "--gaussians", (root / "junk.ply").string(), "--targets", scene.string()}).code == 2);
}

TEST_CASE("weights command") {
  const fs::path root = testing::scratch_dir("cli_weights");
  CHECK(invoke({"weights", "--kind", "unet", "--channels", "4", "--levels", "4", "8", "--out",
                (root / "u.vswt").string()})
            .code == 0);
  CHECK(invoke({"weights", "--kind", "head", "--channels", "4", "--sh-degree", "1", "--out",
                (root / "h.vswt").string()})
            .code == 0);
  CHECK(fs::file_size(root / "u.vswt") > 0);
  CHECK(invoke({"weights", "--kind", "mlp", "--out", (root / "x.vswt").string()}).code == 2);
}
