#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "volsplat/pipeline.hpp"
#include "volsplat/scene.hpp"

namespace volsplat::cli {

namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::File, "cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spill(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw Error(ErrorKind::File, "cannot write " + path.string());
}

std::string view_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "view_%03zu.ppm", index);
  return buf;
}

// Pulls `--a.b value` pairs (option names containing a dot) out of argv so
// CLI11 only sees the declared options.
std::vector<std::string> split_overrides(int argc, const char* const* argv,
                                         std::vector<std::pair<std::string, std::string>>& overrides) {
  std::vector<std::string> rest;
  for (int i = 0; i < argc; ++i) {
    const std::string a = argv[i];
    if (i > 0 && a.rfind("--", 0) == 0 && a.find('.') != std::string::npos) {
      const auto eq = a.find('=');
      if (eq != std::string::npos) {
        overrides.emplace_back(a.substr(2, eq - 2), a.substr(eq + 1));
        continue;
      }
      if (i + 1 >= argc) throw CLI::ArgumentMismatch(a + " needs a value");
      overrides.emplace_back(a.substr(2), argv[++i]);
      continue;
    }
    rest.push_back(a);
  }
  return rest;
}

struct SynthArgs {
  std::string spec;
  std::string out;
};

struct RunArgs {
  std::string config;
  std::string scene;
  std::string out;
  int holdout = 0;
  std::string ablate;
  double voxel_size = 0.0;
  bool use_gt = false;
};

struct EvalArgs {
  std::string gaussians;
  std::string targets;
  std::string out;
  int input_views = 0;
  double bg = 0.0;
};

struct RenderArgs {
  std::string gaussians;
  std::string camera;
  std::string out;
  double bg = 0.0;
};

struct InspectArgs {
  std::string gaussians;
};

struct WeightsArgs {
  std::string kind = "unet";
  int channels = 32;
  std::vector<int> levels;
  int blocks = 2;
  int sh_degree = 0;
  std::uint64_t seed = 0;
  bool zero = false;
  std::string out;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const SceneSpec spec = SceneSpec::from_json(slurp(a.spec));
  const SyntheticScene scene = synthesize(spec);
  save_scene(scene, spec, a.out);
  out << "wrote " << scene.views.size() << " views to " << a.out << "\n";
  return kOk;
}

int cmd_run(const RunArgs& a, std::vector<std::pair<std::string, std::string>> overrides, std::ostream& out) {
  if (!a.ablate.empty()) {
    if (a.ablate != "no-decoder") throw Error(ErrorKind::Configuration, "unknown ablation '" + a.ablate + "'");
    overrides.emplace_back("unet.enabled", "false");
  }
  if (a.voxel_size > 0) {
    std::ostringstream v;
    v.precision(17);
    v << a.voxel_size;
    overrides.emplace_back("voxel.size", v.str());
  }
  if (a.use_gt) overrides.emplace_back("depth.use_gt", "true");
  const PipelineConfig config = PipelineConfig::parse(a.config.empty() ? "" : slurp(a.config), overrides);
  const std::vector<CameraView> views = load_scene(a.scene);
  require(!views.empty(), ErrorKind::InvalidInput, "scene has no views");
  const auto [inputs, targets] = hold_out(views, a.holdout);

  PipelineResult result;
  try {
    result = run_pipeline(inputs, config);
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError("pipeline", e);
  }

  const fs::path dir(a.out);
  fs::create_directories(dir / "renders");
  export_ply(result.gaussians, (dir / "gaussians.ply").string());
  spill(dir / "diagnostics.json", result.diagnostics.to_json() + "\n");
  spill(dir / "timings.json", result.timings.to_json() + "\n");
  spill(dir / "config.json", config.to_json() + "\n");

  const bool scored = !targets.empty();
  const auto& shown = scored ? targets : inputs;
  const std::size_t first = scored ? inputs.size() : 0;
  for (std::size_t n = 0; n < shown.size(); ++n) {
    write_ppm(render(result.gaussians, shown[n].camera, config.render).rgb,
              (dir / "renders" / view_name(first + n)).string());
  }
  if (scored) {
    const EvalReport report = evaluate(result.gaussians, targets, static_cast<int>(inputs.size()), config.render);
    spill(dir / "report.json", report.to_json() + "\n");
    out << "mean PSNR " << report.mean.psnr << " dB, SSIM " << report.mean.ssim << "\n";
  }
  out << "gaussians " << result.diagnostics.gaussian_count << ", PGS " << result.diagnostics.pgs << "\n";
  return kOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const GaussianSet set = import_ply(a.gaussians);
  const std::vector<CameraView> targets = load_scene(a.targets);
  require(!targets.empty(), ErrorKind::InvalidInput, "target directory holds no views");
  RenderSettings settings;
  settings.background.setConstant(a.bg);
  const int inputs = a.input_views > 0 ? a.input_views : static_cast<int>(targets.size());
  const EvalReport report = evaluate(set, targets, inputs, settings);
  if (!a.out.empty()) spill(a.out, report.to_json() + "\n");

  char line[128];
  out << "target      PSNR     SSIM       MSE\n";
  for (std::size_t n = 0; n < report.targets.size(); ++n) {
    const auto& m = report.targets[n].metrics;
    std::snprintf(line, sizeof line, "%6zu  %8.3f  %7.4f  %.3e\n", n, m.psnr, m.ssim, m.mse);
    out << line;
  }
  std::snprintf(line, sizeof line, "  mean  %8.3f  %7.4f  %.3e\nPGS %.2f (%lld Gaussians / %d views)\n",
                report.mean.psnr, report.mean.ssim, report.mean.mse, report.pgs,
                static_cast<long long>(report.gaussian_count), report.input_views);
  out << line;
  return kOk;
}

int cmd_render(const RenderArgs& a, std::ostream& out) {
  const GaussianSet set = import_ply(a.gaussians);
  const Camera camera = load_camera(a.camera);
  RenderSettings settings;
  settings.background.setConstant(a.bg);
  write_ppm(render(set, camera, settings).rgb, a.out);
  out << "wrote " << a.out << "\n";
  return kOk;
}

int cmd_inspect(const InspectArgs& a, std::ostream& out) {
  out << gaussian_summary_json(import_ply(a.gaussians)) << "\n";
  return kOk;
}

int cmd_weights(const WeightsArgs& a, std::ostream& out) {
  WeightBlob blob;
  if (a.kind == "unet") {
    UNetSpec spec = UNetSpec::defaults(a.channels);
    if (!a.levels.empty()) spec.widths = a.levels;
    spec.blocks_per_level = a.blocks;
    spec.validate();
    blob = a.zero ? zero_unet_weights(spec, a.channels) : random_unet_weights(spec, a.channels, a.seed);
  } else if (a.kind == "head") {
    blob = random_head_weights(a.channels, a.sh_degree, a.seed);
  } else {
    throw Error(ErrorKind::Configuration, "weights kind must be 'unet' or 'head'");
  }
  save_weights(blob, a.out);
  out << "wrote " << blob.tensors.size() << " tensors to " << a.out << "\n";
  return kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Voxel-aligned feed-forward Gaussian reconstruction engine", "volsplat"};
  app.set_version_flag("--version", std::string("volsplat ") + kEngineVersion + " (config schema " +
                                        std::to_string(kConfigSchemaVersion) + ")");
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
  app.fallthrough();

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic multi-view scene");
  synth_cmd->add_option("--spec", synth.spec, "Scene spec JSON")->required()->check(CLI::ExistingFile);
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run the reconstruction pipeline on a scene directory");
  run_cmd->add_option("--config", run.config, "Pipeline config JSON (defaults when omitted)")->check(CLI::ExistingFile);
  run_cmd->add_option("--scene", run.scene, "Scene directory")->required()->check(CLI::ExistingDirectory);
  run_cmd->add_option("--out", run.out, "Output directory")->required();
  run_cmd->add_option("--holdout", run.holdout, "Use the last N views as evaluation targets")->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--ablate", run.ablate, "Ablation mode")->check(CLI::IsMember({"no-decoder"}));
  run_cmd->add_option("--voxel-size", run.voxel_size, "Override voxel.size")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--use-gt", run.use_gt, "Use the scene's ground-truth depth");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score a Gaussian PLY against target views");
  eval_cmd->add_option("--gaussians", eval.gaussians, "Gaussian PLY")->required();
  eval_cmd->add_option("--targets", eval.targets, "Scene directory of target views")->required();
  eval_cmd->add_option("--out", eval.out, "Report JSON path");
  eval_cmd->add_option("--input-views", eval.input_views, "Input view count for PGS (default: target count)");
  eval_cmd->add_option("--bg", eval.bg, "Background gray level");

  RenderArgs rend;
  auto* render_cmd = app.add_subcommand("render", "Render a Gaussian PLY from a camera");
  render_cmd->add_option("--gaussians", rend.gaussians, "Gaussian PLY")->required();
  render_cmd->add_option("--camera", rend.camera, "Camera JSON")->required();
  render_cmd->add_option("--out", rend.out, "Output PPM")->required();
  render_cmd->add_option("--bg", rend.bg, "Background gray level");

  InspectArgs inspect;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print a JSON summary of a Gaussian PLY");
  inspect_cmd->add_option("--gaussians", inspect.gaussians, "Gaussian PLY")->required();

  WeightsArgs weights;
  auto* weights_cmd = app.add_subcommand("weights", "Write a seeded weight blob");
  weights_cmd->add_option("--kind", weights.kind, "unet or head")->check(CLI::IsMember({"unet", "head"}));
  weights_cmd->add_option("--channels", weights.channels, "Feature channels")->check(CLI::PositiveNumber);
  weights_cmd->add_option("--levels", weights.levels, "U-Net level widths");
  weights_cmd->add_option("--blocks", weights.blocks, "Blocks per U-Net level");
  weights_cmd->add_option("--sh-degree", weights.sh_degree, "Head SH degree")->check(CLI::Range(0, 3));
  weights_cmd->add_option("--seed", weights.seed, "Random seed");
  weights_cmd->add_flag("--zero", weights.zero, "All-zero U-Net weights");
  weights_cmd->add_option("--out", weights.out, "Output blob")->required();

  std::vector<std::pair<std::string, std::string>> overrides;
  try {
    std::vector<std::string> args = split_overrides(argc, argv, overrides);
    std::reverse(args.begin(), args.end());
    args.pop_back();  // program name
    app.parse(args);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }
  if (!overrides.empty() && !run_cmd->parsed()) {
    err << "error: dotted config overrides are only accepted by 'run'\n";
    return kUsage;
  }

  set_thread_count(threads);
  try {
    if (synth_cmd->parsed()) return cmd_synth(synth, out);
    if (run_cmd->parsed()) return cmd_run(run, overrides, out);
    if (eval_cmd->parsed()) return cmd_eval(eval, out);
    if (render_cmd->parsed()) return cmd_render(rend, out);
    if (inspect_cmd->parsed()) return cmd_inspect(inspect, out);
    if (weights_cmd->parsed()) return cmd_weights(weights, out);
  } catch (const StageError& e) {
    err << "error: stage " << e.stage() << " failed: " << e.what() << "\n";
    return kStageFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kStageFailure;
  }
  return kUsage;
}

}  // namespace volsplat::cli
