#include <doctest.h>

#include "support.hpp"
#include "volsplat/pipeline.hpp"

using namespace volsplat;

namespace {

PipelineConfig small_config() {
  return PipelineConfig::parse(R"({"feature": {"channels": 8}, "depth": {"num_hypotheses": 16, "near": 1, "far": 4},
                                   "unet": {"levels": 2, "blocks": 1, "seed": 3}})");
}

std::vector<CameraView> wall(int count, double baseline = 0.1) {
  return testing::wall_scene(count, baseline, 1, 32).views;
}

bool same_set(const GaussianSet& a, const GaussianSet& b) {
  return a.centers == b.centers && a.opacities == b.opacities && a.scales == b.scales && a.rotations == b.rotations &&
         a.sh == b.sh && a.provenance == b.provenance;
}

}  // namespace

TEST_CASE("coincident views share voxels") {
  const auto views = wall(2);
  const std::vector<CameraView> twice{views[0], views[0]};
  for (double voxel : {0.01, 0.05, 0.1}) {
    PipelineConfig config = small_config();
    config.voxel_size = voxel;
    config.depth.use_gt = true;
    const PipelineResult r = run_pipeline(twice, config);
    CHECK(r.diagnostics.point_count == 2 * 32 * 32);
    CHECK(r.gaussians.size() < 2 * 32 * 32);
    CHECK(r.diagnostics.pgs <= r.diagnostics.pixel_budget);
  }
}

TEST_CASE("per-view Gaussian count stays within the pixel budget") {
  const auto views = wall(3);
  for (bool gt : {true, false}) {
    for (double voxel : {0.005, 0.02, 0.1}) {
      PipelineConfig config = small_config();
      config.depth.use_gt = gt;
      config.voxel_size = voxel;
      const Diagnostics d = run_pipeline(views, config).diagnostics;
      CHECK(d.pgs <= static_cast<double>(d.pixel_budget));
      CHECK(d.gaussian_count == d.occupied_voxels);
      CHECK(d.depth_source == std::vector<std::string>(3, gt ? "gt" : "regressed"));
    }
  }
}

TEST_CASE("occupied voxels do not grow with the voxel size") {
  const auto views = wall(3);
  PipelineConfig config = small_config();
  config.depth.use_gt = true;
  config.unet.enabled = false;
  Index previous = std::numeric_limits<Index>::max();
  for (double voxel : {0.05, 0.1, 0.5, 1.0}) {
    config.voxel_size = voxel;
    const Index count = run_pipeline(views, config).diagnostics.occupied_voxels;
    CHECK(count <= previous);
    previous = count;
  }
}

TEST_CASE("no-decoder mode equals a zero-weight refinement") {
  const auto views = wall(2);
  PipelineConfig off = small_config();
  off.unet.enabled = false;
  PipelineConfig zero = small_config();
  zero.unet.zero_weights = true;
  const PipelineResult a = run_pipeline(views, off);
  const PipelineResult b = run_pipeline(views, zero);
  CHECK_FALSE(a.diagnostics.refinement_applied);
  CHECK(b.diagnostics.refinement_applied);
  CHECK(same_set(a.gaussians, b.gaussians));
  CHECK(encode_ply(a.gaussians) == encode_ply(b.gaussians));

  PipelineConfig seeded = small_config();
  CHECK_FALSE(same_set(run_pipeline(views, seeded).gaussians, a.gaussians));
}

TEST_CASE("pipeline is deterministic") {
  const auto views = wall(2);
  const PipelineConfig config = small_config();
  const PipelineResult a = run_pipeline(views, config);
  const PipelineResult b = run_pipeline(views, config);
  CHECK(encode_ply(a.gaussians) == encode_ply(b.gaussians));
  CHECK(a.diagnostics.to_json() == b.diagnostics.to_json());
  REQUIRE_FALSE(a.timings.seconds.empty());
  CHECK(a.timings.seconds.front().first == "validate");
  CHECK(a.timings.seconds.back().first == "decode");
}

TEST_CASE("failures carry the stage name") {
  const auto views = wall(2);
  PipelineConfig config = small_config();
  config.feature.kind = FeatureKind::ExternalFile;
  config.feature.path = "/nonexistent/features_{index}.vsfm";
  try {
    run_pipeline(views, config);
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "extract_features");
    CHECK(std::string(e.what()).find("[extract_features]") != std::string::npos);
  }

  try {
    run_pipeline({views[0]}, small_config());
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "validate");
    CHECK(e.kind() == ErrorKind::InvalidInput);
  }
}

TEST_CASE("configuration parsing") {
  const PipelineConfig d = PipelineConfig::parse("");
  CHECK(d.depth.num_hypotheses == 32);
  CHECK(d.depth.spacing == DepthSpacing::Inverse);
  CHECK(d.voxel_size == 0.1);
  CHECK(d.loss.lambda == 0.05);
  CHECK(d.head.kind == HeadKind::Seeded);

  const PipelineConfig o =
      PipelineConfig::parse(R"({"voxel": {"size": 0.2}})", {{"voxel.size", "0.5"}, {"depth.spacing", "linear"},
                                                              {"render.bg", "[0.1, 0.2, 0.3]"}});
  CHECK(o.voxel_size == 0.5);
  CHECK(o.depth.spacing == DepthSpacing::Linear);
  CHECK(o.render.background == Eigen::Vector3d(0.1, 0.2, 0.3));

  const PipelineConfig levels = PipelineConfig::parse(R"({"feature": {"channels": 4}, "unet": {"levels": 2}})");
  CHECK(levels.unet.spec(4).widths == std::vector<int>{4, 8});
  const PipelineConfig listed = PipelineConfig::parse(R"({"unet": {"levels": [3, 5, 7]}})");
  CHECK(listed.unet.spec(32).widths == std::vector<int>{3, 5, 7});
  CHECK(PipelineConfig::parse(R"({"head": {"weights_path": "h.vswt"}})").head.kind == HeadKind::File);

  const PipelineConfig again = PipelineConfig::parse(o.to_json());
  CHECK(again.to_json() == o.to_json());

  for (const char* bad : {R"({"voxel": {"sise": 1}})", R"({"colour": 1})", R"({"voxel": {"size": -1}})",
                          R"({"loss": {"perceptual": true}})", R"({"schema_version": 2})",
                          R"({"depth": {"num_hypotheses": "many"}})", "{not json"}) {
    CAPTURE(bad);
    try {
      PipelineConfig::parse(bad);
      FAIL("expected a configuration error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Configuration);
    }
  }
  CHECK_THROWS_AS(PipelineConfig::parse("{}", {{"unet.depth", "3"}}), Error);
}

TEST_CASE("evaluation report averages its targets") {
  const auto views = wall(4);
  const auto [inputs, targets] = hold_out(views, 2);
  PipelineConfig config = small_config();
  config.depth.use_gt = true;
  config.voxel_size = 0.02;
  const PipelineResult r = run_pipeline(inputs, config);
  const EvalReport report = evaluate(r.gaussians, targets, 2);
  REQUIRE(report.targets.size() == 2);
  const auto& t = report.targets;
  CHECK(report.mean.psnr == doctest::Approx((t[0].metrics.psnr + t[1].metrics.psnr) / 2));
  CHECK(report.mean.ssim == doctest::Approx((t[0].metrics.ssim + t[1].metrics.ssim) / 2));
  CHECK(report.mean.mse == doctest::Approx((t[0].metrics.mse + t[1].metrics.mse) / 2));
  CHECK(report.pgs == doctest::Approx(r.gaussians.size() / 2.0));
  CHECK(report.to_json().find("\"engine_version\"") != std::string::npos);
  CHECK_THROWS_AS(evaluate(r.gaussians, {}, 2), Error);
}
