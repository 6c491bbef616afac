#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "volsplat/features.hpp"
#include "volsplat/gaussians.hpp"
#include "volsplat/metrics.hpp"
#include "volsplat/renderer.hpp"
#include "volsplat/unet.hpp"

namespace volsplat {

inline constexpr const char* kEngineVersion = "0.3.0";
inline constexpr int kConfigSchemaVersion = 1;

struct DepthConfig {
  int num_hypotheses = 32;
  DepthSpacing spacing = DepthSpacing::Inverse;
  double temperature = 0.05;
  double near = 0.5;
  double far = 10.0;
  bool use_gt = false;
};

struct UNetConfig {
  bool enabled = true;
  std::vector<int> widths;  // empty: [C, 2C, 4C] for C feature channels
  int blocks = 2;
  Activation activation = Activation::Relu;
  std::string weights_path;  // takes precedence over seed
  std::uint64_t seed = 0;
  bool zero_weights = false;

  UNetSpec spec(int channels) const;
};

enum class HeadKind { Seeded, File, ColorCopy };

struct HeadSettings {
  HeadKind kind = HeadKind::Seeded;
  HeadConfig decode;
  std::string weights_path;
  std::uint64_t seed = 0;
  double copy_opacity = 0.95;   // color-copy only
  double copy_log_scale = 0.0;  // color-copy only, log of scale / voxel size
};

struct LossConfig {
  double lambda = kDefaultLossLambda;
  bool perceptual = false;
};

/// Complete, validated pipeline configuration.
struct PipelineConfig {
  FeatureExtractorSpec feature;
  DepthConfig depth;
  double voxel_size = 0.1;
  UNetConfig unet;
  HeadSettings head;
  LossConfig loss;
  RenderSettings render;

  /// Parses a JSON document, then applies dotted-path overrides such as
  /// {"voxel.size", "0.5"}. Override values are read as JSON when they parse
  /// and as strings otherwise. Unknown keys and bad values are configuration errors.
  static PipelineConfig parse(const std::string& json_text,
                              const std::vector<std::pair<std::string, std::string>>& overrides = {});
  std::string to_json() const;
  void validate() const;
};

/// Deterministic run summary. Wall-clock timings are kept in `StageTimings`
/// so that this record is byte-identical across runs and worker counts.
struct Diagnostics {
  int num_views = 0;
  int height = 0;
  int width = 0;
  std::vector<std::string> depth_source;  // per view: "gt" or "regressed"
  Index point_count = 0;
  Index occupied_voxels = 0;
  Index gaussian_count = 0;
  double pgs = 0.0;  // gaussian_count / num_views
  Index pixel_budget = 0;  // H * W
  bool refinement_applied = false;
  double voxel_size = 0.0;

  std::string to_json() const;
};

struct StageTimings {
  std::vector<std::pair<std::string, double>> seconds;  // execution order
  std::string to_json() const;
};

struct PipelineResult {
  GaussianSet gaussians;
  SparseVoxelGrid grid;  // V before refinement
  Diagnostics diagnostics;
  StageTimings timings;
};

/// Features, depth (regressed or ground truth), lifting, voxelization,
/// optional residual refinement and Gaussian decoding. A failing stage is
/// rethrown as a StageError naming the stage.
PipelineResult run_pipeline(const std::vector<CameraView>& views, const PipelineConfig& config);

struct TargetMetrics {
  ImageMetrics metrics;
  Image render;
};

struct EvalReport {
  std::vector<TargetMetrics> targets;
  ImageMetrics mean;
  Index gaussian_count = 0;
  int input_views = 0;
  double pgs = 0.0;

  std::string to_json() const;
};

/// Renders `set` from every target camera and scores it against the target image.
EvalReport evaluate(const GaussianSet& set, const std::vector<CameraView>& targets, int input_views,
                    const RenderSettings& settings = {});

}  // namespace volsplat
