#include "volsplat/pipeline.hpp"

#include <chrono>
#include <set>

#include <json.hpp>

namespace volsplat {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& message) { throw Error(ErrorKind::Configuration, message); }

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) config_error(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) config_error("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

template <typename T>
T get(const json& j, const std::string& key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    config_error("bad value for '" + where + "." + key + "': " + j.at(key).dump());
  }
}

std::string head_kind_name(HeadKind kind) {
  switch (kind) {
    case HeadKind::Seeded: return "seeded";
    case HeadKind::File: return "file";
    case HeadKind::ColorCopy: return "color-copy";
  }
  return "?";
}

HeadKind head_kind_from(const std::string& name) {
  if (name == "seeded") return HeadKind::Seeded;
  if (name == "file") return HeadKind::File;
  if (name == "color-copy") return HeadKind::ColorCopy;
  config_error("unknown head kind '" + name + "'");
}

void apply_override(json& root, const std::string& path, const std::string& text) {
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) config_error("malformed override key '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if (!node->contains(part)) (*node)[part] = json::object();
    node = &(*node)[part];
    if (!node->is_object()) config_error("override '" + path + "' descends into a non-object");
    start = dot + 1;
  }
}

PipelineConfig from_json(const json& root) {
  PipelineConfig c;
  check_keys(root, "", {"schema_version", "feature", "depth", "voxel", "unet", "head", "loss", "render"});
  if (root.contains("schema_version") && root["schema_version"] != kConfigSchemaVersion) {
    config_error("unsupported config schema_version " + root["schema_version"].dump());
  }

  const json f = root.value("feature", json::object());
  check_keys(f, "feature", {"kind", "channels", "scale", "seed", "normalize", "path"});
  c.feature.kind = feature_kind_from_string(get<std::string>(f, "kind", "feature", to_string(c.feature.kind)));
  c.feature.channels = get(f, "channels", "feature", c.feature.channels);
  c.feature.scale = get(f, "scale", "feature", c.feature.scale);
  c.feature.seed = get(f, "seed", "feature", c.feature.seed);
  c.feature.normalize = get(f, "normalize", "feature", c.feature.normalize);
  c.feature.path = get(f, "path", "feature", c.feature.path);

  const json d = root.value("depth", json::object());
  check_keys(d, "depth", {"num_hypotheses", "spacing", "temperature", "near", "far", "use_gt"});
  c.depth.num_hypotheses = get(d, "num_hypotheses", "depth", c.depth.num_hypotheses);
  c.depth.spacing = depth_spacing_from_string(get<std::string>(d, "spacing", "depth", to_string(c.depth.spacing)));
  c.depth.temperature = get(d, "temperature", "depth", c.depth.temperature);
  c.depth.near = get(d, "near", "depth", c.depth.near);
  c.depth.far = get(d, "far", "depth", c.depth.far);
  c.depth.use_gt = get(d, "use_gt", "depth", c.depth.use_gt);

  const json v = root.value("voxel", json::object());
  check_keys(v, "voxel", {"size"});
  c.voxel_size = get(v, "size", "voxel", c.voxel_size);

  const json u = root.value("unet", json::object());
  check_keys(u, "unet", {"enabled", "levels", "blocks", "activation", "weights_path", "seed", "zero_weights"});
  c.unet.enabled = get(u, "enabled", "unet", c.unet.enabled);
  if (u.contains("levels")) {
    const json& levels = u["levels"];
    if (levels.is_array()) {
      c.unet.widths = get<std::vector<int>>(u, "levels", "unet", {});
    } else if (levels.is_number_integer()) {
      const int count = levels.get<int>();
      if (count < 1) config_error("unet.levels must be >= 1");
      c.unet.widths.assign(static_cast<std::size_t>(count), -1);  // resolved against the channel count later
    } else {
      config_error("unet.levels must be an integer or a list of widths");
    }
  }
  c.unet.blocks = get(u, "blocks", "unet", c.unet.blocks);
  c.unet.activation = activation_from_string(get<std::string>(u, "activation", "unet", to_string(c.unet.activation)));
  c.unet.weights_path = get(u, "weights_path", "unet", c.unet.weights_path);
  c.unet.seed = get(u, "seed", "unet", c.unet.seed);
  c.unet.zero_weights = get(u, "zero_weights", "unet", c.unet.zero_weights);

  const json h = root.value("head", json::object());
  check_keys(h, "head", {"kind", "sh_degree", "offset_radius_multiplier", "symmetric_offset", "weights_path", "seed",
                         "copy_opacity", "copy_log_scale"});
  c.head.weights_path = get(h, "weights_path", "head", c.head.weights_path);
  c.head.kind = c.head.weights_path.empty() ? HeadKind::Seeded : HeadKind::File;
  if (h.contains("kind")) c.head.kind = head_kind_from(get<std::string>(h, "kind", "head", ""));
  c.head.decode.sh_degree = get(h, "sh_degree", "head", c.head.decode.sh_degree);
  c.head.decode.offset_radius_multiplier =
      get(h, "offset_radius_multiplier", "head", c.head.decode.offset_radius_multiplier);
  c.head.decode.symmetric_offset = get(h, "symmetric_offset", "head", c.head.decode.symmetric_offset);
  c.head.seed = get(h, "seed", "head", c.head.seed);
  c.head.copy_opacity = get(h, "copy_opacity", "head", c.head.copy_opacity);
  c.head.copy_log_scale = get(h, "copy_log_scale", "head", c.head.copy_log_scale);

  const json l = root.value("loss", json::object());
  check_keys(l, "loss", {"lambda", "perceptual"});
  c.loss.lambda = get(l, "lambda", "loss", c.loss.lambda);
  c.loss.perceptual = get(l, "perceptual", "loss", c.loss.perceptual);

  const json r = root.value("render", json::object());
  check_keys(r, "render", {"tile", "bg"});
  c.render.tile = get(r, "tile", "render", c.render.tile);
  if (r.contains("bg")) {
    const json& bg = r["bg"];
    if (bg.is_number()) {
      c.render.background.setConstant(bg.get<double>());
    } else {
      const auto rgb = get<std::vector<double>>(r, "bg", "render", {});
      if (rgb.size() != 3) config_error("render.bg must be a number or 3 numbers");
      c.render.background = Eigen::Vector3d(rgb[0], rgb[1], rgb[2]);
    }
  }
  return c;
}

}  // namespace

UNetSpec UNetConfig::spec(int channels) const {
  UNetSpec s = UNetSpec::defaults(channels);
  if (!widths.empty()) {
    s.widths = widths;
    for (std::size_t l = 0; l < s.widths.size(); ++l) {
      if (s.widths[l] < 0) s.widths[l] = channels << l;
    }
  }
  s.blocks_per_level = blocks;
  s.activation = activation;
  return s;
}

PipelineConfig PipelineConfig::parse(const std::string& json_text,
                                     const std::vector<std::pair<std::string, std::string>>& overrides) {
  json root;
  try {
    root = json_text.empty() ? json::object() : json::parse(json_text);
  } catch (const json::exception& e) {
    config_error(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) config_error("config must be a JSON object");
  for (const auto& [key, value] : overrides) apply_override(root, key, value);
  PipelineConfig c = from_json(root);
  c.validate();
  return c;
}

void PipelineConfig::validate() const {
  feature.validate();
  if (feature.kind == FeatureKind::ExternalFile && feature.path.empty()) config_error("feature.path is required");
  if (depth.num_hypotheses < 2) config_error("depth.num_hypotheses must be >= 2");
  if (!(depth.temperature > 0)) config_error("depth.temperature must be positive");
  if (!(depth.near > 0 && depth.near < depth.far)) config_error("depth needs 0 < near < far");
  if (!(voxel_size > 0)) config_error("voxel.size must be positive");
  unet.spec(feature.channels).validate();
  if (head.decode.sh_degree < 0 || head.decode.sh_degree > 3) config_error("head.sh_degree must be in [0, 3]");
  if (!(head.decode.offset_radius_multiplier > 0)) config_error("head.offset_radius_multiplier must be positive");
  if (head.kind == HeadKind::File && head.weights_path.empty()) config_error("head.weights_path is required");
  if (head.kind == HeadKind::ColorCopy) {
    if (feature.channels < 3) config_error("color-copy head needs at least 3 feature channels");
    if (!(head.copy_opacity > 0 && head.copy_opacity < 1)) config_error("head.copy_opacity must be in (0, 1)");
  }
  if (!(loss.lambda >= 0)) config_error("loss.lambda must be non-negative");
  if (loss.perceptual) config_error("loss.perceptual is not available: no perceptual network ships with the engine");
  if (render.tile < 1) config_error("render.tile must be positive");
}

std::string PipelineConfig::to_json() const {
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["feature"] = {{"kind", to_string(feature.kind)}, {"channels", feature.channels}, {"scale", feature.scale},
                  {"seed", feature.seed}, {"normalize", feature.normalize}, {"path", feature.path}};
  j["depth"] = {{"num_hypotheses", depth.num_hypotheses}, {"spacing", to_string(depth.spacing)},
                {"temperature", depth.temperature}, {"near", depth.near}, {"far", depth.far},
                {"use_gt", depth.use_gt}};
  j["voxel"] = {{"size", voxel_size}};
  j["unet"] = {{"enabled", unet.enabled}, {"levels", unet.spec(feature.channels).widths}, {"blocks", unet.blocks},
               {"activation", to_string(unet.activation)}, {"weights_path", unet.weights_path},
               {"seed", unet.seed}, {"zero_weights", unet.zero_weights}};
  j["head"] = {{"kind", head_kind_name(head.kind)}, {"sh_degree", head.decode.sh_degree},
               {"offset_radius_multiplier", head.decode.offset_radius_multiplier},
               {"symmetric_offset", head.decode.symmetric_offset}, {"weights_path", head.weights_path},
               {"seed", head.seed}, {"copy_opacity", head.copy_opacity}, {"copy_log_scale", head.copy_log_scale}};
  j["loss"] = {{"lambda", loss.lambda}, {"perceptual", loss.perceptual}};
  j["render"] = {{"tile", render.tile},
                 {"bg", {render.background.x(), render.background.y(), render.background.z()}}};
  return j.dump(2);
}

std::string Diagnostics::to_json() const {
  json j;
  j["num_views"] = num_views;
  j["height"] = height;
  j["width"] = width;
  j["depth_source"] = depth_source;
  j["point_count"] = point_count;
  j["occupied_voxels"] = occupied_voxels;
  j["gaussian_count"] = gaussian_count;
  j["pgs"] = pgs;
  j["pixel_budget"] = pixel_budget;
  j["refinement_applied"] = refinement_applied;
  j["voxel_size"] = voxel_size;
  return j.dump(2);
}

std::string StageTimings::to_json() const {
  json j = json::object();
  double total = 0.0;
  json stages = json::array();
  for (const auto& [name, s] : seconds) {
    stages.push_back({{"stage", name}, {"seconds", s}});
    total += s;
  }
  j["stages"] = stages;
  j["total_seconds"] = total;
  return j.dump(2);
}

namespace {

class StageClock {
 public:
  explicit StageClock(StageTimings& timings) : timings_(timings) {}

  template <typename F>
  auto run(const std::string& stage, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(body())>) {
        body();
        record(stage, start);
      } else {
        auto out = body();
        record(stage, start);
        return out;
      }
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      throw StageError(stage, e);
    }
  }

 private:
  void record(const std::string& stage, std::chrono::steady_clock::time_point start) {
    const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start;
    timings_.seconds.emplace_back(stage, d.count());
  }

  StageTimings& timings_;
};

std::string expand_index(const std::string& pattern, std::size_t index) {
  const std::string token = "{index}";
  const auto at = pattern.find(token);
  if (at == std::string::npos) return pattern;
  return pattern.substr(0, at) + std::to_string(index) + pattern.substr(at + token.size());
}

WeightBlob head_weights(const PipelineConfig& config) {
  const auto& h = config.head;
  switch (h.kind) {
    case HeadKind::Seeded: return random_head_weights(config.feature.channels, h.decode.sh_degree, h.seed);
    case HeadKind::File: return load_weights(h.weights_path);
    case HeadKind::ColorCopy:
      return color_copy_head_weights(config.feature.channels, h.decode.sh_degree, h.copy_opacity, h.copy_log_scale,
                                     h.decode.symmetric_offset);
  }
  return {};
}

WeightBlob unet_weights(const PipelineConfig& config, const UNetSpec& spec) {
  const int c = config.feature.channels;
  if (config.unet.zero_weights) return zero_unet_weights(spec, c);
  if (!config.unet.weights_path.empty()) return load_weights(config.unet.weights_path);
  return random_unet_weights(spec, c, config.unet.seed);
}

}  // namespace

PipelineResult run_pipeline(const std::vector<CameraView>& views, const PipelineConfig& config) {
  PipelineResult result;
  StageClock clock(result.timings);

  clock.run("validate", [&] {
    config.validate();
    require(!views.empty(), ErrorKind::InvalidInput, "no input views");
    require(config.depth.use_gt || views.size() >= 2, ErrorKind::InvalidInput,
            "depth regression needs at least two views");
    for (const auto& v : views) {
      v.validate();
      require(v.image.height == views.front().image.height && v.image.width == views.front().image.width,
              ErrorKind::InvalidInput, "input views differ in size");
      require(!config.depth.use_gt || v.gt_depth.has_value(), ErrorKind::InvalidInput,
              "depth.use_gt is set but a view has no ground-truth depth");
    }
  });

  const int h = views.front().image.height;
  const int w = views.front().image.width;
  auto& diag = result.diagnostics;
  diag.num_views = static_cast<int>(views.size());
  diag.height = h;
  diag.width = w;
  diag.pixel_budget = Index(h) * w;
  diag.voxel_size = config.voxel_size;

  const std::vector<FeatureMap> features = clock.run("extract_features", [&] {
    std::vector<FeatureMap> out;
    for (std::size_t n = 0; n < views.size(); ++n) {
      FeatureExtractorSpec spec = config.feature;
      spec.path = expand_index(spec.path, n);
      out.push_back(extract_features(views[n], spec));
    }
    return out;
  });

  std::vector<DepthMap> depths;
  if (config.depth.use_gt) {
    for (const auto& v : views) {
      depths.push_back(*v.gt_depth);
      diag.depth_source.emplace_back("gt");
    }
  } else {
    const auto hypotheses = clock.run("depth_hypotheses", [&] {
      return sample_depth_hypotheses(config.depth.near, config.depth.far, config.depth.num_hypotheses,
                                     config.depth.spacing);
    });
    std::vector<CostVolume> volumes = clock.run("build_cost_volume", [&] {
      std::vector<CostVolume> out;
      for (std::size_t n = 0; n < views.size(); ++n) {
        std::vector<NeighborView> neighbors;
        for (std::size_t m = 0; m < views.size(); ++m) {
          if (m != n) neighbors.push_back({&features[m], views[m].camera});
        }
        out.push_back(build_cost_volume(features[n], neighbors, views[n].camera, hypotheses));
      }
      return out;
    });
    depths = clock.run("regress_depth", [&] {
      std::vector<DepthMap> out;
      for (const auto& volume : volumes) out.push_back(upsample_depth(regress_depth(volume, config.depth.temperature), h, w));
      return out;
    });
    diag.depth_source.assign(views.size(), "regressed");
  }

  const FeaturedPointCloud cloud = clock.run("lift_views", [&] { return lift_views(views, features, depths); });
  diag.point_count = cloud.size();

  result.grid = clock.run("voxelize", [&] { return voxelize(cloud, config.voxel_size); });
  diag.occupied_voxels = result.grid.size();

  SparseTensor refined = SparseTensor::from_grid(result.grid);
  if (config.unet.enabled && refined.size() > 0) {
    refined = clock.run("refine", [&] {
      const UNetSpec spec = config.unet.spec(config.feature.channels);
      const WeightBlob weights = unet_weights(config, spec);
      const SparseTensor x = SparseTensor::from_grid(result.grid);
      return residual_refine(x, SparseUNet(spec, config.feature.channels, weights).forward(x));
    });
    diag.refinement_applied = true;
  }

  result.gaussians = clock.run("decode", [&] {
    return decode_gaussians(refined, head_weights(config), config.voxel_size, config.head.decode);
  });
  diag.gaussian_count = result.gaussians.size();
  diag.pgs = static_cast<double>(diag.gaussian_count) / diag.num_views;
  return result;
}

EvalReport evaluate(const GaussianSet& set, const std::vector<CameraView>& targets, int input_views,
                    const RenderSettings& settings) {
  require(!targets.empty(), ErrorKind::InvalidInput, "no target views to evaluate");
  require(input_views >= 1, ErrorKind::InvalidInput, "input view count must be positive");
  EvalReport report;
  report.gaussian_count = set.size();
  report.input_views = input_views;
  report.pgs = static_cast<double>(set.size()) / input_views;
  report.mean = {0.0, 0.0, 0.0};
  for (const auto& t : targets) {
    t.validate();
    TargetMetrics m;
    m.render = render(set, t.camera, settings).rgb;
    m.metrics = compute_image_metrics(m.render, t.image);
    report.mean.mse += m.metrics.mse;
    report.mean.psnr += m.metrics.psnr;
    report.mean.ssim += m.metrics.ssim;
    report.targets.push_back(std::move(m));
  }
  const double n = static_cast<double>(targets.size());
  report.mean.mse /= n;
  report.mean.psnr /= n;
  report.mean.ssim /= n;
  return report;
}

std::string EvalReport::to_json() const {
  json j;
  j["engine_version"] = kEngineVersion;
  j["gaussian_count"] = gaussian_count;
  j["input_views"] = input_views;
  j["pgs"] = pgs;
  json rows = json::array();
  for (std::size_t n = 0; n < targets.size(); ++n) {
    const auto& m = targets[n].metrics;
    rows.push_back({{"index", n}, {"psnr", m.psnr}, {"ssim", m.ssim}, {"mse", m.mse}});
  }
  j["targets"] = rows;
  j["mean"] = {{"psnr", mean.psnr}, {"ssim", mean.ssim}, {"mse", mean.mse}};
  return j.dump(2);
}

}  // namespace volsplat
