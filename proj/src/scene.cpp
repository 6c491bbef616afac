#include "volsplat/scene.hpp"

#include <cmath>
#include <filesystem>
#include <set>

#include <json.hpp>

#include "binary_io.hpp"
#include "volsplat/renderer.hpp"

namespace volsplat {

using nlohmann::json;
namespace fs = std::filesystem;

const char* to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::TexturedWall: return "textured-wall";
    case SceneKind::TwoPlanes: return "two-planes";
    case SceneKind::Sphere: return "sphere";
    case SceneKind::GaussianGarden: return "gaussian-garden";
  }
  return "?";
}

SceneKind scene_kind_from_string(const std::string& name) {
  if (name == "textured-wall") return SceneKind::TexturedWall;
  if (name == "two-planes") return SceneKind::TwoPlanes;
  if (name == "sphere") return SceneKind::Sphere;
  if (name == "gaussian-garden") return SceneKind::GaussianGarden;
  throw Error(ErrorKind::Spec, "unknown scene kind '" + name + "'");
}

std::vector<CameraPose> SceneSpec::line_rig(int count, double baseline) {
  std::vector<CameraPose> poses;
  for (int i = 0; i < count; ++i) {
    CameraPose p;
    p.position = Eigen::Vector3d((i - (count - 1) / 2.0) * baseline, 0.0, 0.0);
    p.look_at = p.position + Eigen::Vector3d::UnitZ();
    poses.push_back(p);
  }
  return poses;
}

Intrinsics SceneSpec::intrinsics() const {
  return {focal, focal, (width - 1) / 2.0, (height - 1) / 2.0, width, height};
}

void SceneSpec::validate() const {
  require(width > 0 && height > 0, ErrorKind::Spec, "image size must be positive");
  require(focal > 0, ErrorKind::Spec, "focal length must be positive");
  require(cameras.size() >= 2, ErrorKind::Spec, "scene needs at least two cameras");
  require(near > 0 && near < far, ErrorKind::Spec, "scene needs 0 < near < far");
  require(texture_frequency > 0, ErrorKind::Spec, "texture frequency must be positive");
  require(sphere_radius > 0, ErrorKind::Spec, "sphere radius must be positive");
  require(garden_spacing > 0 && garden_extent > 0, ErrorKind::Spec, "garden lattice must be non-empty");
  require(garden_opacity > 0 && garden_opacity < 1, ErrorKind::Spec, "garden opacity must be in (0, 1)");
  for (const auto& c : cameras) {
    require((c.look_at - c.position).norm() > 0, ErrorKind::Spec, "camera look_at equals its position");
    require(c.position.z() < wall_depth, ErrorKind::Spec, "scene geometry lies behind a camera");
  }
}

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double lattice(std::int64_t i, std::int64_t j, std::int64_t k, std::uint64_t salt) {
  std::uint64_t h = mix(salt);
  h = mix(h ^ static_cast<std::uint64_t>(i));
  h = mix(h ^ static_cast<std::uint64_t>(j));
  h = mix(h ^ static_cast<std::uint64_t>(k));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double fade(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(const Eigen::Vector3d& p, std::uint64_t salt) {
  const Eigen::Vector3d f = p.array().floor();
  const Eigen::Vector3d t = p - f;
  const auto i = static_cast<std::int64_t>(f.x());
  const auto j = static_cast<std::int64_t>(f.y());
  const auto k = static_cast<std::int64_t>(f.z());
  const double u = fade(t.x()), v = fade(t.y()), w = fade(t.z());
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz) {
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) {
        const double weight = (dx ? u : 1 - u) * (dy ? v : 1 - v) * (dz ? w : 1 - w);
        acc += weight * lattice(i + dx, j + dy, k + dz, salt);
      }
    }
  }
  return acc;
}

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  bool valid = false;
};

void hit_plane_z(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double z, Hit& best,
                 double max_x = std::numeric_limits<double>::infinity()) {
  if (std::abs(d.z()) < 1e-12) return;
  const double t = (z - o.z()) / d.z();
  if (t <= 0 || t >= best.t) return;
  if ((o + t * d).x() >= max_x) return;
  best = {t, true};
}

void hit_sphere(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& c, double r, Hit& best) {
  const Eigen::Vector3d oc = o - c;
  const double b = oc.dot(d);
  const double cc = oc.squaredNorm() - r * r;
  const double disc = b * b - d.squaredNorm() * cc;
  if (disc < 0) return;
  const double t = (-b - std::sqrt(disc)) / d.squaredNorm();
  if (t <= 0 || t >= best.t) return;
  best = {t, true};
}

CameraView raycast_view(const SceneSpec& spec, const Camera& camera) {
  CameraView view;
  view.camera = camera;
  view.image = Image(spec.height, spec.width, 3);
  DepthMap depth(spec.height, spec.width);
  const auto& k = camera.intrinsics;
  const Eigen::Vector3d origin = camera.extrinsics.center();
  bool all_hit = true;
#pragma omp parallel for schedule(static) reduction(&& : all_hit)
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const Eigen::Vector3d ray_cam((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
      const Eigen::Vector3d dir = camera.extrinsics.R * ray_cam;
      Hit hit;
      hit_plane_z(origin, dir, spec.wall_depth, hit);
      if (spec.kind == SceneKind::TwoPlanes) hit_plane_z(origin, dir, spec.front_depth, hit, spec.front_edge);
      if (spec.kind == SceneKind::Sphere) hit_sphere(origin, dir, spec.sphere_center, spec.sphere_radius, hit);
      if (!hit.valid) {
        all_hit = false;
        continue;
      }
      // ray_cam has unit z, so the ray parameter is the camera z-depth.
      const Eigen::Vector3d p = origin + hit.t * dir;
      view.image.pixel(y, x) = scene_texture(p, spec.texture_frequency, spec.seed).transpose();
      depth.values(y, x) = hit.t;
      depth.valid_mask(y, x) = true;
    }
  }
  require(all_hit, ErrorKind::Spec, "some camera rays miss the scene geometry");
  view.gt_depth = std::move(depth);
  return view;
}

GaussianSet make_garden(const SceneSpec& spec) {
  Rng rng(spec.seed ^ 0x6A09E667F3BCC909ull);
  const int per_axis = static_cast<int>(std::floor(2 * spec.garden_extent / spec.garden_spacing)) + 1;
  GaussianSet set;
  set.resize(Index(per_axis) * per_axis, 0);
  Index n = 0;
  for (int iy = 0; iy < per_axis; ++iy) {
    for (int ix = 0; ix < per_axis; ++ix) {
      const double x = -spec.garden_extent + ix * spec.garden_spacing + uniform(rng, -0.2, 0.2) * spec.garden_spacing;
      const double y = -spec.garden_extent + iy * spec.garden_spacing + uniform(rng, -0.2, 0.2) * spec.garden_spacing;
      const double z = spec.wall_depth + spec.garden_relief * std::sin(2 * M_PI * x / 0.9) * std::cos(2 * M_PI * y / 0.7);
      Gaussian3D g;
      g.center = Eigen::Vector3d(x, y, z);
      g.opacity = spec.garden_opacity;
      g.scale = Eigen::Vector3d(0.75, 0.75, 0.3) * spec.garden_spacing;
      g.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(uniform(rng, 0, M_PI), Eigen::Vector3d::UnitZ()));
      const Eigen::Vector3d color = scene_texture(g.center, 2.0, spec.seed);
      g.sh = (color.array() - 0.5) / kShC0;
      set.set(n++, g, {ix, iy, 0});
    }
  }
  return set;
}

}  // namespace

Eigen::Vector3d scene_texture(const Eigen::Vector3d& p, double frequency, std::uint64_t seed) {
  Eigen::Vector3d color;
  for (int c = 0; c < 3; ++c) {
    double acc = 0.0, norm = 0.0, amp = 1.0, freq = frequency;
    for (int octave = 0; octave < 3; ++octave) {
      acc += amp * value_noise(p * freq, mix(seed * 7 + c) + octave);
      norm += amp;
      amp *= 0.5;
      freq *= 2.0;
    }
    color(c) = acc / norm;
  }
  return color;
}

SyntheticScene synthesize(const SceneSpec& spec) {
  spec.validate();
  SyntheticScene scene;
  std::vector<Camera> cameras;
  for (const auto& pose : spec.cameras) {
    Camera cam{spec.intrinsics(), look_at<double>(pose.position, pose.look_at, pose.up)};
    cam.validate();
    cameras.push_back(cam);
  }

  if (spec.kind != SceneKind::GaussianGarden) {
    for (const auto& cam : cameras) scene.views.push_back(raycast_view(spec, cam));
    return scene;
  }

  scene.gaussians = make_garden(spec);
  for (const auto& cam : cameras) {
    const RenderedImage r = render(*scene.gaussians, cam);
    CameraView view{r.rgb, cam, DepthMap(spec.height, spec.width)};
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        if (r.alpha(y, x) >= 0.5 && r.depth(y, x) > 0) {
          view.gt_depth->values(y, x) = r.depth(y, x);
          view.gt_depth->valid_mask(y, x) = true;
        }
      }
    }
    scene.views.push_back(std::move(view));
  }
  return scene;
}

std::pair<std::vector<CameraView>, std::vector<CameraView>> hold_out(const std::vector<CameraView>& views, int m) {
  require(m >= 0 && m < static_cast<int>(views.size()), ErrorKind::InvalidInput,
          "hold-out count must be smaller than the number of views");
  const auto split = views.begin() + static_cast<std::ptrdiff_t>(views.size() - static_cast<std::size_t>(m));
  return {{views.begin(), split}, {split, views.end()}};
}

namespace {

Eigen::Vector3d vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::Spec, std::string(what) + " must be 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

SceneSpec SceneSpec::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Spec, std::string("scene JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::Spec, "scene JSON must be an object");
  static const std::set<std::string> known = {
      "kind", "seed", "width", "height", "focal", "cameras", "rig", "near", "far", "wall_depth", "front_depth",
      "front_edge", "sphere", "texture_frequency", "garden"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw Error(ErrorKind::Spec, "unknown scene key '" + key + "'");
  }
  SceneSpec s;
  try {
    s.kind = scene_kind_from_string(j.at("kind").get<std::string>());
    s.seed = j.value("seed", std::uint64_t{0});
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.focal = j.value("focal", s.width * 1.0);
    s.near = j.value("near", s.near);
    s.far = j.value("far", s.far);
    s.wall_depth = j.value("wall_depth", s.wall_depth);
    s.front_depth = j.value("front_depth", s.front_depth);
    s.front_edge = j.value("front_edge", s.front_edge);
    s.texture_frequency = j.value("texture_frequency", s.texture_frequency);
    if (j.contains("sphere")) {
      const auto& sp = j["sphere"];
      if (sp.contains("center")) s.sphere_center = vec3(sp["center"], "sphere.center");
      s.sphere_radius = sp.value("radius", s.sphere_radius);
    }
    if (j.contains("garden")) {
      const auto& g = j["garden"];
      s.garden_spacing = g.value("spacing", s.garden_spacing);
      s.garden_extent = g.value("extent", s.garden_extent);
      s.garden_relief = g.value("relief", s.garden_relief);
      s.garden_opacity = g.value("opacity", s.garden_opacity);
    }
    if (j.contains("cameras")) {
      for (const auto& c : j["cameras"]) {
        CameraPose p;
        p.position = vec3(c.at("position"), "camera position");
        p.look_at = c.contains("look_at") ? vec3(c["look_at"], "camera look_at") : p.position + Eigen::Vector3d::UnitZ();
        if (c.contains("up")) p.up = vec3(c["up"], "camera up");
        s.cameras.push_back(p);
      }
    } else {
      const json rig = j.value("rig", json::object());
      s.cameras = line_rig(rig.value("count", 2), rig.value("baseline", 0.1));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Spec, std::string("scene JSON: ") + e.what());
  }
  s.validate();
  return s;
}

std::string SceneSpec::to_json() const {
  json j;
  j["kind"] = volsplat::to_string(kind);
  j["seed"] = seed;
  j["width"] = width;
  j["height"] = height;
  j["focal"] = focal;
  j["near"] = near;
  j["far"] = far;
  j["wall_depth"] = wall_depth;
  j["front_depth"] = front_depth;
  j["front_edge"] = front_edge;
  j["texture_frequency"] = texture_frequency;
  j["sphere"] = {{"center", {sphere_center.x(), sphere_center.y(), sphere_center.z()}}, {"radius", sphere_radius}};
  j["garden"] = {{"spacing", garden_spacing}, {"extent", garden_extent}, {"relief", garden_relief},
                 {"opacity", garden_opacity}};
  json cams = json::array();
  for (const auto& c : cameras) {
    cams.push_back({{"position", {c.position.x(), c.position.y(), c.position.z()}},
                    {"look_at", {c.look_at.x(), c.look_at.y(), c.look_at.z()}},
                    {"up", {c.up.x(), c.up.y(), c.up.z()}}});
  }
  j["cameras"] = cams;
  return j.dump(2);
}

void save_scene(const SyntheticScene& scene, const SceneSpec& spec, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::File, "cannot create " + dir + ": " + ec.message());
  json manifest;
  manifest["kind"] = to_string(spec.kind);
  manifest["spec"] = json::parse(spec.to_json());
  json views = json::array();
  for (std::size_t n = 0; n < scene.views.size(); ++n) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "view_%03zu", n);
    const std::string base = std::string(stem);
    const auto& v = scene.views[n];
    write_ppm(v.image, (fs::path(dir) / (base + ".ppm")).string());
    save_camera(v.camera, (fs::path(dir) / (base + ".json")).string());
    json entry = {{"image", base + ".ppm"}, {"camera", base + ".json"}};
    if (v.gt_depth) {
      write_depth(*v.gt_depth, (fs::path(dir) / (base + ".depth")).string());
      entry["depth"] = base + ".depth";
    }
    views.push_back(entry);
  }
  manifest["views"] = views;
  if (scene.gaussians) {
    export_ply(*scene.gaussians, (fs::path(dir) / "gaussians_gt.ply").string());
    manifest["gaussians"] = "gaussians_gt.ply";
  }
  io::write_file((fs::path(dir) / "scene.json").string(), manifest.dump(2) + "\n");
}

std::vector<CameraView> load_scene(const std::string& dir) {
  const fs::path manifest_path = fs::path(dir) / "scene.json";
  if (!fs::exists(manifest_path)) throw Error(ErrorKind::File, "no scene.json in " + dir);
  json manifest;
  try {
    manifest = json::parse(io::read_file(manifest_path.string()));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, std::string("scene manifest: ") + e.what());
  }
  std::vector<CameraView> views;
  try {
    for (const auto& entry : manifest.at("views")) {
      CameraView v;
      v.image = read_ppm((fs::path(dir) / entry.at("image").get<std::string>()).string());
      v.camera = load_camera((fs::path(dir) / entry.at("camera").get<std::string>()).string());
      if (entry.contains("depth")) v.gt_depth = read_depth((fs::path(dir) / entry["depth"].get<std::string>()).string());
      v.validate();
      views.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, std::string("scene manifest: ") + e.what());
  }
  return views;
}

}  // namespace volsplat
