#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "volsplat/gaussians.hpp"
#include "volsplat/image.hpp"

namespace volsplat {

enum class SceneKind { TexturedWall, TwoPlanes, Sphere, GaussianGarden };

const char* to_string(SceneKind kind);
SceneKind scene_kind_from_string(const std::string& name);

struct CameraPose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d look_at = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d up = -Eigen::Vector3d::UnitY();
};

/// Analytic scene description. World axes follow the camera convention of
/// the default rig: x right, y down, z forward.
struct SceneSpec {
  SceneKind kind = SceneKind::TexturedWall;
  std::uint64_t seed = 0;
  int width = 64;
  int height = 64;
  double focal = 64.0;  // pixels, fx = fy
  std::vector<CameraPose> cameras;
  double near = 0.5;
  double far = 10.0;

  double wall_depth = 2.0;          // background plane z = wall_depth
  double front_depth = 1.2;         // two-planes: occluder at z = front_depth ...
  double front_edge = 0.0;          // ... covering x < front_edge
  Eigen::Vector3d sphere_center{0.0, 0.0, 1.6};
  double sphere_radius = 0.4;
  double texture_frequency = 8.0;   // noise lattice cells per world unit

  double garden_spacing = 0.04;     // lattice pitch of ground-truth Gaussians
  double garden_extent = 1.6;       // half-width of the Gaussian carpet
  double garden_relief = 0.05;      // amplitude of the carpet's height undulation
  double garden_opacity = 0.95;

  /// Line rig of `count` parallel cameras spaced `baseline` apart along x at z = 0.
  static std::vector<CameraPose> line_rig(int count, double baseline);

  Intrinsics intrinsics() const;
  void validate() const;

  static SceneSpec from_json(const std::string& text);
  std::string to_json() const;
};

struct SyntheticScene {
  std::vector<CameraView> views;
  std::optional<GaussianSet> gaussians;  // gaussian-garden only
};

SyntheticScene synthesize(const SceneSpec& spec);

/// Procedural RGB texture in [0, 1] evaluated at a world point.
Eigen::Vector3d scene_texture(const Eigen::Vector3d& p, double frequency, std::uint64_t seed);

/// Deterministic split: the first |views| - m views are inputs, the last m are targets.
std::pair<std::vector<CameraView>, std::vector<CameraView>> hold_out(const std::vector<CameraView>& views, int m);

// Scene directory: scene.json manifest plus view_NNN.ppm / .json / .depth
// and, for gaussian-garden, gaussians_gt.ply.
void save_scene(const SyntheticScene& scene, const SceneSpec& spec, const std::string& dir);
std::vector<CameraView> load_scene(const std::string& dir);

}  // namespace volsplat
