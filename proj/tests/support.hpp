#pragma once

// Shared fixtures for the unit and acceptance tests.

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "volsplat/gaussians.hpp"
#include "volsplat/geometry.hpp"
#include "volsplat/scene.hpp"
#include "volsplat/sparse_conv.hpp"

namespace testing {

using namespace volsplat;

inline Eigen::Matrix3d random_rotation(Rng& rng) {
  Eigen::Quaterniond q(standard_normal(rng), standard_normal(rng), standard_normal(rng), standard_normal(rng));
  return q.normalized().toRotationMatrix();
}

inline Camera random_camera(Rng& rng, int width = 96, int height = 80) {
  Camera c;
  c.intrinsics = {uniform(rng, 40, 200), uniform(rng, 40, 200), uniform(rng, 0, width - 1.0),
                  uniform(rng, 0, height - 1.0), width, height};
  c.extrinsics.R = random_rotation(rng);
  c.extrinsics.T = Eigen::Vector3d(uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -5, 5));
  return c;
}

inline Camera simple_camera(int size = 64, double focal = 64.0,
                            const Eigen::Vector3d& position = Eigen::Vector3d::Zero()) {
  Camera c;
  c.intrinsics = {focal, focal, (size - 1) / 2.0, (size - 1) / 2.0, size, size};
  c.extrinsics.T = position;
  return c;
}

inline SyntheticScene wall_scene(int count, double baseline, std::uint64_t seed = 1, int size = 64) {
  SceneSpec s;
  s.kind = SceneKind::TexturedWall;
  s.seed = seed;
  s.width = s.height = size;
  s.focal = size;
  s.cameras = SceneSpec::line_rig(count, baseline);
  return synthesize(s);
}

/// Random occupancy inside [0, extent)^3 with uniform features in [-1, 1].
inline SparseTensor random_sparse(Rng& rng, int extent, double occupancy, int channels) {
  SparseTensor x;
  for (int i = 0; i < extent; ++i) {
    for (int j = 0; j < extent; ++j) {
      for (int k = 0; k < extent; ++k) {
        if (uniform01(rng) < occupancy) x.coords.push_back({i, j, k});
      }
    }
  }
  if (x.coords.empty()) x.coords.push_back({0, 0, 0});
  x.feats.resize(x.size(), channels);
  for (Index n = 0; n < x.feats.size(); ++n) x.feats.data()[n] = uniform(rng, -1, 1);
  return x;
}

inline ConvWeights random_conv(Rng& rng, int kernel, int in, int out, bool bias) {
  ConvWeights w = ConvWeights::zeros(kernel, in, out, bias);
  for (auto& t : w.taps) {
    for (Index n = 0; n < t.size(); ++n) t.data()[n] = uniform(rng, -1, 1);
  }
  if (bias) {
    for (Index n = 0; n < w.bias->size(); ++n) (*w.bias)(n) = uniform(rng, -1, 1);
  }
  return w;
}

inline GaussianSet random_gaussians(Rng& rng, Index n, double spread = 0.6, double depth = 2.0) {
  GaussianSet set;
  set.resize(n, 0);
  for (Index i = 0; i < n; ++i) {
    Gaussian3D g;
    g.center = Eigen::Vector3d(uniform(rng, -spread, spread), uniform(rng, -spread, spread),
                               depth + uniform(rng, -0.5, 0.5));
    g.opacity = uniform(rng, 0.05, 0.95);
    g.scale = Eigen::Vector3d(uniform(rng, 0.01, 0.1), uniform(rng, 0.01, 0.1), uniform(rng, 0.01, 0.1));
    g.rotation = Eigen::Quaterniond(random_rotation(rng));
    g.sh = Eigen::Vector3d(uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5));
    set.set(i, g, {static_cast<int>(i), 0, 0});
  }
  return set;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("volsplat_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
