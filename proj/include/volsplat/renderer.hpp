#pragma once

#include <optional>

#include "volsplat/gaussians.hpp"
#include "volsplat/geometry.hpp"
#include "volsplat/image.hpp"

namespace volsplat {

/// 2D footprint of one Gaussian in a camera.
struct ProjectedSplat {
  Eigen::Vector2d mean2d;
  Eigen::Matrix2d cov2d;  // pixel^2, dilated
  Eigen::Matrix2d conic;  // cov2d^-1
  double depth;
  Eigen::Vector3d color;
  double opacity;
  int radius;  // ceil(3 sigma_max), pixels
};

struct RenderSettings {
  int tile = 16;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  double near_plane = 0.01;
  /// Isotropic screen-space dilation added to cov2d, pixel^2.
  double dilation = 0.3;
  double max_alpha = 0.99;
  double min_transmittance = 1e-4;
};

struct RenderedImage {
  Image rgb;
  Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> alpha;
  /// Alpha-weighted mean camera depth of the composited splats; 0 where alpha is 0.
  Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> depth;
};

/// EWA projection: cov2d = J W Sigma W^T J^T + dilation * I. Returns nothing when
/// the center is not in front of the near plane or the 3-sigma box misses the image.
std::optional<ProjectedSplat> project_gaussian(const Gaussian3D& g, int sh_degree, const Camera& camera,
                                               const RenderSettings& settings = {});

/// Tile-binned front-to-back compositing. Each tile's splats are ordered by
/// depth with a content-then-index tiebreak, so the image does not depend on
/// the order of the input set or on the worker count.
RenderedImage render(const GaussianSet& set, const Camera& camera, const RenderSettings& settings = {});

/// Per-pixel trace of the compositing weights alpha'_i * T_i, used by tests to
/// check transmittance conservation.
struct CompositeTrace {
  std::vector<double> weights;
  double final_transmittance;
};
CompositeTrace trace_pixel(const GaussianSet& set, const Camera& camera, int x, int y, const RenderSettings& settings = {});

}  // namespace volsplat
