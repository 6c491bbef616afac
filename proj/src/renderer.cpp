#include "volsplat/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace volsplat {

std::optional<ProjectedSplat> project_gaussian(const Gaussian3D& g, int sh_degree, const Camera& camera,
                                               const RenderSettings& settings) {
  const auto& k = camera.intrinsics;
  const Eigen::Vector3d pc = camera.extrinsics.to_camera(g.center);
  if (!(pc.z() > settings.near_plane)) return std::nullopt;

  const double z = pc.z();
  Eigen::Matrix<double, 2, 3> jacobian;
  jacobian << k.fx / z, 0.0, -k.fx * pc.x() / (z * z), 0.0, k.fy / z, -k.fy * pc.y() / (z * z);
  const Eigen::Matrix3d world_to_cam = camera.extrinsics.R.transpose();
  const Eigen::Matrix<double, 2, 3> t = jacobian * world_to_cam;

  ProjectedSplat s;
  s.cov2d = t * g.covariance() * t.transpose();
  s.cov2d = 0.5 * (s.cov2d + s.cov2d.transpose()).eval();
  s.cov2d.diagonal().array() += settings.dilation;
  s.mean2d = Eigen::Vector2d(k.fx * pc.x() / z + k.cx, k.fy * pc.y() / z + k.cy);
  s.depth = z;
  s.opacity = g.opacity;

  const double det = s.cov2d.determinant();
  if (!(det > 0)) return std::nullopt;
  s.conic = s.cov2d.inverse();
  const double mid = 0.5 * (s.cov2d(0, 0) + s.cov2d(1, 1));
  const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
  s.radius = static_cast<int>(std::ceil(3.0 * std::sqrt(lambda_max)));
  if (s.mean2d.x() + s.radius < 0 || s.mean2d.x() - s.radius > k.width - 1 || s.mean2d.y() + s.radius < 0 ||
      s.mean2d.y() - s.radius > k.height - 1) {
    return std::nullopt;
  }

  const Eigen::Vector3d dir = (g.center - camera.extrinsics.center()).normalized();
  s.color = evaluate_sh(g.sh, sh_degree, dir);
  return s;
}

namespace {

struct Binned {
  std::vector<std::optional<ProjectedSplat>> splats;
  std::vector<std::vector<Index>> tiles;  // splat indices per tile, front to back
  int tiles_x = 0;
  int tiles_y = 0;
};

// Strict weak order on splat content, used to break exact depth ties.
bool content_less(const ProjectedSplat& a, const ProjectedSplat& b) {
  const double ka[] = {a.depth, a.mean2d.x(), a.mean2d.y(), a.opacity, a.color.x(), a.color.y(), a.color.z(),
                       a.cov2d(0, 0), a.cov2d(0, 1), a.cov2d(1, 1)};
  const double kb[] = {b.depth, b.mean2d.x(), b.mean2d.y(), b.opacity, b.color.x(), b.color.y(), b.color.z(),
                       b.cov2d(0, 0), b.cov2d(0, 1), b.cov2d(1, 1)};
  return std::lexicographical_compare(std::begin(ka), std::end(ka), std::begin(kb), std::end(kb));
}

Binned bin_splats(const GaussianSet& set, const Camera& camera, const RenderSettings& settings) {
  require(settings.tile >= 1, ErrorKind::Configuration, "tile size must be positive");
  const int w = camera.intrinsics.width;
  const int h = camera.intrinsics.height;
  Binned b;
  b.splats.resize(static_cast<std::size_t>(set.size()));
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < set.size(); ++i) {
    b.splats[static_cast<std::size_t>(i)] = project_gaussian(set.get(i), set.sh_degree, camera, settings);
  }

  std::vector<Index> order;
  for (Index i = 0; i < set.size(); ++i) {
    if (b.splats[static_cast<std::size_t>(i)]) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](Index x, Index y) {
    const auto& a = *b.splats[static_cast<std::size_t>(x)];
    const auto& c = *b.splats[static_cast<std::size_t>(y)];
    if (content_less(a, c)) return true;
    if (content_less(c, a)) return false;
    return x < y;
  });

  b.tiles_x = (w + settings.tile - 1) / settings.tile;
  b.tiles_y = (h + settings.tile - 1) / settings.tile;
  b.tiles.resize(static_cast<std::size_t>(b.tiles_x) * b.tiles_y);
  for (Index i : order) {
    const auto& s = *b.splats[static_cast<std::size_t>(i)];
    const int x0 = std::max(0, static_cast<int>(std::floor(s.mean2d.x() - s.radius)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(s.mean2d.x() + s.radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(s.mean2d.y() - s.radius)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(s.mean2d.y() + s.radius)));
    if (x0 > x1 || y0 > y1) continue;
    for (int ty = y0 / settings.tile; ty <= y1 / settings.tile; ++ty) {
      for (int tx = x0 / settings.tile; tx <= x1 / settings.tile; ++tx) {
        b.tiles[static_cast<std::size_t>(ty) * b.tiles_x + tx].push_back(i);
      }
    }
  }
  return b;
}

struct PixelResult {
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  double depth = 0.0;
  double transmittance = 1.0;
};

template <typename OnWeight>
PixelResult composite(const Binned& b, const std::vector<Index>& list, int x, int y, const RenderSettings& settings,
                      OnWeight&& on_weight) {
  PixelResult r;
  const Eigen::Vector2d pixel(x, y);
  for (Index i : list) {
    const auto& s = *b.splats[static_cast<std::size_t>(i)];
    const Eigen::Vector2d d = pixel - s.mean2d;
    const double power = -0.5 * d.dot(s.conic * d);
    const double alpha = std::min(settings.max_alpha, s.opacity * std::exp(power));
    const double weight = alpha * r.transmittance;
    on_weight(weight);
    r.color += weight * s.color;
    r.depth += weight * s.depth;
    r.transmittance *= 1.0 - alpha;
    if (r.transmittance < settings.min_transmittance) break;
  }
  return r;
}

}  // namespace

RenderedImage render(const GaussianSet& set, const Camera& camera, const RenderSettings& settings) {
  const int w = camera.intrinsics.width;
  const int h = camera.intrinsics.height;
  const Binned b = bin_splats(set, camera, settings);

  RenderedImage out;
  out.rgb = Image(h, w, 3);
  out.alpha.setZero(h, w);
  out.depth.setZero(h, w);
  const int tile_count = b.tiles_x * b.tiles_y;
#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < tile_count; ++t) {
    const int tx = t % b.tiles_x;
    const int ty = t / b.tiles_x;
    const auto& list = b.tiles[static_cast<std::size_t>(t)];
    for (int y = ty * settings.tile; y < std::min(h, (ty + 1) * settings.tile); ++y) {
      for (int x = tx * settings.tile; x < std::min(w, (tx + 1) * settings.tile); ++x) {
        const PixelResult r = composite(b, list, x, y, settings, [](double) {});
        out.rgb.pixel(y, x) = (r.color + r.transmittance * settings.background).transpose();
        const double a = 1.0 - r.transmittance;
        out.alpha(y, x) = a;
        out.depth(y, x) = a > 0 ? r.depth / a : 0.0;
      }
    }
  }
  return out;
}

CompositeTrace trace_pixel(const GaussianSet& set, const Camera& camera, int x, int y, const RenderSettings& settings) {
  require(x >= 0 && y >= 0 && x < camera.intrinsics.width && y < camera.intrinsics.height, ErrorKind::InvalidInput,
          "pixel outside the image");
  const Binned b = bin_splats(set, camera, settings);
  const auto& list = b.tiles[static_cast<std::size_t>(y / settings.tile) * b.tiles_x + x / settings.tile];
  CompositeTrace trace;
  const PixelResult r = composite(b, list, x, y, settings, [&](double wgt) { trace.weights.push_back(wgt); });
  trace.final_transmittance = r.transmittance;
  return trace;
}

}  // namespace volsplat
