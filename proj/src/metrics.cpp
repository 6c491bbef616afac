#include "volsplat/metrics.hpp"

#include <cmath>
#include <vector>

namespace volsplat {

namespace {

using Plane = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void check_pair(const Image& a, const Image& b) {
  require(a.height == b.height && a.width == b.width && a.channels() == b.channels(), ErrorKind::InvalidInput,
          "images differ in size");
  require(!a.empty(), ErrorKind::InvalidInput, "images are empty");
}

std::vector<double> gaussian_kernel() {
  std::vector<double> k(kWindow);
  const int half = kWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    k[i] = std::exp(-0.5 * (i - half) * (i - half) / (kSigma * kSigma));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable Gaussian blur, truncated and renormalized at the borders.
Plane blur(const Plane& in, const std::vector<double>& k) {
  const int h = static_cast<int>(in.rows());
  const int w = static_cast<int>(in.cols());
  const int half = kWindow / 2;
  Plane tmp(h, w), out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0, norm = 0.0;
      for (int t = -half; t <= half; ++t) {
        const int xx = x + t;
        if (xx < 0 || xx >= w) continue;
        s += k[t + half] * in(y, xx);
        norm += k[t + half];
      }
      tmp(y, x) = s / norm;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0, norm = 0.0;
      for (int t = -half; t <= half; ++t) {
        const int yy = y + t;
        if (yy < 0 || yy >= h) continue;
        s += k[t + half] * tmp(yy, x);
        norm += k[t + half];
      }
      out(y, x) = s / norm;
    }
  }
  return out;
}

Plane channel(const Image& img, int c) {
  Plane p(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) p(y, x) = img.at(y, x, c);
  }
  return p;
}

}  // namespace

double mean_squared_error(const Image& a, const Image& b) {
  check_pair(a, b);
  return (a.values - b.values).squaredNorm() / static_cast<double>(a.values.size());
}

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

double ssim(const Image& a, const Image& b) {
  check_pair(a, b);
  const auto k = gaussian_kernel();
  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    const Plane x = channel(a, c);
    const Plane y = channel(b, c);
    const Plane mx = blur(x, k);
    const Plane my = blur(y, k);
    const Plane sxx = blur(x * x, k) - mx * mx;
    const Plane syy = blur(y * y, k) - my * my;
    const Plane sxy = blur(x * y, k) - mx * my;
    const Plane map = ((2.0 * mx * my + kC1) * (2.0 * sxy + kC2)) / ((mx * mx + my * my + kC1) * (sxx + syy + kC2));
    total += map.mean();
  }
  return total / a.channels();
}

ImageMetrics compute_image_metrics(const Image& a, const Image& b) {
  ImageMetrics m;
  m.mse = mean_squared_error(a, b);
  m.psnr = psnr_from_mse(m.mse);
  m.ssim = ssim(a, b);
  return m;
}

LossReport combined_loss(std::span<const Image> renders, std::span<const Image> references, double lambda) {
  require(renders.size() == references.size(), ErrorKind::InvalidInput, "render and reference counts differ");
  LossReport r;
  r.lambda = lambda;
  for (std::size_t m = 0; m < renders.size(); ++m) r.mse_sum += mean_squared_error(renders[m], references[m]);
  r.total = r.mse_sum + lambda * r.perceptual;
  return r;
}

}  // namespace volsplat
