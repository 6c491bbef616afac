#pragma once

#include <span>

#include "volsplat/image.hpp"

namespace volsplat {

/// Reported PSNR when the images are identical.
inline constexpr double kPsnrCap = 99.0;

struct ImageMetrics {
  double mse = 0.0;
  double psnr = kPsnrCap;
  double ssim = 1.0;
};

/// MSE over all RGB samples, PSNR = -10 log10(MSE) capped at 99 dB, and SSIM
/// with an 11x11 Gaussian window (sigma 1.5, C1 = 0.01^2, C2 = 0.03^2) averaged
/// over pixels and channels. Near the border the window is truncated and
/// renormalized.
ImageMetrics compute_image_metrics(const Image& a, const Image& b);

double mean_squared_error(const Image& a, const Image& b);
double psnr_from_mse(double mse);
double ssim(const Image& a, const Image& b);

inline constexpr double kDefaultLossLambda = 0.05;

struct LossReport {
  double total = 0.0;
  double mse_sum = 0.0;
  double perceptual = 0.0;
  bool perceptual_enabled = false;
  double lambda = kDefaultLossLambda;
};

/// Sum of per-pair MSE plus lambda times a perceptual term. No perceptual
/// network ships with the engine, so the term is always reported as 0.
LossReport combined_loss(std::span<const Image> renders, std::span<const Image> references,
                         double lambda = kDefaultLossLambda);

}  // namespace volsplat
