#pragma once

#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "volsplat/sparse_conv.hpp"
#include "volsplat/weights.hpp"

namespace volsplat {

/// Raw head output layout per voxel:
///   [0, 3)  center offset logits
///   3       opacity logit
///   [4, 7)  log-scale
///   [7, 11) rotation quaternion (w, x, y, z), unnormalized
///   [11, ...) SH coefficients, coefficient-major: sh[k * 3 + rgb]
struct RawLayout {
  static constexpr int kOffset = 0;
  static constexpr int kOpacity = 3;
  static constexpr int kScale = 4;
  static constexpr int kRotation = 7;
  static constexpr int kSh = 11;

  static int sh_coefficients(int sh_degree) { return (sh_degree + 1) * (sh_degree + 1); }
  static int length(int sh_degree) { return kSh + 3 * sh_coefficients(sh_degree); }
};

template <typename Scalar>
struct Gaussian3DT {
  Eigen::Matrix<Scalar, 3, 1> center;
  Scalar opacity;
  Eigen::Matrix<Scalar, 3, 1> scale;
  Eigen::Quaternion<Scalar> rotation;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sh;  // coefficient-major, 3 per coefficient

  /// R diag(scale^2) R^T.
  Eigen::Matrix<Scalar, 3, 3> covariance() const {
    const Eigen::Matrix<Scalar, 3, 3> r = rotation.toRotationMatrix();
    return r * scale.array().square().matrix().asDiagonal() * r.transpose();
  }
};

using Gaussian3D = Gaussian3DT<double>;

/// Structure-of-arrays Gaussian collection with per-Gaussian voxel provenance.
struct GaussianSet {
  int sh_degree = 0;
  Points3 centers;
  Eigen::VectorXd opacities;
  Points3 scales;
  Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor> rotations;  // (w, x, y, z)
  RowMatrix sh;
  std::vector<VoxelKey> provenance;

  Index size() const { return centers.rows(); }
  bool empty() const { return size() == 0; }
  int sh_length() const { return 3 * RawLayout::sh_coefficients(sh_degree); }

  void resize(Index n, int degree);
  Gaussian3D get(Index i) const;
  void set(Index i, const Gaussian3D& g, const VoxelKey& key);
  Eigen::Matrix3d covariance(Index i) const { return get(i).covariance(); }
};

struct HeadConfig {
  int sh_degree = 0;
  double offset_radius_multiplier = 3.0;
  bool symmetric_offset = false;
};

/// Tensor names: "head.weight" (1, 1, 1, C, P) and "head.bias" (P).
WeightBlob random_head_weights(int in_channels, int sh_degree, std::uint64_t seed);

/// Pointwise head that copies RGB feature channels into the DC color term and
/// emits constant opacity, log-scale (relative to the voxel) and identity
/// rotation, with the center offset saturated to the voxel center (or, for the
/// symmetric variant, zero offset).
WeightBlob color_copy_head_weights(int in_channels, int sh_degree, double opacity, double log_scale,
                                   bool symmetric_offset);

/// One raw parameter vector per occupied voxel (a pointwise linear layer).
RowMatrix decode_raw(const SparseTensor& grid, const WeightBlob& head_weights, int sh_degree);

/// Applies the parameter activations to one raw vector.
Gaussian3D activate(const Eigen::Ref<const Eigen::RowVectorXd>& raw, const VoxelKey& key, double voxel_size,
                    double offset_radius, int sh_degree, bool symmetric_offset = false);

GaussianSet decode_gaussians(const SparseTensor& grid, const WeightBlob& head_weights, double voxel_size,
                             const HeadConfig& config);

/// DC spherical-harmonic constant: color = kShC0 * c0 + 0.5.
inline constexpr double kShC0 = 0.28209479177387814;

/// Evaluates SH color (degree <= 3) along a unit view direction, clamped to [0, 1].
Eigen::Vector3d evaluate_sh(const Eigen::Ref<const Eigen::VectorXd>& sh, int sh_degree, const Eigen::Vector3d& dir);

// 3DGS-compatible binary PLY: x y z nx ny nz f_dc_* f_rest_* opacity (logit)
// scale_* (log) rot_* (w x y z), plus int voxel_i/voxel_j/voxel_k provenance.
std::string encode_ply(const GaussianSet& set);
void export_ply(const GaussianSet& set, const std::string& path);
GaussianSet decode_ply(std::string_view bytes);
GaussianSet import_ply(const std::string& path);

/// {count, bbox: {min, max}, opacity_histogram: 10 bins over [0, 1]}.
std::string gaussian_summary_json(const GaussianSet& set);

}  // namespace volsplat
