#pragma once

#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "volsplat/voxel_grid.hpp"
#include "volsplat/weights.hpp"

namespace volsplat {

/// Features on a set of occupied voxels. Coordinates are expressed in the
/// units of the current level: a tensor with stride s stores floor(key / s),
/// so neighbouring sites always differ by one along an axis.
struct SparseTensor {
  std::vector<VoxelKey> coords;
  RowMatrix feats;
  int stride = 1;

  Index size() const { return static_cast<Index>(coords.size()); }
  int channels() const { return static_cast<int>(feats.cols()); }
  void validate() const;

  static SparseTensor from_grid(const SparseVoxelGrid& grid);
};

class CoordIndex {
 public:
  explicit CoordIndex(std::span<const VoxelKey> coords);
  std::optional<Index> find(const VoxelKey& key) const {
    const auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::unordered_map<VoxelKey, Index, VoxelKeyHash> map_;
};

enum class ConvMode { Submanifold, StridedDown, TransposedUp };
enum class Activation { Relu, None };

const char* to_string(Activation activation);
Activation activation_from_string(const std::string& name);

struct ConvLayerSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 3;  // 3 for spatial layers, 1 for pointwise fusion/head layers
  ConvMode mode = ConvMode::Submanifold;
  bool has_bias = true;
  Activation activation = Activation::Relu;
};

/// Taps of a k x k x k kernel. Tap t = (a*k + b)*k + c holds the in x out
/// matrix for offset (a, b, c) - k/2 along (i, j, k); a site's output row is
/// the sum over taps of input_row * taps[t].
struct ConvWeights {
  int kernel = 3;
  std::vector<Eigen::MatrixXd> taps;
  std::optional<Eigen::RowVectorXd> bias;

  int in_channels() const { return static_cast<int>(taps.front().rows()); }
  int out_channels() const { return static_cast<int>(taps.front().cols()); }
  int tap_count() const { return kernel * kernel * kernel; }
  VoxelKey offset(int tap) const;

  static ConvWeights zeros(int kernel, int in_channels, int out_channels, bool with_bias);
  /// Builds from a (k, k, k, in, out) weight tensor and an optional (out) bias tensor.
  static ConvWeights from_tensors(const NamedTensor& weight, const NamedTensor* bias);
};

/// Output occupancy equals input occupancy; unoccupied neighbours contribute nothing.
SparseTensor submanifold_conv(const SparseTensor& x, const ConvWeights& w);

/// Stride-2 convolution: output sites are the unique floor(coord / 2); site o
/// gathers inputs at 2o + offset for each kernel offset.
SparseTensor strided_down(const SparseTensor& x, const ConvWeights& w);

/// Transposed stride-2 convolution onto a saved finer coordinate set: fine
/// site t receives coarse site o through tap offset t - 2o. With taps equal to
/// the transposes of a strided_down kernel this is that operator's adjoint.
SparseTensor transposed_up(const SparseTensor& x, std::span<const VoxelKey> target_coords, const ConvWeights& w);

void apply_activation(SparseTensor& x, Activation activation);

/// V' = V + R on identical coordinates.
SparseTensor residual_refine(const SparseTensor& v, const SparseTensor& r);

/// Concatenates feature columns of two tensors sharing coordinates.
SparseTensor concat_features(const SparseTensor& a, const SparseTensor& b);

}  // namespace volsplat
