#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "volsplat/sparse_conv.hpp"
#include "volsplat/weights.hpp"

namespace volsplat {

/// Symmetric sparse U-Net layout. Level l runs at stride 2^l with widths[l]
/// channels; decoder levels concatenate the encoder skip and fuse it with a
/// pointwise conv before their own blocks.
struct UNetSpec {
  std::vector<int> widths;
  int blocks_per_level = 2;
  Activation activation = Activation::Relu;

  /// Three levels with widths [C, 2C, 4C].
  static UNetSpec defaults(int channels);
  void validate() const;
};

struct UNetLayer {
  std::string name;
  ConvLayerSpec conv;
};

/// Layers in execution order. Names: enc{l}.conv{b}, down{l}, up{l}, fuse{l},
/// dec{l}.conv{b}, out. Each owns tensors "<name>.weight" and "<name>.bias".
std::vector<UNetLayer> unet_layers(const UNetSpec& spec, int in_channels);

std::vector<std::uint32_t> weight_dims(const ConvLayerSpec& conv);

/// Kaiming-uniform weights (bound sqrt(6 / fan_in)) and zero biases.
WeightBlob random_unet_weights(const UNetSpec& spec, int in_channels, std::uint64_t seed);
WeightBlob zero_unet_weights(const UNetSpec& spec, int in_channels);

class SparseUNet {
 public:
  /// Throws a weight-load error if any tensor is missing or misshapen.
  SparseUNet(UNetSpec spec, int in_channels, const WeightBlob& weights);

  /// Residual field R on exactly the input coordinates.
  SparseTensor forward(const SparseTensor& x) const;

  const UNetSpec& spec() const { return spec_; }

 private:
  struct Layer {
    UNetLayer meta;
    ConvWeights weights;
  };

  SparseTensor run(const Layer& layer, const SparseTensor& x) const;
  SparseTensor run_up(const Layer& layer, const SparseTensor& x, const std::vector<VoxelKey>& target) const;
  const Layer& layer(const std::string& name) const;

  UNetSpec spec_;
  int in_channels_;
  std::vector<Layer> layers_;
};

SparseTensor unet_forward(const SparseTensor& x, const UNetSpec& spec, const WeightBlob& weights);

}  // namespace volsplat
