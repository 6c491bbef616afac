#include "volsplat/unet.hpp"

#include <cmath>

namespace volsplat {

UNetSpec UNetSpec::defaults(int channels) { return {{channels, 2 * channels, 4 * channels}, 2, Activation::Relu}; }

void UNetSpec::validate() const {
  require(widths.size() >= 2, ErrorKind::Configuration, "U-Net needs at least two levels");
  for (int w : widths) require(w >= 1, ErrorKind::Configuration, "U-Net widths must be positive");
  require(blocks_per_level >= 1, ErrorKind::Configuration, "U-Net needs at least one block per level");
}

std::vector<UNetLayer> unet_layers(const UNetSpec& spec, int in_channels) {
  spec.validate();
  require(in_channels >= 1, ErrorKind::Configuration, "U-Net input channels must be positive");
  const Activation act = spec.activation;
  const int levels = static_cast<int>(spec.widths.size());
  std::vector<UNetLayer> layers;
  auto add = [&](std::string name, int in, int out, int kernel, ConvMode mode, Activation a) {
    layers.push_back({std::move(name), ConvLayerSpec{in, out, kernel, mode, true, a}});
  };

  for (int l = 0; l < levels; ++l) {
    const int width = spec.widths[l];
    int in = l == 0 ? in_channels : width;
    if (l > 0) add("down" + std::to_string(l), spec.widths[l - 1], width, 3, ConvMode::StridedDown, act);
    for (int b = 0; b < spec.blocks_per_level; ++b) {
      add("enc" + std::to_string(l) + ".conv" + std::to_string(b), in, width, 3, ConvMode::Submanifold, act);
      in = width;
    }
  }
  for (int l = levels - 2; l >= 0; --l) {
    const int width = spec.widths[l];
    add("up" + std::to_string(l), spec.widths[l + 1], width, 3, ConvMode::TransposedUp, act);
    add("fuse" + std::to_string(l), 2 * width, width, 1, ConvMode::Submanifold, act);
    for (int b = 0; b < spec.blocks_per_level; ++b) {
      add("dec" + std::to_string(l) + ".conv" + std::to_string(b), width, width, 3, ConvMode::Submanifold, act);
    }
  }
  add("out", spec.widths[0], in_channels, 1, ConvMode::Submanifold, Activation::None);
  return layers;
}

std::vector<std::uint32_t> weight_dims(const ConvLayerSpec& conv) {
  const auto k = static_cast<std::uint32_t>(conv.kernel);
  return {k, k, k, static_cast<std::uint32_t>(conv.in_channels), static_cast<std::uint32_t>(conv.out_channels)};
}

WeightBlob random_unet_weights(const UNetSpec& spec, int in_channels, std::uint64_t seed) {
  Rng rng(seed);
  WeightBlob blob;
  for (const auto& layer : unet_layers(spec, in_channels)) {
    const auto dims = weight_dims(layer.conv);
    const std::size_t taps = std::size_t(dims[0]) * dims[1] * dims[2];
    const double fan_in = static_cast<double>(taps * dims[3]);
    const double bound = std::sqrt(6.0 / fan_in);
    std::vector<float> w(taps * dims[3] * dims[4]);
    for (auto& v : w) v = static_cast<float>(uniform(rng, -bound, bound));
    blob.add(layer.name + ".weight", dims, std::move(w));
    blob.add(layer.name + ".bias", {dims[4]}, std::vector<float>(dims[4], 0.0f));
  }
  return blob;
}

WeightBlob zero_unet_weights(const UNetSpec& spec, int in_channels) {
  WeightBlob blob;
  for (const auto& layer : unet_layers(spec, in_channels)) {
    const auto dims = weight_dims(layer.conv);
    blob.add(layer.name + ".weight", dims,
             std::vector<float>(std::size_t(dims[0]) * dims[1] * dims[2] * dims[3] * dims[4], 0.0f));
    blob.add(layer.name + ".bias", {dims[4]}, std::vector<float>(dims[4], 0.0f));
  }
  return blob;
}

SparseUNet::SparseUNet(UNetSpec spec, int in_channels, const WeightBlob& weights)
    : spec_(std::move(spec)), in_channels_(in_channels) {
  for (auto& meta : unet_layers(spec_, in_channels_)) {
    const auto& w = weights.expect(meta.name + ".weight", weight_dims(meta.conv));
    const auto& b = weights.expect(meta.name + ".bias", {static_cast<std::uint32_t>(meta.conv.out_channels)});
    layers_.push_back({std::move(meta), ConvWeights::from_tensors(w, &b)});
  }
  const std::size_t expected = layers_.size() * 2;
  require(weights.tensors.size() == expected, ErrorKind::WeightLoad,
          "weight blob has " + std::to_string(weights.tensors.size()) + " tensors, network needs " +
              std::to_string(expected));
}

const SparseUNet::Layer& SparseUNet::layer(const std::string& name) const {
  for (const auto& l : layers_) {
    if (l.meta.name == name) return l;
  }
  throw Error(ErrorKind::Configuration, "no layer named " + name);
}

SparseTensor SparseUNet::run(const Layer& l, const SparseTensor& x) const {
  SparseTensor y = l.meta.conv.mode == ConvMode::StridedDown ? strided_down(x, l.weights) : submanifold_conv(x, l.weights);
  apply_activation(y, l.meta.conv.activation);
  return y;
}

SparseTensor SparseUNet::run_up(const Layer& l, const SparseTensor& x, const std::vector<VoxelKey>& target) const {
  SparseTensor y = transposed_up(x, target, l.weights);
  apply_activation(y, l.meta.conv.activation);
  return y;
}

SparseTensor SparseUNet::forward(const SparseTensor& x) const {
  require(x.stride == 1, ErrorKind::InvalidInput, "U-Net input must be at stride 1");
  require(x.channels() == in_channels_, ErrorKind::Configuration, "U-Net input channel count mismatch");
  const int levels = static_cast<int>(spec_.widths.size());
  const auto block = [](int l, int b) { return std::to_string(l) + ".conv" + std::to_string(b); };

  std::vector<SparseTensor> skips;
  SparseTensor h = x;
  for (int l = 0; l < levels; ++l) {
    if (l > 0) h = run(layer("down" + std::to_string(l)), h);
    for (int b = 0; b < spec_.blocks_per_level; ++b) h = run(layer("enc" + block(l, b)), h);
    skips.push_back(h);
  }
  for (int l = levels - 2; l >= 0; --l) {
    const SparseTensor& skip = skips[static_cast<std::size_t>(l)];
    h = run_up(layer("up" + std::to_string(l)), h, skip.coords);
    h = run(layer("fuse" + std::to_string(l)), concat_features(h, skip));
    for (int b = 0; b < spec_.blocks_per_level; ++b) h = run(layer("dec" + block(l, b)), h);
  }
  return run(layer("out"), h);
}

SparseTensor unet_forward(const SparseTensor& x, const UNetSpec& spec, const WeightBlob& weights) {
  return SparseUNet(spec, x.channels(), weights).forward(x);
}

}  // namespace volsplat
