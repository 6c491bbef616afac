#include "volsplat/sparse_conv.hpp"

#include <algorithm>
#include <set>

namespace volsplat {

namespace {

std::int32_t floor_div2(std::int32_t v) { return v >= 0 ? v / 2 : -((-v + 1) / 2); }

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

void check_input(const SparseTensor& x, const ConvWeights& w) {
  require(!w.taps.empty() && static_cast<int>(w.taps.size()) == w.tap_count(), ErrorKind::Configuration,
          "kernel tap count does not match kernel size");
  require(x.channels() == w.in_channels(), ErrorKind::Configuration,
          "input has " + std::to_string(x.channels()) + " channels, kernel expects " +
              std::to_string(w.in_channels()));
  if (w.bias) {
    require(w.bias->size() == w.out_channels(), ErrorKind::Configuration, "bias length does not match kernel");
  }
}

void init_bias(RowMatrix& out, const ConvWeights& w) {
  if (w.bias) {
    out.rowwise() = *w.bias;
  } else {
    out.setZero();
  }
}

}  // namespace

void SparseTensor::validate() const {
  require(static_cast<Index>(coords.size()) == feats.rows(), ErrorKind::InvalidInput,
          "coordinate count differs from feature rows");
  require(is_power_of_two(stride), ErrorKind::InvalidInput, "stride must be a power of two");
  std::vector<VoxelKey> sorted = coords;
  std::sort(sorted.begin(), sorted.end());
  require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), ErrorKind::InvalidInput,
          "sparse tensor coordinates must be unique");
}

SparseTensor SparseTensor::from_grid(const SparseVoxelGrid& grid) { return {grid.keys, grid.features, 1}; }

CoordIndex::CoordIndex(std::span<const VoxelKey> coords) {
  map_.reserve(coords.size() * 2);
  for (std::size_t n = 0; n < coords.size(); ++n) map_.emplace(coords[n], static_cast<Index>(n));
}

const char* to_string(Activation activation) { return activation == Activation::Relu ? "relu" : "none"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "none") return Activation::None;
  throw Error(ErrorKind::Configuration, "unknown activation '" + name + "'");
}

VoxelKey ConvWeights::offset(int tap) const {
  const int half = kernel / 2;
  return {tap / (kernel * kernel) - half, (tap / kernel) % kernel - half, tap % kernel - half};
}

ConvWeights ConvWeights::zeros(int kernel, int in_channels, int out_channels, bool with_bias) {
  require(kernel == 1 || kernel == 3, ErrorKind::Configuration, "kernel size must be 1 or 3");
  require(in_channels >= 1 && out_channels >= 1, ErrorKind::Configuration, "channel counts must be >= 1");
  ConvWeights w;
  w.kernel = kernel;
  w.taps.assign(static_cast<std::size_t>(kernel * kernel * kernel), Eigen::MatrixXd::Zero(in_channels, out_channels));
  if (with_bias) w.bias = Eigen::RowVectorXd::Zero(out_channels);
  return w;
}

ConvWeights ConvWeights::from_tensors(const NamedTensor& weight, const NamedTensor* bias) {
  require(weight.dims.size() == 5 && weight.dims[0] == weight.dims[1] && weight.dims[1] == weight.dims[2],
          ErrorKind::WeightLoad, "'" + weight.name + "' must have shape (k, k, k, in, out)");
  const int k = static_cast<int>(weight.dims[0]);
  const int in = static_cast<int>(weight.dims[3]);
  const int out = static_cast<int>(weight.dims[4]);
  ConvWeights w = zeros(k, in, out, bias != nullptr);
  std::size_t p = 0;
  for (auto& tap : w.taps) {
    for (int r = 0; r < in; ++r) {
      for (int c = 0; c < out; ++c) tap(r, c) = weight.data[p++];
    }
  }
  if (bias) {
    require(bias->dims == std::vector<std::uint32_t>{static_cast<std::uint32_t>(out)}, ErrorKind::WeightLoad,
            "'" + bias->name + "' must have shape (out)");
    for (int c = 0; c < out; ++c) (*w.bias)(c) = bias->data[static_cast<std::size_t>(c)];
  }
  return w;
}

SparseTensor submanifold_conv(const SparseTensor& x, const ConvWeights& w) {
  check_input(x, w);
  const CoordIndex index(x.coords);
  SparseTensor out{x.coords, RowMatrix(x.size(), w.out_channels()), x.stride};
  init_bias(out.feats, w);
  const int taps = w.tap_count();
#pragma omp parallel for schedule(static)
  for (Index v = 0; v < x.size(); ++v) {
    for (int t = 0; t < taps; ++t) {
      const auto n = index.find(x.coords[v] + w.offset(t));
      if (n) out.feats.row(v).noalias() += x.feats.row(*n) * w.taps[t];
    }
  }
  return out;
}

SparseTensor strided_down(const SparseTensor& x, const ConvWeights& w) {
  check_input(x, w);
  std::set<VoxelKey> unique;
  for (const auto& c : x.coords) unique.insert({floor_div2(c.i), floor_div2(c.j), floor_div2(c.k)});
  SparseTensor out{{unique.begin(), unique.end()}, RowMatrix(static_cast<Index>(unique.size()), w.out_channels()),
                   x.stride * 2};
  init_bias(out.feats, w);
  const CoordIndex index(x.coords);
  const int taps = w.tap_count();
#pragma omp parallel for schedule(static)
  for (Index o = 0; o < out.size(); ++o) {
    const VoxelKey base{out.coords[o].i * 2, out.coords[o].j * 2, out.coords[o].k * 2};
    for (int t = 0; t < taps; ++t) {
      const auto n = index.find(base + w.offset(t));
      if (n) out.feats.row(o).noalias() += x.feats.row(*n) * w.taps[t];
    }
  }
  return out;
}

SparseTensor transposed_up(const SparseTensor& x, std::span<const VoxelKey> target_coords, const ConvWeights& w) {
  check_input(x, w);
  require(x.stride >= 2, ErrorKind::InvalidInput, "cannot upsample a stride-1 tensor");
  SparseTensor out{{target_coords.begin(), target_coords.end()},
                   RowMatrix(static_cast<Index>(target_coords.size()), w.out_channels()), x.stride / 2};
  if (target_coords.empty()) return out;
  init_bias(out.feats, w);
  const CoordIndex index(x.coords);
  const int taps = w.tap_count();
#pragma omp parallel for schedule(static)
  for (Index t_site = 0; t_site < out.size(); ++t_site) {
    const VoxelKey fine = out.coords[t_site];
    for (int t = 0; t < taps; ++t) {
      const VoxelKey d = w.offset(t);
      const VoxelKey twice{fine.i - d.i, fine.j - d.j, fine.k - d.k};
      if ((twice.i & 1) || (twice.j & 1) || (twice.k & 1)) continue;
      const auto n = index.find({twice.i / 2, twice.j / 2, twice.k / 2});
      if (n) out.feats.row(t_site).noalias() += x.feats.row(*n) * w.taps[t];
    }
  }
  return out;
}

void apply_activation(SparseTensor& x, Activation activation) {
  if (activation == Activation::Relu) x.feats = x.feats.cwiseMax(0.0);
}

SparseTensor residual_refine(const SparseTensor& v, const SparseTensor& r) {
  require(v.coords == r.coords, ErrorKind::InvalidInput, "residual coordinates differ from voxel coordinates");
  require(v.channels() == r.channels(), ErrorKind::InvalidInput, "residual channel count differs");
  return {v.coords, v.feats + r.feats, v.stride};
}

SparseTensor concat_features(const SparseTensor& a, const SparseTensor& b) {
  require(a.coords == b.coords, ErrorKind::InvalidInput, "skip connection coordinates differ");
  SparseTensor out{a.coords, RowMatrix(a.size(), a.channels() + b.channels()), a.stride};
  out.feats.leftCols(a.channels()) = a.feats;
  out.feats.rightCols(b.channels()) = b.feats;
  return out;
}

}  // namespace volsplat
