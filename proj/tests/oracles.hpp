#pragma once

// Brute-force reference implementations shared by the unit and acceptance tests.

#include <vector>

#include "volsplat/sparse_conv.hpp"

namespace testing {

using namespace volsplat;

// Dense volume over [lo, lo + n)^3 with zeros at unoccupied sites.
struct Dense {
  int lo = 0;
  int n = 0;
  int channels = 0;
  std::vector<double> data;

  double* at(int i, int j, int k) {
    i -= lo, j -= lo, k -= lo;
    if (i < 0 || j < 0 || k < 0 || i >= n || j >= n || k >= n) return nullptr;
    return &data[((std::size_t(i) * n + j) * n + k) * channels];
  }
};

inline Dense densify(const SparseTensor& x, int lo, int n) {
  Dense d{lo, n, x.channels(), std::vector<double>(std::size_t(n) * n * n * x.channels(), 0.0)};
  for (Index s = 0; s < x.size(); ++s) {
    const auto& c = x.coords[static_cast<std::size_t>(s)];
    double* p = d.at(c.i, c.j, c.k);
    for (int ch = 0; ch < x.channels(); ++ch) p[ch] = x.feats(s, ch);
  }
  return d;
}

// Dense correlation sampled at `sites`: out(o) = b + sum_{a,b,c} in(step*o + (a,b,c) - 1) * W[a,b,c].
inline RowMatrix dense_conv(Dense& in, const ConvWeights& w, const std::vector<VoxelKey>& sites, int step) {
  RowMatrix out(static_cast<Index>(sites.size()), w.out_channels());
  const int half = w.kernel / 2;
  for (std::size_t s = 0; s < sites.size(); ++s) {
    Eigen::RowVectorXd acc = w.bias ? *w.bias : Eigen::RowVectorXd::Zero(w.out_channels());
    for (int a = 0; a < w.kernel; ++a) {
      for (int b = 0; b < w.kernel; ++b) {
        for (int c = 0; c < w.kernel; ++c) {
          const double* p = in.at(step * sites[s].i + a - half, step * sites[s].j + b - half, step * sites[s].k + c - half);
          if (!p) continue;
          const Eigen::Map<const Eigen::RowVectorXd> v(p, in.channels);
          acc += v * w.taps[static_cast<std::size_t>((a * w.kernel + b) * w.kernel + c)];
        }
      }
    }
    out.row(static_cast<Index>(s)) = acc;
  }
  return out;
}

inline ConvWeights transposed_taps(const ConvWeights& w) {
  ConvWeights t = ConvWeights::zeros(w.kernel, w.out_channels(), w.in_channels(), false);
  for (std::size_t i = 0; i < w.taps.size(); ++i) t.taps[i] = w.taps[i].transpose();
  return t;
}

inline double inner(const RowMatrix& a, const RowMatrix& b) { return (a.array() * b.array()).sum(); }

}  // namespace testing
