#include "volsplat/voxel_grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "binary_io.hpp"

namespace volsplat {

std::optional<Index> SparseVoxelGrid::find(const VoxelKey& key) const {
  const auto it = std::lower_bound(keys.begin(), keys.end(), key);
  if (it == keys.end() || *it != key) return std::nullopt;
  return static_cast<Index>(it - keys.begin());
}

FeaturedPointCloud lift_views(std::span<const CameraView> views, std::span<const FeatureMap> features,
                              std::span<const DepthMap> depths) {
  require(views.size() == features.size() && views.size() == depths.size(), ErrorKind::InvalidInput,
          "views, feature maps and depth maps must have the same length");
  FeaturedPointCloud cloud;
  if (views.empty()) return cloud;
  const int channels = features.front().channels();

  Index budget = 0;
  std::vector<PixelGrid> full_res;
  full_res.reserve(views.size());
  std::vector<Index> offsets;
  for (std::size_t n = 0; n < views.size(); ++n) {
    const auto& view = views[n];
    const auto& f = features[n];
    const int h = view.image.height;
    const int w = view.image.width;
    require(f.channels() == channels, ErrorKind::InvalidInput, "feature maps differ in channel count");
    require(depths[n].height() == h && depths[n].width() == w, ErrorKind::InvalidInput,
            "depth maps must be at full image resolution");
    require(f.height() > 0 && h % f.height() == 0 && w % f.width() == 0 && h / f.height() == w / f.width(),
            ErrorKind::InvalidInput, "feature map is not an integer downsample of the image");
    full_res.push_back(upsample_bilinear(f.grid, h / f.height(), w / f.width()));
    offsets.push_back(budget);
    budget += depths[n].valid_mask.count();
  }

  cloud.positions.resize(budget, 3);
  cloud.features.resize(budget, channels);
  cloud.source_view.resize(static_cast<std::size_t>(budget));

  for (std::size_t n = 0; n < views.size(); ++n) {
    const auto& cam = views[n].camera;
    const auto& depth = depths[n];
    Index row = offsets[n];
    for (int y = 0; y < depth.height(); ++y) {
      for (int x = 0; x < depth.width(); ++x) {
        if (!depth.valid_mask(y, x)) continue;
        cloud.positions.row(row) =
            unproject_pixel<double>(x, y, depth.values(y, x), cam.intrinsics, cam.extrinsics).transpose();
        cloud.features.row(row) = full_res[n].pixel(y, x);
        cloud.source_view[static_cast<std::size_t>(row)] = static_cast<int>(n);
        ++row;
      }
    }
  }

  Index pixel_budget = 0;
  for (const auto& v : views) pixel_budget += Index(v.image.height) * v.image.width;
  require(cloud.size() <= pixel_budget, ErrorKind::InvalidInput, "lifted more points than input pixels");
  return cloud;
}

namespace {

std::int32_t round_half_away(double q) {
  const double fl = std::floor(q);
  const double frac = q - fl;
  const double tol = 1e-9 * std::max(1.0, std::abs(q));
  double r;
  if (std::abs(frac - 0.5) <= tol) {
    r = q >= 0 ? fl + 1.0 : fl;  // away from zero
  } else {
    r = std::round(q);
  }
  require(r >= std::numeric_limits<std::int32_t>::min() && r <= std::numeric_limits<std::int32_t>::max(),
          ErrorKind::InvalidInput, "voxel index overflows 32 bits");
  return static_cast<std::int32_t>(r);
}

}  // namespace

VoxelKey voxel_index(const Eigen::Vector3d& p, double voxel_size) {
  require(voxel_size > 0, ErrorKind::InvalidInput, "voxel size must be positive");
  require(p.allFinite(), ErrorKind::InvalidInput, "point must be finite");
  return {round_half_away(p.x() / voxel_size), round_half_away(p.y() / voxel_size),
          round_half_away(p.z() / voxel_size)};
}

Eigen::Vector3d voxel_center(const VoxelKey& key, double voxel_size) {
  require(voxel_size > 0, ErrorKind::InvalidInput, "voxel size must be positive");
  return Eigen::Vector3d(key.i, key.j, key.k) * voxel_size;
}

Eigen::RowVectorXd pairwise_row_sum(const RowMatrix& rows, std::span<const Index> order) {
  if (order.empty()) return Eigen::RowVectorXd::Zero(rows.cols());
  if (order.size() == 1) return rows.row(order.front());
  if (order.size() <= 8) {
    Eigen::RowVectorXd sum = rows.row(order.front());
    for (std::size_t t = 1; t < order.size(); ++t) sum += rows.row(order[t]);
    return sum;
  }
  const std::size_t half = order.size() / 2;
  return pairwise_row_sum(rows, order.first(half)) + pairwise_row_sum(rows, order.subspan(half));
}

SparseVoxelGrid voxelize(const FeaturedPointCloud& cloud, double voxel_size) {
  require(voxel_size > 0, ErrorKind::InvalidInput, "voxel size must be positive");
  require(cloud.features.rows() == cloud.positions.rows() &&
              static_cast<Index>(cloud.source_view.size()) == cloud.positions.rows(),
          ErrorKind::InvalidInput, "point cloud arrays differ in length");
  SparseVoxelGrid grid;
  grid.voxel_size = voxel_size;
  const Index m = cloud.size();
  grid.features.resize(0, cloud.features.cols());
  if (m == 0) return grid;

  std::vector<VoxelKey> keys(static_cast<std::size_t>(m));
  for (Index p = 0; p < m; ++p) keys[p] = voxel_index(cloud.positions.row(p).transpose(), voxel_size);

  // Order by (key, source view), then by content so the order, and hence
  // the floating-point summation, does not depend on input order.
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  auto content_less = [&](Index a, Index b) {
    for (int c = 0; c < 3; ++c) {
      const double pa = cloud.positions(a, c), pb = cloud.positions(b, c);
      if (pa != pb) return pa < pb;
    }
    for (Index c = 0; c < cloud.features.cols(); ++c) {
      const double fa = cloud.features(a, c), fb = cloud.features(b, c);
      if (fa != fb) return fa < fb;
    }
    return false;
  };
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (keys[a] != keys[b]) return keys[a] < keys[b];
    if (cloud.source_view[a] != cloud.source_view[b]) return cloud.source_view[a] < cloud.source_view[b];
    if (content_less(a, b)) return true;
    if (content_less(b, a)) return false;
    return a < b;
  });

  std::vector<std::size_t> starts;
  for (std::size_t t = 0; t < order.size(); ++t) {
    if (t == 0 || keys[order[t]] != keys[order[t - 1]]) starts.push_back(t);
  }
  starts.push_back(order.size());
  const Index n_voxels = static_cast<Index>(starts.size() - 1);

  grid.keys.resize(static_cast<std::size_t>(n_voxels));
  grid.counts.resize(static_cast<std::size_t>(n_voxels));
  grid.features.resize(n_voxels, cloud.features.cols());
  const std::span<const Index> all(order);
#pragma omp parallel for schedule(static)
  for (Index v = 0; v < n_voxels; ++v) {
    const std::size_t begin = starts[v];
    const std::size_t count = starts[v + 1] - begin;
    grid.keys[v] = keys[order[begin]];
    grid.counts[v] = static_cast<std::uint32_t>(count);
    grid.features.row(v) = pairwise_row_sum(cloud.features, all.subspan(begin, count)) / static_cast<double>(count);
  }
  return grid;
}

std::string encode_grid(const SparseVoxelGrid& grid) {
  io::ByteWriter w;
  w.bytes("VSVG");
  w.f32(static_cast<float>(grid.voxel_size));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(grid.channels()));
  w.uint<std::uint64_t>(static_cast<std::uint64_t>(grid.size()));
  for (Index v = 0; v < grid.size(); ++v) {
    const auto& key = grid.keys[v];
    w.i32(key.i);
    w.i32(key.j);
    w.i32(key.k);
    w.uint<std::uint32_t>(grid.counts[v]);
    for (Index c = 0; c < grid.features.cols(); ++c) w.f32(static_cast<float>(grid.features(v, c)));
  }
  return w.take();
}

void write_grid(const SparseVoxelGrid& grid, const std::string& path) { io::write_file(path, encode_grid(grid)); }

SparseVoxelGrid decode_grid(std::string_view bytes) {
  io::ByteReader r(bytes, "voxel grid");
  if (r.bytes(4) != "VSVG") throw Error(ErrorKind::Format, "voxel grid: bad magic");
  SparseVoxelGrid grid;
  grid.voxel_size = r.f32();
  const auto channels = r.uint<std::uint32_t>();
  const auto count = r.uint<std::uint64_t>();
  if (r.remaining() != count * (16 + 4ull * channels)) throw Error(ErrorKind::Format, "voxel grid: size mismatch");
  grid.keys.resize(count);
  grid.counts.resize(count);
  grid.features.resize(static_cast<Index>(count), channels);
  for (std::uint64_t v = 0; v < count; ++v) {
    grid.keys[v].i = r.i32();
    grid.keys[v].j = r.i32();
    grid.keys[v].k = r.i32();
    grid.counts[v] = r.uint<std::uint32_t>();
    for (std::uint32_t c = 0; c < channels; ++c) grid.features(static_cast<Index>(v), c) = r.f32();
  }
  return grid;
}

}  // namespace volsplat
