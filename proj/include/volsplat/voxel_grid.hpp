#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "volsplat/features.hpp"
#include "volsplat/image.hpp"

namespace volsplat {

struct FeaturedPointCloud {
  Points3 positions;
  RowMatrix features;
  std::vector<int> source_view;

  Index size() const { return positions.rows(); }
  int channels() const { return static_cast<int>(features.cols()); }
};

struct VoxelKey {
  std::int32_t i = 0;
  std::int32_t j = 0;
  std::int32_t k = 0;

  friend auto operator<=>(const VoxelKey&, const VoxelKey&) = default;
  friend bool operator==(const VoxelKey&, const VoxelKey&) = default;

  VoxelKey operator+(const VoxelKey& o) const { return {i + o.i, j + o.j, k + o.k}; }
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& key) const noexcept {
    std::uint64_t h = static_cast<std::uint32_t>(key.i);
    h = h * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint32_t>(key.j);
    h = h * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint32_t>(key.k);
    h ^= h >> 29;
    return static_cast<std::size_t>(h * 0xBF58476D1CE4E5B9ull);
  }
};

/// Occupied voxels in ascending key order with averaged features.
struct SparseVoxelGrid {
  double voxel_size = 0.1;
  std::vector<VoxelKey> keys;
  RowMatrix features;  // |keys| x C
  std::vector<std::uint32_t> counts;

  Index size() const { return static_cast<Index>(keys.size()); }
  int channels() const { return static_cast<int>(features.cols()); }
  std::optional<Index> find(const VoxelKey& key) const;
};

/// One point per valid pixel of every view, carrying that pixel's feature.
/// Feature maps coarser than the image are bilinearly upsampled first.
FeaturedPointCloud lift_views(std::span<const CameraView> views, std::span<const FeatureMap> features,
                              std::span<const DepthMap> depths);

/// Nearest-integer cell of p / voxel_size, rounding exact halves away from
/// zero. Quotients within 1e-9 (relative) of a half count as exact halves,
/// which absorbs representation error such as 0.15 / 0.1 = 1.4999999999999998.
VoxelKey voxel_index(const Eigen::Vector3d& p, double voxel_size);

Eigen::Vector3d voxel_center(const VoxelKey& key, double voxel_size);

/// Average-pools point features per voxel. The result is bit-identical for
/// any permutation of the input points and any worker count.
SparseVoxelGrid voxelize(const FeaturedPointCloud& cloud, double voxel_size);

// Grid dump: "VSVG", f32 voxel size, u32 C, u64 count, then per entry
// {i32 i, j, k; u32 count; C x f32 feature}.
std::string encode_grid(const SparseVoxelGrid& grid);
void write_grid(const SparseVoxelGrid& grid, const std::string& path);
SparseVoxelGrid decode_grid(std::string_view bytes);

/// Pairwise (cascade) sum of the rows of `rows` selected by `order`, in that order.
Eigen::RowVectorXd pairwise_row_sum(const RowMatrix& rows, std::span<const Index> order);

}  // namespace volsplat
