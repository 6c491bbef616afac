#include "volsplat/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "binary_io.hpp"

namespace volsplat {

const char* to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::GradientDescriptor: return "gradient-descriptor";
    case FeatureKind::RandomProjection: return "random-projection";
    case FeatureKind::ExternalFile: return "external-file";
  }
  return "?";
}

FeatureKind feature_kind_from_string(const std::string& name) {
  if (name == "gradient-descriptor") return FeatureKind::GradientDescriptor;
  if (name == "random-projection") return FeatureKind::RandomProjection;
  if (name == "external-file") return FeatureKind::ExternalFile;
  throw Error(ErrorKind::Configuration, "unknown feature kind '" + name + "'");
}

void FeatureExtractorSpec::validate() const {
  require(channels >= 1, ErrorKind::Configuration, "feature channels must be >= 1");
  require(scale == 1 || scale == 2 || scale == 4 || scale == 8, ErrorKind::Configuration,
          "feature scale must be one of 1, 2, 4, 8");
}

namespace {

// Full-resolution descriptor channel c: colors first, then forward-difference
// gradients (x then y, per color) at steps 1, 2, 4, ...
double descriptor(const Image& image, int y, int x, int c) {
  if (c < 3) return image.at(y, x, c);
  const int g = c - 3;
  const int step = 1 << (g / 6);
  const int comp = g % 6;
  const int color = comp % 3;
  if (comp < 3) {
    return x + step < image.width ? image.at(y, x + step, color) - image.at(y, x, color) : 0.0;
  }
  return y + step < image.height ? image.at(y + step, x, color) - image.at(y, x, color) : 0.0;
}

void normalize_rows(RowMatrix& values) {
  const double target = std::sqrt(static_cast<double>(values.cols()));
  for (Index i = 0; i < values.rows(); ++i) {
    const double n = values.row(i).norm();
    if (n > 1e-12) values.row(i) *= target / n;
  }
}

FeatureMap gradient_descriptor(const Image& image, const FeatureExtractorSpec& spec) {
  const int s = spec.scale;
  FeatureMap out{PixelGrid(image.height / s, image.width / s, spec.channels), s};
  const double inv_area = 1.0 / (s * s);
#pragma omp parallel for schedule(static)
  for (int by = 0; by < out.height(); ++by) {
    for (int bx = 0; bx < out.width(); ++bx) {
      for (int c = 0; c < spec.channels; ++c) {
        double sum = 0.0;
        for (int dy = 0; dy < s; ++dy) {
          for (int dx = 0; dx < s; ++dx) sum += descriptor(image, by * s + dy, bx * s + dx, c);
        }
        out.grid.at(by, bx, c) = sum * inv_area;
      }
    }
  }
  return out;
}

FeatureMap random_projection(const Image& image, const FeatureExtractorSpec& spec) {
  const int s = spec.scale;
  const int patch = s * s * 3;
  Rng rng(spec.seed);
  RowMatrix projection(patch, spec.channels);
  const double gain = 1.0 / std::sqrt(static_cast<double>(patch));
  for (Index i = 0; i < projection.size(); ++i) projection.data()[i] = standard_normal(rng) * gain;

  FeatureMap out{PixelGrid(image.height / s, image.width / s, spec.channels), s};
#pragma omp parallel for schedule(static)
  for (int by = 0; by < out.height(); ++by) {
    Eigen::RowVectorXd patch_values(patch);
    for (int bx = 0; bx < out.width(); ++bx) {
      int p = 0;
      for (int dy = 0; dy < s; ++dy) {
        for (int dx = 0; dx < s; ++dx) {
          for (int c = 0; c < 3; ++c) patch_values(p++) = image.at(by * s + dy, bx * s + dx, c) - 0.5;
        }
      }
      out.grid.pixel(by, bx) = patch_values * projection;
    }
  }
  return out;
}

}  // namespace

FeatureMap extract_features(const CameraView& view, const FeatureExtractorSpec& spec) {
  spec.validate();
  const Image& image = view.image;
  require(!image.empty() && image.channels() == 3, ErrorKind::InvalidInput, "feature extraction needs an RGB image");
  require(image.height % spec.scale == 0 && image.width % spec.scale == 0, ErrorKind::InvalidInput,
          "image size must be divisible by the feature scale");

  FeatureMap out;
  switch (spec.kind) {
    case FeatureKind::GradientDescriptor: out = gradient_descriptor(image, spec); break;
    case FeatureKind::RandomProjection: out = random_projection(image, spec); break;
    case FeatureKind::ExternalFile: {
      out = read_feature_file(spec.path, spec.scale);
      if (out.height() != image.height / spec.scale || out.width() != image.width / spec.scale ||
          out.channels() != spec.channels) {
        throw Error(ErrorKind::Format, spec.path + ": feature map shape does not match the view");
      }
      return out;
    }
  }
  if (spec.normalize) normalize_rows(out.grid.values);
  return out;
}

WarpResult warp_feature(const FeatureMap& source, const CameraPair& source_camera,
                        const CameraPair& reference_camera, double depth_plane) {
  require(depth_plane > 0, ErrorKind::InvalidInput, "depth plane must be positive");
  const int h = source.height();
  const int w = source.width();
  const Intrinsics k_ref = reference_camera.intrinsics.scaled(source.scale);
  const Intrinsics k_src = source_camera.intrinsics.scaled(source.scale);
  require(k_ref.width == w && k_ref.height == h, ErrorKind::InvalidInput,
          "feature map resolution does not match the reference camera");

  WarpResult result{FeatureMap{PixelGrid(h, w, source.channels()), source.scale},
                    MaskArray::Constant(h, w, false)};
  constexpr double kSnap = 1e-9;
  auto snap = [](double t) {
    const double r = std::round(t);
    return std::abs(t - r) < kSnap ? r : t;
  };

#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector3d p = unproject_pixel<double>(x, y, depth_plane, k_ref, reference_camera.extrinsics);
      const Eigen::Vector3d pc = source_camera.extrinsics.to_camera(p);
      if (!(pc.z() > 0)) continue;
      const double u = snap(k_src.fx * pc.x() / pc.z() + k_src.cx);
      const double v = snap(k_src.fy * pc.y() / pc.z() + k_src.cy);
      if (!(u >= 0 && v >= 0 && u <= w - 1 && v <= h - 1)) continue;
      const int x0 = static_cast<int>(std::floor(u));
      const int y0 = static_cast<int>(std::floor(v));
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const double ax = u - x0;
      const double ay = v - y0;
      result.features.grid.pixel(y, x) =
          (1 - ay) * ((1 - ax) * source.grid.pixel(y0, x0) + ax * source.grid.pixel(y0, x1)) +
          ay * ((1 - ax) * source.grid.pixel(y1, x0) + ax * source.grid.pixel(y1, x1));
      result.valid(y, x) = true;
    }
  }
  return result;
}

CostVolume build_cost_volume(const FeatureMap& reference, std::span<const NeighborView> neighbors,
                             const CameraPair& reference_camera, std::span<const double> hypotheses) {
  require(!neighbors.empty(), ErrorKind::InvalidInput, "cost volume needs at least one neighbor");
  require(hypotheses.size() >= 2, ErrorKind::InvalidInput, "cost volume needs at least two depth hypotheses");
  for (std::size_t m = 0; m < hypotheses.size(); ++m) {
    require(hypotheses[m] > 0, ErrorKind::InvalidInput, "depth hypotheses must be positive");
    if (m > 0) require(hypotheses[m] > hypotheses[m - 1], ErrorKind::InvalidInput, "depth hypotheses must increase");
  }
  for (const auto& n : neighbors) {
    require(n.features != nullptr, ErrorKind::InvalidInput, "null neighbor feature map");
    require(n.features->height() == reference.height() && n.features->width() == reference.width() &&
                n.features->channels() == reference.channels() && n.features->scale == reference.scale,
            ErrorKind::InvalidInput, "neighbor feature map shape differs from the reference");
  }

  const int h = reference.height();
  const int w = reference.width();
  const Index cells = Index(h) * w;
  const double inv_c = 1.0 / reference.channels();
  const std::size_t n_neighbors = neighbors.size();

  CostVolume volume;
  volume.height = h;
  volume.width = w;
  volume.depth_hypotheses.assign(hypotheses.begin(), hypotheses.end());
  volume.scores = RowMatrix::Zero(cells, static_cast<Index>(hypotheses.size()));

  std::vector<WarpResult> warps(n_neighbors);
  for (std::size_t m = 0; m < hypotheses.size(); ++m) {
    for (std::size_t n = 0; n < n_neighbors; ++n) {
      warps[n] = warp_feature(*neighbors[n].features, neighbors[n].camera, reference_camera, hypotheses[m]);
    }
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < cells; ++i) {
      const int y = static_cast<int>(i / w);
      const int x = static_cast<int>(i % w);
      // Sorted accumulation keeps the mean independent of neighbor order.
      double terms[64];
      std::vector<double> spill;
      double* values = terms;
      if (n_neighbors > 64) {
        spill.resize(n_neighbors);
        values = spill.data();
      }
      std::size_t count = 0;
      for (std::size_t n = 0; n < n_neighbors; ++n) {
        if (!warps[n].valid(y, x)) continue;
        values[count++] = reference.grid.values.row(i).dot(warps[n].features.grid.values.row(i)) * inv_c;
      }
      if (count == 0) continue;
      std::sort(values, values + count);
      double sum = 0.0;
      for (std::size_t t = 0; t < count; ++t) sum += values[t];
      volume.scores(i, static_cast<Index>(m)) = sum / static_cast<double>(count);
    }
  }
  return volume;
}

DepthSpacing depth_spacing_from_string(const std::string& name) {
  if (name == "linear") return DepthSpacing::Linear;
  if (name == "inverse") return DepthSpacing::Inverse;
  throw Error(ErrorKind::Configuration, "unknown depth spacing '" + name + "'");
}

const char* to_string(DepthSpacing spacing) { return spacing == DepthSpacing::Linear ? "linear" : "inverse"; }

std::vector<double> sample_depth_hypotheses(double near, double far, int count, DepthSpacing spacing) {
  require(near > 0 && near < far, ErrorKind::InvalidRange, "depth range needs 0 < near < far");
  require(count >= 2, ErrorKind::InvalidInput, "need at least two depth hypotheses");
  std::vector<double> depths(static_cast<std::size_t>(count));
  const double steps = count - 1;
  for (int m = 0; m < count; ++m) {
    const double t = m / steps;
    if (spacing == DepthSpacing::Linear) {
      depths[m] = near + t * (far - near);
    } else {
      const double inv = 1.0 / near + t * (1.0 / far - 1.0 / near);
      depths[m] = 1.0 / inv;
    }
  }
  depths.front() = near;
  depths.back() = far;
  return depths;
}

DepthMap regress_depth(const CostVolume& volume, double temperature) {
  require(temperature > 0, ErrorKind::InvalidInput, "softargmax temperature must be positive");
  require(volume.planes() >= 2, ErrorKind::InvalidInput, "cost volume needs at least two planes");
  const auto& d = volume.depth_hypotheses;
  const Eigen::Map<const Eigen::VectorXd> depths(d.data(), static_cast<Index>(d.size()));
  const double lo = depths.minCoeff();
  const double hi = depths.maxCoeff();

  DepthMap out(volume.height, volume.width);
  out.valid_mask.setConstant(true);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < volume.scores.rows(); ++i) {
    const Eigen::RowVectorXd logits = volume.scores.row(i) / temperature;
    const Eigen::RowVectorXd weights = (logits.array() - logits.maxCoeff()).exp().matrix();
    const double depth = weights.dot(depths) / weights.sum();
    out.values(i / volume.width, i % volume.width) = std::clamp(depth, lo, hi);
  }
  return out;
}

DepthMap upsample_depth(const DepthMap& depth, int target_height, int target_width) {
  const int h = depth.height();
  const int w = depth.width();
  require(h > 0 && w > 0, ErrorKind::InvalidInput, "empty depth map");
  require(target_height % h == 0 && target_width % w == 0, ErrorKind::InvalidInput,
          "target size must be an integer multiple of the depth map size");
  const int fy = target_height / h;
  const int fx = target_width / w;
  if (fy == 1 && fx == 1) return depth;

  DepthMap out(target_height, target_width);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < target_height; ++y) {
    const BilinearTaps ty = upsample_taps(y, fy, h);
    for (int x = 0; x < target_width; ++x) {
      const BilinearTaps tx = upsample_taps(x, fx, w);
      const int ys[2] = {ty.lo, ty.hi};
      const int xs[2] = {tx.lo, tx.hi};
      const double wy[2] = {1 - ty.w_hi, ty.w_hi};
      const double wx[2] = {1 - tx.w_hi, tx.w_hi};
      double value = 0.0;
      bool valid = true;
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          const double weight = wy[a] * wx[b];
          if (weight <= 0.0) continue;
          valid = valid && depth.valid_mask(ys[a], xs[b]);
          value += weight * depth.values(ys[a], xs[b]);
        }
      }
      out.valid_mask(y, x) = valid;
      out.values(y, x) = valid ? value : 0.0;
    }
  }
  return out;
}

void write_feature_file(const FeatureMap& features, const std::string& path) {
  io::ByteWriter w;
  w.bytes("VSFM");
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(features.height()));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(features.width()));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(features.channels()));
  const auto& v = features.grid.values;
  for (Index i = 0; i < v.rows(); ++i) {
    for (Index c = 0; c < v.cols(); ++c) w.f32(static_cast<float>(v(i, c)));
  }
  io::write_file(path, w.buffer());
}

FeatureMap read_feature_file(const std::string& path, int scale) {
  std::string data;
  try {
    data = io::read_file(path);
  } catch (const Error&) {
    throw Error(ErrorKind::Format, "missing feature file " + path);
  }
  io::ByteReader r(data, path);
  if (r.bytes(4) != "VSFM") throw Error(ErrorKind::Format, path + ": bad feature magic");
  const auto h = r.uint<std::uint32_t>();
  const auto w = r.uint<std::uint32_t>();
  const auto c = r.uint<std::uint32_t>();
  if (h == 0 || w == 0 || c == 0 || r.remaining() != std::size_t(h) * w * c * 4) {
    throw Error(ErrorKind::Format, path + ": feature payload does not match header");
  }
  FeatureMap out{PixelGrid(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c)), scale};
  for (Index i = 0; i < out.grid.values.rows(); ++i) {
    for (Index k = 0; k < out.grid.values.cols(); ++k) out.grid.values(i, k) = r.f32();
  }
  return out;
}

}  // namespace volsplat
