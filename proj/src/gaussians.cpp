#include "volsplat/gaussians.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"

namespace volsplat {

void GaussianSet::resize(Index n, int degree) {
  require(degree >= 0 && degree <= 3, ErrorKind::Configuration, "SH degree must be in [0, 3]");
  sh_degree = degree;
  centers.resize(n, 3);
  opacities.resize(n);
  scales.resize(n, 3);
  rotations.resize(n, 4);
  sh.resize(n, sh_length());
  provenance.resize(static_cast<std::size_t>(n));
}

Gaussian3D GaussianSet::get(Index i) const {
  return {centers.row(i).transpose(), opacities(i), scales.row(i).transpose(),
          Eigen::Quaterniond(rotations(i, 0), rotations(i, 1), rotations(i, 2), rotations(i, 3)),
          sh.row(i).transpose()};
}

void GaussianSet::set(Index i, const Gaussian3D& g, const VoxelKey& key) {
  centers.row(i) = g.center.transpose();
  opacities(i) = g.opacity;
  scales.row(i) = g.scale.transpose();
  rotations.row(i) << g.rotation.w(), g.rotation.x(), g.rotation.y(), g.rotation.z();
  sh.row(i) = g.sh.transpose();
  provenance[static_cast<std::size_t>(i)] = key;
}

namespace {

constexpr double kLogScaleMin = -10.0;
constexpr double kLogScaleMax = 3.0;
// Keeps sigmoid(opacity logit) strictly inside (0, 1) in double precision.
constexpr double kOpacityLogitLimit = 30.0;

NamedTensor head_tensor(int in_channels, int sh_degree, std::vector<float> data) {
  const auto p = static_cast<std::uint32_t>(RawLayout::length(sh_degree));
  return {"head.weight", {1, 1, 1, static_cast<std::uint32_t>(in_channels), p}, std::move(data)};
}

}  // namespace

WeightBlob random_head_weights(int in_channels, int sh_degree, std::uint64_t seed) {
  require(in_channels >= 1, ErrorKind::Configuration, "head input channels must be positive");
  const int p = RawLayout::length(sh_degree);
  Rng rng(seed);
  const double bound = std::sqrt(6.0 / in_channels);
  std::vector<float> w(static_cast<std::size_t>(in_channels) * p);
  for (auto& v : w) v = static_cast<float>(uniform(rng, -bound, bound));
  WeightBlob blob;
  auto t = head_tensor(in_channels, sh_degree, std::move(w));
  blob.add(t.name, t.dims, std::move(t.data));
  blob.add("head.bias", {static_cast<std::uint32_t>(p)}, std::vector<float>(static_cast<std::size_t>(p), 0.0f));
  return blob;
}

WeightBlob color_copy_head_weights(int in_channels, int sh_degree, double opacity, double log_scale,
                                   bool symmetric_offset) {
  require(in_channels >= 3, ErrorKind::Configuration, "color-copy head needs at least three feature channels");
  require(opacity > 0 && opacity < 1, ErrorKind::Configuration, "color-copy opacity must be in (0, 1)");
  const int p = RawLayout::length(sh_degree);
  std::vector<float> w(static_cast<std::size_t>(in_channels) * p, 0.0f);
  std::vector<float> b(static_cast<std::size_t>(p), 0.0f);
  for (int c = 0; c < 3; ++c) {
    w[static_cast<std::size_t>(c) * p + RawLayout::kSh + c] = static_cast<float>(1.0 / kShC0);
    b[RawLayout::kSh + c] = static_cast<float>(-0.5 / kShC0);
  }
  for (int a = 0; a < 3; ++a) {
    b[RawLayout::kOffset + a] = symmetric_offset ? 0.0f : -40.0f;
    b[RawLayout::kScale + a] = static_cast<float>(log_scale);
  }
  b[RawLayout::kOpacity] = static_cast<float>(logit(opacity));
  b[RawLayout::kRotation] = 1.0f;
  WeightBlob blob;
  auto t = head_tensor(in_channels, sh_degree, std::move(w));
  blob.add(t.name, t.dims, std::move(t.data));
  blob.add("head.bias", {static_cast<std::uint32_t>(p)}, std::move(b));
  return blob;
}

RowMatrix decode_raw(const SparseTensor& grid, const WeightBlob& head_weights, int sh_degree) {
  const auto p = static_cast<std::uint32_t>(RawLayout::length(sh_degree));
  const auto& w = head_weights.expect("head.weight", {1, 1, 1, static_cast<std::uint32_t>(grid.channels()), p});
  const auto& b = head_weights.expect("head.bias", {p});
  return submanifold_conv(grid, ConvWeights::from_tensors(w, &b)).feats;
}

Gaussian3D activate(const Eigen::Ref<const Eigen::RowVectorXd>& raw, const VoxelKey& key, double voxel_size,
                    double offset_radius, int sh_degree, bool symmetric_offset) {
  require(offset_radius > 0, ErrorKind::InvalidInput, "offset radius must be positive");
  require(raw.size() == RawLayout::length(sh_degree), ErrorKind::InvalidInput, "raw parameter length mismatch");
  Gaussian3D g;
  const Eigen::Vector3d base = voxel_center(key, voxel_size);
  for (int a = 0; a < 3; ++a) {
    const double s = sigmoid(raw(RawLayout::kOffset + a));
    g.center(a) = offset_radius * (symmetric_offset ? s - 0.5 : s) + base(a);
  }
  g.opacity = sigmoid(std::clamp(raw(RawLayout::kOpacity), -kOpacityLogitLimit, kOpacityLogitLimit));
  for (int a = 0; a < 3; ++a) {
    g.scale(a) = std::exp(std::clamp(raw(RawLayout::kScale + a), kLogScaleMin, kLogScaleMax)) * voxel_size;
  }
  const Eigen::Vector4d q = raw.segment<4>(RawLayout::kRotation).transpose();
  const double n = q.norm();
  g.rotation = n > 1e-12 ? Eigen::Quaterniond(q(0) / n, q(1) / n, q(2) / n, q(3) / n) : Eigen::Quaterniond::Identity();
  g.sh = raw.tail(raw.size() - RawLayout::kSh).transpose();
  return g;
}

GaussianSet decode_gaussians(const SparseTensor& grid, const WeightBlob& head_weights, double voxel_size,
                             const HeadConfig& config) {
  require(grid.stride == 1, ErrorKind::InvalidInput, "Gaussians decode from stride-1 voxels");
  const RowMatrix raw = decode_raw(grid, head_weights, config.sh_degree);
  const double radius = config.offset_radius_multiplier * voxel_size;
  GaussianSet set;
  set.resize(grid.size(), config.sh_degree);
#pragma omp parallel for schedule(static)
  for (Index v = 0; v < grid.size(); ++v) {
    set.set(v, activate(raw.row(v), grid.coords[v], voxel_size, radius, config.sh_degree, config.symmetric_offset),
            grid.coords[v]);
  }
  return set;
}

Eigen::Vector3d evaluate_sh(const Eigen::Ref<const Eigen::VectorXd>& sh, int sh_degree, const Eigen::Vector3d& dir) {
  constexpr double C1 = 0.4886025119029199;
  constexpr double C2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792,
                           0.5462742152960396};
  constexpr double C3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
                           -0.4570457994644658, 1.445305721320277, -0.5900435899266435};
  auto coeff = [&](int k) { return Eigen::Vector3d(sh(3 * k), sh(3 * k + 1), sh(3 * k + 2)); };
  Eigen::Vector3d c = kShC0 * coeff(0);
  if (sh_degree > 0) {
    const double x = dir.x(), y = dir.y(), z = dir.z();
    c += -C1 * y * coeff(1) + C1 * z * coeff(2) - C1 * x * coeff(3);
    if (sh_degree > 1) {
      const double xx = x * x, yy = y * y, zz = z * z;
      c += C2[0] * x * y * coeff(4) + C2[1] * y * z * coeff(5) + C2[2] * (2 * zz - xx - yy) * coeff(6) +
           C2[3] * x * z * coeff(7) + C2[4] * (xx - yy) * coeff(8);
      if (sh_degree > 2) {
        c += C3[0] * y * (3 * xx - yy) * coeff(9) + C3[1] * x * y * z * coeff(10) +
             C3[2] * y * (4 * zz - xx - yy) * coeff(11) + C3[3] * z * (2 * zz - 3 * xx - 3 * yy) * coeff(12) +
             C3[4] * x * (4 * zz - xx - yy) * coeff(13) + C3[5] * z * (xx - yy) * coeff(14) +
             C3[6] * x * (xx - 3 * yy) * coeff(15);
      }
    }
  }
  return (c.array() + 0.5).cwiseMax(0.0).cwiseMin(1.0).matrix();
}

namespace {

std::vector<std::string> ply_float_names(int sh_degree) {
  std::vector<std::string> names = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
  const int rest = 3 * (RawLayout::sh_coefficients(sh_degree) - 1);
  for (int r = 0; r < rest; ++r) names.push_back("f_rest_" + std::to_string(r));
  names.insert(names.end(), {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"});
  return names;
}

const char* const kProvenanceNames[] = {"voxel_i", "voxel_j", "voxel_k"};

}  // namespace

std::string encode_ply(const GaussianSet& set) {
  require(!set.empty(), ErrorKind::InvalidInput, "cannot export an empty Gaussian set");
  const auto names = ply_float_names(set.sh_degree);
  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\nelement vertex " << set.size() << "\n";
  for (const auto& n : names) header << "property float " << n << "\n";
  for (const char* n : kProvenanceNames) header << "property int " << n << "\n";
  header << "end_header\n";

  io::ByteWriter w;
  w.bytes(header.str());
  const int k = RawLayout::sh_coefficients(set.sh_degree);
  for (Index i = 0; i < set.size(); ++i) {
    for (int a = 0; a < 3; ++a) w.f32(static_cast<float>(set.centers(i, a)));
    for (int a = 0; a < 3; ++a) w.f32(0.0f);
    for (int c = 0; c < 3; ++c) w.f32(static_cast<float>(set.sh(i, c)));
    // f_rest is channel-major: f_rest[c * (K - 1) + (k - 1)].
    for (int c = 0; c < 3; ++c) {
      for (int coef = 1; coef < k; ++coef) w.f32(static_cast<float>(set.sh(i, 3 * coef + c)));
    }
    w.f32(static_cast<float>(logit(set.opacities(i))));
    for (int a = 0; a < 3; ++a) w.f32(static_cast<float>(std::log(set.scales(i, a))));
    for (int a = 0; a < 4; ++a) w.f32(static_cast<float>(set.rotations(i, a)));
    const auto& key = set.provenance[static_cast<std::size_t>(i)];
    w.i32(key.i);
    w.i32(key.j);
    w.i32(key.k);
  }
  return w.take();
}

void export_ply(const GaussianSet& set, const std::string& path) { io::write_file(path, encode_ply(set)); }

GaussianSet decode_ply(std::string_view bytes) {
  const std::string_view marker = "end_header\n";
  const auto end = bytes.find(marker);
  if (bytes.substr(0, 4) != "ply\n" || end == std::string_view::npos) {
    throw Error(ErrorKind::Format, "not a PLY file");
  }
  std::istringstream header{std::string(bytes.substr(0, end))};
  std::string line;
  Index count = -1;
  bool in_vertex = false;
  struct Property {
    std::string name;
    std::string type;
  };
  std::vector<Property> props;
  while (std::getline(header, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "binary_little_endian") throw Error(ErrorKind::Format, "PLY must be binary_little_endian");
    } else if (word == "element") {
      std::string name;
      Index n = 0;
      ls >> name >> n;
      in_vertex = name == "vertex";
      if (in_vertex) count = n;
      else if (n != 0) throw Error(ErrorKind::Format, "unsupported PLY element '" + name + "'");
    } else if (word == "property" && in_vertex) {
      Property p;
      ls >> p.type >> p.name;
      if (p.type == "list") throw Error(ErrorKind::Format, "PLY list properties are not supported");
      props.push_back(p);
    }
  }
  if (count < 0) throw Error(ErrorKind::Format, "PLY has no vertex element");

  std::map<std::string, std::size_t> column;
  std::size_t stride = 0;
  std::vector<std::size_t> offsets;
  for (std::size_t n = 0; n < props.size(); ++n) {
    const auto& t = props[n].type;
    std::size_t size = 0;
    if (t == "float" || t == "float32" || t == "int" || t == "int32" || t == "uint" || t == "uint32") size = 4;
    else if (t == "double" || t == "float64") size = 8;
    else if (t == "uchar" || t == "uint8" || t == "char" || t == "int8") size = 1;
    else if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") size = 2;
    else throw Error(ErrorKind::Format, "unsupported PLY property type '" + t + "'");
    column[props[n].name] = n;
    offsets.push_back(stride);
    stride += size;
  }

  int rest = 0;
  while (column.count("f_rest_" + std::to_string(rest))) ++rest;
  int degree = -1;
  for (int l = 0; l <= 3; ++l) {
    if (3 * (RawLayout::sh_coefficients(l) - 1) == rest) degree = l;
  }
  if (degree < 0) throw Error(ErrorKind::Format, "PLY f_rest count does not match an SH degree");
  for (const auto& n : ply_float_names(degree)) {
    if (n[0] != 'n' && !column.count(n)) throw Error(ErrorKind::Format, "PLY is missing property '" + n + "'");
  }

  const std::string_view body = bytes.substr(end + marker.size());
  if (body.size() != stride * static_cast<std::size_t>(count)) {
    throw Error(ErrorKind::Format, "PLY payload size does not match header");
  }
  auto value = [&](Index row, const std::string& name) -> double {
    const std::size_t n = column.at(name);
    io::ByteReader r(body.substr(static_cast<std::size_t>(row) * stride + offsets[n]), "PLY");
    const auto& t = props[n].type;
    if (t == "float" || t == "float32") return r.f32();
    if (t == "double" || t == "float64") return std::bit_cast<double>(r.uint<std::uint64_t>());
    if (t == "int" || t == "int32") return r.i32();
    if (t == "uint" || t == "uint32") return r.uint<std::uint32_t>();
    if (t == "short" || t == "int16") return static_cast<std::int16_t>(r.uint<std::uint16_t>());
    if (t == "ushort" || t == "uint16") return r.uint<std::uint16_t>();
    if (t == "char" || t == "int8") return static_cast<std::int8_t>(r.uint<std::uint8_t>());
    return r.uint<std::uint8_t>();
  };

  GaussianSet set;
  set.resize(count, degree);
  const int k = RawLayout::sh_coefficients(degree);
  const bool has_provenance = column.count("voxel_i") && column.count("voxel_j") && column.count("voxel_k");
  for (Index i = 0; i < count; ++i) {
    set.centers.row(i) << value(i, "x"), value(i, "y"), value(i, "z");
    for (int c = 0; c < 3; ++c) set.sh(i, c) = value(i, "f_dc_" + std::to_string(c));
    for (int c = 0; c < 3; ++c) {
      for (int coef = 1; coef < k; ++coef) {
        set.sh(i, 3 * coef + c) = value(i, "f_rest_" + std::to_string(c * (k - 1) + coef - 1));
      }
    }
    set.opacities(i) = sigmoid(value(i, "opacity"));
    for (int a = 0; a < 3; ++a) set.scales(i, a) = std::exp(value(i, "scale_" + std::to_string(a)));
    for (int a = 0; a < 4; ++a) set.rotations(i, a) = value(i, "rot_" + std::to_string(a));
    if (has_provenance) {
      set.provenance[static_cast<std::size_t>(i)] = {static_cast<std::int32_t>(value(i, "voxel_i")),
                                                     static_cast<std::int32_t>(value(i, "voxel_j")),
                                                     static_cast<std::int32_t>(value(i, "voxel_k"))};
    }
  }
  return set;
}

GaussianSet import_ply(const std::string& path) { return decode_ply(io::read_file(path)); }

std::string gaussian_summary_json(const GaussianSet& set) {
  nlohmann::json j;
  j["count"] = set.size();
  if (!set.empty()) {
    const Eigen::Vector3d lo = set.centers.colwise().minCoeff().transpose();
    const Eigen::Vector3d hi = set.centers.colwise().maxCoeff().transpose();
    j["bbox"] = {{"min", {lo.x(), lo.y(), lo.z()}}, {"max", {hi.x(), hi.y(), hi.z()}}};
  } else {
    j["bbox"] = nullptr;
  }
  std::vector<Index> histogram(10, 0);
  for (Index i = 0; i < set.size(); ++i) {
    const int bin = std::clamp(static_cast<int>(set.opacities(i) * 10.0), 0, 9);
    ++histogram[static_cast<std::size_t>(bin)];
  }
  j["opacity_histogram"] = histogram;
  return j.dump(2);
}

}  // namespace volsplat
