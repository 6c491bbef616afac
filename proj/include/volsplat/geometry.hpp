#pragma once

#include <Eigen/Dense>

#include <string>

#include "volsplat/common.hpp"

namespace volsplat {

/// Pinhole intrinsics. Integer pixel coordinates address pixel centers.
template <typename Scalar>
struct IntrinsicsT {
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

  Scalar fx{1};
  Scalar fy{1};
  Scalar cx{0};
  Scalar cy{0};
  int width{1};
  int height{1};

  Matrix3 matrix() const {
    Matrix3 k;
    k << fx, Scalar(0), cx, Scalar(0), fy, cy, Scalar(0), Scalar(0), Scalar(1);
    return k;
  }

  Matrix3 inverse() const {
    Matrix3 k;
    k << Scalar(1) / fx, Scalar(0), -cx / fx, Scalar(0), Scalar(1) / fy, -cy / fy, Scalar(0),
        Scalar(0), Scalar(1);
    return k;
  }

  void validate() const {
    require(fx > 0 && fy > 0, ErrorKind::InvalidInput, "focal lengths must be positive");
    require(width > 0 && height > 0, ErrorKind::InvalidInput, "image size must be positive");
    require(cx >= 0 && cx < width && cy >= 0 && cy < height, ErrorKind::InvalidInput,
            "principal point must lie inside the image");
  }

  /// Intrinsics of an image downsampled by an integer block factor. Block
  /// (bx, by) covers pixels [bx*s, bx*s + s - 1], so its center sits at
  /// bx*s + (s-1)/2 in the full-resolution frame.
  IntrinsicsT scaled(int factor) const {
    const Scalar s(factor);
    const Scalar shift = Scalar(factor - 1) / Scalar(2);
    return {fx / s, fy / s, (cx - shift) / s, (cy - shift) / s, width / factor, height / factor};
  }

  template <typename Other>
  IntrinsicsT<Other> cast() const {
    return {Other(fx), Other(fy), Other(cx), Other(cy), width, height};
  }
};

/// Rigid camera-to-world transform: p_world = R * p_cam + T.
template <typename Scalar>
struct ExtrinsicsT {
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

  Matrix3 R = Matrix3::Identity();
  Vector3 T = Vector3::Zero();

  static ExtrinsicsT identity() { return {}; }

  void validate(Scalar tolerance = Scalar(1e-9)) const {
    const Scalar orth = (R.transpose() * R - Matrix3::Identity()).cwiseAbs().maxCoeff();
    require(orth <= tolerance, ErrorKind::InvalidInput, "rotation is not orthonormal");
    require(std::abs(R.determinant() - Scalar(1)) <= tolerance, ErrorKind::InvalidInput,
            "rotation determinant must be +1");
  }

  Vector3 center() const { return T; }

  Vector3 to_camera(const Vector3& p_world) const { return R.transpose() * (p_world - T); }

  Vector3 to_world(const Vector3& p_cam) const { return R * p_cam + T; }

  template <typename Other>
  ExtrinsicsT<Other> cast() const {
    return {R.template cast<Other>(), T.template cast<Other>()};
  }
};

template <typename Scalar>
struct CameraT {
  IntrinsicsT<Scalar> intrinsics;
  ExtrinsicsT<Scalar> extrinsics;

  void validate() const {
    intrinsics.validate();
    extrinsics.validate();
  }
};

template <typename Scalar>
struct PixelDepthT {
  Scalar u;
  Scalar v;
  Scalar depth;
};

using Intrinsics = IntrinsicsT<double>;
using Extrinsics = ExtrinsicsT<double>;
using Camera = CameraT<double>;
using PixelDepth = PixelDepthT<double>;

/// Lifts pixel (u, v) at z-depth `depth` to world space: R * (depth * K^-1 [u v 1]^T) + T.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> unproject_pixel(Scalar u, Scalar v, Scalar depth,
                                            const IntrinsicsT<Scalar>& k,
                                            const ExtrinsicsT<Scalar>& e) {
  require(depth > 0, ErrorKind::InvalidInput, "depth must be positive");
  const Eigen::Matrix<Scalar, 3, 1> ray((u - k.cx) / k.fx, (v - k.cy) / k.fy, Scalar(1));
  return e.to_world(depth * ray);
}

template <typename Scalar>
PixelDepthT<Scalar> project_point(const Eigen::Matrix<Scalar, 3, 1>& p_world,
                                  const IntrinsicsT<Scalar>& k, const ExtrinsicsT<Scalar>& e) {
  const Eigen::Matrix<Scalar, 3, 1> pc = e.to_camera(p_world);
  if (!(pc.z() > 0)) throw Error(ErrorKind::BehindCamera, "point is behind the camera");
  return {k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy, pc.z()};
}

/// Camera-to-world pose looking from `eye` toward `target`. `up` is the world
/// direction that should appear at the top of the image (camera -y).
template <typename Scalar>
ExtrinsicsT<Scalar> look_at(const Eigen::Matrix<Scalar, 3, 1>& eye,
                            const Eigen::Matrix<Scalar, 3, 1>& target,
                            const Eigen::Matrix<Scalar, 3, 1>& up) {
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
  const Vector3 forward = (target - eye).normalized();
  const Vector3 right_raw = forward.cross(up);
  require(right_raw.norm() > Scalar(1e-9), ErrorKind::InvalidInput,
          "look_at: up vector is parallel to the viewing direction");
  const Vector3 right = right_raw.normalized();
  const Vector3 down = forward.cross(right);
  ExtrinsicsT<Scalar> e;
  e.R.col(0) = right;
  e.R.col(1) = down;
  e.R.col(2) = forward;
  e.T = eye;
  return e;
}

// Camera JSON: {fx, fy, cx, cy, width, height, R: 9 row-major numbers, T: 3 numbers}.
std::string camera_to_json(const Camera& camera);
Camera camera_from_json(const std::string& text);
void save_camera(const Camera& camera, const std::string& path);
Camera load_camera(const std::string& path);

}  // namespace volsplat
