#include "volsplat/geometry.hpp"

#include <json.hpp>

#include "binary_io.hpp"

namespace volsplat {

using nlohmann::json;

std::string camera_to_json(const Camera& camera) {
  const auto& k = camera.intrinsics;
  const auto& e = camera.extrinsics;
  json j;
  j["fx"] = k.fx;
  j["fy"] = k.fy;
  j["cx"] = k.cx;
  j["cy"] = k.cy;
  j["width"] = k.width;
  j["height"] = k.height;
  json r = json::array();
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) r.push_back(e.R(row, col));
  }
  j["R"] = r;
  j["T"] = {e.T.x(), e.T.y(), e.T.z()};
  return j.dump(2);
}

Camera camera_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::Format, std::string("camera JSON: ") + ex.what());
  }
  Camera camera;
  try {
    auto& k = camera.intrinsics;
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    k.width = j.at("width").get<int>();
    k.height = j.at("height").get<int>();
    const auto r = j.at("R").get<std::vector<double>>();
    const auto t = j.at("T").get<std::vector<double>>();
    if (r.size() != 9 || t.size() != 3) throw Error(ErrorKind::Format, "camera JSON: R needs 9 and T needs 3 numbers");
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 3; ++col) camera.extrinsics.R(row, col) = r[row * 3 + col];
    }
    camera.extrinsics.T = Eigen::Vector3d(t[0], t[1], t[2]);
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::Format, std::string("camera JSON: ") + ex.what());
  }
  camera.validate();
  return camera;
}

void save_camera(const Camera& camera, const std::string& path) { io::write_file(path, camera_to_json(camera) + "\n"); }

Camera load_camera(const std::string& path) { return camera_from_json(io::read_file(path)); }

}  // namespace volsplat
