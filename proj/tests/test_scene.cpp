#include <doctest.h>

#include <filesystem>

#include "support.hpp"
#include "volsplat/renderer.hpp"
#include "volsplat/scene.hpp"

using namespace volsplat;

namespace {

SceneSpec small_spec(SceneKind kind, int cameras = 2) {
  SceneSpec s;
  s.kind = kind;
  s.seed = 5;
  s.width = s.height = 32;
  s.focal = 32;
  s.cameras = SceneSpec::line_rig(cameras, 0.1);
  return s;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::InvalidInput;
}

}  // namespace

TEST_CASE("textured wall has constant depth") {
  const SyntheticScene scene = synthesize(small_spec(SceneKind::TexturedWall, 3));
  REQUIRE(scene.views.size() == 3);
  CHECK_FALSE(scene.gaussians.has_value());
  for (const auto& v : scene.views) {
    REQUIRE(v.gt_depth);
    CHECK(v.gt_depth->valid_mask.all());
    CHECK((v.gt_depth->values - 2.0).abs().maxCoeff() < 1e-12);
    CHECK(v.image.values.minCoeff() >= 0.0);
    CHECK(v.image.values.maxCoeff() <= 1.0);
  }
}

TEST_CASE("synthesis is a pure function of the spec") {
  const SceneSpec spec = small_spec(SceneKind::TexturedWall);
  CHECK(synthesize(spec).views[0].image.values == synthesize(spec).views[0].image.values);
  SceneSpec other = spec;
  other.seed = 6;
  CHECK(synthesize(spec).views[0].image.values != synthesize(other).views[0].image.values);
}

TEST_CASE("pixel colors match the texture at the lifted surface point") {
  for (SceneKind kind : {SceneKind::TexturedWall, SceneKind::TwoPlanes, SceneKind::Sphere}) {
    const SceneSpec spec = small_spec(kind);
    const SyntheticScene scene = synthesize(spec);
    for (const auto& v : scene.views) {
      for (int y = 0; y < spec.height; y += 5) {
        for (int x = 0; x < spec.width; x += 5) {
          const Eigen::Vector3d p = unproject_pixel<double>(x, y, v.gt_depth->values(y, x), v.camera.intrinsics,
                                                            v.camera.extrinsics);
          const Eigen::Vector3d c = scene_texture(p, spec.texture_frequency, spec.seed);
          CHECK((v.image.pixel(y, x).transpose() - c).cwiseAbs().maxCoeff() < 1e-9);
        }
      }
    }
  }
}

TEST_CASE("wall views agree under reprojection") {
  // Baseline 0.125 at depth 2 with focal 64 is a disparity of exactly 4 pixels.
  const SyntheticScene scene = testing::wall_scene(2, 0.125);
  const auto& a = scene.views[0];
  const auto& b = scene.views[1];
  for (int y = 0; y < 64; y += 3) {
    for (int x = 4; x < 64; x += 3) {
      CHECK((a.image.pixel(y, x) - b.image.pixel(y, x - 4)).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("two planes and sphere depths") {
  const SceneSpec planes = small_spec(SceneKind::TwoPlanes);
  const SyntheticScene p = synthesize(planes);
  const auto& d = p.views[0].gt_depth->values;
  CHECK(d.minCoeff() == doctest::Approx(planes.front_depth));
  CHECK(d.maxCoeff() == doctest::Approx(planes.wall_depth));

  const SceneSpec sphere = small_spec(SceneKind::Sphere);
  const SyntheticScene s = synthesize(sphere);
  const double nearest = sphere.sphere_center.z() - sphere.sphere_radius;
  CHECK(s.views[0].gt_depth->values.minCoeff() >= nearest - 1e-9);
  CHECK(s.views[0].gt_depth->values.minCoeff() < sphere.sphere_center.z());
  CHECK(s.views[0].gt_depth->values.maxCoeff() == doctest::Approx(sphere.wall_depth));
}

TEST_CASE("garden views re-render from the ground-truth Gaussians") {
  SceneSpec spec = small_spec(SceneKind::GaussianGarden);
  spec.garden_spacing = 0.08;
  const SyntheticScene scene = synthesize(spec);
  REQUIRE(scene.gaussians);
  CHECK(scene.gaussians->size() == 41 * 41);
  for (const auto& v : scene.views) {
    CHECK(render(*scene.gaussians, v.camera).rgb.values == v.image.values);
    CHECK(v.gt_depth->valid_mask.count() > 0);
  }
}

TEST_CASE("hold_out splits off the last views") {
  const auto views = synthesize(small_spec(SceneKind::TexturedWall, 6)).views;
  const auto [in, out] = hold_out(views, 2);
  REQUIRE(in.size() == 4);
  REQUIRE(out.size() == 2);
  CHECK(out[0].camera.extrinsics.T == views[4].camera.extrinsics.T);
  CHECK(out[1].camera.extrinsics.T == views[5].camera.extrinsics.T);
  CHECK(hold_out(views, 0).first.size() == 6);
  CHECK(kind_of([&] { hold_out(views, 6); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([&] { hold_out(views, -1); }) == ErrorKind::InvalidInput);
}

TEST_CASE("scene directory round trip") {
  SceneSpec spec = small_spec(SceneKind::GaussianGarden);
  spec.garden_spacing = 0.1;
  const SyntheticScene scene = synthesize(spec);
  const auto dir = testing::scratch_dir("scene_roundtrip");
  save_scene(scene, spec, dir.string());
  CHECK(std::filesystem::exists(dir / "scene.json"));
  CHECK(std::filesystem::exists(dir / "gaussians_gt.ply"));
  const auto back = load_scene(dir.string());
  REQUIRE(back.size() == scene.views.size());
  for (std::size_t n = 0; n < back.size(); ++n) {
    CHECK((back[n].image.values - scene.views[n].image.values).cwiseAbs().maxCoeff() <= 0.5 / 255 + 1e-12);
    CHECK((back[n].camera.extrinsics.T - scene.views[n].camera.extrinsics.T).norm() < 1e-12);
    REQUIRE(back[n].gt_depth);
    CHECK((back[n].gt_depth->valid_mask == scene.views[n].gt_depth->valid_mask).all());
  }
  CHECK(kind_of([&] { load_scene((dir / "missing").string()); }) == ErrorKind::File);
}

TEST_CASE("spec JSON parsing and validation") {
  const SceneSpec s = SceneSpec::from_json(R"({"kind": "sphere", "seed": 9, "width": 40, "height": 30,
                                               "rig": {"count": 3, "baseline": 0.2}})");
  CHECK(s.kind == SceneKind::Sphere);
  CHECK(s.focal == 40.0);
  REQUIRE(s.cameras.size() == 3);
  CHECK(s.cameras[2].position.x() == doctest::Approx(0.2));
  const SceneSpec again = SceneSpec::from_json(s.to_json());
  CHECK(again.to_json() == s.to_json());

  CHECK(kind_of([] { SceneSpec::from_json(R"({"kind": "volcano"})"); }) == ErrorKind::Spec);
  CHECK(kind_of([] { SceneSpec::from_json(R"({"kind": "sphere", "colour": 1})"); }) == ErrorKind::Spec);
  CHECK(kind_of([] { SceneSpec::from_json(R"({"width": -4})"); }) == ErrorKind::Spec);
  CHECK(kind_of([] { SceneSpec::from_json(R"({"cameras": [{"position": [0, 0, 3]}]})"); }) == ErrorKind::Spec);
}
