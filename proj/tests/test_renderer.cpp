#include <doctest.h>

#include <numeric>

#include "support.hpp"
#include "volsplat/renderer.hpp"

using namespace volsplat;

namespace {

Gaussian3D isotropic(const Eigen::Vector3d& center, double sigma, double opacity, const Eigen::Vector3d& rgb) {
  Gaussian3D g;
  g.center = center;
  g.scale = Eigen::Vector3d::Constant(sigma);
  g.rotation = Eigen::Quaterniond::Identity();
  g.opacity = opacity;
  g.sh = (rgb.array() - 0.5) / kShC0;
  return g;
}

GaussianSet set_of(const std::vector<Gaussian3D>& gs) {
  GaussianSet s;
  s.resize(static_cast<Index>(gs.size()), 0);
  for (std::size_t i = 0; i < gs.size(); ++i) s.set(static_cast<Index>(i), gs[i], {static_cast<int>(i), 0, 0});
  return s;
}

GaussianSet shuffled(const GaussianSet& s, Rng& rng) {
  std::vector<Index> perm(static_cast<std::size_t>(s.size()));
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng() % i]);
  GaussianSet out;
  out.resize(s.size(), s.sh_degree);
  for (Index i = 0; i < s.size(); ++i) {
    const Index src = perm[static_cast<std::size_t>(i)];
    out.set(i, s.get(src), s.provenance[static_cast<std::size_t>(src)]);
  }
  return out;
}

}  // namespace

TEST_CASE("on-axis isotropic projection matches the symbolic Jacobian") {
  const Camera cam = testing::simple_camera(65, 80.0);
  for (double d : {1.0, 2.5, 7.0}) {
    const double s = 0.05;
    const auto p = project_gaussian(isotropic({0, 0, d}, s, 0.5, {1, 0, 0}), 0, cam);
    REQUIRE(p.has_value());
    const double expect = (80.0 * s / d) * (80.0 * s / d) + 0.3;
    CHECK(p->cov2d(0, 0) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(p->cov2d(1, 1) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::abs(p->cov2d(0, 1)) < 1e-12);
    CHECK(p->mean2d == Eigen::Vector2d(32, 32));
    CHECK(p->depth == d);
  }
  // Doubling the depth halves the undilated footprint.
  const auto near = project_gaussian(isotropic({0, 0, 2}, 0.1, 0.5, {1, 0, 0}), 0, cam);
  const auto far = project_gaussian(isotropic({0, 0, 4}, 0.1, 0.5, {1, 0, 0}), 0, cam);
  CHECK(std::sqrt(far->cov2d(0, 0) - 0.3) == doctest::Approx(0.5 * std::sqrt(near->cov2d(0, 0) - 0.3)));
}

TEST_CASE("culling") {
  const Camera cam = testing::simple_camera(64);
  CHECK_FALSE(project_gaussian(isotropic({0, 0, -1}, 0.1, 0.5, {1, 1, 1}), 0, cam));
  CHECK_FALSE(project_gaussian(isotropic({0, 0, 0.005}, 0.1, 0.5, {1, 1, 1}), 0, cam));
  CHECK_FALSE(project_gaussian(isotropic({50, 0, 1}, 0.01, 0.5, {1, 1, 1}), 0, cam));
  CHECK(project_gaussian(isotropic({0.55, 0, 1}, 0.05, 0.5, {1, 1, 1}), 0, cam));
}

TEST_CASE("empty set renders the background") {
  GaussianSet empty;
  empty.resize(0, 0);
  RenderSettings settings;
  settings.background = Eigen::Vector3d(0.1, 0.2, 0.3);
  const RenderedImage r = render(empty, testing::simple_camera(32), settings);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) CHECK(r.rgb.pixel(y, x) == settings.background.transpose());
  }
  CHECK(r.alpha.isZero(0.0));
}

TEST_CASE("saturated Gaussian hits the alpha clamp") {
  const Camera cam = testing::simple_camera(65);
  const Eigen::Vector3d color(0.8, 0.4, 0.1);
  const RenderedImage r = render(set_of({isotropic({0, 0, 2}, 0.5, 0.999, color)}), cam);
  CHECK(r.alpha(32, 32) >= 0.99);
  // alpha' = 0.99 at the center, so the pixel is 0.99 * color over a black background.
  CHECK((r.rgb.pixel(32, 32).transpose() - 0.99 * color).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.depth(32, 32) == doctest::Approx(2.0));
}

TEST_CASE("two overlapping Gaussians follow the compositing recurrence") {
  const Camera cam = testing::simple_camera(65);
  const Gaussian3D red = isotropic({0, 0, 1.5}, 0.05, 0.6, {1, 0, 0});
  const Gaussian3D blue = isotropic({0, 0, 3.0}, 0.05, 0.6, {0, 0, 1});
  for (const auto& set : {set_of({red, blue}), set_of({blue, red})}) {
    const RenderedImage r = render(set, cam);
    const Eigen::Vector3d expect = 0.6 * Eigen::Vector3d(1, 0, 0) + 0.4 * 0.6 * Eigen::Vector3d(0, 0, 1);
    CHECK((r.rgb.pixel(32, 32).transpose() - expect).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(r.alpha(32, 32) == doctest::Approx(1 - 0.4 * 0.4));
  }
}

TEST_CASE("transmittance is conserved at every pixel") {
  Rng rng(1);
  const Camera cam = testing::simple_camera(32, 32.0);
  for (int scene = 0; scene < 3; ++scene) {
    const GaussianSet set = testing::random_gaussians(rng, 200);
    const RenderedImage r = render(set, cam);
    for (int y = 0; y < 32; y += 3) {
      for (int x = 0; x < 32; x += 3) {
        const CompositeTrace t = trace_pixel(set, cam, x, y);
        const double sum = std::accumulate(t.weights.begin(), t.weights.end(), 0.0);
        CHECK(std::abs(sum + t.final_transmittance - 1.0) < 1e-6);
        CHECK(r.alpha(y, x) == doctest::Approx(1.0 - t.final_transmittance));
      }
    }
  }
}

TEST_CASE("rendering is invariant to the input order") {
  Rng rng(2);
  const Camera cam = testing::simple_camera(48, 48.0);
  GaussianSet set = testing::random_gaussians(rng, 300);
  // Exact depth ties exercise the content tiebreak.
  set.centers(1, 2) = set.centers(0, 2);
  set.centers(2, 2) = set.centers(0, 2);
  const RenderedImage a = render(set, cam);
  for (int trial = 0; trial < 3; ++trial) {
    const RenderedImage b = render(shuffled(set, rng), cam);
    CHECK(encode_ppm(a.rgb) == encode_ppm(b.rgb));
    CHECK(a.rgb.values == b.rgb.values);
    CHECK((a.alpha == b.alpha).all());
  }
}

TEST_CASE("adding a Gaussian never decreases alpha") {
  Rng rng(3);
  const Camera cam = testing::simple_camera(32, 32.0);
  GaussianSet set = testing::random_gaussians(rng, 60);
  RenderedImage before = render(set, cam);
  for (int step = 0; step < 20; ++step) {
    const GaussianSet extra = testing::random_gaussians(rng, 1);
    GaussianSet grown;
    grown.resize(set.size() + 1, 0);
    for (Index i = 0; i < set.size(); ++i) grown.set(i, set.get(i), set.provenance[static_cast<std::size_t>(i)]);
    grown.set(set.size(), extra.get(0), {999, step, 0});
    const RenderedImage after = render(grown, cam);
    // Early termination at T < 1e-4 bounds any apparent decrease.
    CHECK((after.alpha - before.alpha).minCoeff() >= -1e-4);
    set = grown;
    before = after;
  }
}

TEST_CASE("render is independent of the worker count") {
  Rng rng(4);
  const GaussianSet set = testing::random_gaussians(rng, 500);
  const Camera cam = testing::simple_camera(64);
  set_thread_count(1);
  const RenderedImage a = render(set, cam);
  set_thread_count(8);
  const RenderedImage b = render(set, cam);
  set_thread_count(0);
  CHECK(a.rgb.values == b.rgb.values);
  CHECK((a.depth == b.depth).all());
}

TEST_CASE("outputs stay in range") {
  Rng rng(5);
  const GaussianSet set = testing::random_gaussians(rng, 400);
  const Camera cam = testing::simple_camera(40, 40.0);
  const RenderedImage a = render(set, cam);
  CHECK(a.rgb.values.minCoeff() >= 0.0);
  CHECK(a.rgb.values.maxCoeff() <= 1.0);
  CHECK(a.alpha.minCoeff() >= 0.0);
  CHECK(a.alpha.maxCoeff() <= 1.0);
}
