#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hvio/align.hpp"
#include "support/oracles.hpp"

using namespace hvio;

namespace {

const CameraIntrinsics kCam{300.0, 300.0, 160.0, 120.0};
const PlaneNormal kDown{0.0, std::numbers::pi / 2};

AlignConfig unpenalised() {
  AlignConfig cfg;
  cfg.w_diag.setZero();
  return cfg;
}

PixelSet pixels_of(const GrayImage& img) {
  const PixelSelection sel;
  return select_pixels(gradient(img), sel.budget, sel.threshold);
}

struct Fixture {
  Scenario scenario{testing::hover_spec()};
};

}  // namespace

TEST_CASE("photometric residuals vanish for identical images at p = 0") {
  const GrayImage img = testing::wave_image(320, 240, 1);
  const PhotometricResiduals r =
      photometric_residuals(img, img, pixels_of(img), WarpParams{}, kCam, kDown);
  CHECK(r.kept() > 1000);
  CHECK(r.residuals.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("photometric residuals vanish at an exact horizontal shift") {
  const GrayImage curr = testing::wave_image(320, 240, 2);
  const GrayImage prev = testing::wave_image(320, 240, 2, 3.0);
  WarpParams p;
  p.t.x() = 3.0 / kCam.fx;
  const PhotometricResiduals r = photometric_residuals(prev, curr, pixels_of(curr), p, kCam, kDown);
  CHECK(r.kept() > 1000);
  CHECK(r.residuals.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("photometric residuals enforce the minimum overlap") {
  const GrayImage img = testing::wave_image(320, 240, 3);
  WarpParams far;
  far.t.x() = 5.0;
  CHECK_THROWS_AS(photometric_residuals(img, img, pixels_of(img), far, kCam, kDown, 10),
                  InsufficientOverlapError);
}

TEST_CASE("gauss_newton_align on identical images converges immediately") {
  const GrayImage img = testing::wave_image(320, 240, 4);
  const AlignResult r =
      gauss_newton_align(img, img, pixels_of(img), AlignPrior{}, AlignConfig{}, kCam, kDown);
  CHECK(r.converged);
  CHECK(r.iterations == 1);
  CHECK(r.p.to_vector().norm() == 0.0);
  CHECK(r.final_cost == 0.0);
}

TEST_CASE("analytic photometric Jacobian matches central differences") {
  Fixture f;
  std::mt19937_64 rng(5);
  for (int pair = 0; pair < 3; ++pair) {
    const testing::RenderedPair rp = testing::render_pair(f.scenario, testing::random_warp(rng));
    const PixelSet px = pixels_of(rp.curr);
    for (int i = 0; i < 10; ++i) {
      const WarpParams p = testing::random_warp(rng);
      CHECK(testing::photometric_jacobian_error(rp.prev, rp.curr, px, p, rp.k, rp.normal) < 1e-3);
    }
  }
}

TEST_CASE("Gauss-Newton recovers rendered warps") {
  Fixture f;
  std::mt19937_64 rng(6);
  for (int i = 0; i < 5; ++i) {
    const testing::RenderedPair rp = testing::render_pair(f.scenario, testing::random_warp(rng));
    const AlignResult r = gauss_newton_align(rp.prev, rp.curr, pixels_of(rp.curr), AlignPrior{},
                                             unpenalised(), rp.k, rp.normal);
    CAPTURE(i);
    CHECK(r.converged);
    CHECK(r.iterations <= 15);
    CHECK((r.p.to_vector() - rp.truth.to_vector()).cwiseAbs().maxCoeff() < 1e-3);
  }
}

TEST_CASE("a heavy rotation penalty pins the rotation to the prior") {
  Fixture f;
  std::mt19937_64 rng(7);
  const testing::RenderedPair rp = testing::render_pair(f.scenario, testing::random_warp(rng));
  AlignConfig cfg;
  cfg.w_diag << 0.0, 0.0, 0.0, 1e6, 1e6, 1e6;
  AlignPrior prior;
  prior.p0.r = rp.truth.r;
  const AlignResult r =
      gauss_newton_align(rp.prev, rp.curr, pixels_of(rp.curr), prior, cfg, rp.k, rp.normal);
  CHECK(r.converged);
  CHECK((r.p.r - rp.truth.r).cwiseAbs().maxCoeff() < 1e-5);
  CHECK((r.p.t - rp.truth.t).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("penalty limit returns the prior") {
  Fixture f;
  std::mt19937_64 rng(8);
  const testing::RenderedPair rp = testing::render_pair(f.scenario, testing::random_warp(rng));
  AlignConfig cfg;
  cfg.w_diag.setConstant(1e12);
  AlignPrior prior;
  prior.p0 = testing::random_warp(rng);
  const AlignResult r =
      gauss_newton_align(rp.prev, rp.curr, pixels_of(rp.curr), prior, cfg, rp.k, rp.normal);
  CHECK((r.p.to_vector() - prior.p0.to_vector()).norm() < 1e-6);
}

TEST_CASE("returned cost never exceeds the cost at the prior") {
  Fixture f;
  std::mt19937_64 rng(9);
  for (int i = 0; i < 5; ++i) {
    const testing::RenderedPair rp = testing::render_pair(f.scenario, testing::random_warp(rng));
    const PixelSet px = pixels_of(rp.curr);
    AlignPrior prior;
    prior.p0 = testing::random_warp(rng);
    const AlignConfig cfg;
    const AlignResult r = gauss_newton_align(rp.prev, rp.curr, px, prior, cfg, rp.k, rp.normal);
    const double at_prior =
        *alignment_cost(rp.prev, rp.curr, px, prior.p0, prior, cfg.w_diag, rp.k, rp.normal);
    CHECK(r.final_cost <= at_prior);
  }
}

TEST_CASE("ground truth is a local minimum of the unpenalised cost") {
  Fixture f;
  std::mt19937_64 rng(10);
  const testing::RenderedPair rp = testing::render_pair(f.scenario, testing::random_warp(rng));
  const PixelSet px = pixels_of(rp.curr);
  const Vector6d zero = Vector6d::Zero();
  const AlignPrior prior;
  const double at_truth = *alignment_cost(rp.prev, rp.curr, px, rp.truth, prior, zero, rp.k,
                                          rp.normal);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    Vector6d delta;
    for (int j = 0; j < 6; ++j) {
      delta(j) = g(rng);
    }
    delta *= 1e-3 / delta.norm();
    const WarpParams q = WarpParams::from_vector(rp.truth.to_vector() + delta);
    CHECK(at_truth <= *alignment_cost(rp.prev, rp.curr, px, q, prior, zero, rp.k, rp.normal));
  }
}

TEST_CASE("Jacobian stays consistent along the Gauss-Newton path") {
  Fixture f;
  std::mt19937_64 rng(11);
  const testing::RenderedPair rp = testing::render_pair(f.scenario, testing::random_warp(rng));
  const PixelSet px = pixels_of(rp.curr);
  for (int iters = 1; iters <= 5; ++iters) {
    AlignConfig cfg = unpenalised();
    cfg.max_iters = iters;
    const AlignResult r = gauss_newton_align(rp.prev, rp.curr, px, AlignPrior{}, cfg, rp.k,
                                             rp.normal);
    CAPTURE(iters);
    CHECK(testing::photometric_jacobian_error(rp.prev, rp.curr, px, r.p, rp.k, rp.normal) < 1e-3);
  }
}

TEST_CASE("alignment failures") {
  const GrayImage flat = GrayImage::filled(320, 240, 0.5);
  const AlignResult none = align_frames(flat, flat, AlignPrior{}, AlignConfig{}, PixelSelection{},
                                        kCam, kDown);
  CHECK_FALSE(none.converged);
  CHECK(none.failure_reason == AlignFailure::too_few_pixels);

  const GrayImage img = testing::wave_image(320, 240, 12);
  AlignPrior off;
  off.p0.t.x() = 0.6;  // 180 px shift: most pixels leave the image
  const AlignResult gone =
      gauss_newton_align(img, img, pixels_of(img), off, AlignConfig{}, kCam, kDown);
  CHECK(gone.failure_reason == AlignFailure::too_few_pixels);
  CHECK(gone.p.to_vector() == off.p0.to_vector());

  AlignConfig bad;
  bad.max_iters = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = AlignConfig{};
  bad.w_diag(2) = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("optional pyramid recovers a larger shift") {
  const GrayImage curr = testing::wave_image(320, 240, 13);
  const GrayImage prev = testing::wave_image(320, 240, 13, 9.0);
  AlignConfig cfg = unpenalised();
  cfg.pyramid = true;
  const AlignResult r = align_frames(prev, curr, AlignPrior{}, cfg, PixelSelection{}, kCam, kDown);
  CHECK(r.converged);
  CHECK(r.p.t.x() == doctest::Approx(9.0 / kCam.fx).epsilon(1e-3));
}

TEST_CASE("prior_from_imu examples") {
  const Extrinsics nadir = Extrinsics::nadir();
  const AlignPrior still = prior_from_imu(AhrsAttitude{}, AhrsAttitude{}, EkfState{}, 1.0 / 80,
                                          nadir);
  CHECK(still.p0.to_vector().norm() == 0.0);

  // Yaw about the IMU z axis appears about the camera optical axis, which points along -z_imu.
  AhrsAttitude yawed;
  yawed.rotation = testing::quaternion_rotation(Eigen::Vector3d(0, 0, 0.01));
  const AlignPrior yaw = prior_from_imu(AhrsAttitude{}, yawed, std::nullopt, 1.0 / 80, nadir);
  CHECK((yaw.p0.r - Eigen::Vector3d(0, 0, -0.01)).norm() < 1e-12);
  CHECK(yaw.p0.t.norm() == 0.0);

  EkfState moving;
  moving.v = Eigen::Vector3d(1, 0, 0);
  moving.d = 2.0;
  const AlignPrior vel = prior_from_imu(AhrsAttitude{}, AhrsAttitude{}, moving, 1.0 / 80, nadir);
  CHECK(vel.p0.t.x() == doctest::Approx(0.00625).epsilon(1e-12));
  CHECK(prior_from_imu(AhrsAttitude{}, AhrsAttitude{}, moving, 1.0 / 80, nadir, false)
            .p0.t.norm() == 0.0);
  CHECK_THROWS_AS(prior_from_imu(AhrsAttitude{}, AhrsAttitude{}, moving, 0.0, nadir), ConfigError);
}

TEST_CASE("alignment is deterministic") {
  Fixture f;
  std::mt19937_64 rng(14);
  const testing::RenderedPair rp = testing::render_pair(f.scenario, testing::random_warp(rng));
  const AlignResult a = align_frames(rp.prev, rp.curr, AlignPrior{}, AlignConfig{},
                                     PixelSelection{}, rp.k, rp.normal);
  const AlignResult b = align_frames(rp.prev, rp.curr, AlignPrior{}, AlignConfig{},
                                     PixelSelection{}, rp.k, rp.normal);
  CHECK(a.p.to_vector() == b.p.to_vector());
  CHECK(a.final_cost == b.final_cost);
  CHECK(a.iterations == b.iterations);
}
