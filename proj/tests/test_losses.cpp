#include "footfit/footmodel.hpp"
#include "footfit/losses.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace footfit;
using footfit::ad::Tape;
using footfit::ad::Tensor;

namespace {

// Mean of theta under p(theta) proportional to exp(-kappa theta) sin(theta) on [0, pi], in degrees.
double closed_form_error_deg(double kappa) {
  const double e = std::exp(-kappa * kPi);
  return (kPi * e / (1.0 + e) + 2.0 * kappa / (1.0 + kappa * kappa)) * kDegPerRad;
}

Tensor rows(const std::vector<Vec3>& v) {
  Tensor t({v.size(), 3});
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (int k = 0; k < 3; ++k) t[3 * i + k] = v[i][k];
  }
  return t;
}

}  // namespace

TEST(AngMF, UniformAtZeroConcentration) {
  Tape tape;
  const auto mu = tape.leaf(rows({Vec3::UnitX()}));
  const auto n = tape.constant(rows({Vec3(0, 0.6, 0.8)}));
  const auto kappa = tape.leaf(Tensor::vector({0.0}));
  EXPECT_NEAR(angmf_nll(mu, kappa, n).item(), std::log(2.0), 1e-12);
}

TEST(AngMF, PerfectPrediction) {
  Tape tape;
  const auto mu = tape.leaf(rows({Vec3::UnitZ()}));
  const auto kappa = tape.leaf(Tensor::vector({1.0}));
  const double expect = std::log((1.0 + std::exp(-kPi)) / 2.0);
  EXPECT_NEAR(angmf_nll(mu, kappa, tape.constant(rows({Vec3::UnitZ()}))).item(), expect, 1e-12);
  EXPECT_NEAR(expect, -0.650841, 1e-6);
}

TEST(AngMF, InputsValidated) {
  Tape tape;
  const auto n = tape.constant(rows({Vec3::UnitZ()}));
  EXPECT_THROW(angmf_nll(tape.leaf(rows({Vec3(0, 0, 2)})), tape.leaf(Tensor::vector({1.0})), n), std::invalid_argument);
  EXPECT_THROW(angmf_nll(tape.leaf(rows({Vec3::UnitZ()})), tape.leaf(Tensor::vector({-1.0})), n),
               std::invalid_argument);
}

TEST(AngMF, GradientMatchesFiniteDifferences) {
  auto f = [](Tape& tape, std::span<const ad::Var> in) {
    return angmf_nll(ad::row_normalize(in[0]), in[1], tape.constant(rows({Vec3(0.1, 0.2, -0.97).normalized(),
                                                                          Vec3(-0.5, 0.5, -0.7).normalized()})));
  };
  std::vector<Tensor> inputs{rows({Vec3(0.3, 0.1, -0.9), Vec3(-0.2, 0.6, -0.6)}), Tensor::vector({3.0, 0.5})};
  EXPECT_LT(ad::grad_check(f, inputs), 1e-4);
}

TEST(AngMF, HemisphereSamplesFaceCamera) {
  std::mt19937_64 rng(4);
  const auto s = sample_camera_hemisphere(5000, rng);
  double mean_z = 0.0;
  for (const Vec3& v : s) {
    EXPECT_NEAR(v.norm(), 1.0, 1e-12);
    EXPECT_LT(v.z(), 0.0);
    mean_z += v.z() / s.size();
  }
  EXPECT_NEAR(mean_z, -0.5, 0.02);
}

TEST(AngMF, BackgroundLossDetachesMean) {
  const Tensor mu = rows({Vec3(0.1, 0.2, -0.97).normalized(), Vec3(0.3, -0.1, -0.9).normalized()});
  const Tensor kappa = Tensor::vector({2.0, 7.0});
  Tape tape;
  const auto m = tape.leaf(mu), k = tape.leaf(kappa);
  std::mt19937_64 rng(12);
  const auto g = tape.backward(background_nll(m, k, rng));
  for (double v : g[m].data) EXPECT_EQ(v, 0.0);

  std::mt19937_64 same(12);
  const auto labels = sample_camera_hemisphere(2, same);
  Tape ref;
  const auto km = ref.leaf(kappa);
  const auto gr = ref.backward(angmf_nll(ref.constant(mu), km, ref.constant(rows(labels))));
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(g[k][i], 0.1 * gr[km][i], 1e-14);
}

TEST(ExpectedError, ZeroConcentrationIsNinety) {
  EXPECT_EQ(expected_angular_error(0.0), 90.0);
  EXPECT_NEAR(expected_angular_error_exact(0.0), 90.0, 1e-10);
}

TEST(ExpectedError, QuadratureMatchesClosedForm) {
  for (double k : {0.05, 0.5, 1.0, 3.0, 10.0, 30.0, 100.0, 500.0}) {
    EXPECT_NEAR(expected_angular_error_exact(k), closed_form_error_deg(k), 1e-8) << "kappa " << k;
  }
}

TEST(ExpectedError, TableMatchesQuadrature) {
  std::mt19937_64 rng(0);
  std::uniform_real_distribution<double> u(0.0, kMaxKappa);
  for (int i = 0; i < 1000; ++i) {
    const double k = u(rng);
    EXPECT_LT(std::abs(expected_angular_error(k) - closed_form_error_deg(k)), 0.1);
  }
}

TEST(ExpectedError, MonotoneAndInvertible) {
  double prev = expected_angular_error(0.0);
  for (int i = 1; i <= 2000; ++i) {
    const double e = expected_angular_error(kMaxKappa * i / 2000.0);
    EXPECT_LT(e, prev);
    prev = e;
  }
  for (double deg : {5.0, 12.0, 30.0, 60.0}) {
    EXPECT_NEAR(expected_angular_error(kappa_for_expected_error(deg)), deg, 1e-3);
  }
  EXPECT_EQ(kappa_for_expected_error(90.0), 0.0);
  EXPECT_EQ(kappa_for_expected_error(0.1), kMaxKappa);
}

TEST(Threshold, InclusiveAtThreshold) {
  double lo = 0.0, hi = kMaxKappa;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (expected_angular_error(mid) > 30.0 ? lo : hi) = mid;
  }
  ImageD kappa(4, 1, 1);
  kappa.data = {0.0, lo, hi, kMaxKappa};
  const Image8 mask = silhouette_from_uncertainty(kappa, 30.0);
  EXPECT_EQ(mask.data, (std::vector<std::uint8_t>{0, 0, 255, 255}));
  EXPECT_LE(expected_angular_error(hi), 30.0);
  const Image8 all = silhouette_from_uncertainty(kappa, 180.0);
  for (auto v : all.data) EXPECT_EQ(v, 255);
}

TEST(KeypointLoss, TrainingNll) {
  Tape tape;
  const auto pred = tape.leaf(Tensor::matrix(1, 2, {0.6, 0.5}));
  const auto sigma = tape.leaf(Tensor::matrix(1, 2, {0.1, 0.1}));
  const double v = kp_train_nll(pred, sigma, Tensor::matrix(1, 2, {0.5, 0.5}), Tensor::vector({1.0}), 1).item();
  EXPECT_NEAR(v, 1.0 + std::log(1e-4), 1e-12);
  EXPECT_NEAR(v, -8.21034, 1e-5);
}

TEST(KeypointLoss, InvisibleIgnored) {
  Tape tape;
  const auto pred = tape.leaf(Tensor::matrix(2, 2, {0.6, 0.5, 0.9, 0.9}));
  const auto sigma = tape.leaf(Tensor::matrix(2, 2, {0.1, 0.1, 0.3, 0.3}));
  const double v =
      kp_train_nll(pred, sigma, Tensor::matrix(2, 2, {0.5, 0.5, 0.0, 0.0}), Tensor::vector({1.0, 0.0}), 1).item();
  EXPECT_NEAR(v, 1.0 + std::log(1e-4), 1e-12);
}

TEST(KeypointLoss, FitSingleKeypoint) {
  KeypointObservation obs(kNumKeypoints);
  for (auto& l : obs) l.visibility = 0.0;
  obs[3] = {Vec2(0.5, 0.5), Vec2(0.1, 0.1), 1.0};
  Tensor proj({kNumKeypoints, 2}, 0.0);
  proj[6] = 0.6;
  proj[7] = 0.5;
  Tape tape;
  const std::vector<ad::Var> p{tape.leaf(proj)};
  const std::vector<KeypointObservation> o{obs};
  EXPECT_NEAR(kp_fit_loss(p, o).item(), 1.0 / 12.0, 1e-12);
}

TEST(KeypointLoss, VisibilityL2) {
  Tape tape;
  const auto p = tape.leaf(Tensor::vector({0.5, 1.0}));
  EXPECT_NEAR(visibility_l2(p, Tensor::vector({1.0, 1.0})).item(), 0.125, 1e-15);
}

TEST(NormalLoss, UniformNinetyDegrees) {
  std::vector<Vec3> rendered(10, Vec3::UnitX()), mu(10, Vec3::UnitY());
  Tape tape;
  const auto r = tape.leaf(rows(rendered));
  const double v = normal_fit_loss(r, rows(mu), Tensor({10}, 2.0)).item();
  EXPECT_NEAR(v, kPi, 1e-12);
  EXPECT_NEAR(normal_fit_sum(r, rows(mu), Tensor({10}, 2.0)).item(), 10 * kPi, 1e-11);
}

TEST(SilhouetteLoss, MeanSquare) {
  Tape tape;
  const auto s = tape.leaf(Tensor::matrix(2, 2, {1.0, 0.0, 0.5, 0.5}));
  EXPECT_NEAR(silhouette_l2(s, Tensor::matrix(2, 2, {1.0, 1.0, 0.0, 0.5})).item(), (1.0 + 0.25) / 4.0, 1e-15);
  EXPECT_THROW(silhouette_l2(s, Tensor::vector({1.0})), std::invalid_argument);
}
