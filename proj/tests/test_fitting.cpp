#include "footfit/error.hpp"
#include "footfit/fitting.hpp"
#include "footfit/synth.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>

using namespace footfit;

namespace {

std::vector<Camera> cameras_along_y(int n) {
  std::vector<Camera> cams;
  for (int i = 0; i < n; ++i) cams.push_back(look_at(Vec3(0.0, 0.01 * i, 0.3), Vec3::Zero(), Vec3::UnitX()));
  return cams;
}

struct Fixture {
  FootModel model = make_default_model();
  Scene scene;
  std::vector<ViewObservation> views;

  Fixture() {
    SceneSpec spec;
    spec.views = 3;
    spec.seed = 5;
    spec.gt = random_gt_params(model, 5);
    scene = generate_scene(spec, model);
    views = scene_observations(scene);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST(SelectViews, EvenlySpacedRanks) {
  const auto a = select_views(cameras_along_y(30), 3);
  EXPECT_EQ(a, (std::vector<std::size_t>{0, 15, 29}));
  const auto b = select_views(cameras_along_y(5), 2);
  EXPECT_EQ(b, (std::vector<std::size_t>{0, 4}));
  const auto c = select_views(cameras_along_y(4), 1);
  EXPECT_EQ(c, (std::vector<std::size_t>{1}));
}

TEST(SelectViews, ReturnsOriginalIndices) {
  auto cams = cameras_along_y(3);
  std::swap(cams[0], cams[2]);
  EXPECT_EQ(select_views(cams, 2), (std::vector<std::size_t>{2, 0}));
}

TEST(SelectViews, BadCounts) {
  EXPECT_THROW(select_views(cameras_along_y(3), 0), ConfigError);
  EXPECT_THROW(select_views(cameras_along_y(3), 4), ConfigError);
}

TEST(Adam, MinimisesQuadratic) {
  Adam adam(0.1);
  std::vector<double> x{1.0};
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> g{2.0 * x[0]};
    adam.step("x", x, g);
  }
  EXPECT_LT(std::abs(x[0]), 1e-2);
  EXPECT_EQ(adam.steps("x"), 200u);
}

TEST(Adam, FirstStepIsLearningRate) {
  Adam adam(0.01);
  std::vector<double> x{0.0, 0.0};
  const std::vector<double> g{3.0, -0.5};
  adam.step("p", x, g);
  EXPECT_NEAR(x[0], -0.01, 1e-9);
  EXPECT_NEAR(x[1], 0.01, 1e-9);
}

TEST(Adam, NonFiniteGradientNamed) {
  Adam adam(0.1);
  std::vector<double> x{1.0};
  const std::vector<double> g{std::nan("")};
  try {
    adam.step("z_shape", x, g);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("z_shape"), std::string::npos);
  }
}

TEST(FitConfig, Validation) {
  FitConfig c;
  EXPECT_NO_THROW(c.validate());
  c.lr = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = FitConfig{};
  c.weights.norm = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Resample, RequiresIntegerFactors) {
  const ViewObservation& v = fixture().views[0];
  EXPECT_THROW(resample_view(v, 50, 70), ConfigError);
  const ViewObservation half = resample_view(v, 60, 80);
  EXPECT_EQ(half.normals.mu.width, 60);
  EXPECT_EQ(half.camera.width, 60);
  EXPECT_DOUBLE_EQ(half.camera.fx, v.camera.fx / 2);
}

TEST(Fit, StageOneTraceAndRecovery) {
  const Fixture& f = fixture();
  FitConfig cfg;
  const FitResult r = fit_stage1(f.model, f.views, cfg, FootParams::identity(f.model));
  ASSERT_EQ(r.trace.epochs.size(), 250u);
  EXPECT_EQ(r.trace.epochs.front().epoch, 0);
  EXPECT_EQ(r.trace.epochs.back().epoch, 249);
  EXPECT_LT(r.trace.epochs.back().total, 0.1 * r.trace.epochs.front().total);
  EXPECT_EQ(r.params.z_shape, FootParams::identity(f.model).z_shape);
  EXPECT_EQ(r.trace.snapshots.size(), 2u);
}

TEST(Fit, StageTwoSoftMonotone) {
  const Fixture& f = fixture();
  FitConfig cfg;
  cfg.stage1_epochs = 1000;
  const FitResult s1 = fit_stage1(f.model, f.views, cfg, FootParams::identity(f.model));
  cfg.stage2_epochs = 300;
  const FitResult s2 = fit_stage2(f.model, f.views, cfg, s1.params, cfg.stage1_epochs);
  ASSERT_EQ(s2.trace.epochs.size(), 300u);
  EXPECT_EQ(s2.trace.epochs.front().epoch, 1000);
  EXPECT_EQ(s2.trace.epochs.front().stage, 2);
  double prev = 1e300;
  for (int w = 0; w < 3; ++w) {
    double sum = 0.0;
    for (int e = 100 * w; e < 100 * (w + 1); ++e) sum += s2.trace.epochs[e].total;
    EXPECT_LE(sum / 100, prev) << "window " << w;
    prev = sum / 100;
  }
}

TEST(Fit, UnderConstrainedRejected) {
  const Fixture& f = fixture();
  std::vector<ViewObservation> views{f.views[0]};
  for (auto& k : views[0].keypoints) k.visibility = 0.0;
  EXPECT_THROW(fit_stage1(f.model, views, FitConfig{}, FootParams::identity(f.model)), NumericalError);
}

TEST(Fit, NoViewsRejected) {
  const Fixture& f = fixture();
  EXPECT_THROW(fit_stage1(f.model, {}, FitConfig{}, FootParams::identity(f.model)), ConfigError);
}

TEST(Fit, ParamsJsonRoundTrip) {
  const Fixture& f = fixture();
  FootParams p = random_gt_params(f.model, 3);
  const auto path = std::filesystem::temp_directory_path() / "footfit_params.json";
  write_params_json(path, p);
  const FootParams back = read_params_json(path);
  EXPECT_EQ(back.r, p.r);
  EXPECT_EQ(back.t, p.t);
  EXPECT_EQ(back.s, p.s);
  EXPECT_EQ(back.z_shape, p.z_shape);
  EXPECT_EQ(back.z_pose, p.z_pose);
  std::filesystem::remove(path);
}

TEST(Fit, TraceCsvHeader) {
  FitTrace t;
  t.epochs.push_back({1, 0, 1.0, 0.0, 0.0, 1.0});
  const auto path = std::filesystem::temp_directory_path() / "footfit_trace.csv";
  write_trace_csv(path, t);
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "epoch,L_kp,L_sil,L_norm,total");
  EXPECT_EQ(row.substr(0, 2), "0,");
  std::filesystem::remove(path);
}
