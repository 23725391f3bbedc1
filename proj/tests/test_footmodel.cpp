#include "footfit/error.hpp"
#include "footfit/footmodel.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace footfit;
namespace fs = std::filesystem;

namespace {

const FootModel& small_model() {
  static const FootModel model = [] {
    ModelOptions o;
    o.hidden = 16;
    o.hidden_layers = 2;
    o.blendshapes = 4;
    return make_default_model(o);
  }();
  return model;
}

}  // namespace

TEST(FootModel, TemplateIsValid) {
  const FootModel& m = small_model();
  EXPECT_NO_THROW(m.validate());
  EXPECT_TRUE(is_watertight(m.template_mesh));
  ASSERT_EQ(m.keypoint_ids.size(), static_cast<std::size_t>(kNumKeypoints));
  EXPECT_EQ(keypoint_names().size(), static_cast<std::size_t>(kNumKeypoints));
  double zmin = 1e9;
  for (const Vec3& v : m.template_mesh.vertices) zmin = std::min(zmin, v.z());
  EXPECT_NEAR(zmin, 0.0, 1e-9);
}

TEST(FootModel, FlippedKeypointIsInvolution) {
  for (int k = 0; k < kNumKeypoints; ++k) EXPECT_EQ(flipped_keypoint(flipped_keypoint(k)), k);
}

TEST(FootModel, TranslationShiftsEveryVertex) {
  const FootModel& m = small_model();
  FootParams p = FootParams::identity(m);
  const Mesh base = forward_mesh(m, p);
  p.t = Vec3(0, 0, 0.05);
  const Mesh moved = forward_mesh(m, p);
  for (std::size_t i = 0; i < base.vertices.size(); ++i) {
    EXPECT_LT((moved.vertices[i] - base.vertices[i] - Vec3(0, 0, 0.05)).norm(), 1e-15);
  }
}

TEST(FootModel, ZeroCodesGiveTemplateUpToField) {
  const FootModel& m = small_model();
  const Mesh base = forward_mesh(m, FootParams::identity(m));
  const std::vector<double> zs(m.field.shape_dim, 0.0), zp(m.field.pose_dim, 0.0);
  const auto disp = m.field.evaluate(m.template_mesh.vertices, zs, zp);
  for (std::size_t i = 0; i < base.vertices.size(); ++i) {
    EXPECT_LT((base.vertices[i] - m.template_mesh.vertices[i] - disp[i]).norm(), 1e-15);
  }
}

TEST(FootModel, RegistrationOrder) {
  const FootModel& m = small_model();
  FootParams p = FootParams::identity(m);
  const Mesh base = forward_mesh(m, p);
  p.r = Vec3(0.1, -0.2, 0.3);
  p.s = Vec3(1.1, 0.9, 1.05);
  p.t = Vec3(0.01, 0.02, 0.0);
  const Mesh reg = forward_mesh(m, p);
  const Mat3 R = euler_rotation(p.r);
  for (std::size_t i = 0; i < base.vertices.size(); i += 97) {
    const Vec3 expect = p.s.asDiagonal() * (R * base.vertices[i]) + p.t;
    EXPECT_LT((reg.vertices[i] - expect).norm(), 1e-14);
  }
}

TEST(FootModel, BlendshapesAreLinear) {
  const FootModel& m = small_model();
  const FootParams p = FootParams::identity(m);
  const std::size_t k = m.blendshapes.size();
  ASSERT_GT(k, 1u);
  std::vector<double> a(k, 0.0), b(k, 0.0), ab(k, 0.0), zero(k, 0.0);
  a[0] = 0.7;
  b[1] = -1.3;
  ab[0] = 0.7;
  ab[1] = -1.3;
  const Mesh m0 = blendshape_forward(m, zero, p), ma = blendshape_forward(m, a, p), mb = blendshape_forward(m, b, p),
             mab = blendshape_forward(m, ab, p);
  for (std::size_t i = 0; i < m0.vertices.size(); ++i) {
    const Vec3 lin = ma.vertices[i] + mb.vertices[i] - m0.vertices[i];
    EXPECT_LT((mab.vertices[i] - lin).norm(), 1e-14);
  }
}

TEST(FootModel, NonPositiveScaleRejected) {
  const FootModel& m = small_model();
  FootParams p = FootParams::identity(m);
  p.s.y() = 0.0;
  EXPECT_THROW(forward_mesh(m, p), std::invalid_argument);
}

TEST(FootModel, SaveLoadIsBitExact) {
  const FootModel& m = small_model();
  const auto path = fs::temp_directory_path() / "footfit_model_test.fmdl";
  save_model(path, m);
  const FootModel back = load_model(path);
  EXPECT_EQ(back.template_mesh.vertices, m.template_mesh.vertices);
  EXPECT_EQ(back.template_mesh.faces, m.template_mesh.faces);
  EXPECT_EQ(back.keypoint_ids, m.keypoint_ids);
  ASSERT_EQ(back.field.layers.size(), m.field.layers.size());
  for (std::size_t l = 0; l < m.field.layers.size(); ++l) {
    EXPECT_EQ(back.field.layers[l].weight, m.field.layers[l].weight);
    EXPECT_EQ(back.field.layers[l].bias, m.field.layers[l].bias);
    EXPECT_EQ(back.field.layers[l].activation, m.field.layers[l].activation);
  }
  EXPECT_EQ(back.blendshapes, m.blendshapes);
  EXPECT_THROW(load_model(path, m.field.shape_dim + 1), DimensionError);
  EXPECT_NO_THROW(load_model(path, m.field.shape_dim, m.field.pose_dim));
  fs::remove(path);
}

TEST(FootModel, BadMagicRejected) {
  const auto path = fs::temp_directory_path() / "footfit_bad.fmdl";
  {
    std::ofstream out(path, std::ios::binary);
    out << "XXXX0000000000000000";
  }
  EXPECT_THROW(load_model(path), IoError);
  fs::remove(path);
  EXPECT_THROW(load_model(path), IoError);
}

TEST(FootModel, DifferentiableForwardMatchesMesh) {
  const FootModel& m = small_model();
  FootParams p = FootParams::identity(m);
  p.r = Vec3(0.05, 0.1, -0.2);
  p.z_shape.assign(p.z_shape.size(), 0.3);
  p.z_pose.assign(p.z_pose.size(), -0.2);
  ad::Tape tape;
  const ad::Var v = forward(m, make_param_vars(tape, p));
  const Mesh mesh = forward_mesh(m, p);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(v.value()[3 * i + k], mesh.vertices[i][k], 1e-15);
  }
}

TEST(FootModel, CodesChangeTheShape) {
  const FootModel& m = small_model();
  FootParams p = FootParams::identity(m);
  const Mesh a = forward_mesh(m, p);
  p.z_shape[0] = 1.0;
  const Mesh b = forward_mesh(m, p);
  double moved = 0.0;
  for (std::size_t i = 0; i < a.vertices.size(); ++i) moved = std::max(moved, (a.vertices[i] - b.vertices[i]).norm());
  EXPECT_GT(moved, 1e-4);
}
