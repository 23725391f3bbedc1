#include "footfit/geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace footfit;

namespace {

Mesh unit_square(double size, double z) {
  Mesh m;
  m.vertices = {{0, 0, z}, {size, 0, z}, {size, size, z}, {0, size, z}};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

}  // namespace

TEST(Geometry, CubeCornerNormal) {
  const Mesh box = make_box(Vec3(-1, -1, -1), Vec3(1, 1, 1));
  const auto normals = vertex_normals(box);
  for (std::size_t i = 0; i < box.vertices.size(); ++i) {
    const Vec3 expect = box.vertices[i].cwiseSign() / std::sqrt(3.0);
    EXPECT_LT((normals[i] - expect).norm(), 1e-12) << "vertex " << i;
  }
}

TEST(Geometry, BoxIsWatertightWithOutwardFaces) {
  const Mesh box = make_box(Vec3(0, 0, 0), Vec3(1, 2, 3));
  EXPECT_TRUE(is_watertight(box));
  EXPECT_NEAR(surface_area(box), 2 * (2 + 3 + 6), 1e-12);
  const Vec3 centre(0.5, 1.0, 1.5);
  for (std::size_t f = 0; f < box.faces.size(); ++f) {
    const Vec3 c = (box.vertices[box.faces[f][0]] + box.vertices[box.faces[f][1]] + box.vertices[box.faces[f][2]]) / 3;
    EXPECT_GT(face_normal_scaled(box, f).dot(c - centre), 0.0);
  }
}

TEST(Geometry, IcosphereCounts) {
  const Mesh s = make_icosphere(2, 0.5);
  EXPECT_EQ(s.vertices.size(), 10u * 16 + 2);
  EXPECT_TRUE(is_watertight(s));
  for (const Vec3& v : s.vertices) EXPECT_NEAR(v.norm(), 0.5, 1e-12);
}

TEST(Geometry, ValidateRejectsBadFaces) {
  Mesh m = unit_square(1.0, 0.0);
  m.faces.push_back({0, 1, 7});
  EXPECT_THROW(validate(m), std::invalid_argument);
  Mesh d = unit_square(1.0, 0.0);
  d.faces.push_back({0, 0, 1});
  EXPECT_THROW(validate(d), std::invalid_argument);
}

TEST(Geometry, SamplingIsAreaProportional) {
  Mesh m;
  m.vertices = {{0, 0, 0}, {2, 0, 0}, {0, 1, 0}, {10, 0, 0}, {16, 0, 0}, {10, 1, 0}};
  m.faces = {{0, 1, 2}, {3, 4, 5}};  // areas 1 and 3
  const std::size_t n = 40000;
  const SurfaceSample s = sample_surface(m, n, 5);
  std::size_t first = 0;
  for (int f : s.face_ids) first += f == 0;
  const double sigma = std::sqrt(n * 0.25 * 0.75);
  EXPECT_LT(std::abs(static_cast<double>(first) - 10000.0), 3 * sigma);
  EXPECT_LT(std::abs(static_cast<double>(n - first) - 30000.0), 3 * sigma);
}

TEST(Geometry, SamplingIsDeterministic) {
  const Mesh s = make_icosphere(1);
  const SurfaceSample a = sample_surface(s, 500, 11), b = sample_surface(s, 500, 11);
  EXPECT_EQ(a.points, b.points);
  EXPECT_EQ(a.face_ids, b.face_ids);
  EXPECT_THROW(sample_surface(s, 0, 1), std::invalid_argument);
}

TEST(Geometry, KdTreeMatchesBruteForce) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> pts(1000);
  for (Vec3& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  const KdTree tree(pts);
  for (int q = 0; q < 1000; ++q) {
    const Vec3 query(u(rng), u(rng), u(rng));
    std::size_t best = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if ((pts[i] - query).squaredNorm() < (pts[best] - query).squaredNorm()) best = i;
    }
    const Neighbor nn = tree.nearest(query);
    EXPECT_EQ(nn.index, best);
    EXPECT_DOUBLE_EQ(nn.distance, (pts[best] - query).norm());
  }
}

TEST(Geometry, KdTreeTiesPickLowestIndex) {
  const KdTree tree({{1, 0, 0}, {-1, 0, 0}, {1, 0, 0}});
  EXPECT_EQ(tree.nearest(Vec3(0.9, 0, 0)).index, 0u);
  EXPECT_EQ(tree.nearest(Vec3(0, 0, 0)).index, 0u);
  EXPECT_THROW(KdTree({}), std::invalid_argument);
}

TEST(Geometry, ChamferOfOffsetPlane) {
  const Mesh a = unit_square(0.1, 0.0), b = unit_square(0.1, 0.001);
  const ChamferStats st = chamfer_stats(sample_surface(a, 5000, 1), sample_surface(b, 5000, 1));
  EXPECT_NEAR(st.mean_distance, 0.001, 1e-12);
  EXPECT_NEAR(st.median_distance, 0.001, 1e-12);
  EXPECT_NEAR(st.mean_angle_deg, 0.0, 1e-12);
}

TEST(Geometry, ChamferFlippedNormals) {
  const Mesh a = unit_square(0.1, 0.0);
  Mesh b = a;
  for (Face& f : b.faces) std::swap(f[1], f[2]);
  const ChamferStats st = chamfer_stats(sample_surface(a, 2000, 4), sample_surface(b, 2000, 4));
  EXPECT_NEAR(st.mean_angle_deg, 180.0, 1e-9);
}

TEST(Geometry, LowerMedian) {
  EXPECT_EQ(lower_median({4, 1, 3, 2}), 2);
  EXPECT_EQ(lower_median({5, 1, 3}), 3);
  EXPECT_THROW(lower_median({}), std::invalid_argument);
}

TEST(Geometry, AngleOfEqualVectorsIsZero) {
  const Vec3 v(0.3, -0.7, 0.2);
  EXPECT_EQ(angle_deg(v, v), 0.0);
  EXPECT_NEAR(angle_deg(Vec3::UnitX(), Vec3::UnitY()), 90.0, 1e-12);
}

TEST(Geometry, EulerRotationAboutZ) {
  const Vec3 out = euler_rotation(Vec3(0, 0, kPi / 2)) * Vec3::UnitX();
  EXPECT_LT((out - Vec3::UnitY()).norm(), 1e-12);
}

TEST(Geometry, EulerRotationIsOrthonormal) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int i = 0; i < 100; ++i) {
    const Mat3 R = euler_rotation(Vec3(u(rng), u(rng), u(rng)));
    EXPECT_LT((R.transpose() * R - Mat3::Identity()).norm(), 1e-12);
    EXPECT_NEAR(R.determinant(), 1.0, 1e-12);
  }
}

TEST(Geometry, EulerDerivativesMatchFiniteDifferences) {
  const Vec3 r(0.3, -0.5, 1.2);
  const auto d = euler_rotation_derivatives(r);
  const double h = 1e-6;
  for (int k = 0; k < 3; ++k) {
    Vec3 rp = r, rm = r;
    rp[k] += h;
    rm[k] -= h;
    const Mat3 fd = (euler_rotation(rp) - euler_rotation(rm)) / (2 * h);
    EXPECT_LT((fd - d[k]).norm(), 1e-8);
  }
}

TEST(Geometry, AxisAngleMatchesEuler) {
  EXPECT_LT((axis_angle(Vec3::UnitZ(), 0.7) - euler_rotation(Vec3(0, 0, 0.7))).norm(), 1e-12);
  EXPECT_LT((axis_angle(Vec3::UnitX(), -0.4) - euler_rotation(Vec3(-0.4, 0, 0))).norm(), 1e-12);
}
