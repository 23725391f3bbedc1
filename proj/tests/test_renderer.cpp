#include "footfit/renderer.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace footfit;
using footfit::ad::Tape;
using footfit::ad::Tensor;

namespace {

Camera axis_camera(int w, int h, double f) {
  Camera c;
  c.fx = c.fy = f;
  c.cx = w / 2.0;
  c.cy = h / 2.0;
  c.width = w;
  c.height = h;
  return c;
}

// Square at depth z in the camera frame, facing the camera.
Mesh facing_square(double x0, double y0, double size, double z) {
  Mesh m;
  m.vertices = {{x0, y0, z}, {x0, y0 + size, z}, {x0 + size, y0 + size, z}, {x0 + size, y0, z}};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

Tensor to_tensor(const std::vector<Vec3>& v) {
  Tensor t({v.size(), 3});
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (int k = 0; k < 3; ++k) t[3 * i + k] = v[i][k];
  }
  return t;
}

double edge(const Vec2& a, const Vec2& b, const Vec2& p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

ad::Var soft_of(const Mesh& m, const Camera& cam, double sharpness, Tape& tape) {
  const auto cv = camera_vertices(m, cam);
  const Fragments frags = rasterize(cv, m.faces, cam);
  const EdgeTopology topo = build_edge_topology(m.faces);
  return soft_silhouette(tape.leaf(to_tensor(cv)), m.faces, topo, cam, frags, sharpness);
}

}  // namespace

TEST(Renderer, CoverageMatchesEdgeFunctions) {
  const Camera cam = axis_camera(40, 30, 50.0);
  Mesh m;
  m.vertices = {{-0.2137, -0.1471, 1.0}, {-0.0913, 0.2533, 1.0}, {0.3071, -0.0519, 1.0}};
  m.faces = {{0, 1, 2}};
  const Fragments frags = rasterize(m, cam);
  Vec2 p[3];
  for (int k = 0; k < 3; ++k) p[k] = project(cam, m.vertices[k]).pixel;
  int mismatches = 0;
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Vec2 c(x + 0.5, y + 0.5);
      const double e0 = edge(p[0], p[1], c), e1 = edge(p[1], p[2], c), e2 = edge(p[2], p[0], c);
      const bool inside = (e0 > 0 && e1 > 0 && e2 > 0) || (e0 < 0 && e1 < 0 && e2 < 0);
      mismatches += inside != frags.covered(static_cast<std::size_t>(y) * cam.width + x);
    }
  }
  EXPECT_EQ(mismatches, 0);
  EXPECT_GT(frags.covered_count(), 0u);
}

TEST(Renderer, BackFacesCulled) {
  const Camera cam = axis_camera(20, 20, 20.0);
  Mesh m = facing_square(-0.2, -0.2, 0.4, 1.0);
  for (Face& f : m.faces) std::swap(f[1], f[2]);
  EXPECT_EQ(rasterize(m, cam).covered_count(), 0u);
}

TEST(Renderer, FlatTriangleNormal) {
  const Camera cam = axis_camera(20, 20, 20.0);
  const Mesh m = facing_square(-0.3, -0.3, 0.6, 1.0);
  const ImageD n = render_normal_map(m, cam);
  EXPECT_DOUBLE_EQ(n.at(10, 10, 0), 0.0);
  EXPECT_DOUBLE_EQ(n.at(10, 10, 1), 0.0);
  EXPECT_DOUBLE_EQ(n.at(10, 10, 2), -1.0);
  EXPECT_EQ(n.at(0, 0, 2), 0.0);
}

TEST(Renderer, SphereNormalsMatchAnalytic) {
  const Mesh sphere = make_icosphere(4, 0.05);
  const Camera cam = look_at(Vec3(0.1, 0.2, 0.15), Vec3::Zero(), Vec3::UnitZ(), make_intrinsics(30, 36, 64, 64));
  const Fragments frags = rasterize(sphere, cam);
  const ImageD n = render_normal_map(sphere, cam, frags);
  double worst = 0.0;
  for (std::size_t p : frags.covered_pixels()) {
    const int x = static_cast<int>(p % 64), y = static_cast<int>(p / 64);
    const Vec3 world = unproject(cam, Vec2(x + 0.5, y + 0.5), frags.depth[p]);
    const Vec3 expect = cam.R * world.normalized();
    worst = std::max(worst, angle_deg(Vec3(n.at(x, y, 0), n.at(x, y, 1), n.at(x, y, 2)), expect));
  }
  EXPECT_LT(worst, 3.0);
  EXPECT_GT(frags.covered_count(), 100u);
}

TEST(Renderer, NearerFaceWins) {
  const Camera cam = axis_camera(10, 10, 10.0);
  Mesh m = facing_square(-0.5, -0.5, 1.0, 2.0);
  const Mesh near = facing_square(-0.2, -0.2, 0.4, 1.0);
  for (const Vec3& v : near.vertices) m.vertices.push_back(v);
  m.faces.push_back({4, 5, 6});
  m.faces.push_back({4, 6, 7});
  const Fragments f = rasterize(m, cam);
  EXPECT_GE(f.face[5 * 10 + 5], 2);
  EXPECT_NEAR(f.depth[5 * 10 + 5], 1.0, 1e-12);
  EXPECT_LT(f.face[0 * 10 + 0], 2);
}

TEST(Renderer, SoftSilhouetteInteriorAndEmpty) {
  const Camera cam = axis_camera(32, 32, 32.0);
  Tape tape;
  const ad::Var soft = soft_of(facing_square(-0.3, -0.3, 0.6, 1.0), cam, 10.0, tape);
  EXPECT_GT(soft.value()[16 * 32 + 16], 0.999);
  EXPECT_LT(soft.value()[0], 1e-3);
  Tape empty_tape;
  const ad::Var empty = soft_of(facing_square(5.0, 5.0, 0.1, 1.0), cam, 10.0, empty_tape);
  for (double v : empty.value().data) EXPECT_EQ(v, 0.0);
}

TEST(Renderer, SoftSilhouetteShiftEquivariant) {
  const Camera cam = axis_camera(32, 32, 32.0);
  const double px = 1.0 / 32.0;  // one pixel at depth 1
  Tape ta, tb;
  const ad::Var a = soft_of(facing_square(-0.23, -0.19, 0.41, 1.0), cam, 5.0, ta);
  const ad::Var b = soft_of(facing_square(-0.23 + px, -0.19, 0.41, 1.0), cam, 5.0, tb);
  double worst = 0.0;
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x + 1 < 32; ++x) {
      worst = std::max(worst, std::abs(a.value()[y * 32 + x] - b.value()[y * 32 + x + 1]));
    }
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(Renderer, KeypointOnAxis) {
  const Camera cam = axis_camera(120, 160, 100.0);
  Mesh m = facing_square(-0.1, -0.1, 0.2, 1.0);
  m.vertices.push_back(Vec3(0, 0, 0.8));
  const std::vector<int> ids{4};
  const auto kp = project_keypoints(m, ids, cam);
  ASSERT_EQ(kp.size(), 1u);
  EXPECT_TRUE(kp[0].visible);
  EXPECT_DOUBLE_EQ(kp[0].position.x(), cam.cx / cam.width);
  EXPECT_DOUBLE_EQ(kp[0].position.y(), cam.cy / cam.height);
}

TEST(Renderer, CutoffFraction) {
  // Vertical wall in the plane x = 0 from z = 0 to 0.4, seen from +x at mid height.
  Mesh wall;
  wall.vertices = {{0, -0.2, 0}, {0, 0.2, 0}, {0, 0.2, 0.4}, {0, -0.2, 0.4}};
  wall.faces = {{0, 1, 2}, {0, 2, 3}};
  const Camera cam = look_at(Vec3(1.0, 0, 0.2), Vec3(0, 0, 0.2), Vec3::UnitZ(), make_intrinsics(30, 36, 64, 64));
  EXPECT_EQ(cutoff_fraction(wall, 1.0, cam), 0.0);
  EXPECT_EQ(cutoff_fraction(wall, -0.1, cam), 1.0);
  EXPECT_NEAR(cutoff_fraction(wall, 0.2, cam), 0.5, 0.02);
}

TEST(Renderer, EdgeTopologyOfClosedMesh) {
  const Mesh s = make_icosphere(1);
  const EdgeTopology topo = build_edge_topology(s.faces);
  EXPECT_EQ(topo.edges.size(), s.faces.size() * 3 / 2);
  for (const auto& f : topo.faces) EXPECT_GE(f[1], 0);
}

TEST(Renderer, DifferentiableNormalsMatchPlainRender) {
  const Mesh sphere = make_icosphere(3, 0.05);
  const Camera cam = look_at(Vec3(0.0, 0.3, 0.2), Vec3::Zero(), Vec3::UnitZ(), make_intrinsics(30, 36, 48, 48));
  const Fragments frags = rasterize(sphere, cam);
  const ImageD plain = render_normal_map(sphere, cam, frags);
  Tape tape;
  const ad::Var world = tape.leaf(to_tensor(sphere.vertices));
  const auto pixels = frags.covered_pixels();
  const ad::Var n = interpolate_normals(vertex_normals(to_camera_frame(world, cam), sphere.faces), sphere.faces,
                                        frags, pixels);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(n.value()[3 * i + k], plain.data[3 * pixels[i] + k], 1e-9);
  }
}
