#include "footfit/error.hpp"
#include "footfit/image.hpp"
#include "footfit/mesh_io.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

using namespace footfit;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("footfit_io_" + name); }

ImageD random_image(int w, int h, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ImageD img(w, h, c);
  for (double& v : img.data) v = u(rng);
  return to_float32_precision(img);
}

}  // namespace

TEST(ImageIo, PfmRoundTripIsExact) {
  for (int c : {1, 3}) {
    const ImageD img = random_image(7, 5, c, c);
    const auto path = temp_file("rt.pfm");
    write_pfm(path, img);
    EXPECT_EQ(read_pfm(path), img);
    fs::remove(path);
  }
}

TEST(ImageIo, PfmHeaderAndTopDownRows) {
  ImageD img(2, 2, 1);
  img.at(0, 0) = 1.0;  // top-left
  const auto path = temp_file("rows.pfm");
  write_pfm(path, img);
  std::ifstream in(path, std::ios::binary);
  std::string magic, scale;
  int w = 0, h = 0;
  in >> magic >> w >> h >> scale;
  in.get();
  EXPECT_EQ(magic, "Pf");
  EXPECT_LT(std::stod(scale), 0.0);
  float first = 0.0f;
  in.read(reinterpret_cast<char*>(&first), sizeof first);
  EXPECT_EQ(first, 1.0f);
  fs::remove(path);
}

TEST(ImageIo, PfmTruncatedRejected) {
  const auto path = temp_file("trunc.pfm");
  {
    std::ofstream out(path, std::ios::binary);
    out << "PF\n4 4\n-1\n" << "abc";
  }
  EXPECT_THROW(read_pfm(path), IoError);
  fs::remove(path);
  EXPECT_THROW(read_pfm(path), IoError);
}

TEST(ImageIo, PgmAndPpmRoundTrip) {
  Image8 g(5, 3, 1), c(4, 2, 3);
  for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = static_cast<std::uint8_t>(i * 17);
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] = static_cast<std::uint8_t>(255 - i * 9);
  write_pgm(temp_file("g.pgm"), g);
  write_ppm(temp_file("c.ppm"), c);
  EXPECT_EQ(read_pgm(temp_file("g.pgm")), g);
  EXPECT_EQ(read_ppm(temp_file("c.ppm")), c);
  EXPECT_THROW(read_pgm(temp_file("c.ppm")), IoError);
  fs::remove(temp_file("g.pgm"));
  fs::remove(temp_file("c.ppm"));
}

TEST(ImageIo, NormalToRgb) {
  EXPECT_EQ(normal_component_to_byte(-1.0), 0);
  EXPECT_EQ(normal_component_to_byte(0.0), 127);
  EXPECT_EQ(normal_component_to_byte(1.0), 255);
  ImageD n(1, 1, 3);
  n.at(0, 0, 0) = -1.0;
  const Image8 rgb = normals_to_rgb(n);
  EXPECT_EQ(rgb.at(0, 0, 0), 0);
  EXPECT_EQ(rgb.at(0, 0, 1), 127);
  EXPECT_EQ(rgb.at(0, 0, 2), 127);
  const Image8 black = normals_to_rgb(ImageD(1, 1, 3));
  EXPECT_EQ(black.at(0, 0, 1), 0);
}

TEST(MeshIo, ObjRoundTripIsExact) {
  Mesh m;
  m.vertices = {{0.1, 0.2, 0.3}, {1.0 / 3.0, -2.5e-7, 4}, {7, 8, 9.123456789012345}};
  m.faces = {{0, 1, 2}};
  write_obj(temp_file("m.obj"), m);
  const Mesh back = read_obj(temp_file("m.obj"));
  EXPECT_EQ(back.vertices, m.vertices);
  EXPECT_EQ(back.faces, m.faces);
  fs::remove(temp_file("m.obj"));
}

TEST(MeshIo, ObjAcceptsSlashIndicesAndRejectsQuads) {
  const auto path = temp_file("s.obj");
  {
    std::ofstream out(path);
    out << "# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nvn 0 0 1\nf 1/1/1 2//1 3\n";
  }
  const Mesh m = read_obj(path);
  ASSERT_EQ(m.faces.size(), 1u);
  EXPECT_EQ(m.faces[0], (Face{0, 1, 2}));
  {
    std::ofstream out(path, std::ios::app);
    out << "f 1 2 3 4\n";
  }
  EXPECT_THROW(read_obj(path), IoError);
  {
    std::ofstream out(path);
    out << "v 0 0 0\nf 1 2 3\n";
  }
  EXPECT_THROW(read_obj(path), IoError);
  fs::remove(path);
}

TEST(MeshIo, PlyRoundTripIsExact) {
  Mesh m;
  m.vertices = {{0.1, 0.2, 0.3}, {1.0 / 3.0, -2.5e-7, 4}, {7, 8, 9}, {1, 1, 1}};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  write_mesh(temp_file("m.ply"), m);
  const Mesh back = read_mesh(temp_file("m.ply"));
  EXPECT_EQ(back.vertices, m.vertices);
  EXPECT_EQ(back.faces, m.faces);
  fs::remove(temp_file("m.ply"));
}
