#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace footfit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Face = std::array<int, 3>;

/// Triangle mesh in meters. Faces are counter-clockwise seen from outside.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<Vec3> colors;  ///< optional, per vertex, [0, 1]
};

/// Throws std::invalid_argument on out-of-range indices or zero-area faces.
void validate(const Mesh& mesh);

/// Unnormalised face normal: (v1 - v0) x (v2 - v0); its length is twice the area.
Vec3 face_normal_scaled(const Mesh& mesh, std::size_t face);
std::vector<double> face_areas(const Mesh& mesh);
double surface_area(const Mesh& mesh);
/// Area-weighted per-vertex normals. Throws std::invalid_argument for a vertex
/// without incident area.
std::vector<Vec3> vertex_normals(const Mesh& mesh);

/// Every undirected edge is shared by exactly two faces.
bool is_watertight(const Mesh& mesh);

struct SurfaceSample {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<int> face_ids;

  std::size_t size() const { return points.size(); }
};

/// Area-uniform surface sampling; faces are drawn with probability proportional
/// to area and points are uniform in barycentric coordinates. Deterministic per seed.
SurfaceSample sample_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed);

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;
};

/// Exact Euclidean nearest neighbour search. Ties resolve to the lowest index.
class KdTree {
 public:
  explicit KdTree(std::vector<Vec3> points);

  Neighbor nearest(const Vec3& query) const;
  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

 private:
  struct Node {
    std::uint32_t begin = 0, end = 0;  // range into order_ for leaves
    std::int32_t left = -1, right = -1;
    int axis = -1;
    double split = 0.0;
  };
  int build(std::uint32_t begin, std::uint32_t end, int depth);
  void search(int node, const Vec3& q, Neighbor& best, double& best_d2) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

/// Nearest target point for every query point.
std::vector<Neighbor> nearest_neighbors(std::span<const Vec3> query, std::span<const Vec3> target);

struct ChamferStats {
  double mean_distance = 0.0;    ///< meters
  double median_distance = 0.0;  ///< meters, lower median
  double mean_angle_deg = 0.0;
  double median_angle_deg = 0.0;
};

/// Bidirectional nearest-neighbour statistics pooled over a->b and b->a pairs.
ChamferStats chamfer_stats(const SurfaceSample& a, const SurfaceSample& b);

/// Lower median (element n/2 - 1 for even n). Throws on empty input.
double lower_median(std::vector<double> values);

/// Angle between two vectors in degrees, atan2(|a x b|, a . b); exactly 0 for equal vectors.
double angle_deg(const Vec3& a, const Vec3& b);

/// R = Rz(rz) * Ry(ry) * Rx(rx).
Mat3 euler_rotation(const Vec3& r);
/// Partial derivatives dR/drx, dR/dry, dR/drz.
std::array<Mat3, 3> euler_rotation_derivatives(const Vec3& r);
/// Rotation by angle about a unit axis.
Mat3 axis_angle(const Vec3& axis, double angle);

/// Geodesic sphere from a subdivided icosahedron: 10 * 4^level + 2 vertices.
Mesh make_icosphere(int level, double radius = 1.0, const Vec3& center = Vec3::Zero());
/// Axis-aligned box with outward-facing triangles.
Mesh make_box(const Vec3& lo, const Vec3& hi);

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegPerRad = 180.0 / kPi;

}  // namespace footfit
