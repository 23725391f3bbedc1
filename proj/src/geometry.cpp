#include "footfit/geometry.hpp"

#include "footfit/parallel.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace footfit {

void validate(const Mesh& mesh) {
  const int n = static_cast<int>(mesh.vertices.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    for (int idx : mesh.faces[f]) {
      if (idx < 0 || idx >= n) {
        throw std::invalid_argument("face " + std::to_string(f) + " has out-of-range vertex index " +
                                    std::to_string(idx));
      }
    }
    if (face_normal_scaled(mesh, f).norm() <= 0.0) {
      throw std::invalid_argument("face " + std::to_string(f) + " is degenerate (zero area)");
    }
  }
  if (!mesh.colors.empty() && mesh.colors.size() != mesh.vertices.size()) {
    throw std::invalid_argument("vertex colour count does not match vertex count");
  }
}

Vec3 face_normal_scaled(const Mesh& mesh, std::size_t face) {
  const Face& f = mesh.faces[face];
  const Vec3& a = mesh.vertices[f[0]];
  return (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a);
}

std::vector<double> face_areas(const Mesh& mesh) {
  std::vector<double> areas(mesh.faces.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) areas[f] = 0.5 * face_normal_scaled(mesh, f).norm();
  return areas;
}

double surface_area(const Mesh& mesh) {
  const auto areas = face_areas(mesh);
  return std::accumulate(areas.begin(), areas.end(), 0.0);
}

std::vector<Vec3> vertex_normals(const Mesh& mesh) {
  std::vector<Vec3> acc(mesh.vertices.size(), Vec3::Zero());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Vec3 n = face_normal_scaled(mesh, f);
    for (int v : mesh.faces[f]) acc[v] += n;
  }
  for (std::size_t v = 0; v < acc.size(); ++v) {
    const double len = acc[v].norm();
    if (!(len > 0.0)) {
      throw std::invalid_argument("vertex " + std::to_string(v) + " has zero incident area");
    }
    acc[v] /= len;
  }
  return acc;
}

bool is_watertight(const Mesh& mesh) {
  std::map<std::pair<int, int>, int> count;
  for (const Face& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const int a = f[k], b = f[(k + 1) % 3];
      ++count[{std::min(a, b), std::max(a, b)}];
    }
  }
  return !count.empty() && std::all_of(count.begin(), count.end(), [](const auto& kv) { return kv.second == 2; });
}

SurfaceSample sample_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_surface: requested zero samples");
  const auto areas = face_areas(mesh);
  std::vector<double> cumulative(areas.size());
  std::partial_sum(areas.begin(), areas.end(), cumulative.begin());
  const double total = cumulative.empty() ? 0.0 : cumulative.back();
  if (!(total > 0.0)) throw std::invalid_argument("sample_surface: mesh has no surface area");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  SurfaceSample out;
  out.points.reserve(n);
  out.normals.reserve(n);
  out.face_ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = uni(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const auto face = static_cast<std::size_t>(it - cumulative.begin());
    double u = uni(rng), v = uni(rng);
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    const Face& f = mesh.faces[face];
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    out.points.push_back(a + u * (b - a) + v * (c - a));
    out.normals.push_back(face_normal_scaled(mesh, face).normalized());
    out.face_ids.push_back(static_cast<int>(face));
  }
  return out;
}

// ---- k-d tree -------------------------------------------------------------------

namespace {
constexpr std::uint32_t kLeafSize = 8;
}

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
  if (points_.empty()) throw std::invalid_argument("KdTree: empty point set");
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  build(0, static_cast<std::uint32_t>(points_.size()), 0);
}

int KdTree::build(std::uint32_t begin, std::uint32_t end, int depth) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{begin, end, -1, -1, -1, 0.0});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] - lo[axis] <= 0.0) return id;  // all points identical

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double pa = points_[a][axis], pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const double split = points_[order_[mid]][axis];
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  Node& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

void KdTree::search(int node_id, const Vec3& q, Neighbor& best, double& best_d2) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t idx = order_[i];
      const double d2 = (points_[idx] - q).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && idx < best.index)) {
        best_d2 = d2;
        best.index = idx;
      }
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const int near = diff < 0.0 ? node.left : node.right;
  const int far = diff < 0.0 ? node.right : node.left;
  search(near, q, best, best_d2);
  if (diff * diff <= best_d2) search(far, q, best, best_d2);
}

Neighbor KdTree::nearest(const Vec3& query) const {
  Neighbor best;
  best.index = std::numeric_limits<std::size_t>::max();
  double best_d2 = std::numeric_limits<double>::infinity();
  search(0, query, best, best_d2);
  best.distance = std::sqrt(best_d2);
  return best;
}

std::vector<Neighbor> nearest_neighbors(std::span<const Vec3> query, std::span<const Vec3> target) {
  if (target.empty()) throw std::invalid_argument("nearest_neighbors: empty target");
  const KdTree tree(std::vector<Vec3>(target.begin(), target.end()));
  std::vector<Neighbor> out(query.size());
  parallel_for(query.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) out[i] = tree.nearest(query[i]);
  });
  return out;
}

double lower_median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  const std::size_t k = (values.size() - 1) / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
  return values[k];
}

double angle_deg(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b)) * kDegPerRad;
}

ChamferStats chamfer_stats(const SurfaceSample& a, const SurfaceSample& b) {
  if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("chamfer_stats: empty sample");
  const auto ab = nearest_neighbors(a.points, b.points);
  const auto ba = nearest_neighbors(b.points, a.points);
  std::vector<double> dist, ang;
  dist.reserve(ab.size() + ba.size());
  ang.reserve(ab.size() + ba.size());
  for (std::size_t i = 0; i < ab.size(); ++i) {
    dist.push_back(ab[i].distance);
    ang.push_back(angle_deg(a.normals[i], b.normals[ab[i].index]));
  }
  for (std::size_t i = 0; i < ba.size(); ++i) {
    dist.push_back(ba[i].distance);
    ang.push_back(angle_deg(b.normals[i], a.normals[ba[i].index]));
  }
  ChamferStats s;
  s.mean_distance = std::accumulate(dist.begin(), dist.end(), 0.0) / static_cast<double>(dist.size());
  s.mean_angle_deg = std::accumulate(ang.begin(), ang.end(), 0.0) / static_cast<double>(ang.size());
  s.median_distance = lower_median(std::move(dist));
  s.median_angle_deg = lower_median(std::move(ang));
  return s;
}

// ---- rotations -----------------------------------------------------------------------

namespace {
Mat3 rot_x(double a) {
  Mat3 m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}
Mat3 rot_y(double a) {
  Mat3 m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}
Mat3 rot_z(double a) {
  Mat3 m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}
Mat3 drot_x(double a) {
  Mat3 m;
  m << 0, 0, 0, 0, -std::sin(a), -std::cos(a), 0, std::cos(a), -std::sin(a);
  return m;
}
Mat3 drot_y(double a) {
  Mat3 m;
  m << -std::sin(a), 0, std::cos(a), 0, 0, 0, -std::cos(a), 0, -std::sin(a);
  return m;
}
Mat3 drot_z(double a) {
  Mat3 m;
  m << -std::sin(a), -std::cos(a), 0, std::cos(a), -std::sin(a), 0, 0, 0, 0;
  return m;
}
}  // namespace

Mat3 euler_rotation(const Vec3& r) { return rot_z(r.z()) * rot_y(r.y()) * rot_x(r.x()); }

std::array<Mat3, 3> euler_rotation_derivatives(const Vec3& r) {
  const Mat3 rx = rot_x(r.x()), ry = rot_y(r.y()), rz = rot_z(r.z());
  return {rz * ry * drot_x(r.x()), rz * drot_y(r.y()) * rx, drot_z(r.z()) * ry * rx};
}

Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

// ---- primitive meshes -------------------------------------------------------------------

Mesh make_icosphere(int level, double radius, const Vec3& center) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Face> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                         {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                         {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::make_pair(std::min(a, b), std::max(a, b));
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Face> next;
    next.reserve(f.size() * 4);
    for (const Face& tri : f) {
      const int a = mid(tri[0], tri[1]), b = mid(tri[1], tri[2]), c = mid(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  Mesh mesh;
  mesh.vertices.reserve(v.size());
  for (const auto& p : v) mesh.vertices.push_back(center + radius * p);
  mesh.faces = std::move(f);
  return mesh;
}

Mesh make_box(const Vec3& lo, const Vec3& hi) {
  Mesh m;
  for (int i = 0; i < 8; ++i) {
    m.vertices.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z());
  }
  // Every face diagonal joins two of the corners 0, 3, 5, 6, so all corners see
  // their three faces with equal area and get symmetric vertex normals.
  m.faces = {{0, 2, 3}, {0, 3, 1}, {4, 5, 6}, {5, 7, 6}, {0, 1, 5}, {0, 5, 4},
             {2, 6, 3}, {3, 6, 7}, {0, 4, 6}, {0, 6, 2}, {1, 3, 5}, {3, 7, 5}};
  return m;
}

}  // namespace footfit
