#pragma once

// Evaluation metrics and scan alignment: normal-map errors below the leg cutoff,
// 3D chamfer reports, floor detection and levelling, and a 4-parameter
// (in-plane rotation, in-plane translation, isotropic scale) chamfer alignment.

#include "footfit/geometry.hpp"
#include "footfit/image.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace footfit {

struct NormalEvalReport {
  double mean_deg = 0.0;
  double median_deg = 0.0;  ///< lower median
  double rmse_deg = 0.0;
  double pct_11_25 = 0.0;   ///< percent of pixels with error < 11.25 deg
  double pct_22_5 = 0.0;
  double pct_30 = 0.0;
  std::size_t pixels = 0;
};

/// Angular error between predicted and GT normals on masked pixels whose height
/// is below `cutoff` (m). Both maps are normalised per pixel first. Throws
/// DimensionError on mismatched maps and NumericalError on an empty pixel set.
NormalEvalReport eval_normals(const ImageD& mu, const ImageD& normal_gt, const Image8& mask, const ImageD& height,
                              double cutoff = 0.20);

/// Plane n . x + d = 0 with a unit normal, oriented so that n_z >= 0.
struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double d = 0.0;

  double signed_distance(const Vec3& p) const { return normal.dot(p) + d; }
};

struct FloorConfig {
  int iterations = 1000;
  double threshold = 0.003;           ///< m
  double min_inlier_fraction = 0.20;
  std::uint64_t seed = 0;
};

struct FloorFit {
  Plane plane;
  std::vector<std::size_t> inliers;  ///< ascending
};

/// RANSAC plane with iteration i drawing from its own stream (seed ^ i); the
/// winner has the most inliers, then the lowest iteration. The plane is refined
/// by least squares on its inliers. Throws std::invalid_argument for fewer than
/// 3 points and NumericalError when no plane reaches the inlier fraction.
FloorFit fit_floor(std::span<const Vec3> points, const FloorConfig& config = {});

/// Points that are not floor inliers, in their original order.
std::vector<Vec3> remove_floor(std::span<const Vec3> points, const FloorFit& floor);

struct RigidTransform {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return R * p + t; }
};

/// Minimal rotation taking the plane normal to +z, followed by the vertical shift
/// that puts the plane at z = 0.
RigidTransform floor_transform(const Plane& plane);
std::vector<Vec3> level_to_floor(std::span<const Vec3> points, const Plane& plane);
Mesh level_to_floor(const Mesh& mesh, const Plane& plane);

/// x' = s Rz(theta) (x - pivot) + pivot + (tx, ty, 0).
struct AlignParams {
  double theta = 0.0;  ///< rad
  double tx = 0.0, ty = 0.0;
  double s = 1.0;
};

Vec3 apply_align(const AlignParams& params, const Vec3& pivot, const Vec3& p);

struct AlignConfig {
  double lr = 0.01;
  int steps = 500;              ///< per optimisation round
  int reassociate_every = 25;
  double outlier_factor = 3.0;  ///< pairs beyond factor x median NN distance are dropped
};

struct AlignResult {
  AlignParams params;
  Vec3 pivot = Vec3::Zero();    ///< source centroid
  std::vector<double> trace;    ///< best objective so far after each step; the second round runs on the kept points
  double initial_objective = 0.0;
  double final_objective = 0.0;
  std::size_t source_kept = 0, target_kept = 0;
};

/// Bidirectional mean nearest-neighbour distance between the transformed source and the target.
double align_objective(std::span<const Vec3> source, std::span<const Vec3> target, const AlignParams& params,
                       const Vec3& pivot);

/// Adam over (theta, tx, ty, s) on the bidirectional mean NN distance, with
/// nearest-neighbour pairs refreshed periodically and held fixed in between.
/// After the first round, points farther than outlier_factor x the median NN
/// distance are dropped and the optimisation is repeated. Each round returns its
/// lowest-objective iterate, so the trace is non-increasing. Throws
/// std::invalid_argument when either cloud has fewer than 10 points.
AlignResult align_4param(std::span<const Vec3> source, std::span<const Vec3> target, const AlignParams& init = {},
                         const AlignConfig& config = {});

/// Chamfer statistics of two meshes sampled with the same seed.
ChamferStats eval_3d(const Mesh& fitted, const Mesh& gt, std::size_t n = 10000, std::uint64_t seed = 0);

// ---- report formatting ---------------------------------------------------------

/// Aligned-column table with one row per named report.
std::string normal_report_table(std::span<const std::pair<std::string, NormalEvalReport>> rows);
std::string normal_report_csv(std::span<const std::pair<std::string, NormalEvalReport>> rows);
/// Distances in mm, angles in degrees.
std::string chamfer_report_table(std::span<const std::pair<std::string, ChamferStats>> rows);
std::string chamfer_report_csv(std::span<const std::pair<std::string, ChamferStats>> rows);

}  // namespace footfit
