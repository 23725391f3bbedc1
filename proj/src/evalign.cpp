#include "footfit/evalign.hpp"

#include "footfit/error.hpp"
#include "footfit/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>

namespace footfit {

// ---- normal maps ---------------------------------------------------------------

NormalEvalReport eval_normals(const ImageD& mu, const ImageD& normal_gt, const Image8& mask, const ImageD& height,
                              double cutoff) {
  if (mu.channels != 3 || normal_gt.channels != 3 || !mu.same_size(normal_gt)) {
    throw DimensionError("eval_normals: mu and GT normals must be 3-channel maps of equal size");
  }
  if (mask.channels != 1 || height.channels != 1 || mask.width != mu.width || mask.height != mu.height ||
      height.width != mu.width || height.height != mu.height) {
    throw DimensionError("eval_normals: mask and height must be 1-channel maps matching the normals");
  }
  std::vector<double> errors;
  for (std::size_t p = 0; p < mu.pixel_count(); ++p) {
    if (mask.data[p] == 0 || !(height.data[p] < cutoff)) continue;
    const Vec3 a(mu.data[3 * p], mu.data[3 * p + 1], mu.data[3 * p + 2]);
    const Vec3 b(normal_gt.data[3 * p], normal_gt.data[3 * p + 1], normal_gt.data[3 * p + 2]);
    if (a.norm() == 0.0 || b.norm() == 0.0) continue;
    errors.push_back(angle_deg(a.normalized(), b.normalized()));
  }
  if (errors.empty()) throw NumericalError("eval_normals: no masked pixels below the cutoff");

  NormalEvalReport r;
  r.pixels = errors.size();
  double sum = 0.0, sq = 0.0;
  std::size_t c11 = 0, c22 = 0, c30 = 0;
  for (double e : errors) {
    sum += e;
    sq += e * e;
    c11 += e < 11.25;
    c22 += e < 22.5;
    c30 += e < 30.0;
  }
  const double n = static_cast<double>(errors.size());
  r.mean_deg = sum / n;
  r.rmse_deg = std::sqrt(sq / n);
  r.pct_11_25 = 100.0 * static_cast<double>(c11) / n;
  r.pct_22_5 = 100.0 * static_cast<double>(c22) / n;
  r.pct_30 = 100.0 * static_cast<double>(c30) / n;
  r.median_deg = lower_median(std::move(errors));
  return r;
}

// ---- floor ---------------------------------------------------------------------

namespace {

Plane oriented(Vec3 normal, const Vec3& point) {
  normal.normalize();
  if (normal.z() < 0.0) normal = -normal;
  return {normal, -normal.dot(point)};
}

Plane least_squares_plane(std::span<const Vec3> points, std::span<const std::size_t> ids) {
  Vec3 c = Vec3::Zero();
  for (std::size_t i : ids) c += points[i];
  c /= static_cast<double>(ids.size());
  Mat3 cov = Mat3::Zero();
  for (std::size_t i : ids) {
    const Vec3 d = points[i] - c;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  return oriented(eig.eigenvectors().col(0), c);
}

std::vector<std::size_t> plane_inliers(std::span<const Vec3> points, const Plane& plane, double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (std::abs(plane.signed_distance(points[i])) <= threshold) out.push_back(i);
  }
  return out;
}

}  // namespace

FloorFit fit_floor(std::span<const Vec3> points, const FloorConfig& config) {
  if (points.size() < 3) throw std::invalid_argument("fit_floor: need at least 3 points");
  if (config.iterations <= 0 || !(config.threshold > 0.0)) {
    throw ConfigError("fit_floor: iterations and threshold must be positive");
  }
  const std::size_t n = points.size();
  const auto iters = static_cast<std::size_t>(config.iterations);
  std::vector<std::size_t> counts(iters, 0);
  std::vector<Plane> planes(iters);
  std::vector<char> valid(iters, 0);

  parallel_for(
      iters,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t it = begin; it < end; ++it) {
          std::mt19937_64 rng(config.seed ^ static_cast<std::uint64_t>(it));
          std::uniform_int_distribution<std::size_t> pick(0, n - 1);
          const std::size_t a = pick(rng);
          std::size_t b = pick(rng), c = pick(rng);
          while (b == a) b = pick(rng);
          while (c == a || c == b) c = pick(rng);
          const Vec3 normal = (points[b] - points[a]).cross(points[c] - points[a]);
          if (normal.norm() < 1e-15) continue;
          const Plane plane = oriented(normal, points[a]);
          std::size_t count = 0;
          for (const Vec3& p : points) count += std::abs(plane.signed_distance(p)) <= config.threshold;
          planes[it] = plane;
          counts[it] = count;
          valid[it] = 1;
        }
      },
      16);

  std::size_t best = iters;
  for (std::size_t it = 0; it < iters; ++it) {
    if (valid[it] && (best == iters || counts[it] > counts[best])) best = it;
  }
  const double needed = config.min_inlier_fraction * static_cast<double>(n);
  if (best == iters || static_cast<double>(counts[best]) < needed) {
    throw NumericalError("fit_floor: no plane with enough inliers");
  }
  FloorFit fit;
  fit.plane = least_squares_plane(points, plane_inliers(points, planes[best], config.threshold));
  fit.inliers = plane_inliers(points, fit.plane, config.threshold);
  if (static_cast<double>(fit.inliers.size()) < needed) {
    throw NumericalError("fit_floor: refined plane lost its inliers");
  }
  return fit;
}

std::vector<Vec3> remove_floor(std::span<const Vec3> points, const FloorFit& floor) {
  std::vector<char> drop(points.size(), 0);
  for (std::size_t i : floor.inliers) drop.at(i) = 1;
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!drop[i]) out.push_back(points[i]);
  }
  return out;
}

RigidTransform floor_transform(const Plane& plane) {
  const Vec3 n = plane.normal.normalized();
  const Vec3 z = Vec3::UnitZ();
  RigidTransform tr;
  const Vec3 axis = n.cross(z);
  const double sin_a = axis.norm();
  if (sin_a > 0.0) {
    tr.R = axis_angle(axis / sin_a, std::atan2(sin_a, n.dot(z)));
  } else if (n.z() < 0.0) {
    tr.R = axis_angle(Vec3::UnitX(), kPi);
  }
  const Vec3 on_plane = -plane.d / plane.normal.squaredNorm() * plane.normal;
  tr.t = Vec3(0.0, 0.0, -(tr.R * on_plane).z());
  return tr;
}

std::vector<Vec3> level_to_floor(std::span<const Vec3> points, const Plane& plane) {
  const RigidTransform tr = floor_transform(plane);
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const Vec3& p : points) out.push_back(tr.apply(p));
  return out;
}

Mesh level_to_floor(const Mesh& mesh, const Plane& plane) {
  Mesh out = mesh;
  out.vertices = level_to_floor(mesh.vertices, plane);
  return out;
}

// ---- 4-parameter alignment -------------------------------------------------------

Vec3 apply_align(const AlignParams& p, const Vec3& pivot, const Vec3& x) {
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  const Vec3 d = x - pivot;
  return pivot + Vec3(p.s * (c * d.x() - s * d.y()) + p.tx, p.s * (s * d.x() + c * d.y()) + p.ty, p.s * d.z());
}

namespace {

Vec3 invert_align(const AlignParams& p, const Vec3& pivot, const Vec3& y) {
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  const Vec3 d = y - pivot - Vec3(p.tx, p.ty, 0.0);
  return pivot + Vec3(c * d.x() + s * d.y(), -s * d.x() + c * d.y(), d.z()) / p.s;
}

/// Both directions of the chamfer pairing for one set of parameters. Target-to-source
/// queries use the inverse similarity in the untransformed source tree and scale
/// the distance back by s.
struct Pairing {
  std::vector<Neighbor> source_to_target, target_to_source;
  double objective = 0.0;
};

Pairing pair_up(std::span<const Vec3> source, std::span<const Vec3> target, const KdTree& source_tree,
                const KdTree& target_tree, const AlignParams& p, const Vec3& pivot) {
  Pairing out;
  out.source_to_target.resize(source.size());
  out.target_to_source.resize(target.size());
  parallel_for(source.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) out.source_to_target[i] = target_tree.nearest(apply_align(p, pivot, source[i]));
  });
  parallel_for(target.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      Neighbor nb = source_tree.nearest(invert_align(p, pivot, target[i]));
      nb.distance *= p.s;
      out.target_to_source[i] = nb;
    }
  });
  double a = 0.0, b = 0.0;
  for (const Neighbor& nb : out.source_to_target) a += nb.distance;
  for (const Neighbor& nb : out.target_to_source) b += nb.distance;
  out.objective = a / static_cast<double>(source.size()) + b / static_cast<double>(target.size());
  return out;
}

/// Gradient of the objective over (theta, tx, ty, s) with the pairing held fixed.
std::array<double, 4> pair_gradient(std::span<const Vec3> source, std::span<const Vec3> target, const Pairing& pairs,
                                    const AlignParams& p, const Vec3& pivot) {
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  std::array<double, 4> g{0.0, 0.0, 0.0, 0.0};
  const auto accumulate = [&](const Vec3& x, const Vec3& y, double sign, double weight) {
    const Vec3 d = x - pivot;
    const Vec3 tx = apply_align(p, pivot, x);
    const Vec3 diff = tx - y;
    const double len = diff.norm();
    if (len < 1e-15) return;
    const Vec3 u = sign * weight * diff / len;
    const Vec3 dtheta(p.s * (-s * d.x() - c * d.y()), p.s * (c * d.x() - s * d.y()), 0.0);
    const Vec3 dscale(c * d.x() - s * d.y(), s * d.x() + c * d.y(), d.z());
    g[0] += u.dot(dtheta);
    g[1] += u.x();
    g[2] += u.y();
    g[3] += u.dot(dscale);
  };
  const double ws = 1.0 / static_cast<double>(source.size());
  const double wt = 1.0 / static_cast<double>(target.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    accumulate(source[i], target[pairs.source_to_target[i].index], 1.0, ws);
  }
  for (std::size_t j = 0; j < target.size(); ++j) {
    accumulate(source[pairs.target_to_source[j].index], target[j], 1.0, wt);
  }
  return g;
}

AlignParams optimize_round(std::span<const Vec3> source, std::span<const Vec3> target, const AlignParams& init,
                           const Vec3& pivot, const AlignConfig& config, std::vector<double>& trace) {
  const KdTree source_tree(std::vector<Vec3>(source.begin(), source.end()));
  const KdTree target_tree(std::vector<Vec3>(target.begin(), target.end()));
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::array<double, 4> m{}, v{};
  AlignParams p = init;
  Pairing pairs = pair_up(source, target, source_tree, target_tree, p, pivot);
  AlignParams best = p;
  double best_objective = pairs.objective;
  for (int step = 1; step <= config.steps; ++step) {
    const std::array<double, 4> g = pair_gradient(source, target, pairs, p, pivot);
    std::array<double*, 4> x{&p.theta, &p.tx, &p.ty, &p.s};
    for (int k = 0; k < 4; ++k) {
      if (!std::isfinite(g[k])) throw NumericalError("align_4param: non-finite gradient");
      m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
      v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
      const double mh = m[k] / (1.0 - std::pow(beta1, step));
      const double vh = v[k] / (1.0 - std::pow(beta2, step));
      *x[k] -= config.lr * mh / (std::sqrt(vh) + eps);
    }
    if (!(p.s > 0.0)) throw NumericalError("align_4param: scale collapsed");
    const Pairing current = pair_up(source, target, source_tree, target_tree, p, pivot);
    if (current.objective < best_objective) {
      best_objective = current.objective;
      best = p;
    }
    trace.push_back(best_objective);
    if (step % config.reassociate_every == 0) pairs = current;
  }
  return best;
}

}  // namespace

double align_objective(std::span<const Vec3> source, std::span<const Vec3> target, const AlignParams& params,
                       const Vec3& pivot) {
  const KdTree source_tree(std::vector<Vec3>(source.begin(), source.end()));
  const KdTree target_tree(std::vector<Vec3>(target.begin(), target.end()));
  return pair_up(source, target, source_tree, target_tree, params, pivot).objective;
}

AlignResult align_4param(std::span<const Vec3> source, std::span<const Vec3> target, const AlignParams& init,
                         const AlignConfig& config) {
  if (source.size() < 10 || target.size() < 10) {
    throw std::invalid_argument("align_4param: clouds need at least 10 points");
  }
  if (!(init.s > 0.0)) throw std::invalid_argument("align_4param: initial scale must be positive");
  if (config.steps <= 0 || config.reassociate_every <= 0 || !(config.lr > 0.0) || !(config.outlier_factor > 0.0)) {
    throw ConfigError("align_4param: steps, re-association interval, lr and outlier factor must be positive");
  }
  AlignResult result;
  for (const Vec3& p : source) result.pivot += p;
  result.pivot /= static_cast<double>(source.size());

  result.initial_objective = align_objective(source, target, init, result.pivot);
  AlignParams p = optimize_round(source, target, init, result.pivot, config, result.trace);

  // Outlier rejection on the pooled nearest-neighbour distances.
  const KdTree source_tree(std::vector<Vec3>(source.begin(), source.end()));
  const KdTree target_tree(std::vector<Vec3>(target.begin(), target.end()));
  const Pairing pairs = pair_up(source, target, source_tree, target_tree, p, result.pivot);
  std::vector<double> pooled;
  for (const Neighbor& nb : pairs.source_to_target) pooled.push_back(nb.distance);
  for (const Neighbor& nb : pairs.target_to_source) pooled.push_back(nb.distance);
  const double limit = config.outlier_factor * lower_median(pooled);
  std::vector<Vec3> src, tgt;
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (pairs.source_to_target[i].distance <= limit) src.push_back(source[i]);
  }
  for (std::size_t j = 0; j < target.size(); ++j) {
    if (pairs.target_to_source[j].distance <= limit) tgt.push_back(target[j]);
  }
  result.source_kept = src.size();
  result.target_kept = tgt.size();
  if (src.size() < 10 || tgt.size() < 10) throw NumericalError("align_4param: outlier rejection left too few points");

  // The objective changes with the kept sets, so the second round's trace continues
  // from its own start, capped by the first round's final value for monotonicity.
  std::vector<double> second;
  p = optimize_round(src, tgt, p, result.pivot, config, second);
  const double carry = result.trace.empty() ? result.initial_objective : result.trace.back();
  for (double v : second) result.trace.push_back(std::min(v, carry));
  result.params = p;
  result.final_objective = align_objective(source, target, p, result.pivot);
  return result;
}

ChamferStats eval_3d(const Mesh& fitted, const Mesh& gt, std::size_t n, std::uint64_t seed) {
  return chamfer_stats(sample_surface(fitted, n, seed), sample_surface(gt, n, seed));
}

// ---- reports ------------------------------------------------------------------------

namespace {

std::string fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream out;
  const auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == 0) {
        out << cells[c] << std::string(width[c] - cells[c].size(), ' ');
      } else {
        out << "  " << std::string(width[c] - cells[c].size(), ' ') << cells[c];
      }
    }
    out << "\n";
  };
  line(header);
  std::size_t total = 0;
  for (std::size_t w : width) total += w;
  out << std::string(total + 2 * (width.size() - 1), '-') << "\n";
  for (const auto& r : rows) line(r);
  return out.str();
}

std::string csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  const auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) out << (c ? "," : "") << cells[c];
    out << "\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out.str();
}

const std::vector<std::string> kNormalHeader = {"name", "mean", "median", "rmse", "<11.25", "<22.5", "<30", "pixels"};
const std::vector<std::string> kChamferHeader = {"name", "mean_mm", "median_mm", "mean_angle_deg", "median_angle_deg"};

std::vector<std::vector<std::string>> normal_rows(std::span<const std::pair<std::string, NormalEvalReport>> rows,
                                                  int precision) {
  std::vector<std::vector<std::string>> out;
  for (const auto& [name, r] : rows) {
    out.push_back({name, fixed(r.mean_deg, precision), fixed(r.median_deg, precision), fixed(r.rmse_deg, precision),
                   fixed(r.pct_11_25, precision), fixed(r.pct_22_5, precision), fixed(r.pct_30, precision),
                   std::to_string(r.pixels)});
  }
  return out;
}

std::vector<std::vector<std::string>> chamfer_rows(std::span<const std::pair<std::string, ChamferStats>> rows,
                                                   int precision) {
  std::vector<std::vector<std::string>> out;
  for (const auto& [name, r] : rows) {
    out.push_back({name, fixed(r.mean_distance * 1000.0, precision), fixed(r.median_distance * 1000.0, precision),
                   fixed(r.mean_angle_deg, precision), fixed(r.median_angle_deg, precision)});
  }
  return out;
}

}  // namespace

std::string normal_report_table(std::span<const std::pair<std::string, NormalEvalReport>> rows) {
  return table(kNormalHeader, normal_rows(rows, 2));
}

std::string normal_report_csv(std::span<const std::pair<std::string, NormalEvalReport>> rows) {
  return csv(kNormalHeader, normal_rows(rows, 9));
}

std::string chamfer_report_table(std::span<const std::pair<std::string, ChamferStats>> rows) {
  return table(kChamferHeader, chamfer_rows(rows, 3));
}

std::string chamfer_report_csv(std::span<const std::pair<std::string, ChamferStats>> rows) {
  return csv(kChamferHeader, chamfer_rows(rows, 9));
}

}  // namespace footfit
