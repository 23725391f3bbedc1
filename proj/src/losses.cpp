#include "footfit/losses.hpp"

#include "footfit/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace footfit {

namespace {

void require_unit_rows(const ad::Tensor& t, const char* what) {
  if (t.rank() != 2 || t.shape[1] != 3) {
    throw DimensionError(std::string(what) + ": expected (P x 3), got " + ad::shape_string(t.shape));
  }
  for (std::size_t i = 0; i < t.shape[0]; ++i) {
    const double n = std::sqrt(t[3 * i] * t[3 * i] + t[3 * i + 1] * t[3 * i + 1] + t[3 * i + 2] * t[3 * i + 2]);
    if (std::abs(n - 1.0) > 1e-6) {
      throw std::invalid_argument(std::string(what) + ": row " + std::to_string(i) + " is not a unit vector");
    }
  }
}

void require_kappa(const ad::Tensor& kappa, std::size_t rows, const char* what) {
  if (kappa.rank() != 1 || kappa.shape[0] != rows) {
    throw DimensionError(std::string(what) + ": kappa must have shape (" + std::to_string(rows) + ")");
  }
  for (double k : kappa.data) {
    if (!(k >= 0.0) || !std::isfinite(k)) throw std::invalid_argument(std::string(what) + ": kappa must be finite and >= 0");
  }
}

double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                    double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_step(f, a, b, fa, fm, fb, whole, tol, 60);
}

// Integral over [0, upper] split into panels so peaked integrands are resolved.
double panel_integral(const std::function<double(double)>& f, double upper, double tol) {
  constexpr int kPanels = 16;
  double total = 0.0;
  for (int i = 0; i < kPanels; ++i) {
    total += adaptive_simpson(f, upper * i / kPanels, upper * (i + 1) / kPanels, tol / kPanels);
  }
  return total;
}

const std::vector<double>& kappa_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(kKappaTableSize);
    for (std::size_t i = 0; i < kKappaTableSize; ++i) {
      t[i] = expected_angular_error_exact(kMaxKappa * static_cast<double>(i) / (kKappaTableSize - 1));
    }
    return t;
  }();
  return table;
}

}  // namespace

ad::Var angmf_nll(const ad::Var& mu, const ad::Var& kappa, const ad::Var& n_gt) {
  require_unit_rows(mu.value(), "angmf_nll mu");
  require_unit_rows(n_gt.value(), "angmf_nll n_gt");
  if (mu.shape() != n_gt.shape()) throw DimensionError("angmf_nll: mu and n_gt shapes differ");
  require_kappa(kappa.value(), mu.shape()[0], "angmf_nll");
  if (mu.shape()[0] == 0) throw std::invalid_argument("angmf_nll: no pixels");
  const ad::Var angle = ad::arccos(ad::row_dot(mu, n_gt));
  const ad::Var norm_term = ad::log(ad::exp(kappa * (-kPi)) + 1.0) - ad::log(ad::square(kappa) + 1.0);
  return ad::mean(kappa * angle + norm_term);
}

std::vector<Vec3> sample_camera_hemisphere(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vec3> out;
  out.reserve(n);
  while (out.size() < n) {
    Vec3 v(normal(rng), normal(rng), normal(rng));
    const double len = v.norm();
    if (len < 1e-12 || v.z() == 0.0) continue;
    v /= len;
    v.z() = -std::abs(v.z());
    out.push_back(v);
  }
  return out;
}

ad::Var background_nll(const ad::Var& mu, const ad::Var& kappa, std::mt19937_64& rng) {
  const std::size_t rows = mu.shape().at(0);
  const std::vector<Vec3> labels = sample_camera_hemisphere(rows, rng);
  ad::Tensor t({rows, 3});
  for (std::size_t i = 0; i < rows; ++i) {
    for (int k = 0; k < 3; ++k) t[3 * i + k] = labels[i][k];
  }
  return angmf_nll(ad::detach(mu), kappa, mu.tape()->constant(std::move(t))) * 0.1;
}

double expected_angular_error_exact(double kappa) {
  if (!(kappa >= 0.0)) throw std::invalid_argument("expected_angular_error: kappa must be >= 0");
  if (kappa == 0.0) return 90.0;
  const auto weight = [kappa](double th) { return std::exp(-kappa * th) * std::sin(th); };
  // The weight falls below exp(-60) of its scale beyond 60 / kappa.
  const double upper = std::min(kPi, 60.0 / kappa);
  const double z = panel_integral(weight, upper, 1e-14);
  const double m = panel_integral([&](double th) { return th * weight(th); }, upper, 1e-14);
  return m / z * kDegPerRad;
}

double expected_angular_error(double kappa) {
  if (!(kappa >= 0.0)) throw std::invalid_argument("expected_angular_error: kappa must be >= 0");
  if (kappa >= kMaxKappa) return expected_angular_error_exact(kappa);
  const auto& table = kappa_table();
  const double pos = kappa / kMaxKappa * (kKappaTableSize - 1);
  const std::size_t i = std::min(static_cast<std::size_t>(pos), kKappaTableSize - 2);
  const double f = pos - static_cast<double>(i);
  return table[i] + f * (table[i + 1] - table[i]);
}

double kappa_for_expected_error(double degrees) {
  const auto& table = kappa_table();
  if (degrees >= table.front()) return 0.0;
  if (degrees <= table.back()) return kMaxKappa;
  // Table is decreasing: find the first entry below the target.
  const auto it = std::lower_bound(table.begin(), table.end(), degrees, std::greater<double>());
  const std::size_t i = static_cast<std::size_t>(it - table.begin()) - 1;
  const double f = (table[i] - degrees) / (table[i] - table[i + 1]);
  return kMaxKappa * (static_cast<double>(i) + f) / (kKappaTableSize - 1);
}

Image8 silhouette_from_uncertainty(const ImageD& kappa, double threshold_deg) {
  if (kappa.channels != 1) throw DimensionError("silhouette_from_uncertainty: kappa must have 1 channel");
  Image8 mask(kappa.width, kappa.height, 1, 0);
  for (std::size_t p = 0; p < kappa.data.size(); ++p) {
    if (expected_angular_error(kappa.data[p]) <= threshold_deg) mask.data[p] = 255;
  }
  return mask;
}

ad::Var kp_train_nll(const ad::Var& pred, const ad::Var& sigma, const ad::Tensor& gt, const ad::Tensor& visibility,
                     std::size_t images) {
  const ad::Shape& s = pred.shape();
  if (s.size() != 2 || s[1] != 2 || sigma.shape() != s || gt.shape != s || visibility.shape != ad::Shape{s[0]}) {
    throw DimensionError("kp_train_nll: inconsistent shapes");
  }
  if (images == 0) throw std::invalid_argument("kp_train_nll: no images");
  for (double v : sigma.value().data) {
    if (!(v > 0.0)) throw std::invalid_argument("kp_train_nll: sigma must be positive");
  }
  ad::Tape& tape = *pred.tape();
  ad::Tensor w({s[0], 2});
  for (std::size_t i = 0; i < s[0]; ++i) w[2 * i] = w[2 * i + 1] = visibility[i];
  const ad::Var r = (pred - tape.constant(gt)) / sigma;
  const ad::Var term = ad::square(r) + ad::log(sigma) * 2.0;
  return ad::dot(term, tape.constant(std::move(w))) * (1.0 / static_cast<double>(images));
}

ad::Var visibility_l2(const ad::Var& pred, const ad::Tensor& target) {
  if (pred.shape() != target.shape) throw DimensionError("visibility_l2: shape mismatch");
  return ad::mean(ad::square(pred - pred.tape()->constant(target)));
}

ad::Var kp_fit_loss(std::span<const ad::Var> projections, std::span<const KeypointObservation> observed) {
  if (projections.size() != observed.size() || projections.empty()) {
    throw DimensionError("kp_fit_loss: " + std::to_string(projections.size()) + " projections for " +
                         std::to_string(observed.size()) + " observations");
  }
  const std::size_t k = observed.front().size();
  ad::Var total;
  for (std::size_t v = 0; v < projections.size(); ++v) {
    const KeypointObservation& obs = observed[v];
    if (obs.size() != k || projections[v].shape() != ad::Shape{k, 2}) {
      throw DimensionError("kp_fit_loss: view " + std::to_string(v) + " has mismatched keypoint count");
    }
    ad::Tensor target({k, 2}), weight({k, 2});
    for (std::size_t i = 0; i < k; ++i) {
      for (int c = 0; c < 2; ++c) {
        if (!(obs[i].sigma[c] > 0.0)) throw std::invalid_argument("kp_fit_loss: sigma must be positive");
        target[2 * i + c] = obs[i].position[c];
        weight[2 * i + c] = obs[i].visibility / (obs[i].sigma[c] * obs[i].sigma[c]);
      }
    }
    ad::Tape& tape = *projections[v].tape();
    const ad::Var diff = projections[v] - tape.constant(std::move(target));
    const ad::Var term = ad::dot(ad::square(diff), tape.constant(std::move(weight)));
    total = total.valid() ? total + term : term;
  }
  return total * (1.0 / static_cast<double>(projections.size() * k));
}

ad::Var normal_fit_sum(const ad::Var& rendered, const ad::Tensor& mu, const ad::Tensor& kappa) {
  if (rendered.shape() != mu.shape) throw DimensionError("normal_fit: rendered and mu shapes differ");
  require_kappa(kappa, mu.shape.at(0), "normal_fit");
  ad::Tape& tape = *rendered.tape();
  const ad::Var cosine = ad::row_dot(rendered, tape.constant(mu));
  return ad::dot(ad::arccos(cosine), tape.constant(kappa));
}

ad::Var normal_fit_loss(const ad::Var& rendered, const ad::Tensor& mu, const ad::Tensor& kappa) {
  const std::size_t rows = mu.shape.at(0);
  if (rows == 0) throw std::invalid_argument("normal_fit_loss: no pixels");
  return normal_fit_sum(rendered, mu, kappa) * (1.0 / static_cast<double>(rows));
}

ad::Var silhouette_l2(const ad::Var& soft, const ad::Tensor& target) {
  if (soft.shape() != target.shape) {
    throw DimensionError("silhouette_l2: shapes " + ad::shape_string(soft.shape()) + " and " +
                         ad::shape_string(target.shape) + " differ");
  }
  return ad::mean(ad::square(soft - soft.tape()->constant(target)));
}

}  // namespace footfit
