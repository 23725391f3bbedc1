#pragma once

// Normal, keypoint and silhouette objectives, and the concentration -> expected
// angular error map used to threshold uncertainty.
//
// The angular distribution over unit vectors has density proportional to
// exp(-kappa * theta), theta being the angle to the mean direction.

#include "footfit/autodiff.hpp"
#include "footfit/geometry.hpp"
#include "footfit/image.hpp"

#include <random>
#include <span>
#include <vector>

namespace footfit {

/// Per-pixel mean direction (3 channels, camera frame) and concentration (1 channel).
struct NormalObservation {
  ImageD mu;
  ImageD kappa;
};

struct KeypointLabel {
  Vec2 position = Vec2::Zero();          ///< normalised image coordinates
  Vec2 sigma = Vec2::Constant(0.01);     ///< normalised standard deviation
  double visibility = 1.0;               ///< in [0, 1]
};
using KeypointObservation = std::vector<KeypointLabel>;

inline constexpr double kMaxKappa = 100.0;
inline constexpr std::size_t kKappaTableSize = 4096;

/// Mean over rows of kappa * arccos(mu . n) + log((1 + exp(-kappa pi)) / (kappa^2 + 1)).
/// mu, n: (P x 3) unit rows; kappa: (P). Throws std::invalid_argument for rows whose
/// norm differs from 1 by more than 1e-6 or negative kappa.
ad::Var angmf_nll(const ad::Var& mu, const ad::Var& kappa, const ad::Var& n_gt);

/// Uniform unit vectors on the camera-facing hemisphere (n_z < 0).
std::vector<Vec3> sample_camera_hemisphere(std::size_t n, std::mt19937_64& rng);

/// 0.1 x the normal NLL of background pixels against hemisphere pseudo-labels,
/// with mu detached.
ad::Var background_nll(const ad::Var& mu, const ad::Var& kappa, std::mt19937_64& rng);

/// Expected angle (degrees) by adaptive quadrature.
double expected_angular_error_exact(double kappa);
/// Expected angle (degrees) from the cached table for kappa in [0, 100]; exact beyond.
double expected_angular_error(double kappa);
/// Inverse of expected_angular_error on [0, 100]; clamps to the table range.
double kappa_for_expected_error(double degrees);

/// 255 where expected_angular_error(kappa) <= threshold_deg.
Image8 silhouette_from_uncertainty(const ImageD& kappa, double threshold_deg = 30.0);

/// Keypoint training NLL: (1/images) sum_k v_k (|(k - k_gt) / sigma|^2 + log(sx^2 sy^2)).
/// pred, sigma, gt: (M x 2) with M = images x keypoints; visibility: (M).
ad::Var kp_train_nll(const ad::Var& pred, const ad::Var& sigma, const ad::Tensor& gt, const ad::Tensor& visibility,
                     std::size_t images);
/// Mean squared error of predicted visibilities.
ad::Var visibility_l2(const ad::Var& pred, const ad::Tensor& target);

/// (1/(N K)) sum over views and keypoints of v |(k - k_obs) / sigma|^2.
/// projections: N tensors of shape (K x 2).
ad::Var kp_fit_loss(std::span<const ad::Var> projections, std::span<const KeypointObservation> observed);

/// Sum over rows of kappa * arccos(mu . n). n: (P x 3) rendered normals.
ad::Var normal_fit_sum(const ad::Var& rendered, const ad::Tensor& mu, const ad::Tensor& kappa);
/// normal_fit_sum / P.
ad::Var normal_fit_loss(const ad::Var& rendered, const ad::Tensor& mu, const ad::Tensor& kappa);

/// Mean squared difference between a soft silhouette and a target of the same shape.
ad::Var silhouette_l2(const ad::Var& soft, const ad::Tensor& target);

}  // namespace footfit
