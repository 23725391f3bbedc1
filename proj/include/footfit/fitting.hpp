#pragma once

// Two-stage multi-view fit: registration from keypoints, then deformation with
// keypoint, silhouette and normal losses. One Adam step per epoch over all views.

#include "footfit/camera.hpp"
#include "footfit/footmodel.hpp"
#include "footfit/losses.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace footfit {

struct LossWeights {
  double kp = 1.0;
  double sil = 1.0;
  double norm = 0.5;
};

/// Order of the free-parameter masks: r, t, s, z_shape, z_pose.
using FreeMask = std::array<bool, 5>;

struct FitConfig {
  double lr = 1e-3;
  int stage1_epochs = 250;
  int stage2_epochs = 1000;
  LossWeights weights;
  int render_width = 120, render_height = 160;
  double sharpness = 40.0;       ///< 1/px
  double threshold_deg = 30.0;   ///< silhouette pseudo-label threshold
  double code_prior = 0.0;       ///< weight of |z_s|^2 + |z_p|^2
  bool uniform_kappa = false;    ///< replace kappa by its foreground mean in the normal loss
  FreeMask stage1_free = {true, true, true, false, false};
  FreeMask stage2_free = {true, true, true, true, true};
  std::uint64_t seed = 0;

  /// Throws ConfigError.
  void validate() const;
};

struct ViewObservation {
  Camera camera;
  NormalObservation normals;
  KeypointObservation keypoints;
};

struct FitEpoch {
  int stage = 1;
  int epoch = 0;  ///< counted from the start of the first stage
  double kp = 0.0, sil = 0.0, norm = 0.0, total = 0.0;
};

struct FitTrace {
  std::vector<FitEpoch> epochs;
  std::vector<FootParams> snapshots;  ///< parameters at each stage boundary, starting with the initial ones
};

struct FitResult {
  FootParams params;
  FitTrace trace;
};

using FitProgress = std::function<void(const FitEpoch&)>;

/// Views sorted by camera-centre y; picks sorted ranks round(i (N - 1) / (m - 1)),
/// rounding halves up. m = 1 gives the lower median. Returns original indices.
std::vector<std::size_t> select_views(std::span<const Camera> cameras, std::size_t m);

/// Bias-corrected Adam with state per named parameter.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  /// Throws NumericalError naming the parameter on a non-finite gradient.
  void step(const std::string& name, std::span<double> param, std::span<const double> grad);
  std::size_t steps(const std::string& name) const;

 private:
  struct State {
    std::vector<double> m, v;
    std::size_t t = 0;
  };
  double lr_, beta1_, beta2_, eps_;
  std::map<std::string, State> state_;
};

/// Rescales observations to the render size by integer block averaging. Throws
/// ConfigError when the sizes are not integer multiples.
ViewObservation resample_view(const ViewObservation& view, int width, int height);

/// Registration from keypoints; codes stay at their initial values.
FitResult fit_stage1(const FootModel& model, const std::vector<ViewObservation>& views, const FitConfig& config,
                     const FootParams& init, const FitProgress& progress = {});
/// All losses; `epoch_offset` numbers the epochs after a previous stage.
FitResult fit_stage2(const FootModel& model, const std::vector<ViewObservation>& views, const FitConfig& config,
                     const FootParams& init, int epoch_offset = 0, const FitProgress& progress = {});
/// Stage 1 from the identity, then stage 2; traces concatenated.
FitResult fit(const FootModel& model, const std::vector<ViewObservation>& views, const FitConfig& config,
              const FitProgress& progress = {});

/// CSV with header epoch,L_kp,L_sil,L_norm,total.
void write_trace_csv(const std::filesystem::path& path, const FitTrace& trace);
void write_params_json(const std::filesystem::path& path, const FootParams& params);
FootParams read_params_json(const std::filesystem::path& path);

}  // namespace footfit
