#pragma once

// Synthetic multi-view label generation from a ground-truth model instance.
//
// Scene directory:
//   scene.json, cameras.json, gt_mesh.obj,
//   view_%03d/{image.ppm, mu.pfm, kappa.pfm, mask.pgm, keypoints.json, normal_gt.pfm, height.pfm}
// Float maps are stored at float32 precision, so in-memory scenes already hold
// float32-representable values and survive a write/read unchanged.

#include "footfit/camera.hpp"
#include "footfit/fitting.hpp"
#include "footfit/footmodel.hpp"
#include "footfit/image.hpp"
#include "footfit/losses.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

namespace footfit {

struct NoiseModel {
  double sigma_view_deg = 5.0;   ///< angular noise scale of mean directions
  double grazing_gain = 1.0;     ///< sigma grows by (1 + gain (1 - |n_z|)) toward silhouettes
  double calibration = 0.7978845608028654;  ///< expected error = calibration x sigma (folded-normal mean)
  double kp_sigma = 0.01;        ///< keypoint sigma, normalised units; x3 when self-occluded
  double kp_noise = 0.0;         ///< keypoint position noise, normalised units
  std::vector<int> corrupted_views;  ///< views whose mean directions carry a systematic rotation
  double corruption_deg = 25.0;

  void validate() const;
};

struct SceneSpec {
  FootParams gt;
  ArcSamplerConfig arc = default_arc();
  int views = 8;
  double cutoff_height = 0.20;      ///< m above the floor z = 0
  double max_cutoff_fraction = 0.20;
  int max_attempts = 100;
  std::uint64_t seed = 0;
  NoiseModel noise;

  static ArcSamplerConfig default_arc() {
    ArcSamplerConfig a;
    a.width = 120;
    a.height = 160;
    return a;
  }
  /// Throws ConfigError.
  void validate() const;
};

/// Half-widths of the uniform ground-truth registration ranges.
struct GtRanges {
  double yaw_deg = 20.0;      ///< about z
  double tilt_deg = 3.0;      ///< about x and y
  double translation = 0.02;  ///< m, in x and y; z stays 0
  double scale = 0.10;        ///< per axis, around 1
};

/// Registration uniform within `ranges` and codes ~ N(0, code_std^2), from a seeded stream.
FootParams random_gt_params(const FootModel& model, std::uint64_t seed, double code_std = 0.5,
                            const GtRanges& ranges = {});

struct ViewLabels {
  Camera camera;
  ImageD normal_gt;  ///< 3 channels, zero where uncovered
  ImageD height;     ///< world z of the visible surface, zero where uncovered
  ImageD mu;         ///< 3 channels
  ImageD kappa;      ///< 1 channel
  Image8 mask;       ///< hard coverage
  KeypointObservation keypoints;
  Image8 image;      ///< RGB
  double cutoff_fraction = 0.0;
};

struct Scene {
  SceneSpec spec;
  Mesh gt_mesh;
  std::vector<ViewLabels> views;
};

/// Perturbed mean directions and calibrated concentrations for a GT normal map.
/// A non-zero `systematic_deg` adds a fixed rotation about the camera x axis and
/// calibrates kappa to at least that angle.
NormalObservation synthesize_kappa(const ImageD& normal_gt, const NoiseModel& noise, std::mt19937_64& rng,
                                   double systematic_deg = 0.0);

/// Lambert shading with one directional light; background is flat grey.
Image8 shade_lambert(const ImageD& normals, const Camera& camera);

/// All labels of one view rendered from the GT mesh.
ViewLabels render_labels(const Mesh& gt_mesh, std::span<const int> keypoint_ids, const Camera& camera,
                         const NoiseModel& noise, std::mt19937_64& rng, double cutoff_height = 0.20,
                         double systematic_deg = 0.0);

/// Samples cameras with cutoff rejection and renders every view. Views use
/// independent streams seeded with seed ^ view index. Throws ConfigError when a
/// view exceeds max_attempts rejections.
Scene generate_scene(const SceneSpec& spec, const FootModel& model);

std::vector<ViewObservation> scene_observations(const Scene& scene);

void write_scene(const std::filesystem::path& dir, const Scene& scene);
/// Throws IoError naming the view for missing or malformed files.
Scene read_scene(const std::filesystem::path& dir);

// ---- augmentation ----------------------------------------------------------------------

/// Bilinear resize to (width, height) with pixel-centre alignment.
Image8 resize_bilinear(const Image8& image, int width, int height);
/// Downsample by ratio r, then back to the original size.
Image8 downsample_upsample(const Image8& image, double ratio);
/// Mirrors images and maps, negates normal x, maps keypoint x -> 1 - x and swaps
/// left/right keypoint identities. An involution.
ViewLabels flip_horizontal(const ViewLabels& view);
/// 7x7 Gaussian blur with clamped borders.
Image8 gaussian_blur(const Image8& image, double sigma);
Image8 add_gaussian_noise(const Image8& image, double sigma, std::mt19937_64& rng);
/// Brightness, contrast, saturation factors in [1 - a, 1 + a]; hue shift in [-h, h] turns.
Image8 color_jitter(const Image8& image, double brightness, double contrast, double saturation, double hue,
                    std::mt19937_64& rng);
Image8 to_grayscale(const Image8& image);

struct AugmentContext {
  const Mesh* gt_mesh = nullptr;  ///< needed for the perspective re-render
  std::vector<int> keypoint_ids;
  NoiseModel noise;
  double cutoff_height = 0.20;
};

struct AugmentOptions {
  double p_downsample = 0.5, p_flip = 0.5, p_blur = 0.5, p_noise = 0.5, p_jitter = 1.0, p_grayscale = 0.02,
         p_perspective = 1.0;
};

/// Perspective (camera rotation and label re-render), flip, then photometric ops, each with its probability.
ViewLabels augment(const ViewLabels& view, const AugmentContext& context, const AugmentOptions& options,
                   std::mt19937_64& rng);

}  // namespace footfit
