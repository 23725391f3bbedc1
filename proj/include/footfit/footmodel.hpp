#pragma once

// Deformable foot template: v_i = diag(s) R(r) (x_i + F(x_i, z_s, z_p)) + t.
//
// World frame of the template: x toward the toes, y toward the big-toe side,
// z up, sole on z = 0. The template is a right foot.

#include "footfit/autodiff.hpp"
#include "footfit/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace footfit {

inline constexpr int kNumKeypoints = 12;

/// Keypoint order: 5 toe tips (big to little), inner and outer width, heel back,
/// heel floor contact, then three arch points (rear end, apex, front end).
const std::vector<std::string>& keypoint_names();
/// Keypoint index after a horizontal image flip (the opposite foot).
int flipped_keypoint(int k);

enum class Activation : std::uint32_t { kLinear = 0, kTanh = 1 };

struct DenseLayer {
  int in = 0, out = 0;
  Activation activation = Activation::kLinear;
  std::vector<double> weight;  ///< in x out, row-major (y = x W + b)
  std::vector<double> bias;    ///< out
};

/// MLP over concat(x, z_s, z_p).
struct DeformationField {
  int shape_dim = 8, pose_dim = 8;
  std::vector<DenseLayer> layers;

  int input_dim() const { return 3 + shape_dim + pose_dim; }
  /// Throws std::invalid_argument on inconsistent layer shapes or non-finite weights.
  void validate() const;
  /// Plain evaluation for a set of points.
  std::vector<Vec3> evaluate(std::span<const Vec3> points, std::span<const double> z_shape,
                             std::span<const double> z_pose) const;
};

struct FootModel {
  Mesh template_mesh;
  std::vector<int> keypoint_ids;            ///< kNumKeypoints vertex ids
  DeformationField field;
  std::vector<std::vector<Vec3>> blendshapes;  ///< optional linear basis, one field per entry

  /// Throws std::invalid_argument on invalid ids, a non-watertight template or a bad field.
  void validate() const;
};

struct FootParams {
  Vec3 r = Vec3::Zero();  ///< Euler angles (rad), R = Rz Ry Rx
  Vec3 t = Vec3::Zero();  ///< m
  Vec3 s = Vec3::Ones();
  std::vector<double> z_shape;
  std::vector<double> z_pose;

  static FootParams identity(const FootModel& model);
};

/// Differentiable view of FootParams on a tape.
struct ParamVars {
  ad::Var r, t, s, z_shape, z_pose;
};

/// Leaves for every parameter group; `free` selects which of r, t, s, z_shape, z_pose need gradients.
ParamVars make_param_vars(ad::Tape& tape, const FootParams& params, const std::array<bool, 5>& free = {true, true, true, true, true});

/// 3x3 rotation matrix Rz Ry Rx from a length-3 Euler angle tensor.
ad::Var euler_rotation(const ad::Var& r);

/// Registration only: rows diag(s) R(r) x + t for an (N x 3) tensor.
ad::Var register_points(const ad::Var& points, const ad::Var& r, const ad::Var& t, const ad::Var& s);

/// Deformed, registered (V x 3) vertex tensor. Throws std::invalid_argument on a non-positive scale.
ad::Var forward(const FootModel& model, const ParamVars& params);
/// Deformation only (identity registration): x + F(x, z_s, z_p).
ad::Var deform(const FootModel& model, const ad::Var& z_shape, const ad::Var& z_pose);

/// Mesh of the model at fixed parameters.
Mesh forward_mesh(const FootModel& model, const FootParams& params);

/// x_i + sum_k c_k B_k(i), then the registration of `params` (its codes are ignored).
Mesh blendshape_forward(const FootModel& model, std::span<const double> coeffs, const FootParams& params);

/// Procedural right-foot template with keypoints.
struct TemplateAsset {
  Mesh mesh;
  std::vector<int> keypoint_ids;
};
TemplateAsset make_template_foot(int subdivision = 4);

struct ModelOptions {
  int shape_dim = 8, pose_dim = 8;
  int hidden = 64;
  int hidden_layers = 3;
  double displacement_rms = 0.008;  ///< m, code-dependent displacement at unit-variance codes
  int blendshapes = 8;
  std::uint64_t seed = 1;
};
/// Template plus a seeded random deformation field scaled to the requested displacement level.
FootModel make_default_model(const ModelOptions& options = {});

inline constexpr std::uint32_t kModelVersion = 1;

/// Binary model file: "FMDL", version, template, keypoints, field, blendshapes.
void save_model(const std::filesystem::path& path, const FootModel& model);
/// Throws IoError on a bad magic, version or truncated file. When the expected
/// code dimensions are positive and differ from the file, throws DimensionError.
FootModel load_model(const std::filesystem::path& path, int expected_shape_dim = -1, int expected_pose_dim = -1);

}  // namespace footfit
