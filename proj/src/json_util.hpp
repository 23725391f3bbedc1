#pragma once

// JSON conversions shared by scene IO, fit artifacts and the command line.
// Readers update only the keys present, so they merge over defaults; unknown
// keys raise ConfigError.

#include "footfit/error.hpp"
#include "footfit/fitting.hpp"
#include "footfit/synth.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>

namespace footfit::json_util {

using nlohmann::json;

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": bad value for '" + key + "'");
  }
}

inline void read_vec3(const json& j, const char* key, Vec3& out, const std::string& where) {
  if (!j.contains(key)) return;
  std::vector<double> v;
  read(j, key, v, where);
  if (v.size() != 3) throw ConfigError(where + ": '" + key + "' needs 3 values");
  out = Vec3(v[0], v[1], v[2]);
}

inline json vec3(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline json to_json(const FootParams& p) {
  return {{"r", vec3(p.r)}, {"t", vec3(p.t)}, {"s", vec3(p.s)}, {"z_shape", p.z_shape}, {"z_pose", p.z_pose}};
}

inline void from_json(const json& j, FootParams& p, const std::string& where) {
  reject_unknown(j, {"r", "t", "s", "z_shape", "z_pose"}, where);
  read_vec3(j, "r", p.r, where);
  read_vec3(j, "t", p.t, where);
  read_vec3(j, "s", p.s, where);
  read(j, "z_shape", p.z_shape, where);
  read(j, "z_pose", p.z_pose, where);
}

inline json to_json(const ArcSamplerConfig& a) {
  return {{"radius_min", a.radius_min},   {"radius_max", a.radius_max},   {"angle_min", a.angle_min},
          {"angle_max", a.angle_max},     {"lateral_min", a.lateral_min}, {"lateral_max", a.lateral_max},
          {"lateral_axis", "x"},          {"focal_mm", a.focal_mm},       {"sensor_width_mm", a.sensor_width_mm},
          {"width", a.width},             {"height", a.height}};
}

inline void from_json(const json& j, ArcSamplerConfig& a, const std::string& where) {
  reject_unknown(j,
                 {"radius_min", "radius_max", "angle_min", "angle_max", "lateral_min", "lateral_max", "lateral_axis",
                  "focal_mm", "sensor_width_mm", "width", "height"},
                 where);
  read(j, "radius_min", a.radius_min, where);
  read(j, "radius_max", a.radius_max, where);
  read(j, "angle_min", a.angle_min, where);
  read(j, "angle_max", a.angle_max, where);
  read(j, "lateral_min", a.lateral_min, where);
  read(j, "lateral_max", a.lateral_max, where);
  read(j, "focal_mm", a.focal_mm, where);
  read(j, "sensor_width_mm", a.sensor_width_mm, where);
  read(j, "width", a.width, where);
  read(j, "height", a.height, where);
  if (j.contains("lateral_axis") && j.at("lateral_axis") != "x") {
    throw ConfigError(where + ": only lateral_axis \"x\" is supported");
  }
}

inline json to_json(const NoiseModel& n) {
  return {{"sigma_view_deg", n.sigma_view_deg}, {"grazing_gain", n.grazing_gain},
          {"calibration", n.calibration},       {"kp_sigma", n.kp_sigma},
          {"kp_noise", n.kp_noise},             {"corrupted_views", n.corrupted_views},
          {"corruption_deg", n.corruption_deg}};
}

inline void from_json(const json& j, NoiseModel& n, const std::string& where) {
  reject_unknown(j,
                 {"sigma_view_deg", "grazing_gain", "calibration", "kp_sigma", "kp_noise", "corrupted_views",
                  "corruption_deg"},
                 where);
  read(j, "sigma_view_deg", n.sigma_view_deg, where);
  read(j, "grazing_gain", n.grazing_gain, where);
  read(j, "calibration", n.calibration, where);
  read(j, "kp_sigma", n.kp_sigma, where);
  read(j, "kp_noise", n.kp_noise, where);
  read(j, "corrupted_views", n.corrupted_views, where);
  read(j, "corruption_deg", n.corruption_deg, where);
}

inline json to_json(const SceneSpec& s) {
  return {{"gt", to_json(s.gt)},
          {"arc", to_json(s.arc)},
          {"views", s.views},
          {"cutoff_height", s.cutoff_height},
          {"max_cutoff_fraction", s.max_cutoff_fraction},
          {"max_attempts", s.max_attempts},
          {"seed", s.seed},
          {"noise", to_json(s.noise)}};
}

inline void from_json(const json& j, SceneSpec& s, const std::string& where) {
  reject_unknown(j, {"gt", "arc", "views", "cutoff_height", "max_cutoff_fraction", "max_attempts", "seed", "noise"},
                 where);
  if (j.contains("gt")) from_json(j.at("gt"), s.gt, where + ".gt");
  if (j.contains("arc")) from_json(j.at("arc"), s.arc, where + ".arc");
  if (j.contains("noise")) from_json(j.at("noise"), s.noise, where + ".noise");
  read(j, "views", s.views, where);
  read(j, "cutoff_height", s.cutoff_height, where);
  read(j, "max_cutoff_fraction", s.max_cutoff_fraction, where);
  read(j, "max_attempts", s.max_attempts, where);
  read(j, "seed", s.seed, where);
}

inline json to_json(const FitConfig& c) {
  auto mask = [](const FreeMask& m) {
    return json{{"r", m[0]}, {"t", m[1]}, {"s", m[2]}, {"z_shape", m[3]}, {"z_pose", m[4]}};
  };
  return {{"lr", c.lr},
          {"stage1_epochs", c.stage1_epochs},
          {"stage2_epochs", c.stage2_epochs},
          {"weights", {{"kp", c.weights.kp}, {"sil", c.weights.sil}, {"norm", c.weights.norm}}},
          {"render_width", c.render_width},
          {"render_height", c.render_height},
          {"sharpness", c.sharpness},
          {"threshold_deg", c.threshold_deg},
          {"code_prior", c.code_prior},
          {"uniform_kappa", c.uniform_kappa},
          {"stage1_free", mask(c.stage1_free)},
          {"stage2_free", mask(c.stage2_free)},
          {"seed", c.seed}};
}

inline void from_json(const json& j, FreeMask& m, const std::string& where) {
  reject_unknown(j, {"r", "t", "s", "z_shape", "z_pose"}, where);
  read(j, "r", m[0], where);
  read(j, "t", m[1], where);
  read(j, "s", m[2], where);
  read(j, "z_shape", m[3], where);
  read(j, "z_pose", m[4], where);
}

inline void from_json(const json& j, FitConfig& c, const std::string& where) {
  reject_unknown(j,
                 {"lr", "stage1_epochs", "stage2_epochs", "weights", "render_width", "render_height", "sharpness",
                  "threshold_deg", "code_prior", "uniform_kappa", "stage1_free", "stage2_free", "seed"},
                 where);
  read(j, "lr", c.lr, where);
  read(j, "stage1_epochs", c.stage1_epochs, where);
  read(j, "stage2_epochs", c.stage2_epochs, where);
  if (j.contains("weights")) {
    const json& w = j.at("weights");
    reject_unknown(w, {"kp", "sil", "norm"}, where + ".weights");
    read(w, "kp", c.weights.kp, where);
    read(w, "sil", c.weights.sil, where);
    read(w, "norm", c.weights.norm, where);
  }
  read(j, "render_width", c.render_width, where);
  read(j, "render_height", c.render_height, where);
  read(j, "sharpness", c.sharpness, where);
  read(j, "threshold_deg", c.threshold_deg, where);
  read(j, "code_prior", c.code_prior, where);
  read(j, "uniform_kappa", c.uniform_kappa, where);
  if (j.contains("stage1_free")) from_json(j.at("stage1_free"), c.stage1_free, where + ".stage1_free");
  if (j.contains("stage2_free")) from_json(j.at("stage2_free"), c.stage2_free, where + ".stage2_free");
  read(j, "seed", c.seed, where);
}

/// Parses a JSON file; IO problems raise IoError, syntax errors ConfigError
/// (config files) or IoError (data files) depending on `is_config`.
inline json load_file(const std::filesystem::path& path, bool is_config) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    const std::string msg = "malformed JSON in " + path.string() + ": " + e.what();
    if (is_config) throw ConfigError(msg);
    throw IoError(msg);
  }
}

inline void save_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace footfit::json_util
