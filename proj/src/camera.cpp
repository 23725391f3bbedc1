#include "footfit/camera.hpp"

#include "footfit/error.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace footfit {

void validate(const Camera& c) {
  if (!(c.fx > 0.0) || !(c.fy > 0.0)) throw std::invalid_argument("camera focal lengths must be positive");
  if (c.width < 1 || c.height < 1) throw std::invalid_argument("camera image size must be at least 1x1");
  if (!((c.R * c.R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9) ||
      !(std::abs(c.R.determinant() - 1.0) < 1e-9)) {
    throw std::invalid_argument("camera rotation is not a proper rotation");
  }
}

Camera make_intrinsics(double focal_mm, double sensor_width_mm, int width, int height) {
  Camera c;
  c.fx = c.fy = focal_mm / sensor_width_mm * width;
  c.cx = 0.5 * width;
  c.cy = 0.5 * height;
  c.width = width;
  c.height = height;
  return c;
}

Projection project(const Camera& camera, const Vec3& world) {
  const Vec3 p = camera.to_camera(world);
  Projection out;
  out.depth = p.z();
  out.in_front = p.z() > 0.0;
  if (p.z() != 0.0) {
    out.pixel = Vec2(camera.fx * p.x() / p.z() + camera.cx, camera.fy * p.y() / p.z() + camera.cy);
  }
  return out;
}

Vec3 unproject(const Camera& camera, const Vec2& pixel, double depth) {
  const Vec3 cam((pixel.x() - camera.cx) / camera.fx * depth, (pixel.y() - camera.cy) / camera.fy * depth, depth);
  return camera.to_world(cam);
}

Camera look_at(const Vec3& position, const Vec3& target, const Vec3& up, const Camera& intrinsics) {
  const Vec3 forward = target - position;
  if (!(forward.norm() > 0.0)) throw std::invalid_argument("look_at: position equals target");
  const Vec3 z = forward.normalized();
  const Vec3 up_perp = up - up.dot(z) * z;
  if (!(up_perp.norm() > 1e-12 * std::max(1.0, up.norm()))) {
    throw std::invalid_argument("look_at: up vector is parallel to the view direction");
  }
  const Vec3 y = -up_perp.normalized();
  const Vec3 x = y.cross(z);
  Camera c = intrinsics;
  c.R.row(0) = x.transpose();
  c.R.row(1) = y.transpose();
  c.R.row(2) = z.transpose();
  c.t = -c.R * position;
  return c;
}

void validate(const ArcSamplerConfig& c) {
  if (!(c.radius_min <= c.radius_max) || !(c.radius_min > 0.0)) throw ConfigError("arc sampler: bad radius range");
  if (!(c.angle_min <= c.angle_max)) throw ConfigError("arc sampler: bad angle range");
  if (!(c.lateral_min <= c.lateral_max)) throw ConfigError("arc sampler: bad lateral range");
  if (!(c.focal_mm > 0.0) || !(c.sensor_width_mm > 0.0)) throw ConfigError("arc sampler: bad focal/sensor size");
  if (c.width < 1 || c.height < 1) throw ConfigError("arc sampler: bad image size");
}

Camera sample_arc(const ArcSamplerConfig& config, std::mt19937_64& rng) {
  validate(config);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double radius = config.radius_min + (config.radius_max - config.radius_min) * uni(rng);
  const double angle = config.angle_min + (config.angle_max - config.angle_min) * uni(rng);
  const double lateral = config.lateral_min + (config.lateral_max - config.lateral_min) * uni(rng);
  const Vec3 position(lateral, radius * std::sin(angle), radius * std::cos(angle));
  const Camera intr = make_intrinsics(config.focal_mm, config.sensor_width_mm, config.width, config.height);
  return look_at(position, Vec3::Zero(), Vec3::UnitX(), intr);
}

Camera rotate_camera(const Camera& camera, double yaw, double pitch, double roll) {
  const Mat3 q = euler_rotation(Vec3(pitch, yaw, roll));
  const Vec3 center = camera.center();
  Camera out = camera;
  out.R = q * camera.R;
  out.t = -out.R * center;
  return out;
}

void write_cameras_json(const std::filesystem::path& path, const std::vector<Camera>& cameras) {
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw IoError("cannot write " + path.string());
  std::fprintf(fp, "[\n");
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    const Camera& c = cameras[i];
    std::fprintf(fp, "  {\"fx\": %.17g, \"fy\": %.17g, \"cx\": %.17g, \"cy\": %.17g, \"width\": %d, \"height\": %d,\n",
                 c.fx, c.fy, c.cx, c.cy, c.width, c.height);
    std::fprintf(fp, "   \"R\": [");
    for (int k = 0; k < 9; ++k) std::fprintf(fp, "%s%.17g", k ? ", " : "", c.R(k / 3, k % 3));
    std::fprintf(fp, "],\n   \"t\": [%.17g, %.17g, %.17g]}%s\n", c.t.x(), c.t.y(), c.t.z(),
                 i + 1 < cameras.size() ? "," : "");
  }
  std::fprintf(fp, "]\n");
  const bool ok = std::ferror(fp) == 0;
  std::fclose(fp);
  if (!ok) throw IoError("error writing " + path.string());
}

std::vector<Camera> read_cameras_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Camera> cameras;
  try {
    const auto doc = nlohmann::json::parse(in);
    for (const auto& j : doc) {
      Camera c;
      c.fx = j.at("fx").get<double>();
      c.fy = j.at("fy").get<double>();
      c.cx = j.at("cx").get<double>();
      c.cy = j.at("cy").get<double>();
      c.width = j.at("width").get<int>();
      c.height = j.at("height").get<int>();
      const auto r = j.at("R").get<std::vector<double>>();
      const auto t = j.at("t").get<std::vector<double>>();
      if (r.size() != 9 || t.size() != 3) throw IoError(path.string() + ": R must have 9 and t 3 entries");
      for (int k = 0; k < 9; ++k) c.R(k / 3, k % 3) = r[k];
      c.t = Vec3(t[0], t[1], t[2]);
      validate(c);
      cameras.push_back(c);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return cameras;
}

}  // namespace footfit
