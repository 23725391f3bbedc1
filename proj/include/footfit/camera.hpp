#pragma once

// Pinhole camera. The camera frame is right-handed with x to the right, y down
// and z along the optical axis, so surfaces facing the camera have n_z < 0.
// Pixel (i, j) has its centre at (j + 0.5, i + 0.5).

#include "footfit/geometry.hpp"

#include <filesystem>
#include <random>
#include <vector>

namespace footfit {

struct Camera {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  int width = 1, height = 1;
  Mat3 R = Mat3::Identity();  ///< world -> camera rotation
  Vec3 t = Vec3::Zero();      ///< world -> camera translation (m)

  Vec3 to_camera(const Vec3& world) const { return R * world + t; }
  Vec3 to_world(const Vec3& cam) const { return R.transpose() * (cam - t); }
  /// Camera centre in world coordinates.
  Vec3 center() const { return -R.transpose() * t; }
};

/// Throws std::invalid_argument on non-orthonormal R, non-positive focal lengths or empty images.
void validate(const Camera& camera);

/// Pinhole intrinsics for a focal length in mm on a sensor of the given width in mm.
Camera make_intrinsics(double focal_mm, double sensor_width_mm, int width, int height);

struct Projection {
  Vec2 pixel = Vec2::Zero();
  double depth = 0.0;
  bool in_front = false;  ///< depth > 0
};

Projection project(const Camera& camera, const Vec3& world);
/// Inverse of project for a known depth.
Vec3 unproject(const Camera& camera, const Vec2& pixel, double depth);

/// Extrinsics looking from position toward target; `up` maps to image-up (-y).
/// Intrinsics are copied from `intrinsics`.
Camera look_at(const Vec3& position, const Vec3& target, const Vec3& up, const Camera& intrinsics = Camera{});

struct ArcSamplerConfig {
  double radius_min = 0.30, radius_max = 0.40;            ///< m
  double angle_min = -0.4 * kPi, angle_max = 0.4 * kPi;  ///< polar angle from vertical (rad)
  double lateral_min = 0.0, lateral_max = 0.10;          ///< m, along world x
  double focal_mm = 30.0;
  double sensor_width_mm = 36.0;
  int width = 480, height = 640;
};

void validate(const ArcSamplerConfig& config);

/// Camera on a vertical arc in the world y-z plane, displaced along x, looking at the origin.
/// Image-up points toward +x (the toes).
Camera sample_arc(const ArcSamplerConfig& config, std::mt19937_64& rng);

/// Rotates the camera about its own axes (yaw about y, pitch about x, roll about z,
/// composed as Rz(roll) Ry(yaw) Rx(pitch)). The centre and intrinsics are unchanged.
Camera rotate_camera(const Camera& camera, double yaw, double pitch, double roll);

/// cameras.json: array of {fx, fy, cx, cy, width, height, R (9, row-major), t (3)}.
void write_cameras_json(const std::filesystem::path& path, const std::vector<Camera>& cameras);
std::vector<Camera> read_cameras_json(const std::filesystem::path& path);

}  // namespace footfit
