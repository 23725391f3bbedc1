#pragma once

// Rasterisation of camera-frame normals, silhouettes and keypoints.
//
// Gradients use straight-through visibility: the pixel-to-face assignment and
// the barycentric weights come from the z-buffer and are constants of the
// backward pass. Geometry gradients reach the vertices through the interpolated
// vertex normals, the projected keypoints and the soft silhouette.

#include "footfit/autodiff.hpp"
#include "footfit/camera.hpp"
#include "footfit/geometry.hpp"
#include "footfit/image.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace footfit {

/// Undirected edges with their (one or two) adjacent faces.
struct EdgeTopology {
  std::vector<std::array<int, 2>> edges;
  std::vector<std::array<int, 2>> faces;  ///< second entry is -1 on open boundaries
};

EdgeTopology build_edge_topology(std::span<const Face> faces);

/// Per-pixel z-buffer result.
struct Fragments {
  int width = 0, height = 0;
  std::vector<int> face;                   ///< -1 where uncovered
  std::vector<std::array<double, 3>> bary;  ///< perspective-correct, sum to 1
  std::vector<double> depth;               ///< camera z (m)

  bool covered(std::size_t pixel) const { return face[pixel] >= 0; }
  std::size_t covered_count() const;
  /// Covered pixel indices in row-major order.
  std::vector<std::size_t> covered_pixels() const;
};

/// Nearest front-facing face per pixel centre. Back faces are culled; faces with
/// a vertex at or behind the camera plane are skipped. Depth ties keep the lower face id.
Fragments rasterize(std::span<const Vec3> camera_vertices, std::span<const Face> faces, const Camera& camera);
Fragments rasterize(const Mesh& mesh, const Camera& camera);

/// Camera-frame vertex positions of a world mesh.
std::vector<Vec3> camera_vertices(const Mesh& mesh, const Camera& camera);

// ---- non-differentiable renders -------------------------------------------------

/// 3-channel camera-frame unit normals; zero where uncovered.
ImageD render_normal_map(const Mesh& mesh, const Camera& camera);
ImageD render_normal_map(const Mesh& mesh, const Camera& camera, const Fragments& fragments);
/// Binary mask, 255 on covered pixels.
Image8 render_mask(const Fragments& fragments);
/// World-space z of the visible surface point; 0 where uncovered.
ImageD render_height_map(const Mesh& mesh, const Camera& camera, const Fragments& fragments);

struct ProjectedKeypoint {
  Vec2 position = Vec2::Zero();  ///< normalised: pixel / (width, height)
  bool visible = false;          ///< in front of the camera and inside the image
};

std::vector<ProjectedKeypoint> project_keypoints(const Mesh& mesh, std::span<const int> vertex_ids,
                                                 const Camera& camera);

/// Fraction of covered pixels whose visible surface point lies above the
/// horizontal plane z = cutoff_height. 0 when nothing is covered.
double cutoff_fraction(const Mesh& mesh, double cutoff_height, const Camera& camera);

// ---- differentiable building blocks ----------------------------------------------

/// (V x 3) world positions -> (V x 3) camera-frame positions.
ad::Var to_camera_frame(const ad::Var& world_vertices, const Camera& camera);

/// Area-weighted unit vertex normals of a (V x 3) vertex tensor.
ad::Var vertex_normals(const ad::Var& vertices, std::span<const Face> faces);

/// Barycentric interpolation of (V x 3) vertex normals at the given covered
/// pixels, renormalised. Returns (P x 3).
ad::Var interpolate_normals(const ad::Var& vertex_normals, std::span<const Face> faces, const Fragments& fragments,
                            std::span<const std::size_t> pixels);

/// (N x 3) camera-frame points -> (N x 2) normalised image coordinates.
ad::Var project_normalized(const ad::Var& camera_points, const Camera& camera);

/// Soft silhouette (H x W): sigmoid(sharpness * d), d the signed image-space distance
/// (px, positive inside) from the pixel centre to the nearest contour edge. Pixels
/// that are not on the boundary of the hard mask, or farther than 30 / sharpness px
/// from any contour edge, take the hard mask value.
ad::Var soft_silhouette(const ad::Var& camera_vertices, std::span<const Face> faces, const EdgeTopology& topology,
                        const Camera& camera, const Fragments& fragments, double sharpness);

struct RenderOptions {
  double sharpness = 40.0;  ///< 1/px
  bool normals = true;
  bool silhouette = true;
};

struct RenderedView {
  Fragments fragments;
  std::vector<std::size_t> pixels;  ///< covered pixels, row-major
  ad::Var normals;                  ///< (P x 3) at `pixels`
  ad::Var silhouette;               ///< (H x W)
  ad::Var keypoints;                ///< (K x 2) normalised
  std::vector<bool> keypoint_visible;
};

/// Renders one view of a differentiable (V x 3) world-space mesh.
RenderedView render_view(const ad::Var& world_vertices, std::span<const Face> faces, const EdgeTopology& topology,
                         std::span<const int> keypoint_ids, const Camera& camera, const RenderOptions& options = {});

}  // namespace footfit
