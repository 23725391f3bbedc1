#pragma once

#include "footfit/geometry.hpp"

#include <filesystem>

namespace footfit {

/// ASCII OBJ with `v x y z` and `f a b c` records (1-based). Polygon faces with
/// more than three vertices are rejected; `a/b/c`-style index tuples are accepted.
Mesh read_obj(const std::filesystem::path& path);
/// Coordinates are written with 17 significant digits.
void write_obj(const std::filesystem::path& path, const Mesh& mesh);

/// Binary little-endian PLY: vertex x, y, z as float64 and face `list uchar int`
/// vertex_indices.
Mesh read_ply(const std::filesystem::path& path);
void write_ply(const std::filesystem::path& path, const Mesh& mesh);

/// Dispatches on the file extension (.obj / .ply).
Mesh read_mesh(const std::filesystem::path& path);
void write_mesh(const std::filesystem::path& path, const Mesh& mesh);

}  // namespace footfit
