#pragma once

#include <filesystem>

#include "posebench/geometry.hpp"

namespace posebench {

// Reads an ASCII or binary little-endian PLY mesh. Vertex positions are
// multiplied by unit_to_mm; color, normal and texture attributes as well as
// unknown elements are parsed and discarded. Parse failures carry the byte
// offset of the offending data.
Mesh load_ply(const std::filesystem::path& path, double unit_to_mm = 1.0);

void save_ply_ascii(const Mesh& mesh, const std::filesystem::path& path);
void save_ply_binary(const Mesh& mesh, const std::filesystem::path& path);

}  // namespace posebench
