#pragma once

#include <cstdint>
#include <filesystem>

#include "posebench/dataset.hpp"

namespace posebench {

// Axis-aligned box centered at the origin, edge lengths in mm.
Mesh make_box(double dx, double dy, double dz);

// Rectangular plate in the z=0 plane, centered, triangulated as an nx-by-ny
// grid so flips about in-plane axes map the vertex set onto itself.
Mesh make_plate_grid(double size_x, double size_y, int nx, int ny);

// Open cylinder around the Z axis. With facets divisible by the rotation
// step, rotating about Z maps the vertex set onto itself.
Mesh make_tube(double radius, double length, int facets);

// Latitude/longitude sphere, vertices nearly uniform.
Mesh make_uv_sphere(double radius, int rings, int segments);

struct FixtureSummary {
    std::filesystem::path root;
    // Achieved visible fractions of the occlusion images; generation fails
    // if they do not straddle the 10% filter with margin.
    double occlusion_low_fraction = 0.0;
    double occlusion_high_fraction = 0.0;
    std::size_t target_count = 0;
};

// Synthesizes a complete miniature dataset: three object models, a scene with
// two instances of each, two occlusion images bracketing the visibility
// filter, a sensor-dropout scene, a target list, and estimate files (exact
// ground truth and a 200 mm translation offset).
FixtureSummary generate_fixture_dataset(const std::filesystem::path& root,
                                        std::uint64_t seed = 7);

}  // namespace posebench
