#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "posebench/maps.hpp"

namespace posebench {

// Raw 16-bit single-channel image, the storage format of depth test images.
struct Image16 {
    int width = 0;
    int height = 0;
    std::vector<std::uint16_t> pixels;

    std::size_t index(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
};

Image16 read_png16(const std::filesystem::path& path);
void write_png16(const Image16& image, const std::filesystem::path& path);

// Debug dumps: quantize a map to 16 bits and record the mm-per-unit factor in
// a sidecar text file next to the image.
void dump_depth_png(const DepthMap& map, const std::filesystem::path& path);
void dump_distance_png(const DistanceMap& map, const std::filesystem::path& path);

// Masks round-trip through 1-bit grayscale PNG.
void write_mask_png(const VisibilityMask& mask, const std::filesystem::path& path);
VisibilityMask read_mask_png(const std::filesystem::path& path);

}  // namespace posebench
