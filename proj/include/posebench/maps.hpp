#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "posebench/errors.hpp"

namespace posebench {

// Per-pixel Z coordinate in millimeters. Invalid pixels carry value 0 and
// must be excluded from all statistics.
struct DepthMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;
    std::vector<std::uint8_t> valid;

    DepthMap() = default;
    DepthMap(int w, int h)
        : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0),
          valid(static_cast<std::size_t>(w) * h, 0) {}

    std::size_t index(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
    double at(int u, int v) const { return values[index(u, v)]; }
    bool is_valid(int u, int v) const { return valid[index(u, v)] != 0; }
    void set(int u, int v, double value) {
        values[index(u, v)] = value;
        valid[index(u, v)] = 1;
    }
};

// Per-pixel Euclidean distance from the camera center in millimeters.
// Distinct from DepthMap on purpose: mixing them up is a silent unit bug.
struct DistanceMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;
    std::vector<std::uint8_t> valid;

    DistanceMap() = default;
    DistanceMap(int w, int h)
        : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0),
          valid(static_cast<std::size_t>(w) * h, 0) {}

    std::size_t index(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
    double at(int u, int v) const { return values[index(u, v)]; }
    bool is_valid(int u, int v) const { return valid[index(u, v)] != 0; }
    void set(int u, int v, double value) {
        values[index(u, v)] = value;
        valid[index(u, v)] = 1;
    }
};

struct VisibilityMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    VisibilityMask() = default;
    VisibilityMask(int w, int h)
        : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

    std::size_t index(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
    bool test(int u, int v) const { return bits[index(u, v)] != 0; }
    void set(int u, int v, bool on = true) { bits[index(u, v)] = on ? 1 : 0; }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto b : bits) {
            n += b != 0;
        }
        return n;
    }
};

template <typename A, typename B>
void require_same_size(const A& a, const B& b, const char* what) {
    if (a.width != b.width || a.height != b.height) {
        throw DimensionMismatch(what);
    }
}

}  // namespace posebench
