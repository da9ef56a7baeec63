#pragma once

#include <cstdint>

#include "posebench/geometry.hpp"
#include "posebench/maps.hpp"

namespace posebench {

struct VsdConfig {
    double tau_mm = 20.0;
    double theta = 0.3;

    void validate() const {
        if (!(tau_mm > 0.0)) {
            throw Error("misalignment tolerance tau must be positive");
        }
        if (!(theta > 0.0) || theta > 1.0) {
            throw Error("correctness threshold theta must be in (0, 1]");
        }
    }
};

enum class ErrorKind { VSD, ADD, ADI };

struct PoseError {
    ErrorKind kind;
    double value;  // VSD: fraction in [0,1]; ADD/ADI: millimeters
};

// Tau-independent per-target pixel statistics: the union size and the sorted
// surface-distance differences over the mask intersection. One pass over the
// maps serves any number of tau values, and every consumer derives the error
// through the same division so sweep and single-shot results match bit-exact.
struct VsdStats {
    std::size_t union_count = 0;
    std::vector<double> intersection_abs_diff;  // sorted ascending
};

// Throws EmptyUnion when both masks are empty: such a target must be skipped
// upstream, never scored.
VsdStats vsd_stats(const DistanceMap& est_dist, const DistanceMap& gt_dist,
                   const VisibilityMask& est_mask, const VisibilityMask& gt_mask);

double vsd_error_from_stats(const VsdStats& stats, double tau_mm);

// Average over the mask union of the hard per-pixel cost: 0 where both masks
// are set and the surface distances differ by less than tau, 1 everywhere
// else. No partial credit for near misses.
PoseError e_vsd(const DistanceMap& est_dist, const DistanceMap& gt_dist,
                const VisibilityMask& est_mask, const VisibilityMask& gt_mask, double tau_mm);

// Mean distance between corresponding vertices under the two poses.
PoseError e_add(const Mesh& mesh, const Pose& gt, const Pose& est);

// Mean distance from each gt-posed vertex to the closest est-posed vertex.
// Uses a spatial grid above 2000 vertices, brute force below.
PoseError e_adi(const Mesh& mesh, const Pose& gt, const Pose& est);

// err < theta, strict.
bool correct_vsd(const PoseError& err, double theta);

// err <= 0.1 * diameter, non-strict.
bool correct_ad(const PoseError& err, double diameter_mm);

// Optional preprocessing for ADD/ADI on very coarse meshes: area-weighted
// random points on the surface, deterministic for a fixed seed. Off by
// default; the metrics otherwise use the raw vertex set.
Mesh resample_surface(const Mesh& mesh, std::size_t point_count, std::uint64_t seed = 0);

}  // namespace posebench
