#pragma once

#include "posebench/maps.hpp"

namespace posebench {

struct VisibilityConfig {
    double delta_mm = 15.0;  // occlusion tolerance

    void validate() const {
        if (!(delta_mm >= 0.0)) {
            throw Error("occlusion tolerance must be non-negative");
        }
    }
};

// Pixels where the ground-truth rendering is visible in the scene: rendered
// and scene both valid, and rendered(p) - scene(p) <= delta. The test is
// one-sided: a model surface in front of the measured one is always visible,
// however large the gap. Missing scene depth means the pixel cannot attest
// the model's presence, so it is not visible.
VisibilityMask visib_mask_gt(const DistanceMap& rendered, const DistanceMap& scene,
                             const VisibilityConfig& cfg);

// Same rule for the estimate's rendering, extended by a union clause: pixels
// where the estimate rendering is valid and the ground truth itself is
// visible count as visible too, so an estimate is never penalized for
// occupying pixels the object actually shows through.
VisibilityMask visib_mask_est(const DistanceMap& rendered_est, const DistanceMap& scene,
                              const VisibilityMask& gt_mask, const VisibilityConfig& cfg);

// |gt_mask| / |full_silhouette|.
double visible_fraction(const VisibilityMask& gt_mask, const VisibilityMask& full_silhouette);

}  // namespace posebench
