#include "posebench/visibility.hpp"

namespace posebench {

VisibilityMask visib_mask_gt(const DistanceMap& rendered, const DistanceMap& scene,
                             const VisibilityConfig& cfg) {
    cfg.validate();
    require_same_size(rendered, scene, "rendered and scene distance maps differ in size");
    VisibilityMask mask(rendered.width, rendered.height);
    for (std::size_t i = 0; i < mask.bits.size(); ++i) {
        if (rendered.valid[i] && scene.valid[i] &&
            rendered.values[i] - scene.values[i] <= cfg.delta_mm) {
            mask.bits[i] = 1;
        }
    }
    return mask;
}

VisibilityMask visib_mask_est(const DistanceMap& rendered_est, const DistanceMap& scene,
                              const VisibilityMask& gt_mask, const VisibilityConfig& cfg) {
    cfg.validate();
    require_same_size(rendered_est, scene, "estimate and scene distance maps differ in size");
    require_same_size(rendered_est, gt_mask, "estimate map and gt mask differ in size");
    VisibilityMask mask = visib_mask_gt(rendered_est, scene, cfg);
    for (std::size_t i = 0; i < mask.bits.size(); ++i) {
        if (rendered_est.valid[i] && gt_mask.bits[i]) {
            mask.bits[i] = 1;
        }
    }
    return mask;
}

double visible_fraction(const VisibilityMask& gt_mask, const VisibilityMask& full_silhouette) {
    require_same_size(gt_mask, full_silhouette, "mask and silhouette differ in size");
    const std::size_t denom = full_silhouette.count();
    if (denom == 0) {
        throw EmptySilhouette("full silhouette is empty");
    }
    return static_cast<double>(gt_mask.count()) / static_cast<double>(denom);
}

}  // namespace posebench
