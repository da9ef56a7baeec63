#pragma once

#include <vector>

#include "posebench/geometry.hpp"

namespace posebench {

// Inclusive ranges in degrees. Azimuth is measured in the XY plane from +X
// toward +Y and wraps at 360; elevation is measured from the XY plane toward
// +Z, so the range spans [-90, 90].
struct ViewRange {
    double lo_deg = 0.0;
    double hi_deg = 0.0;
};

// Samples camera poses on a sphere around the origin. Viewpoints come from a
// subdivided icosahedron restricted to the given azimuth/elevation ranges and
// thinned so that no two kept viewpoints are closer than min_angular_step
// degrees apart; subdivision depth is chosen so the thinned set still covers
// the sphere (nearest-neighbor gaps stay below twice the step). Each returned
// pose maps model coordinates to camera coordinates, camera looking at the
// origin, roll fixed by projecting world Z onto the image plane (world Y near
// the poles). Ordering is deterministic: by (elevation, azimuth).
std::vector<Pose> sample_view_sphere(double radius_mm, ViewRange azimuth,
                                     ViewRange elevation, double min_angular_step_deg);

}  // namespace posebench
