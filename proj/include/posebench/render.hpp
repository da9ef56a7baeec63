#pragma once

#include "posebench/geometry.hpp"
#include "posebench/maps.hpp"

namespace posebench {

// Near plane of the software rasterizer. Triangles straddling it are clipped
// analytically; geometry entirely behind it raises MeshEntirelyBehindCamera.
inline constexpr double kNearPlaneMm = 10.0;

// Software z-buffer rasterization of the mesh under pose, sampled at pixel
// centers (u + 0.5, v + 0.5) with a top-left fill rule so abutting triangles
// neither double-fill nor leave gaps. Depth is perspective-correct (1/z
// interpolated in screen space). Deterministic: identical inputs give
// bit-identical maps.
DepthMap render_depth(const Mesh& mesh, const Pose& pose, const CameraIntrinsics& cam);

// distance(u,v) = depth(u,v) * sqrt(sx^2 + sy^2 + 1) where (sx, sy) are the
// normalized image coordinates of the pixel's sample point (u + 0.5, v + 0.5),
// matching the rasterizer's sampling convention. Validity is preserved.
DistanceMap depth_to_distance(const DepthMap& depth, const CameraIntrinsics& cam);

// All valid pixels of a rendering.
VisibilityMask silhouette(const DepthMap& depth);

}  // namespace posebench
