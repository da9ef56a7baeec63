#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <cstdint>
#include <vector>

#include "posebench/errors.hpp"

namespace posebench {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;

// Rigid transform from model coordinates to camera coordinates.
// Rotation is validated on construction: inputs within 1e-6 of orthonormal
// (per element of R^T R - I) are accepted as-is, inputs within 1e-4 are
// re-orthonormalized through polar decomposition and flagged, anything
// worse is rejected. Translation is in millimeters.
class Pose {
public:
    Pose();  // identity
    Pose(const Mat3& rotation, const Vec3& translation_mm);

    const Mat3& rotation() const { return rotation_; }
    const Vec3& translation() const { return translation_; }
    bool reorthonormalized() const { return reorthonormalized_; }

    Pose inverse() const;

    static Pose from_rotation_z(double radians);
    static Pose from_rotation_x(double radians);
    static Pose from_translation(const Vec3& t_mm);

private:
    Mat3 rotation_;
    Vec3 translation_;
    bool reorthonormalized_ = false;
};

// (a * b)(x) == a(b(x))
Pose compose(const Pose& a, const Pose& b);

Vec3 transform_point(const Pose& pose, const Vec3& point_mm);

// Pinhole camera. Focal lengths and principal point in pixels, image size
// in pixels. Continuous image coordinates: pixel (u, v) samples the point
// (u + 0.5, v + 0.5).
struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;

    void validate() const;
    bool operator==(const CameraIntrinsics&) const = default;
};

// Projects a camera-space point (mm) to continuous image coordinates.
// Throws NonPositiveDepth when z <= 0.
Vec2 project(const CameraIntrinsics& cam, const Vec3& point_cam_mm);

// Lifts continuous image coordinates at depth z (mm) back to camera space.
Vec3 backproject(const CameraIntrinsics& cam, const Vec2& pixel, double z_mm);

// Triangle mesh in model coordinates (mm). The diameter (largest pairwise
// vertex distance) is computed on demand and cached.
class Mesh {
public:
    Mesh() = default;
    Mesh(std::vector<Vec3> vertices, std::vector<std::array<std::uint32_t, 3>> triangles);

    const std::vector<Vec3>& vertices() const { return vertices_; }
    const std::vector<std::array<std::uint32_t, 3>>& triangles() const { return triangles_; }

    // Largest distance between any pair of vertices, exact O(n^2) scan.
    // Throws TooFewVertices for meshes with fewer than two vertices.
    double diameter() const;

    Mesh transformed(const Pose& pose) const;

private:
    std::vector<Vec3> vertices_;
    std::vector<std::array<std::uint32_t, 3>> triangles_;
    mutable double diameter_ = -1.0;
};

double mesh_diameter(const Mesh& mesh);

}  // namespace posebench
