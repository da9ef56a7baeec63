#include "posebench/geometry.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace posebench {

namespace {

double orthonormality_residual(const Mat3& r) {
    return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

}  // namespace

Pose::Pose() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

Pose::Pose(const Mat3& rotation, const Vec3& translation_mm)
    : rotation_(rotation), translation_(translation_mm) {
    if (!rotation_.allFinite() || !translation_.allFinite()) {
        throw InvalidRotation("pose contains non-finite values");
    }
    const double residual = orthonormality_residual(rotation_);
    if (residual <= 1e-6) {
        if (rotation_.determinant() < 0.0) {
            throw InvalidRotation("rotation determinant is negative");
        }
        return;
    }
    if (residual <= 1e-4) {
        // Polar decomposition: nearest orthonormal matrix in Frobenius norm.
        Eigen::JacobiSVD<Mat3> svd(rotation_, Eigen::ComputeFullU | Eigen::ComputeFullV);
        if (rotation_.determinant() < 0.9) {
            throw InvalidRotation("matrix is not close to a proper rotation");
        }
        Mat3 fixed = svd.matrixU() * svd.matrixV().transpose();
        if (orthonormality_residual(fixed) > orthonormality_residual(rotation_)) {
            throw InvalidRotation("re-orthonormalization did not improve the matrix");
        }
        rotation_ = fixed;
        reorthonormalized_ = true;
        return;
    }
    throw InvalidRotation("matrix deviates too far from orthonormal");
}

Pose Pose::inverse() const {
    Pose out;
    out.rotation_ = rotation_.transpose();
    out.translation_ = -(rotation_.transpose() * translation_);
    out.reorthonormalized_ = reorthonormalized_;
    return out;
}

Pose Pose::from_rotation_z(double radians) {
    return Pose(Eigen::AngleAxisd(radians, Vec3::UnitZ()).toRotationMatrix(), Vec3::Zero());
}

Pose Pose::from_rotation_x(double radians) {
    return Pose(Eigen::AngleAxisd(radians, Vec3::UnitX()).toRotationMatrix(), Vec3::Zero());
}

Pose Pose::from_translation(const Vec3& t_mm) {
    return Pose(Mat3::Identity(), t_mm);
}

Pose compose(const Pose& a, const Pose& b) {
    return Pose(a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation());
}

Vec3 transform_point(const Pose& pose, const Vec3& point_mm) {
    return pose.rotation() * point_mm + pose.translation();
}

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) {
        throw Error("camera focal lengths must be positive");
    }
    if (!std::isfinite(cx) || !std::isfinite(cy)) {
        throw Error("camera principal point must be finite");
    }
    if (width < 1 || height < 1) {
        throw Error("camera image size must be at least 1x1");
    }
}

Vec2 project(const CameraIntrinsics& cam, const Vec3& p) {
    if (!(p.z() > 0.0)) {
        throw NonPositiveDepth("cannot project point with z <= 0");
    }
    return {cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy};
}

Vec3 backproject(const CameraIntrinsics& cam, const Vec2& pixel, double z_mm) {
    if (!(z_mm > 0.0)) {
        throw NonPositiveDepth("cannot backproject to z <= 0");
    }
    return {(pixel.x() - cam.cx) / cam.fx * z_mm, (pixel.y() - cam.cy) / cam.fy * z_mm, z_mm};
}

Mesh::Mesh(std::vector<Vec3> vertices, std::vector<std::array<std::uint32_t, 3>> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
    for (const auto& tri : triangles_) {
        for (std::uint32_t idx : tri) {
            if (idx >= vertices_.size()) {
                throw Error("triangle vertex index out of range");
            }
        }
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
            throw Error("degenerate triangle with repeated vertex index");
        }
    }
    for (const auto& v : vertices_) {
        if (!v.allFinite()) {
            throw NonFiniteValue("mesh vertex is not finite");
        }
    }
}

double Mesh::diameter() const {
    if (diameter_ >= 0.0) {
        return diameter_;
    }
    if (vertices_.size() < 2) {
        throw TooFewVertices("mesh diameter needs at least two vertices");
    }
    double best = 0.0;
    for (std::size_t i = 0; i + 1 < vertices_.size(); ++i) {
        for (std::size_t j = i + 1; j < vertices_.size(); ++j) {
            best = std::max(best, (vertices_[i] - vertices_[j]).squaredNorm());
        }
    }
    diameter_ = std::sqrt(best);
    return diameter_;
}

Mesh Mesh::transformed(const Pose& pose) const {
    std::vector<Vec3> verts(vertices_.size());
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
        verts[i] = transform_point(pose, vertices_[i]);
    }
    return Mesh(std::move(verts), triangles_);
}

double mesh_diameter(const Mesh& mesh) {
    return mesh.diameter();
}

}  // namespace posebench
