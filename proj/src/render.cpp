#include "posebench/render.hpp"

#include <algorithm>
#include <cmath>

namespace posebench {

namespace {

struct ScreenVert {
    double x;  // continuous pixel coords
    double y;
    double inv_z;
};

double orient2d(const ScreenVert& a, const ScreenVert& b, double px, double py) {
    return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
}

// Boundary pixels belong to the triangle whose top or left edge they sit on.
// With y growing downward and the interior on the positive orient2d side, a
// top edge runs in +x and a left edge runs in -y.
bool edge_top_left(const ScreenVert& a, const ScreenVert& b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    return (dy == 0.0 && dx > 0.0) || dy < 0.0;
}

// Clips a camera-space triangle against z >= near. Returns 0, 3 or 4 points.
int clip_near(const Vec3 in[3], double near_z, Vec3 out[4]) {
    int n = 0;
    for (int i = 0; i < 3; ++i) {
        const Vec3& cur = in[i];
        const Vec3& prev = in[(i + 2) % 3];
        const bool cur_in = cur.z() >= near_z;
        const bool prev_in = prev.z() >= near_z;
        if (cur_in != prev_in) {
            const double t = (near_z - prev.z()) / (cur.z() - prev.z());
            Vec3 p = prev + t * (cur - prev);
            p.z() = near_z;
            out[n++] = p;
        }
        if (cur_in) {
            out[n++] = cur;
        }
    }
    return n;
}

void rasterize(const ScreenVert tri[3], const CameraIntrinsics& cam, DepthMap& buf) {
    ScreenVert v0 = tri[0], v1 = tri[1], v2 = tri[2];
    double area = orient2d(v0, v1, v2.x, v2.y);
    if (area == 0.0) {
        return;
    }
    if (area < 0.0) {
        std::swap(v1, v2);
        area = -area;
    }

    const double min_x = std::min({v0.x, v1.x, v2.x});
    const double max_x = std::max({v0.x, v1.x, v2.x});
    const double min_y = std::min({v0.y, v1.y, v2.y});
    const double max_y = std::max({v0.y, v1.y, v2.y});
    // Sample points are at integer + 0.5; clamp the covered sample range.
    const int u0 = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
    const int u1 = std::min(cam.width - 1, static_cast<int>(std::ceil(max_x - 0.5)));
    const int p0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
    const int p1 = std::min(cam.height - 1, static_cast<int>(std::ceil(max_y - 0.5)));

    const bool tl01 = edge_top_left(v0, v1);
    const bool tl12 = edge_top_left(v1, v2);
    const bool tl20 = edge_top_left(v2, v0);

    for (int v = p0; v <= p1; ++v) {
        const double py = v + 0.5;
        for (int u = u0; u <= u1; ++u) {
            const double px = u + 0.5;
            const double e01 = orient2d(v0, v1, px, py);  // weight of v2
            const double e12 = orient2d(v1, v2, px, py);  // weight of v0
            const double e20 = orient2d(v2, v0, px, py);  // weight of v1
            const bool covered = (e01 > 0.0 || (e01 == 0.0 && tl01)) &&
                                 (e12 > 0.0 || (e12 == 0.0 && tl12)) &&
                                 (e20 > 0.0 || (e20 == 0.0 && tl20));
            if (!covered) {
                continue;
            }
            const double inv_z = (e12 * v0.inv_z + e20 * v1.inv_z + e01 * v2.inv_z) / area;
            if (!(inv_z > 0.0)) {
                continue;
            }
            const double z = 1.0 / inv_z;
            const std::size_t idx = buf.index(u, v);
            if (!buf.valid[idx] || z < buf.values[idx]) {
                buf.values[idx] = z;
                buf.valid[idx] = 1;
            }
        }
    }
}

}  // namespace

DepthMap render_depth(const Mesh& mesh, const Pose& pose, const CameraIntrinsics& cam) {
    cam.validate();
    if (mesh.vertices().empty() || mesh.triangles().empty()) {
        throw Error("cannot render an empty mesh");
    }

    std::vector<Vec3> cam_verts(mesh.vertices().size());
    double max_z = -1e300;
    for (std::size_t i = 0; i < cam_verts.size(); ++i) {
        cam_verts[i] = transform_point(pose, mesh.vertices()[i]);
        max_z = std::max(max_z, cam_verts[i].z());
    }
    if (max_z <= kNearPlaneMm) {
        throw MeshEntirelyBehindCamera("all mesh vertices are behind the near plane");
    }

    DepthMap buf(cam.width, cam.height);
    for (const auto& tri : mesh.triangles()) {
        const Vec3 corners[3] = {cam_verts[tri[0]], cam_verts[tri[1]], cam_verts[tri[2]]};
        Vec3 clipped[4];
        const int n = clip_near(corners, kNearPlaneMm, clipped);
        if (n < 3) {
            continue;
        }
        ScreenVert screen[4];
        for (int i = 0; i < n; ++i) {
            const double z = clipped[i].z();
            screen[i] = {cam.fx * clipped[i].x() / z + cam.cx,
                         cam.fy * clipped[i].y() / z + cam.cy, 1.0 / z};
        }
        for (int i = 2; i < n; ++i) {
            const ScreenVert fan[3] = {screen[0], screen[i - 1], screen[i]};
            rasterize(fan, cam, buf);
        }
    }
    return buf;
}

DistanceMap depth_to_distance(const DepthMap& depth, const CameraIntrinsics& cam) {
    cam.validate();
    if (depth.width != cam.width || depth.height != cam.height) {
        throw DimensionMismatch("depth map size does not match intrinsics");
    }
    DistanceMap out(depth.width, depth.height);
    out.valid = depth.valid;
    for (int v = 0; v < depth.height; ++v) {
        const double sy = (v + 0.5 - cam.cy) / cam.fy;
        for (int u = 0; u < depth.width; ++u) {
            const std::size_t idx = out.index(u, v);
            if (!depth.valid[idx]) {
                continue;
            }
            const double sx = (u + 0.5 - cam.cx) / cam.fx;
            out.values[idx] = depth.values[idx] * std::sqrt(sx * sx + sy * sy + 1.0);
        }
    }
    return out;
}

VisibilityMask silhouette(const DepthMap& depth) {
    VisibilityMask mask(depth.width, depth.height);
    for (std::size_t i = 0; i < depth.valid.size(); ++i) {
        mask.bits[i] = depth.valid[i] ? 1 : 0;
    }
    return mask;
}

}  // namespace posebench
