#include "posebench/view_sphere.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

namespace posebench {

namespace {

constexpr double kPi = 3.14159265358979323846;

double deg2rad(double d) { return d * kPi / 180.0; }
double rad2deg(double r) { return r * 180.0 / kPi; }

double angle_between(const Vec3& a, const Vec3& b) {
    return std::atan2(a.cross(b).norm(), a.dot(b));
}

struct IcoMesh {
    std::vector<Vec3> verts;  // unit length
    std::vector<std::array<std::uint32_t, 3>> tris;
};

// Icosahedron with vertices at the poles: one vertex at each pole plus two
// rings of five at elevation +-atan(1/2). Keeping a vertex exactly on +Z lets
// a degenerate elevation range like [90, 90] select a real sample.
IcoMesh base_icosahedron() {
    IcoMesh m;
    const double ring_elev = std::atan(0.5);
    m.verts.push_back({0.0, 0.0, 1.0});
    for (int i = 0; i < 5; ++i) {
        const double az = deg2rad(72.0 * i);
        m.verts.push_back({std::cos(ring_elev) * std::cos(az),
                           std::cos(ring_elev) * std::sin(az), std::sin(ring_elev)});
    }
    for (int i = 0; i < 5; ++i) {
        const double az = deg2rad(36.0 + 72.0 * i);
        m.verts.push_back({std::cos(ring_elev) * std::cos(az),
                           std::cos(ring_elev) * std::sin(az), -std::sin(ring_elev)});
    }
    m.verts.push_back({0.0, 0.0, -1.0});
    const std::uint32_t top = 0, bot = 11;
    for (std::uint32_t i = 0; i < 5; ++i) {
        const std::uint32_t a = 1 + i, b = 1 + (i + 1) % 5;        // upper ring
        const std::uint32_t c = 6 + i, d = 6 + (i + 1) % 5;        // lower ring
        m.tris.push_back({top, a, b});
        m.tris.push_back({a, c, b});
        m.tris.push_back({b, c, d});
        m.tris.push_back({c, bot, d});
    }
    return m;
}

IcoMesh subdivide(const IcoMesh& in) {
    IcoMesh out;
    out.verts = in.verts;
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoints;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
        const auto key = std::minmax(a, b);
        auto it = midpoints.find(key);
        if (it != midpoints.end()) {
            return it->second;
        }
        Vec3 v = (out.verts[a] + out.verts[b]).normalized();
        const auto idx = static_cast<std::uint32_t>(out.verts.size());
        out.verts.push_back(v);
        midpoints.emplace(key, idx);
        return idx;
    };
    for (const auto& t : in.tris) {
        const std::uint32_t ab = midpoint(t[0], t[1]);
        const std::uint32_t bc = midpoint(t[1], t[2]);
        const std::uint32_t ca = midpoint(t[2], t[0]);
        out.tris.push_back({t[0], ab, ca});
        out.tris.push_back({t[1], bc, ab});
        out.tris.push_back({t[2], ca, bc});
        out.tris.push_back({ab, bc, ca});
    }
    return out;
}

struct Candidate {
    Vec3 dir;
    double elevation_deg;
    double azimuth_deg;
};

Vec3 dir_from_angles(double elevation_deg, double azimuth_deg) {
    const double el = deg2rad(elevation_deg);
    const double az = deg2rad(azimuth_deg);
    return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

Pose pose_looking_at_origin(const Vec3& dir, double radius_mm) {
    const Vec3 center = radius_mm * dir;
    const Vec3 z = -dir;  // optical axis toward the origin
    Vec3 hint = Vec3::UnitZ();
    Vec3 up = hint - hint.dot(z) * z;
    if (up.norm() < 1e-9) {
        hint = Vec3::UnitY();
        up = hint - hint.dot(z) * z;
    }
    up.normalize();
    const Vec3 y = -up;  // image y grows downward
    const Vec3 x = y.cross(z);
    Mat3 rot;
    rot.row(0) = x;
    rot.row(1) = y;
    rot.row(2) = z;
    return Pose(rot, -(rot * center));
}

}  // namespace

std::vector<Pose> sample_view_sphere(double radius_mm, ViewRange azimuth,
                                     ViewRange elevation, double min_angular_step_deg) {
    if (!(radius_mm > 0.0)) {
        throw Error("view sphere radius must be positive");
    }
    if (!(min_angular_step_deg > 0.0)) {
        throw Error("angular step must be positive");
    }
    if (azimuth.lo_deg > azimuth.hi_deg || elevation.lo_deg > elevation.hi_deg) {
        throw EmptyRange("view range is empty");
    }
    if (elevation.hi_deg < -90.0 || elevation.lo_deg > 90.0) {
        throw EmptyRange("elevation range lies outside [-90, 90]");
    }

    // Subdivide until edges are at most half the step so the thinning pass
    // below starts from a sample set denser than the requested spacing.
    IcoMesh mesh = base_icosahedron();
    for (int depth = 0; depth < 7; ++depth) {
        double max_edge = 0.0;
        for (const auto& t : mesh.tris) {
            for (int k = 0; k < 3; ++k) {
                max_edge = std::max(
                    max_edge, angle_between(mesh.verts[t[k]], mesh.verts[t[(k + 1) % 3]]));
            }
        }
        if (rad2deg(max_edge) <= 0.5 * min_angular_step_deg) {
            break;
        }
        mesh = subdivide(mesh);
    }

    const double tol = 1e-9;
    auto in_azimuth = [&](double az) {
        // Candidate azimuths live in [0, 360); accept ranges given modulo 360.
        for (double shift : {-360.0, 0.0, 360.0}) {
            const double a = az + shift;
            if (a >= azimuth.lo_deg - tol && a <= azimuth.hi_deg + tol) {
                return true;
            }
        }
        return false;
    };

    std::vector<Candidate> candidates;
    for (const auto& v : mesh.verts) {
        Candidate c;
        c.dir = v;
        c.elevation_deg = rad2deg(std::asin(std::clamp(v.z(), -1.0, 1.0)));
        c.azimuth_deg = rad2deg(std::atan2(v.y(), v.x()));
        if (c.azimuth_deg < 0.0) {
            c.azimuth_deg += 360.0;
        }
        if (c.elevation_deg < elevation.lo_deg - tol || c.elevation_deg > elevation.hi_deg + tol) {
            continue;
        }
        if (!in_azimuth(c.azimuth_deg)) {
            continue;
        }
        candidates.push_back(c);
    }
    if (candidates.empty()) {
        // Narrow ranges can fall between icosphere vertices; sample the range
        // center so a non-empty range always yields at least one view.
        Candidate c;
        c.elevation_deg = 0.5 * (elevation.lo_deg + elevation.hi_deg);
        c.azimuth_deg = 0.5 * (azimuth.lo_deg + azimuth.hi_deg);
        c.dir = dir_from_angles(c.elevation_deg, c.azimuth_deg);
        candidates.push_back(c);
    }

    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.elevation_deg != b.elevation_deg) {
            return a.elevation_deg < b.elevation_deg;
        }
        return a.azimuth_deg < b.azimuth_deg;
    });

    const double step_rad = deg2rad(min_angular_step_deg) * (1.0 - 1e-12);
    std::vector<Candidate> kept;
    for (const auto& c : candidates) {
        bool ok = true;
        for (const auto& k : kept) {
            if (angle_between(c.dir, k.dir) < step_rad) {
                ok = false;
                break;
            }
        }
        if (ok) {
            kept.push_back(c);
        }
    }

    std::vector<Pose> poses;
    poses.reserve(kept.size());
    for (const auto& c : kept) {
        poses.push_back(pose_looking_at_origin(c.dir, radius_mm));
    }
    return poses;
}

}  // namespace posebench
