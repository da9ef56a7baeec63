#include "posebench/pose_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_map>

namespace posebench {

VsdStats vsd_stats(const DistanceMap& est_dist, const DistanceMap& gt_dist,
                   const VisibilityMask& est_mask, const VisibilityMask& gt_mask) {
    require_same_size(est_dist, gt_dist, "distance maps differ in size");
    require_same_size(est_dist, est_mask, "estimate mask differs in size");
    require_same_size(est_dist, gt_mask, "gt mask differs in size");
    VsdStats stats;
    for (std::size_t i = 0; i < est_mask.bits.size(); ++i) {
        const bool in_est = est_mask.bits[i] != 0;
        const bool in_gt = gt_mask.bits[i] != 0;
        if (!in_est && !in_gt) {
            continue;
        }
        ++stats.union_count;
        if (in_est && in_gt) {
            stats.intersection_abs_diff.push_back(
                std::abs(est_dist.values[i] - gt_dist.values[i]));
        }
    }
    if (stats.union_count == 0) {
        throw EmptyUnion("both visibility masks are empty");
    }
    std::sort(stats.intersection_abs_diff.begin(), stats.intersection_abs_diff.end());
    return stats;
}

double vsd_error_from_stats(const VsdStats& stats, double tau_mm) {
    if (stats.union_count == 0) {
        throw EmptyUnion("statistics cover no pixels");
    }
    const auto below = static_cast<std::size_t>(
        std::lower_bound(stats.intersection_abs_diff.begin(),
                         stats.intersection_abs_diff.end(), tau_mm) -
        stats.intersection_abs_diff.begin());
    return static_cast<double>(stats.union_count - below) /
           static_cast<double>(stats.union_count);
}

PoseError e_vsd(const DistanceMap& est_dist, const DistanceMap& gt_dist,
                const VisibilityMask& est_mask, const VisibilityMask& gt_mask, double tau_mm) {
    if (!(tau_mm > 0.0)) {
        throw Error("misalignment tolerance tau must be positive");
    }
    const VsdStats stats = vsd_stats(est_dist, gt_dist, est_mask, gt_mask);
    return {ErrorKind::VSD, vsd_error_from_stats(stats, tau_mm)};
}

PoseError e_add(const Mesh& mesh, const Pose& gt, const Pose& est) {
    const auto& verts = mesh.vertices();
    if (verts.empty()) {
        throw TooFewVertices("mesh has no vertices");
    }
    double sum = 0.0;
    for (const auto& x : verts) {
        sum += (transform_point(gt, x) - transform_point(est, x)).norm();
    }
    return {ErrorKind::ADD, sum / static_cast<double>(verts.size())};
}

namespace {

struct CellKey {
    int x, y, z;
    bool operator==(const CellKey&) const = default;
};

struct CellHash {
    std::size_t operator()(const CellKey& k) const {
        std::size_t h = static_cast<std::size_t>(k.x) * 73856093u;
        h ^= static_cast<std::size_t>(k.y) * 19349663u;
        h ^= static_cast<std::size_t>(k.z) * 83492791u;
        return h;
    }
};

// Exact nearest-neighbor distances via a uniform grid: scan cells in growing
// Chebyshev rings around the query and stop once no farther ring can hold a
// closer point (a point in ring r+1 is at least r cell-widths away).
class PointGrid {
public:
    explicit PointGrid(const std::vector<Vec3>& points) : points_(points) {
        Vec3 lo = points.front(), hi = points.front();
        for (const auto& p : points) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        origin_ = lo;
        const double diag = (hi - lo).norm();
        const double n_cbrt = std::cbrt(static_cast<double>(points.size()));
        cell_ = std::max(diag / std::max(n_cbrt, 1.0), 1e-9);
        lo_cell_ = key_of(lo);
        hi_cell_ = key_of(hi);
        for (std::size_t i = 0; i < points.size(); ++i) {
            cells_[key_of(points[i])].push_back(static_cast<std::uint32_t>(i));
        }
    }

    double nearest_distance(const Vec3& q) const {
        // Rings grow around the occupied-box cell nearest the query, so a
        // query far outside the box costs at most one box scan instead of
        // expanding through empty space.
        const CellKey qc = key_of(q);
        const CellKey center{std::clamp(qc.x, lo_cell_.x, hi_cell_.x),
                             std::clamp(qc.y, lo_cell_.y, hi_cell_.y),
                             std::clamp(qc.z, lo_cell_.z, hi_cell_.z)};
        const int skip = std::max({std::abs(qc.x - center.x), std::abs(qc.y - center.y),
                                   std::abs(qc.z - center.z)});
        int limit = 0;
        limit = std::max(limit, std::max(std::abs(center.x - lo_cell_.x),
                                         std::abs(center.x - hi_cell_.x)));
        limit = std::max(limit, std::max(std::abs(center.y - lo_cell_.y),
                                         std::abs(center.y - hi_cell_.y)));
        limit = std::max(limit, std::max(std::abs(center.z - lo_cell_.z),
                                         std::abs(center.z - hi_cell_.z)));
        double best_sq = std::numeric_limits<double>::infinity();
        for (int r = 0; r <= limit; ++r) {
            scan_ring(center, r, q, best_sq);
            // Any unscanned point is at least skip and at least r+1-skip whole
            // cells away from the query's cell, hence this far from q itself.
            const int gap = std::max(std::max(skip, r + 1 - skip) - 1, 0);
            const double safe = static_cast<double>(gap) * cell_;
            if (best_sq <= safe * safe) {
                break;
            }
        }
        return std::sqrt(best_sq);
    }

private:
    CellKey key_of(const Vec3& p) const {
        return {static_cast<int>(std::floor((p.x() - origin_.x()) / cell_)),
                static_cast<int>(std::floor((p.y() - origin_.y()) / cell_)),
                static_cast<int>(std::floor((p.z() - origin_.z()) / cell_))};
    }

    void scan_cell(const CellKey& k, const Vec3& q, double& best_sq) const {
        auto it = cells_.find(k);
        if (it == cells_.end()) {
            return;
        }
        for (std::uint32_t idx : it->second) {
            best_sq = std::min(best_sq, (points_[idx] - q).squaredNorm());
        }
    }

    void scan_ring(const CellKey& c, int r, const Vec3& q, double& best_sq) const {
        if (r == 0) {
            scan_cell(c, q, best_sq);
            return;
        }
        // Shell of the Chebyshev cube: two full x-faces, then y- and z-faces
        // minus the edges already covered.
        for (int dy = -r; dy <= r; ++dy) {
            for (int dz = -r; dz <= r; ++dz) {
                scan_cell({c.x - r, c.y + dy, c.z + dz}, q, best_sq);
                scan_cell({c.x + r, c.y + dy, c.z + dz}, q, best_sq);
            }
        }
        for (int dx = -r + 1; dx <= r - 1; ++dx) {
            for (int dz = -r; dz <= r; ++dz) {
                scan_cell({c.x + dx, c.y - r, c.z + dz}, q, best_sq);
                scan_cell({c.x + dx, c.y + r, c.z + dz}, q, best_sq);
            }
            for (int dy = -r + 1; dy <= r - 1; ++dy) {
                scan_cell({c.x + dx, c.y + dy, c.z - r}, q, best_sq);
                scan_cell({c.x + dx, c.y + dy, c.z + r}, q, best_sq);
            }
        }
    }

    const std::vector<Vec3>& points_;
    Vec3 origin_;
    double cell_ = 1.0;
    CellKey lo_cell_{0, 0, 0};
    CellKey hi_cell_{0, 0, 0};
    std::unordered_map<CellKey, std::vector<std::uint32_t>, CellHash> cells_;
};

}  // namespace

PoseError e_adi(const Mesh& mesh, const Pose& gt, const Pose& est) {
    const auto& verts = mesh.vertices();
    if (verts.empty()) {
        throw TooFewVertices("mesh has no vertices");
    }
    std::vector<Vec3> gt_pts(verts.size());
    std::vector<Vec3> est_pts(verts.size());
    for (std::size_t i = 0; i < verts.size(); ++i) {
        gt_pts[i] = transform_point(gt, verts[i]);
        est_pts[i] = transform_point(est, verts[i]);
    }

    double sum = 0.0;
    if (verts.size() > 2000) {
        const PointGrid grid(est_pts);
        for (const auto& g : gt_pts) {
            sum += grid.nearest_distance(g);
        }
    } else {
        for (const auto& g : gt_pts) {
            double best_sq = std::numeric_limits<double>::infinity();
            for (const auto& e : est_pts) {
                best_sq = std::min(best_sq, (g - e).squaredNorm());
            }
            sum += std::sqrt(best_sq);
        }
    }
    return {ErrorKind::ADI, sum / static_cast<double>(verts.size())};
}

bool correct_vsd(const PoseError& err, double theta) {
    if (err.kind != ErrorKind::VSD) {
        throw KindMismatch("correct_vsd needs a VSD error");
    }
    return err.value < theta;
}

bool correct_ad(const PoseError& err, double diameter_mm) {
    if (err.kind != ErrorKind::ADD && err.kind != ErrorKind::ADI) {
        throw KindMismatch("correct_ad needs an ADD or ADI error");
    }
    if (!(diameter_mm > 0.0)) {
        throw Error("object diameter must be positive");
    }
    return err.value <= 0.1 * diameter_mm;
}

Mesh resample_surface(const Mesh& mesh, std::size_t point_count, std::uint64_t seed) {
    const auto& tris = mesh.triangles();
    const auto& verts = mesh.vertices();
    if (tris.empty()) {
        throw Error("surface resampling needs triangles");
    }
    std::vector<double> cumulative(tris.size());
    double total = 0.0;
    for (std::size_t i = 0; i < tris.size(); ++i) {
        const Vec3& a = verts[tris[i][0]];
        const Vec3& b = verts[tris[i][1]];
        const Vec3& c = verts[tris[i][2]];
        total += 0.5 * (b - a).cross(c - a).norm();
        cumulative[i] = total;
    }
    if (!(total > 0.0)) {
        throw Error("mesh has zero surface area");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Vec3> points(point_count);
    for (auto& p : points) {
        const double pick = unit(rng) * total;
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), pick);
        const std::size_t ti = std::min(static_cast<std::size_t>(it - cumulative.begin()),
                                        tris.size() - 1);
        double r1 = unit(rng), r2 = unit(rng);
        if (r1 + r2 > 1.0) {  // fold back into the triangle
            r1 = 1.0 - r1;
            r2 = 1.0 - r2;
        }
        const Vec3& a = verts[tris[ti][0]];
        const Vec3& b = verts[tris[ti][1]];
        const Vec3& c = verts[tris[ti][2]];
        p = a + r1 * (b - a) + r2 * (c - a);
    }
    return Mesh(std::move(points), {});
}

}  // namespace posebench
