#include <doctest.h>

#include <cmath>

#include "posebench/errors.hpp"
#include "posebench/view_sphere.hpp"

using namespace posebench;

namespace {

Vec3 camera_center(const Pose& view) {
    return view.inverse().translation();
}

double angle_deg(const Vec3& a, const Vec3& b) {
    const double dot = a.normalized().dot(b.normalized());
    return std::acos(std::clamp(dot, -1.0, 1.0)) * 180.0 / M_PI;
}

}  // namespace

TEST_CASE("coarse sampling still yields multiple views at the right radius") {
    const auto views = sample_view_sphere(500.0, {0.0, 360.0}, {-90.0, 90.0}, 180.0);
    CHECK(views.size() >= 2);
    for (const Pose& v : views) {
        CHECK(std::abs(camera_center(v).norm() - 500.0) < 1e-6);
    }
}

TEST_CASE("degenerate elevation range gives the single top-down view") {
    const auto views = sample_view_sphere(300.0, {0.0, 360.0}, {90.0, 90.0}, 10.0);
    REQUIRE(views.size() == 1);
    const Vec3 c = camera_center(views[0]);
    CHECK((c - Vec3(0, 0, 300)).norm() < 1e-6);
    // Optical axis (camera +Z in world) must pass through the origin.
    const Vec3 axis = views[0].rotation().transpose() * Vec3(0, 0, 1);
    CHECK((axis - (-c.normalized())).norm() < 1e-9);
}

TEST_CASE("ten-degree sphere is well spread") {
    const double step = 10.0;
    const auto views = sample_view_sphere(400.0, {0.0, 360.0}, {-90.0, 90.0}, step);
    REQUIRE(views.size() >= 60);

    std::vector<Vec3> dirs;
    for (const Pose& v : views) {
        const Vec3 c = camera_center(v);
        CHECK(std::abs(c.norm() - 400.0) < 1e-6);
        dirs.push_back(c.normalized());
    }

    // Every view keeps min_angular_step to all others, yet no hole grows past
    // twice the step: each view has a neighbor within 2x.
    double worst_nearest = 0.0;
    for (size_t i = 0; i < dirs.size(); ++i) {
        double nearest = 1e9;
        for (size_t j = 0; j < dirs.size(); ++j) {
            if (i == j) continue;
            const double a = angle_deg(dirs[i], dirs[j]);
            CHECK(a >= step - 1e-9);
            nearest = std::min(nearest, a);
        }
        worst_nearest = std::max(worst_nearest, nearest);
    }
    CHECK(worst_nearest <= 2.0 * step);
}

TEST_CASE("views look at the origin with zero roll against world up") {
    const auto views = sample_view_sphere(250.0, {0.0, 360.0}, {-60.0, 60.0}, 30.0);
    REQUIRE(!views.empty());
    for (const Pose& v : views) {
        // The origin lands on the optical axis at distance == radius.
        const Vec3 origin_cam = transform_point(v, Vec3::Zero());
        CHECK(std::abs(origin_cam.x()) < 1e-9);
        CHECK(std::abs(origin_cam.y()) < 1e-9);
        CHECK(origin_cam.z() == doctest::Approx(250.0));
        // Camera x axis stays horizontal (no roll): orthogonal to world Z.
        const Vec3 x_world = v.rotation().transpose() * Vec3(1, 0, 0);
        CHECK(std::abs(x_world.z()) < 1e-9);
    }
}

TEST_CASE("azimuth and elevation windows restrict the output") {
    const auto views = sample_view_sphere(100.0, {45.0, 135.0}, {10.0, 50.0}, 15.0);
    REQUIRE(!views.empty());
    for (const Pose& v : views) {
        const Vec3 c = camera_center(v);
        const double elev = std::asin(std::clamp(c.normalized().z(), -1.0, 1.0)) * 180.0 / M_PI;
        double azim = std::atan2(c.y(), c.x()) * 180.0 / M_PI;
        if (azim < 0) azim += 360.0;
        CHECK(elev >= 10.0 - 1e-6);
        CHECK(elev <= 50.0 + 1e-6);
        CHECK(azim >= 45.0 - 1e-6);
        CHECK(azim <= 135.0 + 1e-6);
    }
}

TEST_CASE("bad arguments are rejected") {
    CHECK_THROWS_AS(sample_view_sphere(0.0, {0.0, 360.0}, {-90.0, 90.0}, 10.0), Error);
    CHECK_THROWS_AS(sample_view_sphere(100.0, {10.0, 5.0}, {-90.0, 90.0}, 10.0), EmptyRange);
    CHECK_THROWS_AS(sample_view_sphere(100.0, {0.0, 360.0}, {-90.0, 90.0}, 0.0), Error);
}
