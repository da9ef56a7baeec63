#include <doctest.h>

#include <cmath>
#include <random>

#include "posebench/errors.hpp"
#include "posebench/geometry.hpp"
#include "test_util.hpp"

using namespace posebench;

TEST_CASE("transform_point basics") {
    const Pose identity;
    CHECK(transform_point(identity, Vec3(1, 2, 3)).isApprox(Vec3(1, 2, 3)));

    const Pose shift = Pose::from_translation(Vec3(10, 0, 0));
    CHECK(transform_point(shift, Vec3(1, 2, 3)).isApprox(Vec3(11, 2, 3)));

    const Pose quarter = Pose::from_rotation_z(M_PI / 2.0);
    CHECK((transform_point(quarter, Vec3(1, 0, 0)) - Vec3(0, 1, 0)).norm() < 1e-9);
}

TEST_CASE("compose matches sequential application") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 20; ++i) {
        const Pose a = testutil::random_pose(rng);
        const Pose b = testutil::random_pose(rng);
        const Vec3 x(3.0, -7.0, 2.5);
        const Vec3 via_compose = transform_point(compose(a, b), x);
        const Vec3 via_chain = transform_point(a, transform_point(b, x));
        CHECK((via_compose - via_chain).norm() < 1e-6);
    }
}

TEST_CASE("inverse round-trips") {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 20; ++i) {
        const Pose p = testutil::random_pose(rng);
        const Vec3 x(1.0, 2.0, 3.0);
        CHECK((transform_point(compose(p, p.inverse()), x) - x).norm() < 1e-9);
        CHECK((transform_point(p.inverse(), transform_point(p, x)) - x).norm() < 1e-9);
    }
}

TEST_CASE("pose construction validates the rotation") {
    Mat3 r = Mat3::Identity();

    SUBCASE("exact rotation accepted verbatim") {
        const Pose p(r, Vec3::Zero());
        CHECK_FALSE(p.reorthonormalized());
        CHECK(p.rotation() == r);
    }

    SUBCASE("mild drift is re-orthonormalized and flagged") {
        r(0, 1) += 5e-5;
        const Pose p(r, Vec3::Zero());
        CHECK(p.reorthonormalized());
        const Mat3 rr = p.rotation();
        CHECK((rr.transpose() * rr - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(rr.determinant() == doctest::Approx(1.0));
    }

    SUBCASE("heavy drift is rejected") {
        r(0, 1) += 0.02;
        CHECK_THROWS_AS(Pose(r, Vec3::Zero()), InvalidRotation);
    }

    SUBCASE("reflection is rejected even though orthonormal") {
        r(2, 2) = -1.0;
        CHECK_THROWS_AS(Pose(r, Vec3::Zero()), InvalidRotation);
    }
}

TEST_CASE("project hits analytic pixels") {
    CameraIntrinsics cam;
    cam.fx = 500;
    cam.fy = 500;
    cam.cx = 320;
    cam.cy = 240;
    cam.width = 640;
    cam.height = 480;

    CHECK(project(cam, Vec3(0, 0, 1000)).isApprox(Vec2(320, 240)));
    CHECK(project(cam, Vec3(100, 0, 1000)).isApprox(Vec2(370, 240)));
    CHECK_THROWS_AS(project(cam, Vec3(0, 0, -5)), NonPositiveDepth);
    CHECK_THROWS_AS(project(cam, Vec3(0, 0, 0)), NonPositiveDepth);
}

TEST_CASE("project and backproject invert each other") {
    const CameraIntrinsics cam = testutil::small_camera();
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> px(0.0, 64.0);
    std::uniform_real_distribution<double> py(0.0, 48.0);
    std::uniform_real_distribution<double> pz(10.0, 5000.0);
    for (int i = 0; i < 100; ++i) {
        const Vec2 uv(px(rng), py(rng));
        const double z = pz(rng);
        const Vec2 back = project(cam, backproject(cam, uv, z));
        CHECK((back - uv).norm() < 1e-6);
    }
}

TEST_CASE("intrinsics validation") {
    CameraIntrinsics cam = testutil::small_camera();
    CHECK_NOTHROW(cam.validate());
    cam.fx = 0;
    CHECK_THROWS_AS(cam.validate(), Error);
    cam = testutil::small_camera();
    cam.width = 0;
    CHECK_THROWS_AS(cam.validate(), Error);
}

TEST_CASE("mesh diameter on known shapes") {
    // Cube with edge 2 centered at origin; diameter is the space diagonal.
    std::vector<Vec3> verts;
    for (int i = 0; i < 8; ++i) {
        verts.emplace_back(i & 1 ? 1 : -1, i & 2 ? 1 : -1, i & 4 ? 1 : -1);
    }
    const Mesh cube(verts, {{0, 1, 2}, {4, 5, 6}});
    CHECK(cube.diameter() == doctest::Approx(2.0 * std::sqrt(3.0)).epsilon(1e-12));

    const Mesh pair({Vec3(0, 0, 0), Vec3(7, 0, 0), Vec3(1, 0, 0)}, {{0, 1, 2}});
    CHECK(pair.diameter() == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("mesh diameter equals brute-force scan on a random cloud") {
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> coord(-100.0, 100.0);
    std::vector<Vec3> verts;
    for (int i = 0; i < 50; ++i) {
        verts.emplace_back(coord(rng), coord(rng), coord(rng));
    }
    const Mesh mesh(verts, {{0, 1, 2}});

    double best = 0.0;
    for (size_t i = 0; i < verts.size(); ++i) {
        for (size_t j = i + 1; j < verts.size(); ++j) {
            best = std::max(best, (verts[i] - verts[j]).norm());
        }
    }
    CHECK(mesh.diameter() == doctest::Approx(best).epsilon(1e-15));
}

TEST_CASE("mesh diameter is rigid-invariant") {
    std::mt19937_64 rng(15);
    std::uniform_real_distribution<double> coord(-50.0, 50.0);
    std::vector<Vec3> verts;
    for (int i = 0; i < 30; ++i) {
        verts.emplace_back(coord(rng), coord(rng), coord(rng));
    }
    const Mesh mesh(verts, {{0, 1, 2}});
    const double base = mesh.diameter();
    for (int i = 0; i < 5; ++i) {
        const Mesh moved = mesh.transformed(testutil::random_pose(rng));
        CHECK(std::abs(moved.diameter() - base) / base < 1e-6);
    }
}

TEST_CASE("mesh construction rejects bad input") {
    const std::vector<Vec3> tri = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    CHECK_THROWS_AS(Mesh({Vec3(0, 0, 0)}, {}).diameter(), TooFewVertices);
    CHECK_THROWS_AS(Mesh(tri, {{0, 1, 5}}), Error);
    CHECK_THROWS_AS(Mesh(tri, {{0, 1, 1}}), Error);
    std::vector<Vec3> nan_verts = tri;
    nan_verts[1].y() = std::nan("");
    CHECK_THROWS_AS(Mesh(nan_verts, {{0, 1, 2}}), Error);
}
