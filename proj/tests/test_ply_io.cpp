#include <doctest.h>

#include <fstream>
#include <random>

#include "posebench/errors.hpp"
#include "posebench/fixture.hpp"
#include "posebench/fs_util.hpp"
#include "posebench/ply_io.hpp"
#include "test_util.hpp"

using namespace posebench;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

}  // namespace

TEST_CASE("ascii cube parses with unit conversion") {
    testutil::TempDir dir("ply");
    const auto path = dir.path() / "cube.ply";
    write_text(path,
               "ply\n"
               "format ascii 1.0\n"
               "comment made by hand\n"
               "element vertex 8\n"
               "property float x\n"
               "property float y\n"
               "property float z\n"
               "element face 12\n"
               "property list uchar int vertex_indices\n"
               "end_header\n"
               "-1 -1 -1\n1 -1 -1\n1 1 -1\n-1 1 -1\n"
               "-1 -1 1\n1 -1 1\n1 1 1\n-1 1 1\n"
               "3 0 1 2\n3 0 2 3\n3 4 6 5\n3 4 7 6\n"
               "3 0 4 5\n3 0 5 1\n3 1 5 6\n3 1 6 2\n"
               "3 2 6 7\n3 2 7 3\n3 3 7 4\n3 3 4 0\n");

    const Mesh mm = load_ply(path);
    CHECK(mm.vertices().size() == 8);
    CHECK(mm.triangles().size() == 12);
    CHECK(mm.diameter() == doctest::Approx(2.0 * std::sqrt(3.0)).epsilon(1e-12));

    // Model stored in meters: same file with unit conversion applied.
    const Mesh meters = load_ply(path, 1000.0);
    CHECK(meters.diameter() == doctest::Approx(2000.0 * std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("quad faces fan into triangles, extra properties are skipped") {
    testutil::TempDir dir("ply");
    const auto path = dir.path() / "quad.ply";
    write_text(path,
               "ply\n"
               "format ascii 1.0\n"
               "element vertex 4\n"
               "property double x\n"
               "property double y\n"
               "property double z\n"
               "property uchar red\n"
               "property uchar green\n"
               "property uchar blue\n"
               "element face 1\n"
               "property list uchar int vertex_indices\n"
               "end_header\n"
               "0 0 0 255 0 0\n"
               "10 0 0 0 255 0\n"
               "10 5 0 0 0 255\n"
               "0 5 0 9 9 9\n"
               "4 0 1 2 3\n");
    const Mesh mesh = load_ply(path);
    CHECK(mesh.vertices().size() == 4);
    CHECK(mesh.triangles().size() == 2);
    CHECK(mesh.triangles()[0] == std::array<std::uint32_t, 3>{0, 1, 2});
    CHECK(mesh.triangles()[1] == std::array<std::uint32_t, 3>{0, 2, 3});
}

TEST_CASE("binary round-trip preserves every bit") {
    testutil::TempDir dir("ply");
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> coord(-123.456, 789.01);
    std::vector<Vec3> verts;
    for (int i = 0; i < 64; ++i) {
        verts.emplace_back(coord(rng), coord(rng), coord(rng));
    }
    std::vector<std::array<std::uint32_t, 3>> tris;
    for (std::uint32_t i = 0; i + 2 < 64; i += 3) {
        tris.push_back({i, i + 1, i + 2});
    }
    const Mesh mesh(verts, tris);

    const auto bin_path = dir.path() / "mesh.ply";
    save_ply_binary(mesh, bin_path);
    const Mesh back = load_ply(bin_path);
    REQUIRE(back.vertices().size() == verts.size());
    for (size_t i = 0; i < verts.size(); ++i) {
        CHECK(back.vertices()[i] == verts[i]);
    }
    CHECK(back.triangles() == tris);

    const auto txt_path = dir.path() / "mesh_ascii.ply";
    save_ply_ascii(mesh, txt_path);
    const Mesh back_txt = load_ply(txt_path);
    REQUIRE(back_txt.vertices().size() == verts.size());
    for (size_t i = 0; i < verts.size(); ++i) {
        CHECK(back_txt.vertices()[i] == verts[i]);
    }
}

TEST_CASE("parse failures carry a byte offset") {
    testutil::TempDir dir("ply");

    const auto bad_magic = dir.path() / "bad.ply";
    write_text(bad_magic, "plywood\nformat ascii 1.0\n");
    CHECK_THROWS_AS(load_ply(bad_magic), ParseError);

    const auto missing = dir.path() / "nope.ply";
    CHECK_THROWS_AS(load_ply(missing), MissingFile);

    // Binary file truncated mid-vertex.
    const Mesh tri({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {{0, 1, 2}});
    const auto full = dir.path() / "full.ply";
    save_ply_binary(tri, full);
    std::ifstream in(full, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto cut = dir.path() / "cut.ply";
    write_text(cut, bytes.substr(0, bytes.size() - 10));
    try {
        load_ply(cut);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.byte_offset > 0);
    }

    const auto degenerate = dir.path() / "two.ply";
    write_text(degenerate,
               "ply\nformat ascii 1.0\n"
               "element vertex 3\n"
               "property float x\nproperty float y\nproperty float z\n"
               "element face 1\n"
               "property list uchar int vertex_indices\n"
               "end_header\n"
               "0 0 0\n1 0 0\n0 1 0\n"
               "2 0 1\n");
    CHECK_THROWS_AS(load_ply(degenerate), ParseError);

    const auto out_of_range = dir.path() / "range.ply";
    write_text(out_of_range,
               "ply\nformat ascii 1.0\n"
               "element vertex 3\n"
               "property float x\nproperty float y\nproperty float z\n"
               "element face 1\n"
               "property list uchar int vertex_indices\n"
               "end_header\n"
               "0 0 0\n1 0 0\n0 1 0\n"
               "3 0 1 7\n");
    CHECK_THROWS_AS(load_ply(out_of_range), ParseError);
}

TEST_CASE("unknown elements are skipped row by row") {
    testutil::TempDir dir("ply");
    const auto path = dir.path() / "extra.ply";
    write_text(path,
               "ply\n"
               "format ascii 1.0\n"
               "element vertex 3\n"
               "property float x\nproperty float y\nproperty float z\n"
               "element edge 2\n"
               "property int vertex1\nproperty int vertex2\n"
               "element face 1\n"
               "property list uchar int vertex_indices\n"
               "end_header\n"
               "0 0 0\n4 0 0\n0 3 0\n"
               "0 1\n1 2\n"
               "3 0 1 2\n");
    const Mesh mesh = load_ply(path);
    CHECK(mesh.vertices().size() == 3);
    CHECK(mesh.triangles().size() == 1);
    CHECK(mesh.diameter() == doctest::Approx(5.0).epsilon(1e-12));
}
