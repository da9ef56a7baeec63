#include "posebench/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "posebench/fs_util.hpp"
#include "posebench/ply_io.hpp"
#include "posebench/png_io.hpp"
#include "posebench/render.hpp"
#include "posebench/visibility.hpp"

namespace posebench {

Mesh make_box(double dx, double dy, double dz) {
    const double x = dx / 2, y = dy / 2, z = dz / 2;
    std::vector<Vec3> verts = {
        {-x, -y, -z}, {x, -y, -z}, {x, y, -z}, {-x, y, -z},
        {-x, -y, z},  {x, -y, z},  {x, y, z},  {-x, y, z},
    };
    std::vector<std::array<std::uint32_t, 3>> tris = {
        {0, 2, 1}, {0, 3, 2},  // z-
        {4, 5, 6}, {4, 6, 7},  // z+
        {0, 1, 5}, {0, 5, 4},  // y-
        {3, 6, 2}, {3, 7, 6},  // y+
        {0, 4, 7}, {0, 7, 3},  // x-
        {1, 2, 6}, {1, 6, 5},  // x+
    };
    return Mesh(std::move(verts), std::move(tris));
}

Mesh make_plate_grid(double size_x, double size_y, int nx, int ny) {
    if (nx < 1 || ny < 1) {
        throw Error("plate grid needs at least one cell per axis");
    }
    std::vector<Vec3> verts;
    verts.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            verts.push_back({size_x * (static_cast<double>(i) / nx - 0.5),
                             size_y * (static_cast<double>(j) / ny - 0.5), 0.0});
        }
    }
    std::vector<std::array<std::uint32_t, 3>> tris;
    auto vid = [&](int i, int j) { return static_cast<std::uint32_t>(j * (nx + 1) + i); };
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            tris.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
            tris.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
        }
    }
    return Mesh(std::move(verts), std::move(tris));
}

Mesh make_tube(double radius, double length, int facets) {
    if (facets < 3) {
        throw Error("tube needs at least 3 facets");
    }
    std::vector<Vec3> verts;
    verts.reserve(2 * static_cast<std::size_t>(facets));
    const double half = length / 2;
    for (int ring = 0; ring < 2; ++ring) {
        const double z = ring == 0 ? -half : half;
        for (int i = 0; i < facets; ++i) {
            const double a = 2.0 * 3.14159265358979323846 * i / facets;
            verts.push_back({radius * std::cos(a), radius * std::sin(a), z});
        }
    }
    std::vector<std::array<std::uint32_t, 3>> tris;
    for (int i = 0; i < facets; ++i) {
        const auto a0 = static_cast<std::uint32_t>(i);
        const auto a1 = static_cast<std::uint32_t>((i + 1) % facets);
        const auto b0 = static_cast<std::uint32_t>(facets + i);
        const auto b1 = static_cast<std::uint32_t>(facets + (i + 1) % facets);
        tris.push_back({a0, a1, b1});
        tris.push_back({a0, b1, b0});
    }
    return Mesh(std::move(verts), std::move(tris));
}

Mesh make_uv_sphere(double radius, int rings, int segments) {
    if (rings < 2 || segments < 3) {
        throw Error("sphere needs at least 2 rings and 3 segments");
    }
    std::vector<Vec3> verts;
    verts.push_back({0, 0, radius});
    for (int r = 1; r < rings; ++r) {
        const double polar = 3.14159265358979323846 * r / rings;
        for (int s = 0; s < segments; ++s) {
            const double az = 2.0 * 3.14159265358979323846 * s / segments;
            verts.push_back({radius * std::sin(polar) * std::cos(az),
                             radius * std::sin(polar) * std::sin(az),
                             radius * std::cos(polar)});
        }
    }
    verts.push_back({0, 0, -radius});
    const auto top = 0u;
    const auto bottom = static_cast<std::uint32_t>(verts.size() - 1);
    auto vid = [&](int r, int s) {
        return static_cast<std::uint32_t>(1 + (r - 1) * segments + (s % segments));
    };
    std::vector<std::array<std::uint32_t, 3>> tris;
    for (int s = 0; s < segments; ++s) {
        tris.push_back({top, vid(1, s), vid(1, s + 1)});
        tris.push_back({bottom, vid(rings - 1, s + 1), vid(rings - 1, s)});
    }
    for (int r = 1; r + 1 < rings; ++r) {
        for (int s = 0; s < segments; ++s) {
            tris.push_back({vid(r, s), vid(r + 1, s), vid(r + 1, s + 1)});
            tris.push_back({vid(r, s), vid(r + 1, s + 1), vid(r, s + 1)});
        }
    }
    return Mesh(std::move(verts), std::move(tris));
}

namespace {

using nlohmann::json;

void merge_min(DepthMap& into, const DepthMap& from) {
    for (std::size_t i = 0; i < into.values.size(); ++i) {
        if (from.valid[i] && (!into.valid[i] || from.values[i] < into.values[i])) {
            into.values[i] = from.values[i];
            into.valid[i] = 1;
        }
    }
}

Image16 quantize_depth(const DepthMap& depth, double depth_scale) {
    Image16 img;
    img.width = depth.width;
    img.height = depth.height;
    img.pixels.assign(depth.values.size(), 0);
    for (std::size_t i = 0; i < depth.values.size(); ++i) {
        if (!depth.valid[i]) {
            continue;
        }
        const double q = std::round(depth.values[i] / depth_scale);
        img.pixels[i] = static_cast<std::uint16_t>(std::clamp(q, 1.0, 65535.0));
    }
    return img;
}

json camera_json(const CameraIntrinsics& cam, double depth_scale) {
    return {{"fx", cam.fx},     {"fy", cam.fy},         {"cx", cam.cx},
            {"cy", cam.cy},     {"width", cam.width},   {"height", cam.height},
            {"depth_scale", depth_scale}};
}

json instance_json(int obj_id, const Pose& pose) {
    const Mat3& R = pose.rotation();
    const Vec3& t = pose.translation();
    return {{"obj_id", obj_id},
            {"R", {R(0, 0), R(0, 1), R(0, 2), R(1, 0), R(1, 1), R(1, 2), R(2, 0), R(2, 1),
                   R(2, 2)}},
            {"t", {t.x(), t.y(), t.z()}}};
}

struct SceneWriter {
    std::filesystem::path dir;
    double depth_scale;
    json cameras = json::object();
    json gts = json::object();

    void add_image(int im_id, const CameraIntrinsics& cam, const DepthMap& depth,
                   const std::vector<GtInstance>& instances) {
        const std::string key = std::to_string(im_id);
        cameras[key] = camera_json(cam, depth_scale);
        gts[key] = json::array();
        for (const auto& g : instances) {
            gts[key].push_back(instance_json(g.obj_id, g.pose));
        }
        std::filesystem::create_directories(dir / "depth");
        write_png16(quantize_depth(depth, depth_scale), dir / "depth" / (zero_pad(im_id, 6) + ".png"));
    }

    void finish() const {
        atomic_write_file(dir / "scene_camera.json", cameras.dump(2) + "\n");
        atomic_write_file(dir / "scene_gt.json", gts.dump(2) + "\n");
    }
};

// Column index such that keeping pixels right of it leaves roughly the wanted
// fraction of the silhouette visible.
int occluder_edge_column(const VisibilityMask& sil, double want_visible) {
    std::vector<std::size_t> column_px(sil.width, 0);
    std::size_t total = 0;
    for (int v = 0; v < sil.height; ++v) {
        for (int u = 0; u < sil.width; ++u) {
            if (sil.test(u, v)) {
                ++column_px[u];
                ++total;
            }
        }
    }
    std::size_t right_of = 0;
    int best_u = sil.width - 1;
    double best_gap = 2.0;
    for (int u = sil.width - 1; u >= 0; --u) {
        right_of += column_px[u];
        const double frac = static_cast<double>(right_of) / static_cast<double>(total);
        if (std::abs(frac - want_visible) < best_gap) {
            best_gap = std::abs(frac - want_visible);
            best_u = u;
        }
    }
    return best_u;  // occluder covers columns < best_u
}

}  // namespace

FixtureSummary generate_fixture_dataset(const std::filesystem::path& root,
                                        std::uint64_t seed) {
    FixtureSummary summary;
    summary.root = root;

    std::filesystem::create_directories(root / "models");
    std::filesystem::create_directories(root / "scenes");

    const double depth_scale = 0.1;
    DatasetManifest manifest;
    manifest.name = "fixture";
    manifest.model_unit_to_mm = 1.0;
    manifest.depth_scale_default = depth_scale;
    manifest.object_ids = {1, 2, 3};

    const Mesh box = make_box(80, 80, 80);
    const Mesh tube = make_tube(40, 100, 36);
    const Mesh plate = make_plate_grid(120, 90, 6, 6);
    save_ply_ascii(box, model_path(root, 1));
    save_ply_binary(tube, model_path(root, 2));
    save_ply_ascii(plate, model_path(root, 3));
    save_manifest(manifest, root / "manifest.json");

    CameraIntrinsics cam;
    cam.fx = cam.fy = 280.0;
    cam.cx = 160.0;
    cam.cy = 120.0;
    cam.width = 320;
    cam.height = 240;

    const auto rot_x = [](double deg) {
        return Pose::from_rotation_x(deg * 3.14159265358979323846 / 180.0);
    };

    // Scene 1: two instances of each object, all in one image.
    const std::vector<GtInstance> scene1 = {
        {1, compose(Pose::from_translation({-350, -200, 1000}), rot_x(20))},
        {1, compose(Pose::from_translation({-350, 200, 1100}), rot_x(-35))},
        {2, compose(Pose::from_translation({0, -200, 950}), rot_x(65))},
        {2, compose(Pose::from_translation({0, 200, 1050}), rot_x(110))},
        {3, compose(Pose::from_translation({350, -200, 1000}), rot_x(50))},
        {3, compose(Pose::from_translation({350, 200, 900}), rot_x(-60))},
    };
    const std::map<int, const Mesh*> meshes = {{1, &box}, {2, &tube}, {3, &plate}};
    {
        SceneWriter writer{root / "scenes" / zero_pad(1, 6), depth_scale};
        DepthMap composite(cam.width, cam.height);
        for (const auto& g : scene1) {
            merge_min(composite, render_depth(*meshes.at(g.obj_id), g.pose, cam));
        }
        writer.add_image(1, cam, composite, scene1);
        writer.finish();
    }

    // Scene 2: a wall in front of a single box, trimmed so the two images
    // bracket the 10% visibility filter.
    {
        SceneWriter writer{root / "scenes" / zero_pad(2, 6), depth_scale};
        const GtInstance inst{1, compose(Pose::from_translation({0, 0, 1000}), rot_x(15))};
        const DepthMap obj_depth = render_depth(box, inst.pose, cam);
        const VisibilityMask sil = silhouette(obj_depth);
        const double wall_z = 800.0;
        const Mesh wall = make_plate_grid(1600, 1400, 1, 1);

        const double targets[2] = {0.05, 0.15};
        double achieved[2] = {0, 0};
        for (int k = 0; k < 2; ++k) {
            const int edge_u = occluder_edge_column(sil, targets[k]);
            // Wall spans left of the pixel boundary at edge_u in screen space.
            const double x_right = (edge_u - cam.cx) / cam.fx * wall_z;
            const double half = 800.0;
            const Pose wall_pose = Pose::from_translation({x_right - half, 0, wall_z});
            DepthMap composite = obj_depth;
            merge_min(composite, render_depth(wall, wall_pose, cam));
            writer.add_image(k + 1, cam, composite, {inst});

            const DistanceMap scene_dist = depth_to_distance(composite, cam);
            const DistanceMap obj_dist = depth_to_distance(obj_depth, cam);
            const VisibilityMask visible = visib_mask_gt(obj_dist, scene_dist, {});
            achieved[k] = visible_fraction(visible, sil);
        }
        writer.finish();
        summary.occlusion_low_fraction = achieved[0];
        summary.occlusion_high_fraction = achieved[1];
        if (!(achieved[0] > 0.0 && achieved[0] < 0.095)) {
            throw Error("occlusion fixture: low fraction " + std::to_string(achieved[0]) +
                        " is not safely below the filter");
        }
        if (!(achieved[1] > 0.105 && achieved[1] < 0.5)) {
            throw Error("occlusion fixture: high fraction " + std::to_string(achieved[1]) +
                        " is not safely above the filter");
        }
    }

    // Scene 3: one instance of each object, sensor dropout on 10% of pixels.
    {
        SceneWriter writer{root / "scenes" / zero_pad(3, 6), depth_scale};
        const std::vector<GtInstance> scene3 = {
            {1, compose(Pose::from_translation({-300, 0, 1000}), rot_x(40))},
            {2, compose(Pose::from_translation({0, 0, 1000}), rot_x(75))},
            {3, compose(Pose::from_translation({300, 0, 1000}), rot_x(25))},
        };
        DepthMap composite(cam.width, cam.height);
        for (const auto& g : scene3) {
            merge_min(composite, render_depth(*meshes.at(g.obj_id), g.pose, cam));
        }
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (std::size_t i = 0; i < composite.values.size(); ++i) {
            if (unit(rng) < 0.1) {
                composite.valid[i] = 0;
                composite.values[i] = 0.0;
            }
        }
        writer.add_image(1, cam, composite, scene3);
        writer.finish();
    }

    const Dataset ds = load_dataset(root);
    const std::vector<TestTarget> targets = derive_targets(ds);
    save_targets(targets, root / "targets.json");
    summary.target_count = targets.size();

    std::vector<EstimateRecord> exact;
    std::vector<EstimateRecord> offset;
    for (const TestTarget& t : targets) {
        const SceneImage* img = ds.find_image(t.scene_id, t.im_id);
        const GtInstance* first = nullptr;
        for (const auto& g : img->gt_instances) {
            if (g.obj_id == t.obj_id) {
                first = &g;
                break;
            }
        }
        EstimateRecord rec;
        rec.scene_id = t.scene_id;
        rec.im_id = t.im_id;
        rec.obj_id = t.obj_id;
        rec.score = 1.0;
        rec.time_s = 0.1;
        rec.pose = first->pose;
        exact.push_back(rec);
        rec.pose = compose(Pose::from_translation({200, 0, 0}), first->pose);
        offset.push_back(rec);
    }
    save_estimates(exact, root / "estimates_exact.csv");
    save_estimates(offset, root / "estimates_offset.csv");
    return summary;
}

}  // namespace posebench
