#include "posebench/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "posebench/fs_util.hpp"
#include "posebench/ply_io.hpp"
#include "posebench/png_io.hpp"

namespace posebench {

using nlohmann::json;

namespace {

json parse_json_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) {
        throw ParseError(path.string() + ": invalid JSON");
    }
    return j;
}

int parse_int_key(const std::string& key, const std::filesystem::path& origin) {
    int value = 0;
    const auto res = std::from_chars(key.data(), key.data() + key.size(), value);
    if (res.ec != std::errc() || res.ptr != key.data() + key.size()) {
        throw ParseError(origin.string() + ": non-numeric image id '" + key + "'");
    }
    return value;
}

Pose pose_from_json(const json& inst, const std::string& where) {
    const auto& r = inst.at("R");
    const auto& t = inst.at("t");
    if (!r.is_array() || r.size() != 9 || !t.is_array() || t.size() != 3) {
        throw ParseError(where + ": R must have 9 entries and t 3");
    }
    Mat3 rot;
    for (int i = 0; i < 9; ++i) {
        rot(i / 3, i % 3) = r[i].get<double>();  // row-major
    }
    Vec3 trans;
    for (int i = 0; i < 3; ++i) {
        trans[i] = t[i].get<double>();
    }
    try {
        return Pose(rot, trans);
    } catch (const InvalidRotation& e) {
        throw ParseError(where + ": " + e.what());
    }
}

}  // namespace

const SceneImage* Dataset::find_image(int scene_id, int im_id) const {
    for (const auto& img : images) {
        if (img.scene_id == scene_id && img.im_id == im_id) {
            return &img;
        }
    }
    return nullptr;
}

const Mesh* Dataset::find_model(int obj_id) const {
    const auto it = models.find(obj_id);
    return it == models.end() ? nullptr : &it->second;
}

std::string zero_pad(int value, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%0*d", digits, value);
    return buf;
}

std::filesystem::path model_path(const std::filesystem::path& root, int obj_id) {
    return root / "models" / ("obj_" + zero_pad(obj_id, 6) + ".ply");
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    const json j = parse_json_file(path);
    DatasetManifest m;
    try {
        m.name = j.at("name").get<std::string>();
        m.model_unit_to_mm = j.at("model_unit_to_mm").get<double>();
        m.depth_scale_default = j.at("depth_scale_default").get<double>();
        for (const auto& id : j.at("objects")) {
            m.object_ids.push_back(id.get<int>());
        }
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!(m.model_unit_to_mm > 0.0) || !(m.depth_scale_default > 0.0)) {
        throw ParseError(path.string() + ": scales must be positive");
    }
    if (m.name.empty()) {
        throw ParseError(path.string() + ": dataset name is empty");
    }
    std::sort(m.object_ids.begin(), m.object_ids.end());
    return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    json j;
    j["name"] = manifest.name;
    j["model_unit_to_mm"] = manifest.model_unit_to_mm;
    j["depth_scale_default"] = manifest.depth_scale_default;
    j["objects"] = manifest.object_ids;
    atomic_write_file(path, j.dump(2) + "\n");
}

std::vector<SceneImage> load_scene(const std::filesystem::path& dir, int scene_id,
                                   double depth_scale_default) {
    const std::filesystem::path cam_path = dir / "scene_camera.json";
    const std::filesystem::path gt_path = dir / "scene_gt.json";
    if (!std::filesystem::exists(cam_path)) {
        throw MissingFile("no scene_camera.json in " + dir.string());
    }
    if (!std::filesystem::exists(gt_path)) {
        throw MissingFile("no scene_gt.json in " + dir.string());
    }
    const json cams = parse_json_file(cam_path);
    const json gts = parse_json_file(gt_path);
    if (!cams.is_object() || !gts.is_object()) {
        throw ParseError(dir.string() + ": scene files must be JSON objects keyed by image id");
    }

    std::vector<SceneImage> images;
    for (const auto& [key, cam] : cams.items()) {
        SceneImage img;
        img.scene_id = scene_id;
        img.im_id = parse_int_key(key, cam_path);
        try {
            img.intrinsics.fx = cam.at("fx").get<double>();
            img.intrinsics.fy = cam.at("fy").get<double>();
            img.intrinsics.cx = cam.at("cx").get<double>();
            img.intrinsics.cy = cam.at("cy").get<double>();
            img.intrinsics.width = cam.at("width").get<int>();
            img.intrinsics.height = cam.at("height").get<int>();
            img.depth_scale =
                cam.contains("depth_scale") ? cam.at("depth_scale").get<double>()
                                            : depth_scale_default;
        } catch (const json::exception& e) {
            throw ParseError(cam_path.string() + " image " + key + ": " + e.what());
        }
        img.intrinsics.validate();
        if (!(img.depth_scale > 0.0)) {
            throw ParseError(cam_path.string() + " image " + key +
                             ": depth_scale must be positive");
        }

        const std::filesystem::path depth_path =
            dir / "depth" / (zero_pad(img.im_id, 6) + ".png");
        const Image16 raw = read_png16(depth_path);
        if (raw.width != img.intrinsics.width || raw.height != img.intrinsics.height) {
            throw InconsistentIds(depth_path.string() + ": image size " +
                                  std::to_string(raw.width) + "x" +
                                  std::to_string(raw.height) +
                                  " does not match scene_camera.json");
        }
        img.depth = DepthMap(raw.width, raw.height);
        for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
            if (raw.pixels[i] != 0) {  // zero marks missing measurements
                img.depth.values[i] = raw.pixels[i] * img.depth_scale;
                img.depth.valid[i] = 1;
            }
        }
        images.push_back(std::move(img));
    }

    std::sort(images.begin(), images.end(),
              [](const SceneImage& a, const SceneImage& b) { return a.im_id < b.im_id; });

    for (const auto& [key, instances] : gts.items()) {
        const int im_id = parse_int_key(key, gt_path);
        const auto it = std::find_if(images.begin(), images.end(),
                                     [&](const SceneImage& s) { return s.im_id == im_id; });
        if (it == images.end()) {
            throw InconsistentIds(gt_path.string() + ": image id " + key +
                                  " has no scene_camera.json entry");
        }
        if (!instances.is_array()) {
            throw ParseError(gt_path.string() + " image " + key + ": expected a list");
        }
        int row = 0;
        for (const auto& inst : instances) {
            const std::string where =
                gt_path.string() + " image " + key + " instance " + std::to_string(row);
            GtInstance g;
            try {
                g.obj_id = inst.at("obj_id").get<int>();
            } catch (const json::exception& e) {
                throw ParseError(where + ": " + e.what());
            }
            g.pose = pose_from_json(inst, where);
            it->gt_instances.push_back(std::move(g));
            ++row;
        }
    }
    return images;
}

Dataset load_dataset(const std::filesystem::path& root) {
    Dataset ds;
    ds.root = root;
    ds.manifest = load_manifest(root / "manifest.json");
    for (int obj_id : ds.manifest.object_ids) {
        const std::filesystem::path path = model_path(root, obj_id);
        if (!std::filesystem::exists(path)) {
            throw MissingFile("model file " + path.string() + " is missing");
        }
        ds.models.emplace(obj_id, load_ply(path, ds.manifest.model_unit_to_mm));
    }

    const std::filesystem::path scenes_dir = root / "scenes";
    if (!std::filesystem::is_directory(scenes_dir)) {
        throw MissingFile("no scenes directory in " + root.string());
    }
    std::vector<std::pair<int, std::filesystem::path>> scene_dirs;
    for (const auto& entry : std::filesystem::directory_iterator(scenes_dir)) {
        if (!entry.is_directory()) {
            continue;
        }
        const std::string name = entry.path().filename().string();
        int id = 0;
        const auto res = std::from_chars(name.data(), name.data() + name.size(), id);
        if (res.ec != std::errc() || res.ptr != name.data() + name.size()) {
            throw ParseError("scene directory name '" + name + "' is not numeric");
        }
        scene_dirs.emplace_back(id, entry.path());
    }
    std::sort(scene_dirs.begin(), scene_dirs.end());
    for (const auto& [id, dir] : scene_dirs) {
        auto images = load_scene(dir, id, ds.manifest.depth_scale_default);
        ds.images.insert(ds.images.end(), std::make_move_iterator(images.begin()),
                         std::make_move_iterator(images.end()));
    }
    return ds;
}

std::vector<Dataset> load_dataset_root(const std::filesystem::path& root) {
    if (std::filesystem::exists(root / "manifest.json")) {
        std::vector<Dataset> out;
        out.push_back(load_dataset(root));
        return out;
    }
    std::vector<std::filesystem::path> subdirs;
    if (std::filesystem::is_directory(root)) {
        for (const auto& entry : std::filesystem::directory_iterator(root)) {
            if (entry.is_directory() &&
                std::filesystem::exists(entry.path() / "manifest.json")) {
                subdirs.push_back(entry.path());
            }
        }
    }
    if (subdirs.empty()) {
        throw MissingFile("no manifest.json under " + root.string());
    }
    std::sort(subdirs.begin(), subdirs.end());
    std::vector<Dataset> out;
    std::set<std::string> names;
    for (const auto& dir : subdirs) {
        Dataset ds = load_dataset(dir);
        if (!names.insert(ds.manifest.name).second) {
            throw InconsistentIds("duplicate dataset name '" + ds.manifest.name + "'");
        }
        out.push_back(std::move(ds));
    }
    // Targets carry no dataset column, so scene ids must disambiguate.
    std::map<int, std::string> owner;
    for (const auto& ds : out) {
        for (const auto& img : ds.images) {
            auto [it, inserted] = owner.emplace(img.scene_id, ds.manifest.name);
            if (!inserted && it->second != ds.manifest.name) {
                throw InconsistentIds("scene id " + std::to_string(img.scene_id) +
                                      " appears in datasets '" + it->second + "' and '" +
                                      ds.manifest.name + "'");
            }
        }
    }
    return out;
}

std::vector<TestTarget> load_targets(const std::filesystem::path& path) {
    const json j = parse_json_file(path);
    if (!j.is_array()) {
        throw ParseError(path.string() + ": expected a JSON array of targets");
    }
    std::vector<TestTarget> targets;
    for (const auto& item : j) {
        TestTarget t;
        try {
            t.scene_id = item.at("scene_id").get<int>();
            t.im_id = item.at("im_id").get<int>();
            t.obj_id = item.at("obj_id").get<int>();
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ": " + e.what());
        }
        targets.push_back(t);
    }
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    return targets;
}

void save_targets(const std::vector<TestTarget>& targets, const std::filesystem::path& path) {
    json j = json::array();
    for (const auto& t : targets) {
        j.push_back({{"scene_id", t.scene_id}, {"im_id", t.im_id}, {"obj_id", t.obj_id}});
    }
    atomic_write_file(path, j.dump(2) + "\n");
}

std::vector<TestTarget> derive_targets(const Dataset& dataset) {
    std::vector<TestTarget> targets;
    for (const auto& img : dataset.images) {
        std::set<int> objs;
        for (const auto& g : img.gt_instances) {
            objs.insert(g.obj_id);
        }
        for (int obj_id : objs) {
            targets.push_back({img.scene_id, img.im_id, obj_id});
        }
    }
    std::sort(targets.begin(), targets.end());
    return targets;
}

namespace {

[[noreturn]] void estimate_fail(const std::string& origin, long long line,
                                const std::string& msg, bool non_finite = false) {
    if (non_finite) {
        NonFiniteValue err(origin + " line " + std::to_string(line) + ": " + msg);
        err.line = line;
        throw err;
    }
    ParseError err(origin + " line " + std::to_string(line) + ": " + msg);
    err.line = line;
    throw err;
}

std::vector<double> split_doubles(const std::string& field, std::size_t expect,
                                  const std::string& origin, long long line) {
    std::vector<double> out;
    std::istringstream ss(field);
    std::string tok;
    while (ss >> tok) {
        double v = 0.0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
            estimate_fail(origin, line, "bad number '" + tok + "'");
        }
        out.push_back(v);
    }
    if (out.size() != expect) {
        estimate_fail(origin, line, "expected " + std::to_string(expect) + " numbers, got " +
                                        std::to_string(out.size()));
    }
    return out;
}

}  // namespace

std::vector<EstimateRecord> parse_estimates_text(const std::string& text,
                                                 const std::string& origin) {
    std::vector<EstimateRecord> records;
    std::istringstream in(text);
    std::string raw;
    long long line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') {
            raw.pop_back();
        }
        const auto first = raw.find_first_not_of(" \t");
        if (first == std::string::npos || raw[first] == '#') {
            continue;
        }
        std::vector<std::string> fields;
        std::string cur;
        for (char c : raw) {
            if (c == ',') {
                fields.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        fields.push_back(cur);
        if (fields.size() != 7) {
            estimate_fail(origin, line_no,
                          "expected 7 comma-separated fields, got " +
                              std::to_string(fields.size()));
        }

        EstimateRecord rec;
        auto parse_int = [&](const std::string& f, const char* what) {
            int v = 0;
            const char* b = f.data();
            const char* e = f.data() + f.size();
            while (b < e && *b == ' ') ++b;
            const auto res = std::from_chars(b, e, v);
            if (res.ec != std::errc() || res.ptr != e) {
                estimate_fail(origin, line_no, std::string("bad ") + what + " '" + f + "'");
            }
            return v;
        };
        rec.scene_id = parse_int(fields[0], "scene_id");
        rec.im_id = parse_int(fields[1], "im_id");
        rec.obj_id = parse_int(fields[2], "obj_id");
        rec.score = split_doubles(fields[3], 1, origin, line_no)[0];
        const std::vector<double> r = split_doubles(fields[4], 9, origin, line_no);
        const std::vector<double> t = split_doubles(fields[5], 3, origin, line_no);
        rec.time_s = split_doubles(fields[6], 1, origin, line_no)[0];

        if (!std::isfinite(rec.score)) {
            estimate_fail(origin, line_no, "score is not finite", true);
        }
        if (!std::isfinite(rec.time_s)) {
            estimate_fail(origin, line_no, "time is not finite", true);
        }
        for (double v : r) {
            if (!std::isfinite(v)) {
                estimate_fail(origin, line_no, "rotation entry is not finite", true);
            }
        }
        for (double v : t) {
            if (!std::isfinite(v)) {
                estimate_fail(origin, line_no, "translation entry is not finite", true);
            }
        }
        if (rec.time_s < 0.0) {
            estimate_fail(origin, line_no, "time must be non-negative");
        }
        Mat3 rot;
        for (int i = 0; i < 9; ++i) {
            rot(i / 3, i % 3) = r[i];
        }
        try {
            rec.pose = Pose(rot, {t[0], t[1], t[2]});
        } catch (const InvalidRotation& e) {
            estimate_fail(origin, line_no, e.what());
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<EstimateRecord> load_estimates(const std::filesystem::path& path) {
    return parse_estimates_text(read_text_file(path), path.string());
}

std::string format_estimates_text(const std::vector<EstimateRecord>& records) {
    std::string out = "# scene_id,im_id,obj_id,score,R(9),t(3) mm,time s\n";
    char buf[640];
    for (const auto& rec : records) {
        const Mat3& R = rec.pose.rotation();
        const Vec3& t = rec.pose.translation();
        std::snprintf(buf, sizeof buf,
                      "%d,%d,%d,%.17g,"
                      "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g,"
                      "%.17g %.17g %.17g,%.17g\n",
                      rec.scene_id, rec.im_id, rec.obj_id, rec.score, R(0, 0), R(0, 1),
                      R(0, 2), R(1, 0), R(1, 1), R(1, 2), R(2, 0), R(2, 1), R(2, 2), t.x(),
                      t.y(), t.z(), rec.time_s);
        out += buf;
    }
    return out;
}

void save_estimates(const std::vector<EstimateRecord>& records,
                    const std::filesystem::path& path) {
    for (const auto& rec : records) {
        if (!std::isfinite(rec.score) || !std::isfinite(rec.time_s)) {
            throw NonFiniteValue("estimate record contains non-finite values");
        }
    }
    atomic_write_file(path, format_estimates_text(records));
}

std::vector<std::string> validate_dataset_root(const std::filesystem::path& root) {
    std::vector<std::string> findings;
    std::vector<Dataset> datasets;
    try {
        datasets = load_dataset_root(root);
    } catch (const Error& e) {
        findings.push_back(e.what());
        return findings;
    }
    for (const auto& ds : datasets) {
        for (const auto& img : ds.images) {
            int row = 0;
            for (const auto& g : img.gt_instances) {
                if (!ds.models.count(g.obj_id)) {
                    findings.push_back(ds.manifest.name + " scene " +
                                       std::to_string(img.scene_id) + " image " +
                                       std::to_string(img.im_id) + " row " +
                                       std::to_string(row) + ": gt references obj " +
                                       std::to_string(g.obj_id) + " with no model");
                }
                ++row;
            }
        }
        for (const auto& [obj_id, mesh] : ds.models) {
            if (mesh.vertices().size() < 3 || mesh.triangles().empty()) {
                findings.push_back(ds.manifest.name + " obj " + std::to_string(obj_id) +
                                   ": model has no usable surface");
            }
        }
    }
    return findings;
}

}  // namespace posebench
