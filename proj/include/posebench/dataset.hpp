#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "posebench/geometry.hpp"
#include "posebench/maps.hpp"

namespace posebench {

struct GtInstance {
    int obj_id = 0;
    Pose pose;  // model to camera
};

// One annotated test image: calibrated depth plus ground-truth instances.
struct SceneImage {
    int scene_id = 0;
    int im_id = 0;
    CameraIntrinsics intrinsics;
    double depth_scale = 1.0;  // mm per stored unit
    DepthMap depth;            // already in mm
    std::vector<GtInstance> gt_instances;
};

struct TestTarget {
    int scene_id = 0;
    int im_id = 0;
    int obj_id = 0;

    auto operator<=>(const TestTarget&) const = default;
};

struct EstimateRecord {
    int scene_id = 0;
    int im_id = 0;
    int obj_id = 0;
    double score = 0.0;  // confidence, higher is better
    Pose pose;
    double time_s = 0.0;
};

struct DatasetManifest {
    std::string name;
    double model_unit_to_mm = 1.0;
    double depth_scale_default = 1.0;
    std::vector<int> object_ids;
};

struct Dataset {
    std::filesystem::path root;
    DatasetManifest manifest;
    std::map<int, Mesh> models;
    std::vector<SceneImage> images;  // ordered by (scene_id, im_id)

    const SceneImage* find_image(int scene_id, int im_id) const;
    const Mesh* find_model(int obj_id) const;
};

// File layout helpers (documented in the README): scenes/000001, depth/000001.png.
std::string zero_pad(int value, int digits);
std::filesystem::path model_path(const std::filesystem::path& root, int obj_id);

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Loads one scene directory (scene_camera.json, scene_gt.json, depth/*.png).
// Depth values are multiplied by the per-image depth_scale to give mm.
std::vector<SceneImage> load_scene(const std::filesystem::path& dir, int scene_id,
                                   double depth_scale_default);

// A dataset is a directory with manifest.json, models/ and scenes/.
Dataset load_dataset(const std::filesystem::path& root);

// A root is either one dataset or a directory of datasets; scene ids must be
// unique across all of them so targets stay unambiguous.
std::vector<Dataset> load_dataset_root(const std::filesystem::path& root);

std::vector<TestTarget> load_targets(const std::filesystem::path& path);
void save_targets(const std::vector<TestTarget>& targets, const std::filesystem::path& path);

// One target per (image, annotated object), the benchmark's default task.
std::vector<TestTarget> derive_targets(const Dataset& dataset);

std::vector<EstimateRecord> load_estimates(const std::filesystem::path& path);
void save_estimates(const std::vector<EstimateRecord>& records,
                    const std::filesystem::path& path);
std::vector<EstimateRecord> parse_estimates_text(const std::string& text,
                                                 const std::string& origin);
std::string format_estimates_text(const std::vector<EstimateRecord>& records);

// Consistency findings for an on-disk dataset root, empty when pristine.
std::vector<std::string> validate_dataset_root(const std::filesystem::path& root);

}  // namespace posebench
