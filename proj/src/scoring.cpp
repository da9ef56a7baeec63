#include "posebench/scoring.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <memory>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

#include "posebench/render.hpp"

namespace posebench {

const char* to_string(SkipReason reason) {
    switch (reason) {
        case SkipReason::None:
            return "none";
        case SkipReason::BelowVisibilityFilter:
            return "below_visibility_filter";
        case SkipReason::NoEstimate:
            return "no_estimate";
        case SkipReason::EmptyUnion:
            return "empty_union";
    }
    return "unknown";
}

namespace {

struct RenderedView {
    DistanceMap dist;
    VisibilityMask sil;
};

std::shared_ptr<const RenderedView> render_view(const Mesh& mesh, const Pose& pose,
                                                const CameraIntrinsics& cam) {
    auto view = std::make_shared<RenderedView>();
    try {
        const DepthMap depth = render_depth(mesh, pose, cam);
        view->dist = depth_to_distance(depth, cam);
        view->sil = silhouette(depth);
    } catch (const MeshEntirelyBehindCamera&) {
        // A pose that puts the whole model behind the camera renders nothing;
        // downstream this scores as fully wrong rather than crashing the run.
        view->dist = DistanceMap(cam.width, cam.height);
        view->sil = VisibilityMask(cam.width, cam.height);
    }
    return view;
}

}  // namespace

// Cache of rendered views keyed by object, pose (quantized at 1e-6) and
// intrinsics. Concurrent renders of the same key produce identical views, so
// last-writer-wins is harmless.
class RenderCache {
public:
    std::shared_ptr<const RenderedView> get(const Mesh& mesh, int obj_id, const Pose& pose,
                                            const CameraIntrinsics& cam) {
        const std::string key = make_key(obj_id, pose, cam);
        {
            std::lock_guard<std::mutex> lock(mutex_);
            const auto it = entries_.find(key);
            if (it != entries_.end()) {
                return it->second;
            }
        }
        auto view = render_view(mesh, pose, cam);
        {
            std::lock_guard<std::mutex> lock(mutex_);
            entries_[key] = view;
        }
        return view;
    }

private:
    static std::string make_key(int obj_id, const Pose& pose, const CameraIntrinsics& cam) {
        char buf[512];
        const Mat3& R = pose.rotation();
        const Vec3& t = pose.translation();
        auto q = [](double v) { return static_cast<long long>(std::llround(v * 1e6)); };
        std::snprintf(buf, sizeof buf,
                      "%d|%lld %lld %lld %lld %lld %lld %lld %lld %lld|%lld %lld %lld|"
                      "%lld %lld %lld %lld %d %d",
                      obj_id, q(R(0, 0)), q(R(0, 1)), q(R(0, 2)), q(R(1, 0)), q(R(1, 1)),
                      q(R(1, 2)), q(R(2, 0)), q(R(2, 1)), q(R(2, 2)), q(t.x()), q(t.y()),
                      q(t.z()), q(cam.fx), q(cam.fy), q(cam.cx), q(cam.cy), cam.width,
                      cam.height);
        return buf;
    }

    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const RenderedView>> entries_;
};

namespace {

TargetResult evaluate_target_impl(const TestTarget& target, const std::string& dataset_name,
                                  const std::vector<const EstimateRecord*>& estimates,
                                  const SceneImage& scene, const DistanceMap& scene_dist,
                                  const Mesh& mesh, const EvalConfig& cfg,
                                  RenderCache* cache) {
    cfg.validate();
    const std::string where = "target scene " + std::to_string(target.scene_id) + " image " +
                              std::to_string(target.im_id) + " obj " +
                              std::to_string(target.obj_id);

    TargetResult res;
    res.target = target;
    res.dataset = dataset_name;

    std::vector<int> gt_indices;
    for (std::size_t i = 0; i < scene.gt_instances.size(); ++i) {
        if (scene.gt_instances[i].obj_id == target.obj_id) {
            gt_indices.push_back(static_cast<int>(i));
        }
    }
    if (gt_indices.empty()) {
        throw InconsistentIds(where + ": image has no gt instance of this object");
    }

    auto render = [&](const Pose& pose) {
        return cache ? cache->get(mesh, target.obj_id, pose, scene.intrinsics)
                     : render_view(mesh, pose, scene.intrinsics);
    };

    struct GtView {
        int gt_index;
        std::shared_ptr<const RenderedView> view;
        VisibilityMask mask;
    };
    std::vector<GtView> eligible;
    for (int i : gt_indices) {
        std::shared_ptr<const RenderedView> view;
        try {
            view = render(scene.gt_instances[i].pose);
        } catch (const Error& e) {
            throw RenderFailure(where + " gt instance " + std::to_string(i) + ": " + e.what());
        }
        if (view->sil.count() == 0) {
            throw RenderFailure(where + " gt instance " + std::to_string(i) +
                                ": renders no pixels");
        }
        VisibilityMask mask = visib_mask_gt(view->dist, scene_dist, cfg.visibility);
        const double fraction = visible_fraction(mask, view->sil);
        res.visible_fraction = std::max(res.visible_fraction, fraction);
        if (fraction >= cfg.min_visible_fraction) {
            eligible.push_back({i, std::move(view), std::move(mask)});
        }
    }
    if (eligible.empty()) {
        res.skip = SkipReason::BelowVisibilityFilter;
        res.diagnostic = "every gt instance is below the visibility filter";
        return res;
    }

    if (estimates.empty()) {
        res.skip = SkipReason::NoEstimate;
        res.diagnostic = "no estimate submitted for this target";
        return res;
    }
    const EstimateRecord* best = estimates.front();
    for (const EstimateRecord* e : estimates) {
        if (e->score > best->score) {  // ties keep the earliest row
            best = e;
        }
    }
    res.has_estimate = true;
    res.estimate_score = best->score;
    res.estimate_time_s = best->time_s;

    std::shared_ptr<const RenderedView> est_view;
    try {
        est_view = render(best->pose);
    } catch (const Error& e) {
        throw RenderFailure(where + " estimate: " + e.what());
    }

    for (const GtView& gt : eligible) {
        const VisibilityMask est_mask =
            visib_mask_est(est_view->dist, scene_dist, gt.mask, cfg.visibility);
        try {
            res.instance_stats.push_back(
                vsd_stats(est_view->dist, gt.view->dist, est_mask, gt.mask));
            res.eligible_instances.push_back(gt.gt_index);
        } catch (const EmptyUnion&) {
            // Only possible with the filter at zero; such instances carry no
            // signal either way and are left out of the matching.
        }
    }
    if (res.instance_stats.empty()) {
        res.skip = SkipReason::EmptyUnion;
        res.diagnostic = "no pixels in the union of the visibility masks";
        return res;
    }

    const auto [err, matched] = error_at_tau(res, cfg.vsd.tau_mm);
    res.error = PoseError{ErrorKind::VSD, err};
    res.matched_instance = matched;
    res.correct = correct_vsd(*res.error, cfg.vsd.theta);
    return res;
}

}  // namespace

TargetResult evaluate_target(const TestTarget& target, const std::string& dataset_name,
                             const std::vector<const EstimateRecord*>& estimates,
                             const SceneImage& scene, const DistanceMap& scene_dist,
                             const Mesh& mesh, const EvalConfig& cfg) {
    return evaluate_target_impl(target, dataset_name, estimates, scene, scene_dist, mesh, cfg,
                                nullptr);
}

std::pair<double, int> error_at_tau(const TargetResult& result, double tau_mm) {
    if (result.instance_stats.empty()) {
        throw EmptyUnion("target has no per-instance statistics");
    }
    double best = 2.0;
    int matched = -1;
    for (std::size_t i = 0; i < result.instance_stats.size(); ++i) {
        const double e = vsd_error_from_stats(result.instance_stats[i], tau_mm);
        if (e < best) {
            best = e;
            matched = result.eligible_instances[i];
        }
    }
    return {best, matched};
}

namespace {

std::optional<double> recall_of(std::size_t correct, std::size_t evaluated) {
    if (evaluated == 0) {
        return std::nullopt;
    }
    return static_cast<double>(correct) / static_cast<double>(evaluated);
}

}  // namespace

RecallReport score_results(std::vector<TargetResult>& results, const EvalConfig& cfg,
                           double tau_mm, double theta) {
    for (TargetResult& res : results) {
        if (res.skip != SkipReason::None) {
            res.error.reset();
            res.matched_instance = -1;
            res.correct = false;
            continue;
        }
        const auto [err, matched] = error_at_tau(res, tau_mm);
        res.error = PoseError{ErrorKind::VSD, err};
        res.matched_instance = matched;
        res.correct = correct_vsd(*res.error, theta);
    }

    std::map<std::string, std::vector<const TargetResult*>> by_dataset;
    for (const TargetResult& res : results) {
        by_dataset[res.dataset].push_back(&res);
    }

    RecallReport report;
    report.tau_mm = tau_mm;
    report.theta = theta;
    report.delta_mm = cfg.visibility.delta_mm;

    std::vector<double> dataset_recalls;
    for (const auto& [name, rows] : by_dataset) {
        DatasetScore score;
        score.dataset = name;
        std::map<int, DatasetCounts> per_object;
        for (const TargetResult* res : rows) {
            DatasetCounts& oc = per_object[res->target.obj_id];
            score.counts.total += 1;
            oc.total += 1;
            if (res->skip == SkipReason::BelowVisibilityFilter) {
                score.counts.skipped_visibility += 1;
                oc.skipped_visibility += 1;
                continue;
            }
            score.counts.evaluated += 1;
            oc.evaluated += 1;
            if (res->skip == SkipReason::NoEstimate) {
                score.counts.no_estimate += 1;
                oc.no_estimate += 1;
            } else if (res->skip == SkipReason::EmptyUnion) {
                score.counts.empty_union += 1;
                oc.empty_union += 1;
            } else if (res->correct) {
                score.counts.correct += 1;
                oc.correct += 1;
            }
        }
        score.recall = recall_of(score.counts.correct, score.counts.evaluated);
        for (const auto& [obj_id, oc] : per_object) {
            score.per_object[obj_id] = recall_of(oc.correct, oc.evaluated);
        }
        if (score.recall) {
            dataset_recalls.push_back(*score.recall);
        }

        report.totals.total += score.counts.total;
        report.totals.evaluated += score.counts.evaluated;
        report.totals.correct += score.counts.correct;
        report.totals.skipped_visibility += score.counts.skipped_visibility;
        report.totals.no_estimate += score.counts.no_estimate;
        report.totals.empty_union += score.counts.empty_union;
        report.datasets.push_back(std::move(score));
    }

    if (!dataset_recalls.empty()) {
        double sum = 0.0;
        for (double r : dataset_recalls) {
            sum += r;
        }
        report.overall = sum / static_cast<double>(dataset_recalls.size());
    }
    return report;
}

SweepGrid sweep(std::vector<TargetResult>& results, const EvalConfig& cfg,
                const std::vector<double>& taus, const std::vector<double>& thetas) {
    if (taus.empty() || thetas.empty()) {
        throw Error("sweep needs at least one tau and one theta");
    }
    SweepGrid grid;
    grid.taus = taus;
    grid.thetas = thetas;
    grid.overall.resize(taus.size());
    for (std::size_t i = 0; i < taus.size(); ++i) {
        grid.overall[i].resize(thetas.size());
        for (std::size_t j = 0; j < thetas.size(); ++j) {
            grid.overall[i][j] = score_results(results, cfg, taus[i], thetas[j]).overall;
        }
    }
    // Leave the per-target fields the way a plain run would.
    score_results(results, cfg, cfg.vsd.tau_mm, cfg.vsd.theta);
    return grid;
}

std::vector<VisibilityBin> recall_by_visible_fraction(const std::vector<TargetResult>& results,
                                                      const std::vector<double>& bin_edges) {
    if (bin_edges.size() < 2) {
        throw EmptyBins("need at least two bin edges");
    }
    for (std::size_t i = 1; i < bin_edges.size(); ++i) {
        if (!(bin_edges[i] > bin_edges[i - 1])) {
            throw EmptyBins("bin edges must ascend");
        }
    }
    if (bin_edges.front() != 0.0 || std::abs(bin_edges.back() - 1.0) > 1e-12) {
        throw EmptyBins("bins must cover (0, 1]");
    }

    std::vector<VisibilityBin> bins(bin_edges.size() - 1);
    for (std::size_t i = 0; i < bins.size(); ++i) {
        bins[i].lo = bin_edges[i];
        bins[i].hi = bin_edges[i + 1];
    }
    for (const TargetResult& res : results) {
        if (res.skip == SkipReason::BelowVisibilityFilter) {
            continue;
        }
        const double f = res.visible_fraction;
        std::size_t idx = 0;
        while (idx + 1 < bins.size() && f > bins[idx].hi) {
            ++idx;
        }
        bins[idx].targets += 1;
        if (res.correct) {
            bins[idx].correct += 1;
        }
    }
    for (VisibilityBin& bin : bins) {
        bin.recall = recall_of(bin.correct, bin.targets);
    }
    return bins;
}

EvalRun run_evaluation(const std::vector<Dataset>& datasets,
                       const std::vector<TestTarget>& targets,
                       const std::vector<EstimateRecord>& estimates, const EvalConfig& cfg,
                       int workers) {
    cfg.validate();
    if (workers < 1) {
        throw Error("worker count must be at least 1");
    }

    std::map<int, const Dataset*> dataset_by_scene;
    for (const Dataset& ds : datasets) {
        for (const SceneImage& img : ds.images) {
            dataset_by_scene.emplace(img.scene_id, &ds);
        }
    }

    struct Job {
        const Dataset* dataset;
        const SceneImage* scene;
        const Mesh* mesh;
        std::vector<const EstimateRecord*> estimates;
    };
    std::vector<Job> jobs(targets.size());

    std::map<std::tuple<int, int, int>, std::vector<const EstimateRecord*>> est_by_key;
    for (const EstimateRecord& rec : estimates) {
        est_by_key[{rec.scene_id, rec.im_id, rec.obj_id}].push_back(&rec);
    }

    EvalRun run;
    std::set<std::tuple<int, int, int>> target_keys;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const TestTarget& t = targets[i];
        const auto ds_it = dataset_by_scene.find(t.scene_id);
        if (ds_it == dataset_by_scene.end()) {
            throw InconsistentIds("target references unknown scene " +
                                  std::to_string(t.scene_id));
        }
        Job& job = jobs[i];
        job.dataset = ds_it->second;
        job.scene = job.dataset->find_image(t.scene_id, t.im_id);
        if (!job.scene) {
            throw InconsistentIds("target references unknown image " +
                                  std::to_string(t.im_id) + " in scene " +
                                  std::to_string(t.scene_id));
        }
        job.mesh = job.dataset->find_model(t.obj_id);
        if (!job.mesh) {
            throw MissingModel("no model for obj " + std::to_string(t.obj_id) +
                               " in dataset '" + job.dataset->manifest.name + "'");
        }
        const std::tuple<int, int, int> key{t.scene_id, t.im_id, t.obj_id};
        target_keys.insert(key);
        const auto est_it = est_by_key.find(key);
        if (est_it != est_by_key.end()) {
            job.estimates = est_it->second;
            if (job.estimates.size() > 1) {
                run.warnings.push_back(
                    "target scene " + std::to_string(t.scene_id) + " image " +
                    std::to_string(t.im_id) + " obj " + std::to_string(t.obj_id) + ": " +
                    std::to_string(job.estimates.size()) +
                    " estimate rows, using the highest score");
            }
        }
    }
    std::size_t unmatched = 0;
    for (const auto& [key, rows] : est_by_key) {
        if (!target_keys.count(key)) {
            unmatched += rows.size();
        }
    }
    if (unmatched > 0) {
        run.warnings.push_back(std::to_string(unmatched) +
                               " estimate rows match no target and are ignored");
    }

    // Scene distance maps, one per referenced image.
    std::map<std::pair<int, int>, DistanceMap> scene_dist;
    for (const Job& job : jobs) {
        const std::pair<int, int> key{job.scene->scene_id, job.scene->im_id};
        if (!scene_dist.count(key)) {
            scene_dist.emplace(key, depth_to_distance(job.scene->depth, job.scene->intrinsics));
        }
    }

    RenderCache cache;
    run.results.resize(targets.size());
    std::vector<std::exception_ptr> failures(targets.size());
    std::atomic<std::size_t> next{0};
    const int thread_count =
        static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers),
                                               std::max<std::size_t>(targets.size(), 1)));

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= targets.size()) {
                return;
            }
            try {
                const Job& job = jobs[i];
                const DistanceMap& dist =
                    scene_dist.at({job.scene->scene_id, job.scene->im_id});
                run.results[i] = evaluate_target_impl(
                    targets[i], job.dataset->manifest.name, job.estimates, *job.scene, dist,
                    *job.mesh, cfg, &cache);
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    };

    if (thread_count <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(thread_count);
        for (int i = 0; i < thread_count; ++i) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    for (const auto& failure : failures) {
        if (failure) {
            std::rethrow_exception(failure);
        }
    }

    run.report = score_results(run.results, cfg, cfg.vsd.tau_mm, cfg.vsd.theta);
    return run;
}

namespace {

nlohmann::json counts_to_json(const DatasetCounts& c) {
    return {{"total", c.total},
            {"evaluated", c.evaluated},
            {"correct", c.correct},
            {"skipped_visibility", c.skipped_visibility},
            {"no_estimate", c.no_estimate},
            {"empty_union", c.empty_union}};
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string report_to_json(const RecallReport& report) {
    nlohmann::json j;
    j["tau_mm"] = report.tau_mm;
    j["theta"] = report.theta;
    j["delta_mm"] = report.delta_mm;
    if (report.overall) {
        j["overall"] = *report.overall;
    } else {
        j["overall"] = nullptr;
    }
    j["totals"] = counts_to_json(report.totals);
    j["datasets"] = nlohmann::json::array();
    for (const DatasetScore& ds : report.datasets) {
        nlohmann::json d;
        d["name"] = ds.dataset;
        if (ds.recall) {
            d["recall"] = *ds.recall;
        } else {
            d["recall"] = nullptr;
        }
        d["counts"] = counts_to_json(ds.counts);
        d["per_object"] = nlohmann::json::object();
        for (const auto& [obj_id, recall] : ds.per_object) {
            if (recall) {
                d["per_object"][std::to_string(obj_id)] = *recall;
            } else {
                d["per_object"][std::to_string(obj_id)] = nullptr;
            }
        }
        j["datasets"].push_back(std::move(d));
    }
    return j.dump(2) + "\n";
}

std::string ledger_to_csv(const std::vector<TargetResult>& results) {
    std::string out =
        "dataset,scene_id,im_id,obj_id,skip_reason,visible_fraction,has_estimate,"
        "estimate_score,estimate_time_s,matched_instance,e_vsd,correct\n";
    for (const TargetResult& res : results) {
        out += res.dataset;
        out += ',' + std::to_string(res.target.scene_id);
        out += ',' + std::to_string(res.target.im_id);
        out += ',' + std::to_string(res.target.obj_id);
        out += ',';
        out += to_string(res.skip);
        out += ',' + fmt17(res.visible_fraction);
        out += res.has_estimate ? ",1" : ",0";
        out += ',' + (res.has_estimate ? fmt17(res.estimate_score) : std::string());
        out += ',' + (res.has_estimate ? fmt17(res.estimate_time_s) : std::string());
        out += ',' + (res.matched_instance >= 0 ? std::to_string(res.matched_instance)
                                                : std::string());
        out += ',' + (res.error ? fmt17(res.error->value) : std::string());
        out += res.correct ? ",1\n" : ",0\n";
    }
    return out;
}

std::string sweep_to_csv(const SweepGrid& grid) {
    std::string out = "tau_mm,theta,overall_recall\n";
    for (std::size_t i = 0; i < grid.taus.size(); ++i) {
        for (std::size_t j = 0; j < grid.thetas.size(); ++j) {
            out += fmt17(grid.taus[i]);
            out += ',' + fmt17(grid.thetas[j]);
            out += ',' + (grid.overall[i][j] ? fmt17(*grid.overall[i][j]) : std::string());
            out += '\n';
        }
    }
    return out;
}

std::string histogram_to_csv(const std::vector<VisibilityBin>& bins) {
    std::string out = "visible_fraction_lo,visible_fraction_hi,targets,correct,recall\n";
    for (const VisibilityBin& bin : bins) {
        out += fmt17(bin.lo);
        out += ',' + fmt17(bin.hi);
        out += ',' + std::to_string(bin.targets);
        out += ',' + std::to_string(bin.correct);
        out += ',' + (bin.recall ? fmt17(*bin.recall) : std::string());
        out += '\n';
    }
    return out;
}

}  // namespace posebench
