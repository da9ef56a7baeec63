#include <doctest.h>

#include <algorithm>
#include <random>

#include "posebench/fixture.hpp"
#include "posebench/render.hpp"
#include "posebench/scoring.hpp"
#include "test_util.hpp"

using namespace posebench;

namespace {

// Two box instances side by side in one synthetic image.
struct TwoInstanceScene {
    Mesh mesh = make_box(60, 60, 60);
    SceneImage scene;
    DistanceMap scene_dist;
    Pose left = Pose::from_translation(Vec3(-120, 0, 900));
    Pose right = Pose::from_translation(Vec3(120, 0, 900));

    TwoInstanceScene() {
        scene.scene_id = 1;
        scene.im_id = 1;
        scene.intrinsics = testutil::small_camera();
        scene.gt_instances = {{5, left}, {5, right}};
        DepthMap depth(scene.intrinsics.width, scene.intrinsics.height);
        for (const Pose& pose : {left, right}) {
            const DepthMap d = render_depth(mesh, pose, scene.intrinsics);
            for (size_t i = 0; i < d.values.size(); ++i) {
                if (d.valid[i] && (!depth.valid[i] || d.values[i] < depth.values[i])) {
                    depth.values[i] = d.values[i];
                    depth.valid[i] = 1;
                }
            }
        }
        scene.depth = depth;
        scene_dist = depth_to_distance(depth, scene.intrinsics);
    }
};

EstimateRecord make_estimate(const Pose& pose, double score, int obj_id = 5) {
    EstimateRecord r;
    r.scene_id = 1;
    r.im_id = 1;
    r.obj_id = obj_id;
    r.score = score;
    r.pose = pose;
    r.time_s = 0.5;
    return r;
}

// Cached statistics yielding a chosen error at tau=20: union 10 pixels,
// `aligned` of them differing by 5 mm, the rest by 50 mm.
VsdStats stats_with_error(int aligned) {
    VsdStats s;
    s.union_count = 10;
    for (int i = 0; i < aligned; ++i) s.intersection_abs_diff.push_back(5.0);
    for (int i = aligned; i < 10; ++i) s.intersection_abs_diff.push_back(50.0);
    return s;
}

TargetResult make_result(const std::string& dataset, int scene_id, int obj_id, int aligned,
                         SkipReason skip = SkipReason::None) {
    TargetResult r;
    r.target = {scene_id, 1, obj_id};
    r.dataset = dataset;
    r.visible_fraction = 1.0;
    if (skip == SkipReason::None) {
        r.eligible_instances = {0};
        r.instance_stats = {stats_with_error(aligned)};
        r.has_estimate = true;
        r.estimate_score = 1.0;
    } else {
        r.skip = skip;
        if (skip != SkipReason::BelowVisibilityFilter) {
            r.eligible_instances = {0};
        }
        r.has_estimate = skip == SkipReason::EmptyUnion;
    }
    return r;
}

EvalConfig default_cfg() {
    EvalConfig cfg;
    return cfg;
}

}  // namespace

TEST_CASE("min-error matching picks the nearer instance") {
    const TwoInstanceScene fx;
    const EvalConfig cfg = default_cfg();

    const EstimateRecord exact_right = make_estimate(fx.right, 0.9);
    TargetResult r = evaluate_target({1, 1, 5}, "d", {&exact_right}, fx.scene, fx.scene_dist,
                                     fx.mesh, cfg);
    CHECK(r.skip == SkipReason::None);
    CHECK(r.matched_instance == 1);
    REQUIRE(r.error.has_value());
    CHECK(r.error->value == 0.0);
    CHECK(r.correct);

    const EstimateRecord exact_left = make_estimate(fx.left, 0.9);
    r = evaluate_target({1, 1, 5}, "d", {&exact_left}, fx.scene, fx.scene_dist, fx.mesh, cfg);
    CHECK(r.matched_instance == 0);
    CHECK(r.correct);

    // Estimate far from both instances: both errors are 1.0, tie goes to the
    // lowest gt index.
    const EstimateRecord nowhere =
        make_estimate(Pose::from_translation(Vec3(0, 200, 2500)), 0.9);
    r = evaluate_target({1, 1, 5}, "d", {&nowhere}, fx.scene, fx.scene_dist, fx.mesh, cfg);
    CHECK(r.matched_instance == 0);
    REQUIRE(r.error.has_value());
    CHECK(r.error->value == 1.0);
    CHECK_FALSE(r.correct);
}

TEST_CASE("highest score wins, ties break on input order") {
    const TwoInstanceScene fx;
    const EvalConfig cfg = default_cfg();

    const EstimateRecord weak = make_estimate(Pose::from_translation(Vec3(0, 300, 3000)), 0.2);
    const EstimateRecord strong = make_estimate(fx.left, 0.8);
    TargetResult r = evaluate_target({1, 1, 5}, "d", {&weak, &strong}, fx.scene, fx.scene_dist,
                                     fx.mesh, cfg);
    CHECK(r.correct);
    CHECK(r.estimate_score == 0.8);

    // Equal scores: the earlier row is consumed.
    const EstimateRecord first = make_estimate(fx.right, 0.5);
    const EstimateRecord second = make_estimate(Pose::from_translation(Vec3(0, 300, 3000)), 0.5);
    r = evaluate_target({1, 1, 5}, "d", {&first, &second}, fx.scene, fx.scene_dist, fx.mesh,
                        cfg);
    CHECK(r.correct);
    CHECK(r.matched_instance == 1);
}

TEST_CASE("no estimate is a counted failure, not a skip from the denominator") {
    const TwoInstanceScene fx;
    TargetResult r = evaluate_target({1, 1, 5}, "d", {}, fx.scene, fx.scene_dist, fx.mesh,
                                     default_cfg());
    CHECK(r.skip == SkipReason::NoEstimate);
    CHECK_FALSE(r.correct);

    std::vector<TargetResult> results = {r, make_result("d", 2, 5, 10)};
    const RecallReport report = score_results(results, default_cfg(), 20.0, 0.3);
    REQUIRE(report.datasets.size() == 1);
    CHECK(report.datasets[0].counts.no_estimate == 1);
    CHECK(report.datasets[0].counts.evaluated == 2);
    CHECK(*report.datasets[0].recall == 0.5);
}

TEST_CASE("visible fraction records the best instance") {
    const TwoInstanceScene fx;
    // Occlude the left instance completely with a synthetic near wall.
    SceneImage occluded = fx.scene;
    DistanceMap scene_dist = fx.scene_dist;
    const int half = occluded.intrinsics.width / 2;
    for (int v = 0; v < occluded.intrinsics.height; ++v) {
        for (int u = 0; u < half; ++u) {
            occluded.depth.set(u, v, 300.0);
        }
    }
    scene_dist = depth_to_distance(occluded.depth, occluded.intrinsics);

    const EstimateRecord est = make_estimate(fx.right, 1.0);
    const TargetResult r = evaluate_target({1, 1, 5}, "d", {&est}, occluded, scene_dist,
                                           fx.mesh, default_cfg());
    // Left instance is invisible; the recorded fraction is the right one's.
    CHECK(r.visible_fraction > 0.9);
    CHECK(r.eligible_instances == std::vector<int>{1});
    CHECK(r.correct);
}

TEST_CASE("recall arithmetic and unweighted dataset averaging") {
    std::vector<TargetResult> results;
    // Dataset a: 1 correct of 2 -> 0.5 (sizes differ on purpose).
    results.push_back(make_result("a", 1, 1, 10));
    results.push_back(make_result("a", 2, 1, 0));
    // Dataset b: 6 of 6 -> 1.0.
    for (int i = 0; i < 6; ++i) {
        results.push_back(make_result("b", 10 + i, 1, 10));
    }
    const RecallReport report = score_results(results, default_cfg(), 20.0, 0.3);
    REQUIRE(report.datasets.size() == 2);
    CHECK(*report.datasets[0].recall == 0.5);
    CHECK(*report.datasets[1].recall == 1.0);
    // Unweighted mean, not 7/8.
    CHECK(*report.overall == 0.75);
}

TEST_CASE("three of four eligible gives exactly 0.75") {
    std::vector<TargetResult> results;
    results.push_back(make_result("d", 1, 1, 10));
    results.push_back(make_result("d", 2, 1, 10));
    results.push_back(make_result("d", 3, 1, 10));
    results.push_back(make_result("d", 4, 1, 0));
    // A visibility-skipped extra target must not enter the denominator.
    results.push_back(make_result("d", 5, 1, 0, SkipReason::BelowVisibilityFilter));
    const RecallReport report = score_results(results, default_cfg(), 20.0, 0.3);
    CHECK(*report.datasets[0].recall == 0.75);
    CHECK(report.datasets[0].counts.total == 5);
    CHECK(report.datasets[0].counts.evaluated == 4);
    CHECK(report.datasets[0].counts.skipped_visibility == 1);

    // Dropping the skipped target changes nothing.
    std::vector<TargetResult> fewer(results.begin(), results.end() - 1);
    const RecallReport again = score_results(fewer, default_cfg(), 20.0, 0.3);
    CHECK(*again.datasets[0].recall == 0.75);
    CHECK(*again.overall == *report.overall);
}

TEST_CASE("zero eligible targets leaves recall absent") {
    std::vector<TargetResult> results;
    results.push_back(make_result("empty", 1, 1, 0, SkipReason::BelowVisibilityFilter));
    results.push_back(make_result("full", 2, 1, 10));
    const RecallReport report = score_results(results, default_cfg(), 20.0, 0.3);
    REQUIRE(report.datasets.size() == 2);
    CHECK_FALSE(report.datasets[0].recall.has_value());
    CHECK(*report.datasets[1].recall == 1.0);
    // The undefined dataset is excluded from the mean entirely.
    CHECK(*report.overall == 1.0);
}

TEST_CASE("empty union counts against recall with a diagnostic") {
    std::vector<TargetResult> results;
    results.push_back(make_result("d", 1, 1, 10));
    results.push_back(make_result("d", 2, 1, 0, SkipReason::EmptyUnion));
    const RecallReport report = score_results(results, default_cfg(), 20.0, 0.3);
    CHECK(report.datasets[0].counts.empty_union == 1);
    CHECK(report.datasets[0].counts.evaluated == 2);
    CHECK(*report.datasets[0].recall == 0.5);
}

TEST_CASE("score is permutation invariant") {
    std::vector<TargetResult> results;
    for (int i = 0; i < 12; ++i) {
        results.push_back(make_result(i % 2 ? "a" : "b", i, 1 + i % 3, i % 11));
    }
    const RecallReport base = score_results(results, default_cfg(), 20.0, 0.3);
    std::mt19937_64 rng(71);
    std::shuffle(results.begin(), results.end(), rng);
    const RecallReport shuffled = score_results(results, default_cfg(), 20.0, 0.3);
    CHECK(report_to_json(base) == report_to_json(shuffled));
}

TEST_CASE("sweep matches hand-computed errors and stays monotone") {
    std::vector<TargetResult> results;
    results.push_back(make_result("d", 1, 1, 9));  // error 0.1 at tau=20
    results.push_back(make_result("d", 2, 1, 5));  // error 0.5 at tau=20
    const EvalConfig cfg = default_cfg();

    SweepGrid grid = sweep(results, cfg, {20.0}, {0.3, 0.6});
    REQUIRE(grid.overall.size() == 1);
    CHECK(*grid.overall[0][0] == 0.5);
    CHECK(*grid.overall[0][1] == 1.0);

    // Errors collapse to 0 once tau clears 50 mm: recall hits 1.0 everywhere.
    grid = sweep(results, cfg, {5.0, 20.0, 60.0}, {0.05, 0.3, 0.6, 1.0});
    for (size_t i = 0; i < grid.taus.size(); ++i) {
        for (size_t j = 0; j + 1 < grid.thetas.size(); ++j) {
            CHECK(*grid.overall[i][j] <= *grid.overall[i][j + 1]);
        }
    }
    for (size_t j = 0; j < grid.thetas.size(); ++j) {
        for (size_t i = 0; i + 1 < grid.taus.size(); ++i) {
            CHECK(*grid.overall[i][j] <= *grid.overall[i + 1][j]);
        }
    }
    CHECK(*grid.overall[2][0] == 1.0);

    // The sweep must leave the results usable at the run's own thresholds.
    const RecallReport after = score_results(results, cfg, cfg.vsd.tau_mm, cfg.vsd.theta);
    CHECK(*after.datasets[0].recall == 0.5);
}

TEST_CASE("visibility histogram bins by largest fraction and recounts") {
    std::vector<TargetResult> results;
    auto with_fraction = [&](double f, int aligned) {
        TargetResult r = make_result("d", static_cast<int>(results.size()) + 1, 1, aligned);
        r.visible_fraction = f;
        results.push_back(r);
    };
    with_fraction(0.9, 10);   // top bin, fully aligned
    with_fraction(0.35, 0);
    with_fraction(0.35, 10);
    with_fraction(1.0, 10);
    with_fraction(0.10, 0);
    TargetResult skipped = make_result("d", 99, 1, 0, SkipReason::BelowVisibilityFilter);
    skipped.visible_fraction = 0.05;
    results.push_back(skipped);

    EvalConfig cfg = default_cfg();
    score_results(results, cfg, 20.0, 0.3);
    const std::vector<double> edges = {0.0, 0.25, 0.5, 0.75, 1.0};
    const auto bins = recall_by_visible_fraction(results, edges);
    REQUIRE(bins.size() == 4);

    // Independent recount.
    std::vector<std::size_t> want_n(4, 0), want_c(4, 0);
    for (const TargetResult& r : results) {
        if (r.skip == SkipReason::BelowVisibilityFilter) continue;
        size_t b = 0;
        while (b + 1 < 4 && r.visible_fraction > edges[b + 1]) ++b;
        want_n[b]++;
        want_c[b] += r.correct ? 1 : 0;
    }
    for (size_t b = 0; b < 4; ++b) {
        CHECK(bins[b].targets == want_n[b]);
        CHECK(bins[b].correct == want_c[b]);
        if (want_n[b] > 0) {
            CHECK(*bins[b].recall ==
                  static_cast<double>(want_c[b]) / static_cast<double>(want_n[b]));
        } else {
            CHECK_FALSE(bins[b].recall.has_value());
        }
    }
    CHECK(bins[3].targets == 2);  // 0.9 and 1.0 both in the top bin

    CHECK_THROWS_AS(recall_by_visible_fraction(results, {0.0}), EmptyBins);
    CHECK_THROWS_AS(recall_by_visible_fraction(results, {0.0, 0.5}), EmptyBins);
    CHECK_THROWS_AS(recall_by_visible_fraction(results, {0.1, 1.0}), EmptyBins);
    CHECK_THROWS_AS(recall_by_visible_fraction(results, {0.0, 0.6, 0.4, 1.0}), EmptyBins);
}

TEST_CASE("pipeline: parallel equals sequential and correctness is reproducible") {
    testutil::TempDir dir("pipe");
    generate_fixture_dataset(dir.path());
    const auto datasets = load_dataset_root(dir.path());
    const auto targets = load_targets(dir.path() / "targets.json");
    const auto estimates = load_estimates(dir.path() / "estimates_exact.csv");
    const EvalConfig cfg = default_cfg();

    const EvalRun seq = run_evaluation(datasets, targets, estimates, cfg, 1);
    const EvalRun par = run_evaluation(datasets, targets, estimates, cfg, 4);
    CHECK(report_to_json(seq.report) == report_to_json(par.report));
    CHECK(ledger_to_csv(seq.results) == ledger_to_csv(par.results));

    // Re-run one correct target in isolation; no cross-target state may leak.
    const Dataset& ds = datasets[0];
    for (const TargetResult& r : seq.results) {
        if (!r.correct) continue;
        const SceneImage* scene = ds.find_image(r.target.scene_id, r.target.im_id);
        REQUIRE(scene != nullptr);
        std::vector<const EstimateRecord*> mine;
        for (const EstimateRecord& e : estimates) {
            if (e.scene_id == r.target.scene_id && e.im_id == r.target.im_id &&
                e.obj_id == r.target.obj_id) {
                mine.push_back(&e);
            }
        }
        const DistanceMap dist = depth_to_distance(scene->depth, scene->intrinsics);
        const TargetResult redo = evaluate_target(r.target, ds.manifest.name, mine, *scene,
                                                  dist, *ds.find_model(r.target.obj_id), cfg);
        CHECK(redo.correct);
        CHECK(redo.error->value == r.error->value);
        break;
    }

    // Unmatched and duplicate estimate rows surface as warnings.
    std::vector<EstimateRecord> noisy = estimates;
    noisy.push_back(estimates[0]);             // duplicate row for one target
    EstimateRecord stray = estimates[0];
    stray.obj_id = 999;                        // matches nothing
    noisy.push_back(stray);
    const EvalRun warned = run_evaluation(datasets, targets, noisy, cfg, 1);
    CHECK(warned.warnings.size() == 2);
    CHECK(report_to_json(warned.report) == report_to_json(seq.report));
}
