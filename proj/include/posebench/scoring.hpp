#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "posebench/dataset.hpp"
#include "posebench/pose_metrics.hpp"
#include "posebench/visibility.hpp"

namespace posebench {

struct EvalConfig {
    VsdConfig vsd;                       // tau, theta
    VisibilityConfig visibility;         // delta
    double min_visible_fraction = 0.1;   // instances below this are ineligible

    void validate() const {
        vsd.validate();
        visibility.validate();
        if (min_visible_fraction < 0.0 || min_visible_fraction > 1.0) {
            throw Error("visibility filter must be a fraction in [0, 1]");
        }
    }
};

enum class SkipReason { None, BelowVisibilityFilter, NoEstimate, EmptyUnion };

const char* to_string(SkipReason reason);

struct TargetResult {
    TestTarget target;
    std::string dataset;

    // Largest visible fraction over the image's gt instances of the object.
    double visible_fraction = 0.0;
    // Gt instance indices passing the visibility filter, with the
    // tau-independent pixel statistics of the chosen estimate against each.
    std::vector<int> eligible_instances;
    std::vector<VsdStats> instance_stats;

    bool has_estimate = false;
    double estimate_score = 0.0;
    double estimate_time_s = 0.0;

    SkipReason skip = SkipReason::None;
    int matched_instance = -1;           // gt index, -1 when not matched
    std::optional<PoseError> error;      // VSD at the run's tau
    bool correct = false;
    std::string diagnostic;
};

struct DatasetCounts {
    std::size_t total = 0;
    std::size_t evaluated = 0;  // total minus visibility-skipped
    std::size_t correct = 0;
    std::size_t skipped_visibility = 0;
    std::size_t no_estimate = 0;
    std::size_t empty_union = 0;
};

struct DatasetScore {
    std::string dataset;
    std::optional<double> recall;        // absent when nothing was eligible
    std::map<int, std::optional<double>> per_object;
    DatasetCounts counts;
};

struct RecallReport {
    double tau_mm = 0.0;
    double theta = 0.0;
    double delta_mm = 0.0;
    std::vector<DatasetScore> datasets;  // ordered by name
    std::optional<double> overall;       // unweighted mean of per-dataset recalls
    DatasetCounts totals;
};

// Evaluates one target: picks the highest-score estimate, applies the
// visibility filter per gt instance, renders, and keeps the minimum e_VSD
// over the eligible instances. scene_dist is the test image's distance map.
TargetResult evaluate_target(const TestTarget& target, const std::string& dataset_name,
                             const std::vector<const EstimateRecord*>& estimates,
                             const SceneImage& scene, const DistanceMap& scene_dist,
                             const Mesh& mesh, const EvalConfig& cfg);

// Minimum error over the cached per-instance statistics at this tau; also
// reports which instance attained it. Requires a non-skipped result.
std::pair<double, int> error_at_tau(const TargetResult& result, double tau_mm);

// Re-derives matched/error/correct on every result and aggregates recalls
// for the given thresholds. The single source of truth for both plain
// evaluation and sweeps, so the two can never drift apart.
RecallReport score_results(std::vector<TargetResult>& results, const EvalConfig& cfg,
                           double tau_mm, double theta);

struct SweepGrid {
    std::vector<double> taus;
    std::vector<double> thetas;
    // overall[i][j] is the overall recall at taus[i], thetas[j]; absent when
    // no dataset had eligible targets.
    std::vector<std::vector<std::optional<double>>> overall;
};

SweepGrid sweep(std::vector<TargetResult>& results, const EvalConfig& cfg,
                const std::vector<double>& taus, const std::vector<double>& thetas);

struct VisibilityBin {
    double lo = 0.0;  // exclusive
    double hi = 0.0;  // inclusive
    std::size_t targets = 0;
    std::size_t correct = 0;
    std::optional<double> recall;
};

// Bins every eligible target by the largest visible fraction among its gt
// instances. Edges must ascend and span (0, 1].
std::vector<VisibilityBin> recall_by_visible_fraction(const std::vector<TargetResult>& results,
                                                      const std::vector<double>& bin_edges);

struct EvalRun {
    std::vector<TargetResult> results;  // in target order
    RecallReport report;
    std::vector<std::string> warnings;
};

// Full pipeline over loaded datasets: validates targets, groups estimates,
// renders and scores with the given worker count. Deterministic for any
// worker count.
EvalRun run_evaluation(const std::vector<Dataset>& datasets,
                       const std::vector<TestTarget>& targets,
                       const std::vector<EstimateRecord>& estimates, const EvalConfig& cfg,
                       int workers);

// Machine-readable outputs. All numbers carry 17 significant digits so
// re-runs are byte-identical.
std::string report_to_json(const RecallReport& report);
std::string ledger_to_csv(const std::vector<TargetResult>& results);
std::string sweep_to_csv(const SweepGrid& grid);
std::string histogram_to_csv(const std::vector<VisibilityBin>& bins);

}  // namespace posebench
