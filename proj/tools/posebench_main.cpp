#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "posebench/fixture.hpp"
#include "posebench/fs_util.hpp"
#include "posebench/scoring.hpp"
#include "posebench/service.hpp"

namespace {

using namespace posebench;

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;

struct CommonOptions {
    std::string dataset_root;
    std::string targets_file;
    std::string estimates_file;
    std::string out_dir;
    double tau = 20.0;
    double theta = 0.3;
    double delta = 15.0;
    int workers = 1;
};

void add_threshold_flags(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("--tau", opt.tau, "Misalignment tolerance tau in mm")
        ->capture_default_str();
    cmd->add_option("--theta", opt.theta, "Correctness threshold theta, fraction in (0,1]")
        ->capture_default_str();
    cmd->add_option("--delta", opt.delta, "Occlusion tolerance delta in mm")
        ->capture_default_str();
}

void add_eval_flags(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("--dataset", opt.dataset_root,
                    "Dataset root (one dataset or a directory of datasets)")
        ->envname("POSEBENCH_DATASET")
        ->required();
    cmd->add_option("--targets", opt.targets_file, "Test target list (JSON)")->required();
    cmd->add_option("--estimates", opt.estimates_file, "Estimate file (CSV)")->required();
    cmd->add_option("--out", opt.out_dir, "Output directory")->required();
    cmd->add_option("--workers", opt.workers, "Worker threads for evaluation")
        ->capture_default_str();
    add_threshold_flags(cmd, opt);
}

EvalConfig make_config(const CommonOptions& opt) {
    EvalConfig cfg;
    cfg.vsd.tau_mm = opt.tau;
    cfg.vsd.theta = opt.theta;
    cfg.visibility.delta_mm = opt.delta;
    cfg.validate();
    return cfg;
}

EvalRun run_from_files(const CommonOptions& opt, const EvalConfig& cfg) {
    const auto datasets = load_dataset_root(opt.dataset_root);
    const auto targets = load_targets(opt.targets_file);
    const auto estimates = load_estimates(opt.estimates_file);
    EvalRun run = run_evaluation(datasets, targets, estimates, cfg, opt.workers);
    for (const std::string& w : run.warnings) {
        std::fprintf(stderr, "warning: %s\n", w.c_str());
    }
    return run;
}

void write_common_outputs(const CommonOptions& opt, const EvalRun& run) {
    std::filesystem::create_directories(opt.out_dir);
    const std::filesystem::path out(opt.out_dir);
    atomic_write_file(out / "report.json", report_to_json(run.report));
    atomic_write_file(out / "ledger.csv", ledger_to_csv(run.results));
    const std::vector<double> edges = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    atomic_write_file(out / "histogram.csv",
                      histogram_to_csv(recall_by_visible_fraction(run.results, edges)));
}

void print_overall(const RecallReport& report) {
    if (report.overall) {
        std::printf("overall recall: %.6f\n", *report.overall);
    } else {
        std::printf("overall recall: undefined (no eligible targets)\n");
    }
}

int cmd_eval(const CommonOptions& opt) {
    const EvalConfig cfg = make_config(opt);
    const EvalRun run = run_from_files(opt, cfg);
    write_common_outputs(opt, run);
    print_overall(run.report);
    return kExitOk;
}

int cmd_sweep(const CommonOptions& opt, const std::vector<double>& taus,
              const std::vector<double>& thetas) {
    const EvalConfig cfg = make_config(opt);
    EvalRun run = run_from_files(opt, cfg);
    const SweepGrid grid = sweep(run.results, cfg, taus.empty() ? std::vector<double>{opt.tau} : taus,
                                 thetas.empty() ? std::vector<double>{opt.theta} : thetas);
    write_common_outputs(opt, run);
    atomic_write_file(std::filesystem::path(opt.out_dir) / "sweep.csv", sweep_to_csv(grid));
    print_overall(run.report);
    return kExitOk;
}

int cmd_validate(const std::string& dataset_root) {
    const std::vector<std::string> findings = validate_dataset_root(dataset_root);
    if (findings.empty()) {
        std::printf("dataset root %s: no findings\n", dataset_root.c_str());
        return kExitOk;
    }
    for (const std::string& f : findings) {
        std::fprintf(stderr, "%s\n", f.c_str());
    }
    std::fprintf(stderr, "%zu finding(s)\n", findings.size());
    return kExitValidation;
}

int cmd_fixturegen(const std::string& out_dir, std::uint64_t seed) {
    const FixtureSummary summary = generate_fixture_dataset(out_dir, seed);
    std::printf("fixture dataset at %s\n", summary.root.string().c_str());
    std::printf("targets: %zu\n", summary.target_count);
    std::printf("occlusion visible fractions: %.4f / %.4f\n", summary.occlusion_low_fraction,
                summary.occlusion_high_fraction);
    return kExitOk;
}

int cmd_serve(const CommonOptions& opt, const std::string& store_dir, const std::string& host,
              int port) {
    ServiceConfig cfg;
    cfg.store_dir = store_dir;
    cfg.dataset_root = opt.dataset_root;
    if (!opt.targets_file.empty()) {
        cfg.targets_file = opt.targets_file;
    }
    cfg.eval = make_config(opt);
    cfg.workers = opt.workers;
    EvalService service(std::move(cfg));
    std::printf("serving on %s port %s\n", host.c_str(),
                port == 0 ? "(auto)" : std::to_string(port).c_str());
    std::fflush(stdout);
    service.serve(host, port);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"6D object pose evaluation toolkit"};
    app.require_subcommand(1);

    CommonOptions opt;
    std::vector<double> taus;
    std::vector<double> thetas;
    std::string store_dir;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::uint64_t seed = 7;

    CLI::App* eval = app.add_subcommand("eval", "Score an estimate file against a dataset");
    add_eval_flags(eval, opt);

    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "Score across a grid of tau/theta thresholds");
    add_eval_flags(sweep_cmd, opt);
    sweep_cmd->add_option("--taus", taus, "Comma-separated tau values (mm)")
        ->delimiter(',');
    sweep_cmd->add_option("--thetas", thetas, "Comma-separated theta values")
        ->delimiter(',');

    CLI::App* validate = app.add_subcommand("validate", "Check a dataset root for consistency");
    validate
        ->add_option("--dataset", opt.dataset_root, "Dataset root to check")
        ->envname("POSEBENCH_DATASET")
        ->required();

    CLI::App* fixturegen =
        app.add_subcommand("fixturegen", "Generate the miniature synthetic dataset");
    fixturegen->add_option("--out", opt.out_dir, "Output directory")->required();
    fixturegen->add_option("--seed", seed, "Noise seed")->capture_default_str();

    CLI::App* serve = app.add_subcommand("serve", "Run the submission and leaderboard service");
    serve->add_option("--dataset", opt.dataset_root, "Dataset root to score against")
        ->envname("POSEBENCH_DATASET")
        ->required();
    serve->add_option("--store", store_dir, "Directory for the submission store")->required();
    serve->add_option("--targets", opt.targets_file,
                      "Target list (default: derive from the ground truth)");
    serve->add_option("--host", host, "Bind address")->capture_default_str();
    serve->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str();
    serve->add_option("--workers", opt.workers, "Worker threads per evaluation")
        ->capture_default_str();
    add_threshold_flags(serve, opt);

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(eval)) {
            return cmd_eval(opt);
        }
        if (app.got_subcommand(sweep_cmd)) {
            return cmd_sweep(opt, taus, thetas);
        }
        if (app.got_subcommand(validate)) {
            return cmd_validate(opt.dataset_root);
        }
        if (app.got_subcommand(fixturegen)) {
            return cmd_fixturegen(opt.out_dir, seed);
        }
        if (app.got_subcommand(serve)) {
            return cmd_serve(opt, store_dir, host, port);
        }
    } catch (const MissingFile& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    }
    return kExitOk;
}
