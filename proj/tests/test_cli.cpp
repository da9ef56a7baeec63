#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <string>

#include "posebench/fixture.hpp"
#include "posebench/fs_util.hpp"
#include "test_util.hpp"

using json = nlohmann::json;

namespace {

std::string bin_path() {
    const char* bin = std::getenv("POSEBENCH_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "POSEBENCH_BIN must point at the cli binary");
    return bin;
}

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args, const std::filesystem::path& scratch) {
    const auto out_file = scratch / "stdout.txt";
    const auto err_file = scratch / "stderr.txt";
    const std::string cmd = bin_path() + " " + args + " > " + out_file.string() + " 2> " +
                            err_file.string();
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = posebench::read_text_file(out_file);
    r.err = posebench::read_text_file(err_file);
    return r;
}

std::string slurp(const std::filesystem::path& p) { return posebench::read_text_file(p); }

struct CliFixture {
    testutil::TempDir dir{"cli"};
    std::filesystem::path data;

    CliFixture() {
        data = dir.path() / "data";
        posebench::generate_fixture_dataset(data);
    }

    std::string eval_args(const std::string& out_name, const std::string& extra = "") const {
        return "eval --dataset " + data.string() + " --targets " +
               (data / "targets.json").string() + " --estimates " +
               (data / "estimates_exact.csv").string() + " --out " +
               (dir.path() / out_name).string() + (extra.empty() ? "" : " " + extra);
    }
};

}  // namespace

TEST_CASE("eval runs clean and is byte-stable across reruns and workers") {
    CliFixture fx;

    const CliResult first = run_cli(fx.eval_args("run1"), fx.dir.path());
    CHECK(first.exit_code == 0);
    CHECK(first.out.find("overall recall: 1.000000") != std::string::npos);

    const json report = json::parse(slurp(fx.dir.path() / "run1" / "report.json"));
    CHECK(report.at("overall").get<double>() == 1.0);
    CHECK(report.at("tau_mm").get<double>() == 20.0);
    CHECK(report.at("theta").get<double>() == 0.3);
    CHECK(report.at("delta_mm").get<double>() == 15.0);

    const CliResult again = run_cli(fx.eval_args("run2"), fx.dir.path());
    CHECK(again.exit_code == 0);
    const CliResult parallel = run_cli(fx.eval_args("run3", "--workers 8"), fx.dir.path());
    CHECK(parallel.exit_code == 0);

    for (const char* name : {"report.json", "ledger.csv", "histogram.csv"}) {
        const std::string base = slurp(fx.dir.path() / "run1" / name);
        CHECK(base == slurp(fx.dir.path() / "run2" / name));
        CHECK(base == slurp(fx.dir.path() / "run3" / name));
    }
}

TEST_CASE("dataset root can come from the environment") {
    CliFixture fx;
    const std::string cmd = "POSEBENCH_DATASET=" + fx.data.string() + " " + bin_path() +
                            " validate > " + (fx.dir.path() / "o.txt").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(status) == 0);
}

TEST_CASE("error paths map to documented exit codes") {
    CliFixture fx;

    // Missing estimates file: I/O failure, exit 1, path named.
    const std::string missing = (fx.dir.path() / "nope.csv").string();
    const CliResult io = run_cli("eval --dataset " + fx.data.string() + " --targets " +
                                     (fx.data / "targets.json").string() + " --estimates " +
                                     missing + " --out " + (fx.dir.path() / "io").string(),
                                 fx.dir.path());
    CHECK(io.exit_code == 1);
    CHECK(io.err.find("nope.csv") != std::string::npos);

    // theta = 0 violates the config contract: validation failure, exit 2.
    const CliResult validation = run_cli(fx.eval_args("bad", "--theta 0"), fx.dir.path());
    CHECK(validation.exit_code == 2);
    CHECK(!validation.err.empty());

    const CliResult usage = run_cli("eval --no-such-flag", fx.dir.path());
    CHECK(usage.exit_code != 0);
}

TEST_CASE("validate flags datasets broken on disk") {
    CliFixture fx;
    const CliResult ok = run_cli("validate --dataset " + fx.data.string(), fx.dir.path());
    CHECK(ok.exit_code == 0);

    // Ground truth with a non-orthonormal rotation: named by scene/image/row.
    const auto gt_path = fx.data / "scenes" / "000003" / "scene_gt.json";
    std::string gt = slurp(gt_path);
    const auto pos = gt.find("1.0");
    REQUIRE(pos != std::string::npos);
    gt.replace(pos, 3, "1.7");
    {
        std::ofstream out(gt_path, std::ios::binary);
        out << gt;
    }
    const CliResult broken = run_cli("validate --dataset " + fx.data.string(), fx.dir.path());
    CHECK(broken.exit_code == 2);
    CHECK(broken.err.find("000003") != std::string::npos);  // scene
    CHECK(broken.err.find("image 1") != std::string::npos);
    CHECK(broken.err.find("instance 0") != std::string::npos);
}

TEST_CASE("sweep agrees with independent eval runs point by point") {
    CliFixture fx;
    const std::string sweep_args =
        "sweep --dataset " + fx.data.string() + " --targets " +
        (fx.data / "targets.json").string() + " --estimates " +
        (fx.data / "estimates_exact.csv").string() + " --out " +
        (fx.dir.path() / "sweep").string() + " --taus 10,20 --thetas 0.15,0.45";
    const CliResult swept = run_cli(sweep_args, fx.dir.path());
    CHECK(swept.exit_code == 0);

    // Parse the grid and re-run eval at each point.
    std::istringstream csv(slurp(fx.dir.path() / "sweep" / "sweep.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "tau_mm,theta,overall_recall");
    int rows = 0;
    while (std::getline(csv, line)) {
        REQUIRE(!line.empty());
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        const std::string tau = line.substr(0, c1);
        const std::string theta = line.substr(c1 + 1, c2 - c1 - 1);
        const double grid_recall = std::stod(line.substr(c2 + 1));

        const std::string out_name = "point" + std::to_string(rows);
        const CliResult point = run_cli(
            fx.eval_args(out_name, "--tau " + tau + " --theta " + theta), fx.dir.path());
        CHECK(point.exit_code == 0);
        const json report = json::parse(slurp(fx.dir.path() / out_name / "report.json"));
        CHECK(report.at("overall").get<double>() == grid_recall);
        ++rows;
    }
    CHECK(rows == 4);

    // The sweep's own report.json is the run at the default thresholds.
    const json sweep_report = json::parse(slurp(fx.dir.path() / "sweep" / "report.json"));
    const CliResult base = run_cli(fx.eval_args("defaults"), fx.dir.path());
    CHECK(base.exit_code == 0);
    CHECK(sweep_report == json::parse(slurp(fx.dir.path() / "defaults" / "report.json")));
}
