#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "posebench/scoring.hpp"

namespace httplib {
class Server;
}

namespace posebench {

enum class SubmissionStatus { Queued, Running, Done, Failed };

const char* to_string(SubmissionStatus status);

struct Submission {
    std::string id;
    std::string method_name;
    std::string received_at;  // UTC, ISO 8601
    std::uint64_t seq = 0;    // arrival order, breaks leaderboard ties
    SubmissionStatus status = SubmissionStatus::Queued;
    std::string error;        // set when Failed
};

struct ServiceConfig {
    std::filesystem::path store_dir;
    std::filesystem::path dataset_root;
    std::filesystem::path targets_file;  // empty: derive targets from the gt
    EvalConfig eval;
    int workers = 1;                     // parallelism inside one evaluation
    std::size_t max_payload_bytes = 8 * 1024 * 1024;
};

struct LeaderboardEntry {
    int rank = 0;
    std::string method_name;
    std::string submission_id;
    std::string received_at;
    std::optional<double> overall;
    std::map<std::string, double> per_dataset;
};

// File-backed submission store plus a single scoring worker. Submissions are
// durable before the submit call returns: payload file first, then a line in
// the append-only ledger. On restart every submission that never reached
// Done/Failed is queued again; Done reports are never rewritten.
class EvalService {
public:
    explicit EvalService(ServiceConfig cfg);
    ~EvalService();

    EvalService(const EvalService&) = delete;
    EvalService& operator=(const EvalService&) = delete;

    // Parses and persists a payload, returns the new submission id.
    // Throws ParseError/NonFiniteValue (bad payload) or Error (size cap).
    std::string submit(const std::string& payload, const std::string& method_name);

    std::optional<Submission> get_status(const std::string& id) const;
    // Raw report JSON for a Done submission.
    std::optional<std::string> get_report_json(const std::string& id) const;

    // Done submissions ranked by overall recall (or by one dataset's recall
    // when dataset_filter is non-empty), ties to the earlier submission.
    std::vector<LeaderboardEntry> leaderboard(const std::string& dataset_filter) const;

    void start_worker();
    void stop();
    // Blocks until the queue is empty and the worker is idle (tests).
    void drain();

    // Binds to the port (0 picks a free one) and serves until stop().
    int serve(const std::string& host, int port);
    int bound_port() const { return bound_port_; }

    const std::vector<Dataset>& datasets() const { return datasets_; }

private:
    void replay_ledger();
    void append_ledger_line(const std::string& line);
    void set_status(const std::string& id, SubmissionStatus status,
                    const std::string& error = "");
    void worker_loop();
    std::string allocate_id(std::uint64_t seq) const;
    void setup_routes();

    ServiceConfig cfg_;
    std::vector<Dataset> datasets_;
    std::vector<TestTarget> targets_;

    mutable std::mutex mutex_;
    std::map<std::string, Submission> submissions_;
    std::deque<std::string> queue_;
    std::uint64_t next_seq_ = 1;
    std::condition_variable queue_cv_;
    std::condition_variable idle_cv_;
    bool worker_busy_ = false;
    bool stopping_ = false;
    std::thread worker_;

    std::unique_ptr<httplib::Server> http_;
    std::atomic<int> bound_port_{-1};
};

}  // namespace posebench
