#include "posebench/service.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <random>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "posebench/fs_util.hpp"

namespace posebench {

using nlohmann::json;

const char* to_string(SubmissionStatus status) {
    switch (status) {
        case SubmissionStatus::Queued:
            return "queued";
        case SubmissionStatus::Running:
            return "running";
        case SubmissionStatus::Done:
            return "done";
        case SubmissionStatus::Failed:
            return "failed";
    }
    return "unknown";
}

namespace {

std::string utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

SubmissionStatus status_from_string(const std::string& s) {
    if (s == "queued") return SubmissionStatus::Queued;
    if (s == "running") return SubmissionStatus::Running;
    if (s == "done") return SubmissionStatus::Done;
    if (s == "failed") return SubmissionStatus::Failed;
    throw ParseError("unknown status '" + s + "' in ledger");
}

json error_body(const std::string& message) { return json{{"error", message}}; }

}  // namespace

EvalService::EvalService(ServiceConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.eval.validate();
    std::filesystem::create_directories(cfg_.store_dir / "payloads");
    std::filesystem::create_directories(cfg_.store_dir / "reports");

    datasets_ = load_dataset_root(cfg_.dataset_root);
    if (!cfg_.targets_file.empty()) {
        targets_ = load_targets(cfg_.targets_file);
    } else {
        for (const Dataset& ds : datasets_) {
            const auto derived = derive_targets(ds);
            targets_.insert(targets_.end(), derived.begin(), derived.end());
        }
        std::sort(targets_.begin(), targets_.end());
    }
    replay_ledger();
}

EvalService::~EvalService() { stop(); }

void EvalService::replay_ledger() {
    const std::filesystem::path path = cfg_.store_dir / "ledger.jsonl";
    if (!std::filesystem::exists(path)) {
        return;
    }
    std::ifstream in(path);
    std::string line;
    long long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            ParseError err(path.string() + " line " + std::to_string(line_no) +
                           ": invalid ledger entry");
            err.line = line_no;
            throw err;
        }
        const std::string event = j.value("event", "");
        if (event == "received") {
            Submission sub;
            sub.id = j.at("id").get<std::string>();
            sub.method_name = j.at("method").get<std::string>();
            sub.received_at = j.at("received_at").get<std::string>();
            sub.seq = j.at("seq").get<std::uint64_t>();
            sub.status = SubmissionStatus::Queued;
            next_seq_ = std::max(next_seq_, sub.seq + 1);
            submissions_[sub.id] = std::move(sub);
        } else if (event == "status") {
            const auto it = submissions_.find(j.at("id").get<std::string>());
            if (it == submissions_.end()) {
                continue;  // status for an unknown id; ignore rather than die
            }
            it->second.status = status_from_string(j.at("status").get<std::string>());
            it->second.error = j.value("error", "");
        }
    }
    // Anything that was in flight when the process died runs again.
    std::vector<const Submission*> pending;
    for (auto& [id, sub] : submissions_) {
        if (sub.status == SubmissionStatus::Queued ||
            sub.status == SubmissionStatus::Running) {
            sub.status = SubmissionStatus::Queued;
            pending.push_back(&sub);
        }
    }
    std::sort(pending.begin(), pending.end(),
              [](const Submission* a, const Submission* b) { return a->seq < b->seq; });
    for (const Submission* sub : pending) {
        queue_.push_back(sub->id);
    }
}

void EvalService::append_ledger_line(const std::string& line) {
    // O_APPEND keeps concurrent appends whole; one line per write call.
    std::ofstream out(cfg_.store_dir / "ledger.jsonl", std::ios::app | std::ios::binary);
    if (!out) {
        throw Error("cannot append to submission ledger");
    }
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.flush();
    if (!out) {
        throw Error("short write to submission ledger");
    }
}

std::string EvalService::allocate_id(std::uint64_t seq) const {
    std::random_device rd;
    char buf[64];
    std::snprintf(buf, sizeof buf, "sub-%06llu-%08x", static_cast<unsigned long long>(seq),
                  rd());
    return buf;
}

std::string EvalService::submit(const std::string& payload, const std::string& method_name) {
    if (method_name.empty()) {
        throw Error("method_name must not be empty");
    }
    if (payload.size() > cfg_.max_payload_bytes) {
        throw Error("payload exceeds the size cap of " +
                    std::to_string(cfg_.max_payload_bytes) + " bytes");
    }
    // Reject unparseable payloads before anything is persisted.
    parse_estimates_text(payload, "payload");

    std::lock_guard<std::mutex> lock(mutex_);
    Submission sub;
    sub.seq = next_seq_++;
    sub.id = allocate_id(sub.seq);
    sub.method_name = method_name;
    sub.received_at = utc_now();
    sub.status = SubmissionStatus::Queued;

    atomic_write_file(cfg_.store_dir / "payloads" / (sub.id + ".csv"), payload);
    json line{{"event", "received"},
              {"id", sub.id},
              {"method", sub.method_name},
              {"received_at", sub.received_at},
              {"seq", sub.seq}};
    append_ledger_line(line.dump() + "\n");

    const std::string id = sub.id;
    submissions_[id] = std::move(sub);
    queue_.push_back(id);
    queue_cv_.notify_one();
    return id;
}

std::optional<Submission> EvalService::get_status(const std::string& id) const {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto it = submissions_.find(id);
    if (it == submissions_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::optional<std::string> EvalService::get_report_json(const std::string& id) const {
    const std::filesystem::path path = cfg_.store_dir / "reports" / (id + ".json");
    if (!std::filesystem::exists(path)) {
        return std::nullopt;
    }
    return read_text_file(path);
}

std::vector<LeaderboardEntry> EvalService::leaderboard(
    const std::string& dataset_filter) const {
    std::vector<Submission> done;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        for (const auto& [id, sub] : submissions_) {
            if (sub.status == SubmissionStatus::Done) {
                done.push_back(sub);
            }
        }
    }
    struct Row {
        LeaderboardEntry entry;
        double sort_key = 0.0;
        std::uint64_t seq = 0;
    };
    std::vector<Row> rows;
    for (const Submission& sub : done) {
        const auto report_text = get_report_json(sub.id);
        if (!report_text) {
            continue;
        }
        json report = json::parse(*report_text, nullptr, false);
        if (report.is_discarded()) {
            continue;
        }
        Row row;
        row.entry.method_name = sub.method_name;
        row.entry.submission_id = sub.id;
        row.entry.received_at = sub.received_at;
        row.seq = sub.seq;
        if (report.contains("overall") && report["overall"].is_number()) {
            row.entry.overall = report["overall"].get<double>();
        }
        for (const auto& ds : report.value("datasets", json::array())) {
            if (ds.contains("recall") && ds["recall"].is_number()) {
                row.entry.per_dataset[ds.at("name").get<std::string>()] =
                    ds["recall"].get<double>();
            }
        }
        if (dataset_filter.empty()) {
            if (!row.entry.overall) {
                continue;
            }
            row.sort_key = *row.entry.overall;
        } else {
            const auto it = row.entry.per_dataset.find(dataset_filter);
            if (it == row.entry.per_dataset.end()) {
                continue;
            }
            row.sort_key = it->second;
        }
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.sort_key != b.sort_key) {
            return a.sort_key > b.sort_key;
        }
        return a.seq < b.seq;  // earlier submission wins the tie
    });
    std::vector<LeaderboardEntry> entries;
    entries.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].entry.rank = static_cast<int>(i + 1);
        entries.push_back(std::move(rows[i].entry));
    }
    return entries;
}

void EvalService::set_status(const std::string& id, SubmissionStatus status,
                             const std::string& error) {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto it = submissions_.find(id);
    if (it == submissions_.end()) {
        return;
    }
    Submission& sub = it->second;
    const bool legal =
        (sub.status == SubmissionStatus::Queued && status == SubmissionStatus::Running) ||
        (sub.status == SubmissionStatus::Running &&
         (status == SubmissionStatus::Done || status == SubmissionStatus::Failed));
    if (!legal) {
        throw Error("illegal status transition for submission " + id);
    }
    json line{{"event", "status"}, {"id", id}, {"status", to_string(status)}};
    if (!error.empty()) {
        line["error"] = error;
    }
    append_ledger_line(line.dump() + "\n");
    sub.status = status;
    sub.error = error;
}

void EvalService::worker_loop() {
    for (;;) {
        std::string id;
        {
            std::unique_lock<std::mutex> lock(mutex_);
            queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (stopping_) {
                return;
            }
            id = queue_.front();
            queue_.pop_front();
            worker_busy_ = true;
        }
        try {
            set_status(id, SubmissionStatus::Running);
            const std::string payload =
                read_text_file(cfg_.store_dir / "payloads" / (id + ".csv"));
            const auto estimates = parse_estimates_text(payload, "payload");
            EvalRun run =
                run_evaluation(datasets_, targets_, estimates, cfg_.eval, cfg_.workers);
            atomic_write_file(cfg_.store_dir / "reports" / (id + ".json"),
                              report_to_json(run.report));
            set_status(id, SubmissionStatus::Done);
        } catch (const std::exception& e) {
            try {
                set_status(id, SubmissionStatus::Failed, e.what());
            } catch (...) {
                // The ledger is unwritable; nothing sane left to do for this job.
            }
        }
        {
            std::lock_guard<std::mutex> lock(mutex_);
            worker_busy_ = false;
        }
        idle_cv_.notify_all();
    }
}

void EvalService::start_worker() {
    if (!worker_.joinable()) {
        worker_ = std::thread([this] { worker_loop(); });
    }
}

void EvalService::drain() {
    std::unique_lock<std::mutex> lock(mutex_);
    idle_cv_.wait(lock, [&] { return queue_.empty() && !worker_busy_; });
}

void EvalService::stop() {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        stopping_ = true;
    }
    queue_cv_.notify_all();
    if (worker_.joinable()) {
        worker_.join();
    }
    if (http_) {
        http_->stop();
    }
    {
        std::lock_guard<std::mutex> lock(mutex_);
        stopping_ = false;  // allow start_worker again after a stop
    }
}

void EvalService::setup_routes() {
    http_ = std::make_unique<httplib::Server>();
    http_->set_payload_max_length(cfg_.max_payload_bytes + 65536);

    http_->Post("/v1/submissions", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string method_name = req.get_param_value("method_name");
        if (method_name.empty()) {
            res.status = 400;
            res.set_content(error_body("missing method_name query parameter").dump() + "\n",
                            "application/json");
            return;
        }
        if (req.body.size() > cfg_.max_payload_bytes) {
            res.status = 413;
            res.set_content(error_body("payload exceeds size cap").dump() + "\n",
                            "application/json");
            return;
        }
        try {
            const std::string id = submit(req.body, method_name);
            json body{{"id", id}, {"status", "queued"}};
            res.status = 202;
            res.set_content(body.dump() + "\n", "application/json");
        } catch (const ParseError& e) {
            json body = error_body(e.what());
            if (e.line >= 0) {
                body["line"] = e.line;
            }
            res.status = 400;
            res.set_content(body.dump() + "\n", "application/json");
        } catch (const NonFiniteValue& e) {
            json body = error_body(e.what());
            if (e.line >= 0) {
                body["line"] = e.line;
            }
            res.status = 400;
            res.set_content(body.dump() + "\n", "application/json");
        } catch (const Error& e) {
            res.status = 400;
            res.set_content(error_body(e.what()).dump() + "\n", "application/json");
        }
    });

    http_->Get(R"(/v1/submissions/([A-Za-z0-9_-]+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                   const std::string id = req.matches[1];
                   const auto sub = get_status(id);
                   if (!sub) {
                       res.status = 404;
                       res.set_content(error_body("unknown submission id").dump() + "\n",
                                       "application/json");
                       return;
                   }
                   json body{{"id", sub->id},
                             {"method_name", sub->method_name},
                             {"received_at", sub->received_at},
                             {"status", to_string(sub->status)}};
                   if (sub->status == SubmissionStatus::Failed) {
                       body["error"] = sub->error;
                   }
                   if (sub->status == SubmissionStatus::Done) {
                       const auto report = get_report_json(sub->id);
                       if (report) {
                           body["report"] = json::parse(*report);
                       }
                   }
                   res.set_content(body.dump(2) + "\n", "application/json");
               });

    http_->Get("/v1/leaderboard", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string filter = req.get_param_value("dataset");
        json entries = json::array();
        for (const LeaderboardEntry& e : leaderboard(filter)) {
            json row{{"rank", e.rank},
                     {"method_name", e.method_name},
                     {"submission_id", e.submission_id},
                     {"received_at", e.received_at},
                     {"per_dataset", e.per_dataset}};
            if (e.overall) {
                row["overall"] = *e.overall;
            } else {
                row["overall"] = nullptr;
            }
            entries.push_back(std::move(row));
        }
        json body{{"dataset", filter.empty() ? json(nullptr) : json(filter)},
                  {"entries", std::move(entries)}};
        res.set_content(body.dump(2) + "\n", "application/json");
    });
}

int EvalService::serve(const std::string& host, int port) {
    setup_routes();
    if (port == 0) {
        bound_port_ = http_->bind_to_any_port(host);
        if (bound_port_ < 0) {
            throw Error("cannot bind to any port on " + host);
        }
    } else {
        if (!http_->bind_to_port(host, port)) {
            throw Error("cannot bind to " + host + ":" + std::to_string(port));
        }
        bound_port_ = port;
    }
    start_worker();
    http_->listen_after_bind();
    return 0;
}

}  // namespace posebench
