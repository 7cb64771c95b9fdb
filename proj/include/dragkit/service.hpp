#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dragkit/engine.hpp"
#include "dragkit/intent.hpp"
#include "dragkit/serialize.hpp"

namespace httplib {
class Server;
}

namespace dragkit {

enum class JobStatus { Queued, Running, Done, Failed };
std::string_view to_string(JobStatus status) noexcept;

struct JobRecord {
    std::string id;
    JobStatus status = JobStatus::Queued;
    DragConfig config;
    int iteration = 0;
    int total = 0;
    std::vector<double> loss_trajectory;                    // so far
    std::vector<std::vector<Point2>> centroid_trajectory;  // so far, [op][iteration]
    std::optional<DragResult> result;                       // iff Done
    std::optional<std::string> error;                       // iff Failed
};

/// {"id", "status", "config", "progress": {"iteration", "total", "fraction"},
///  "loss_trajectory", "centroid_trajectory", "result" | null, "error" | null}.
/// The result carries the final latent as base64 "final_latent".
Json job_to_json(const JobRecord& job);

/// {"latent": base64 latent file} or {"image": base64 PNG}.
Field field_from_json(const Json& j, const std::string& path);

struct ServiceOptions {
    std::string host = "127.0.0.1";
    int port = 8765;  // 0 picks a free port
    int workers = 0;  // 0 = logical cores
    IntentEndpoint intent;
};

struct Reply {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

/// Local HTTP front end over the engine, metrics and intent modules. Jobs live
/// in memory only and are lost when the process exits.
///
///   POST   /preview     {"operations", "k", "K"} -> step-k masks (pure)
///   POST   /jobs        {"latent"|"image", "operations", "config"} -> {"id"}
///   GET    /jobs/{id}   JobRecord
///   DELETE /jobs/{id}   cancel; 409 once finished
///   POST   /eval        {"original", "edited", "operations", "K", ...} -> MetricReport
///   POST   /intent      {"regions", "original_png", "overlay_png"} -> IntentResult
///
/// Schema violations give 400 with {"error", "path"}; unknown jobs give 404.
class Service {
public:
    explicit Service(ServiceOptions options = {});
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    Reply handle(const std::string& method, const std::string& path, const std::string& body);

    Reply preview(const std::string& body) const;
    Reply submit_job(const std::string& body);
    Reply get_job(const std::string& id) const;
    Reply cancel_job(const std::string& id);
    Reply evaluate(const std::string& body) const;
    Reply intent(const std::string& body) const;

    std::optional<JobRecord> job(const std::string& id) const;

    /// Binds the listening socket and returns the port. Throws IoError.
    int bind();
    /// Serves until stop(). Calls bind() first when needed.
    void listen();
    /// Runs listen() on a background thread and returns the bound port.
    int start();
    void stop();

    int worker_count() const noexcept { return static_cast<int>(workers_.size()); }

private:
    struct Job;
    void worker_loop();
    void run_job(const std::shared_ptr<Job>& job);

    ServiceOptions options_;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::map<std::string, std::shared_ptr<Job>> jobs_;
    std::deque<std::shared_ptr<Job>> queue_;
    std::uint64_t next_id_ = 1;
    bool shutting_down_ = false;
    std::vector<std::thread> workers_;

    std::unique_ptr<httplib::Server> server_;
    std::thread listener_;
    int bound_port_ = -1;
};

}  // namespace dragkit
