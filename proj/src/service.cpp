#include "dragkit/service.hpp"

#include <atomic>
#include <regex>

#include <httplib.h>

#include "dragkit/error.hpp"
#include "dragkit/metrics.hpp"
#include "dragkit/png_io.hpp"
#include "dragkit/region.hpp"

namespace dragkit {

struct Service::Job {
    JobRecord record;
    Field z0;
    std::vector<RegionOp> ops;
    std::atomic<bool> cancel{false};
};

namespace {

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

Reply json_reply(int status, const Json& j) { return {status, j.dump(), "application/json"}; }

Reply error_reply(int status, const std::string& message, const std::optional<std::string>& path = {}) {
    Json j{{"error", message}};
    j["path"] = path ? Json(*path) : Json(nullptr);
    return json_reply(status, j);
}

Json parse_body(const std::string& body) {
    try {
        Json j = Json::parse(body);
        if (!j.is_object()) throw FormatError("$", "request body must be a JSON object");
        return j;
    } catch (const Json::parse_error& e) {
        throw FormatError("$", std::string("malformed JSON: ") + e.what());
    }
}

void reject_unknown(const Json& j, std::initializer_list<const char*> known) {
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || item.key() == k;
        if (!ok) throw FormatError(item.key(), "unknown field");
    }
}

const Json& require(const Json& j, const char* key) {
    if (!j.contains(key)) throw FormatError(key, "missing field");
    return j[key];
}

int int_field(const Json& j, const char* key, std::optional<int> fallback = {}) {
    if (!j.contains(key)) {
        if (fallback) return *fallback;
        throw FormatError(key, "missing field");
    }
    if (!j[key].is_number_integer()) throw FormatError(key, "expected an integer");
    return j[key].get<int>();
}

std::vector<std::uint8_t> optional_png(const Json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return {};
    if (!j[key].is_string()) throw FormatError(key, "expected a base64 string");
    try {
        return base64_decode(j[key].get<std::string>());
    } catch (const FormatError& e) {
        throw FormatError(key, e.message());
    }
}

Json intent_result_to_json(const IntentResult& r) {
    Json labels = Json::array();
    for (const auto& l : r.candidate_labels) {
        labels.push_back(l ? Json(std::string(to_string(*l))) : Json(nullptr));
    }
    Json j{{"label", std::string(to_string(r.label))},
           {"candidates", r.candidates},
           {"candidate_labels", std::move(labels)},
           {"truncated", r.truncated},
           {"warnings", r.warnings},
           {"description", r.description}};
    j["chosen_index"] = r.chosen_index ? Json(*r.chosen_index) : Json(nullptr);
    return j;
}

template <class F>
Reply guarded(F&& f) {
    try {
        return f();
    } catch (const FormatError& e) {
        return error_reply(400, e.message(), e.path());
    } catch (const IntentConfigError& e) {
        return error_reply(503, e.what());
    } catch (const IntentTimeoutError& e) {
        return error_reply(504, e.what());
    } catch (const IntentHttpError& e) {
        Json j{{"error", e.what()}, {"path", nullptr}, {"upstream_status", e.status()}};
        return json_reply(502, j);
    } catch (const IntentParseError& e) {
        Json j{{"error", e.what()}, {"path", nullptr}, {"raw_text", e.raw_text()}};
        return json_reply(502, j);
    } catch (const IntentError& e) {
        return error_reply(502, e.what());
    } catch (const IoError& e) {
        return error_reply(500, e.what());
    } catch (const Error& e) {
        return error_reply(400, e.what());
    }
}

}  // namespace

std::string_view to_string(JobStatus status) noexcept {
    switch (status) {
        case JobStatus::Queued: return "queued";
        case JobStatus::Running: return "running";
        case JobStatus::Done: return "done";
        case JobStatus::Failed: return "failed";
    }
    return "failed";
}

Json job_to_json(const JobRecord& job) {
    Json traj = Json::array();
    for (const auto& op : job.centroid_trajectory) {
        Json pts = Json::array();
        for (Point2 p : op) pts.push_back(point_to_json(p));
        traj.push_back(std::move(pts));
    }
    Json j{{"id", job.id},
           {"status", std::string(to_string(job.status))},
           {"config", drag_config_to_json(job.config)},
           {"progress",
            {{"iteration", job.iteration},
             {"total", job.total},
             {"fraction", job.total > 0 ? static_cast<double>(job.iteration) / job.total : 0.0}}},
           {"loss_trajectory", job.loss_trajectory},
           {"centroid_trajectory", std::move(traj)}};
    if (job.result) {
        Json r = drag_result_to_json(*job.result);
        r["final_latent"] = base64_encode(encode_latent(job.result->final_z));
        j["result"] = std::move(r);
    } else {
        j["result"] = nullptr;
    }
    j["error"] = job.error ? Json(*job.error) : Json(nullptr);
    return j;
}

Field field_from_json(const Json& j, const std::string& path) {
    if (!j.is_object()) throw FormatError(path.empty() ? "$" : path, "expected an object");
    if (j.size() != 1 || (!j.contains("latent") && !j.contains("image"))) {
        throw FormatError(path.empty() ? "$" : path, "expected exactly one of \"latent\" or \"image\"");
    }
    const bool latent = j.contains("latent");
    const std::string key = join(path, latent ? "latent" : "image");
    const Json& v = latent ? j["latent"] : j["image"];
    if (!v.is_string()) throw FormatError(key, "expected a base64 string");
    try {
        const auto bytes = base64_decode(v.get<std::string>());
        return latent ? decode_latent(bytes) : image_to_field(decode_png(bytes));
    } catch (const FormatError& e) {
        throw FormatError(key, e.message());
    } catch (const IoError& e) {
        throw FormatError(key, e.what());
    }
}

Service::Service(ServiceOptions options) : options_(std::move(options)) {
    int n = options_.workers;
    if (n <= 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    for (int i = 0; i < n; ++i) workers_.emplace_back([this] { worker_loop(); });
}

Service::~Service() {
    stop();
    {
        std::lock_guard lock(mutex_);
        shutting_down_ = true;
        for (auto& [id, job] : jobs_) job->cancel = true;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
}

Reply Service::handle(const std::string& method, const std::string& path, const std::string& body) {
    static const std::regex job_re(R"(^/jobs/([^/]+)$)");
    std::smatch m;
    if (method == "POST" && path == "/preview") return preview(body);
    if (method == "POST" && path == "/jobs") return submit_job(body);
    if (method == "POST" && path == "/eval") return evaluate(body);
    if (method == "POST" && path == "/intent") return intent(body);
    if (std::regex_match(path, m, job_re)) {
        if (method == "GET") return get_job(m[1].str());
        if (method == "DELETE") return cancel_job(m[1].str());
        return error_reply(405, "method not allowed");
    }
    return error_reply(404, "no route for " + method + " " + path);
}

Reply Service::preview(const std::string& body) const {
    return guarded([&] {
        const Json j = parse_body(body);
        reject_unknown(j, {"operations", "k", "K", "overlay"});
        const auto ops = region_ops_from_json(require(j, "operations"), "operations");
        const int K = int_field(j, "K");
        const int k = int_field(j, "k");
        if (K < 1) throw FormatError("K", "must be >= 1");
        if (k < 0) throw FormatError("k", "must be >= 0");
        bool overlay = true;
        if (j.contains("overlay")) {
            if (!j["overlay"].is_boolean()) throw FormatError("overlay", "expected true or false");
            overlay = j["overlay"].get<bool>();
        }

        const Mask2D& first = ops.front().source_mask();
        Mask2D all_src(first.width(), first.height());
        Mask2D all_tgt(first.width(), first.height());
        Json masks = Json::array();
        for (const RegionOp& op : ops) {
            const AffineTransform t = transform_at(op, k, K);
            const Mask2D target = target_mask_at(op, k, K);
            all_src |= op.source_mask();
            all_tgt |= target;
            const auto m = t.matrix();
            masks.push_back({{"source", mask_png_json(op.source_mask())},
                             {"target", mask_png_json(target)},
                             {"transform", {m[0], m[1], m[2], m[3], m[4], m[5]}}});
        }
        Json out{{"k", k},
                 {"K", K},
                 {"width", first.width()},
                 {"height", first.height()},
                 {"masks", std::move(masks)}};
        out["overlay"] = overlay ? Json(base64_encode(encode_png(render_overlay(all_src, all_tgt))))
                                 : Json(nullptr);
        return json_reply(200, out);
    });
}

Reply Service::submit_job(const std::string& body) {
    return guarded([&] {
        const Json j = parse_body(body);
        reject_unknown(j, {"latent", "image", "operations", "config"});
        Json source = Json::object();
        for (const char* key : {"latent", "image"}) {
            if (j.contains(key)) source[key] = j[key];
        }
        Field z0 = field_from_json(source, "");
        auto ops = region_ops_from_json(require(j, "operations"), "operations");
        const DragConfig config =
            j.contains("config") ? drag_config_from_json(j["config"], "config") : DragConfig{};
        if (ops.front().source_mask().width() != z0.width() ||
            ops.front().source_mask().height() != z0.height()) {
            throw FormatError("operations.0.mask", "mask size differs from the latent grid");
        }
        (void)make_extractor(config.extractor)->feature_size(z0.height(), z0.width());

        auto job = std::make_shared<Job>();
        job->z0 = std::move(z0);
        job->ops = std::move(ops);
        job->record.config = config;
        job->record.total = config.total_iterations();
        job->record.centroid_trajectory.resize(job->ops.size());
        std::string id;
        {
            std::lock_guard lock(mutex_);
            id = "job-" + std::to_string(next_id_++);
            job->record.id = id;
            jobs_[id] = job;
            queue_.push_back(job);
        }
        cv_.notify_one();
        return json_reply(202, Json{{"id", id}, {"status", "queued"}});
    });
}

std::optional<JobRecord> Service::job(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) return std::nullopt;
    return it->second->record;
}

Reply Service::get_job(const std::string& id) const {
    const auto rec = job(id);
    if (!rec) return error_reply(404, "unknown job '" + id + "'");
    return json_reply(200, job_to_json(*rec));
}

Reply Service::cancel_job(const std::string& id) {
    std::lock_guard lock(mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) return error_reply(404, "unknown job '" + id + "'");
    Job& job = *it->second;
    if (job.record.status == JobStatus::Done || job.record.status == JobStatus::Failed) {
        return error_reply(409, "job '" + id + "' already finished");
    }
    job.cancel = true;
    if (job.record.status == JobStatus::Queued) {
        std::erase(queue_, it->second);
        job.record.status = JobStatus::Failed;
        job.record.error = "cancelled";
    }
    return json_reply(202, job_to_json(job.record));
}

Reply Service::evaluate(const std::string& body) const {
    return guarded([&] {
        const Json j = parse_body(body);
        reject_unknown(j, {"original", "edited", "operations", "K", "gradient_mask", "distance",
                           "features", "md"});
        const Field x = field_from_json(require(j, "original"), "original");
        const Field xe = field_from_json(require(j, "edited"), "edited");
        if (!x.same_shape(xe)) throw FormatError("edited", "shape differs from original");
        const auto ops = region_ops_from_json(require(j, "operations"), "operations");
        const int K = int_field(j, "K", 50);
        if (K < 1) throw FormatError("K", "must be >= 1");
        if (ops.front().source_mask().width() != x.width() ||
            ops.front().source_mask().height() != x.height()) {
            throw FormatError("operations.0.mask", "mask size differs from the image grid");
        }
        Mask2D B = j.contains("gradient_mask")
                       ? mask_from_json(j["gradient_mask"], "gradient_mask")
                       : build_gradient_mask(ops, x.width(), x.height(), K).mask;
        if (B.width() != x.width() || B.height() != x.height()) {
            throw FormatError("gradient_mask", "mask size differs from the image grid");
        }
        EvalOptions opts;
        if (j.contains("distance")) {
            if (!j["distance"].is_string()) throw FormatError("distance", "expected a string");
            opts.distance = j["distance"].get<std::string>();
            if (opts.distance != "ssim" && opts.distance != "mad") {
                throw FormatError("distance", "expected \"ssim\" or \"mad\"");
            }
        }
        if (j.contains("features")) {
            // Reuse the extractor schema of the drag config.
            try {
                opts.features =
                    drag_config_from_json(Json{{"extractor", j["features"]}}, "").extractor;
            } catch (const FormatError& e) {
                const std::string p = e.path();
                throw FormatError("features" + p.substr(std::min(p.size(), std::size_t{9})),
                                  e.message());
            }
        }
        if (j.contains("md")) {
            const Json& md = j["md"];
            if (!md.is_object()) throw FormatError("md", "expected an object");
            for (const auto& item : md.items()) {
                if (item.key() != "patch_radius" && item.key() != "scope_radius") {
                    throw FormatError("md." + item.key(), "unknown field");
                }
                if (!item.value().is_number_integer() || item.value().get<int>() < 0) {
                    throw FormatError("md." + item.key(), "expected a non-negative integer");
                }
            }
            opts.md.patch_radius = md.value("patch_radius", opts.md.patch_radius);
            opts.md.scope_radius = md.value("scope_radius", opts.md.scope_radius);
        }
        return json_reply(200, metric_report_to_json(evaluate_edit(x, xe, ops, B, K, opts)));
    });
}

Reply Service::intent(const std::string& body) const {
    return guarded([&] {
        const Json j = parse_body(body);
        reject_unknown(j, {"regions", "original_png", "overlay_png"});
        const Json& regions = require(j, "regions");
        if (!regions.is_array() || regions.empty()) {
            throw FormatError("regions", "expected a non-empty array");
        }
        std::vector<PromptRegion> prompt_regions;
        for (std::size_t i = 0; i < regions.size(); ++i) {
            const std::string p = "regions." + std::to_string(i);
            const Json& r = regions[i];
            if (!r.is_object()) throw FormatError(p, "expected an object");
            for (const auto& item : r.items()) {
                if (item.key() != "begin" && item.key() != "target" && item.key() != "anchor") {
                    throw FormatError(join(p, item.key()), "unknown field");
                }
            }
            if (!r.contains("begin")) throw FormatError(join(p, "begin"), "missing field");
            if (!r.contains("target")) throw FormatError(join(p, "target"), "missing field");
            PromptRegion pr;
            pr.begin = point_from_json(r["begin"], join(p, "begin"));
            pr.target = point_from_json(r["target"], join(p, "target"));
            if (r.contains("anchor") && !r["anchor"].is_null()) {
                pr.anchor = point_from_json(r["anchor"], join(p, "anchor"));
            }
            prompt_regions.push_back(pr);
        }
        IntentRequest req;
        req.original_png = optional_png(j, "original_png");
        req.overlay_png = optional_png(j, "overlay_png");
        req.prompt = build_prompt(prompt_regions);
        const IntentResult result = request_intent(options_.intent, req);
        return json_reply(200, intent_result_to_json(result));
    });
}

void Service::worker_loop() {
    for (;;) {
        std::shared_ptr<Job> job;
        {
            std::unique_lock lock(mutex_);
            cv_.wait(lock, [&] { return shutting_down_ || !queue_.empty(); });
            if (shutting_down_) return;
            job = queue_.front();
            queue_.pop_front();
            job->record.status = JobStatus::Running;
        }
        run_job(job);
    }
}

void Service::run_job(const std::shared_ptr<Job>& job) {
    const ProgressFn progress = [&](const DragProgress& p) {
        std::lock_guard lock(mutex_);
        job->record.iteration = p.iteration;
        job->record.loss_trajectory.push_back(p.loss);
        if (p.centroids) job->record.centroid_trajectory = *p.centroids;
        return !job->cancel.load();
    };
    std::optional<DragResult> result;
    std::optional<std::string> error;
    try {
        result = run_drag(job->z0, job->ops, job->record.config, progress);
    } catch (const CancelledError&) {
        error = "cancelled";
    } catch (const std::exception& e) {
        error = e.what();
    }
    std::lock_guard lock(mutex_);
    if (result) {
        job->record.status = JobStatus::Done;
        job->record.iteration = result->iterations_run;
        job->record.loss_trajectory = result->loss_trajectory;
        job->record.centroid_trajectory = result->centroid_trajectory;
        job->record.result = std::move(result);
    } else {
        job->record.status = JobStatus::Failed;
        job->record.error = std::move(error);
    }
}

int Service::bind() {
    if (bound_port_ >= 0) return bound_port_;
    server_ = std::make_unique<httplib::Server>();
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
        const Reply r = handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    server_->Post("/preview", route);
    server_->Post("/jobs", route);
    server_->Post("/eval", route);
    server_->Post("/intent", route);
    server_->Get(R"(/jobs/([^/]+))", route);
    server_->Delete(R"(/jobs/([^/]+))", route);
    if (options_.port == 0) {
        bound_port_ = server_->bind_to_any_port(options_.host);
    } else {
        bound_port_ = server_->bind_to_port(options_.host, options_.port) ? options_.port : -1;
    }
    if (bound_port_ < 0) {
        server_.reset();
        throw IoError("cannot bind " + options_.host + ":" + std::to_string(options_.port));
    }
    return bound_port_;
}

void Service::listen() {
    bind();
    server_->listen_after_bind();
}

int Service::start() {
    const int port = bind();
    listener_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port;
}

void Service::stop() {
    if (server_) server_->stop();
    if (listener_.joinable()) listener_.join();
}

}  // namespace dragkit
