// dragkit command-line front end. Exit codes: 0 success, 1 validation or
// usage error, 2 I/O error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "dragkit/benchio.hpp"
#include "dragkit/engine.hpp"
#include "dragkit/error.hpp"
#include "dragkit/flow.hpp"
#include "dragkit/metrics.hpp"
#include "dragkit/png_io.hpp"
#include "dragkit/point_drag.hpp"
#include "dragkit/serialize.hpp"
#include "dragkit/service.hpp"

namespace fs = std::filesystem;
using namespace dragkit;

namespace {

// Region ops come either from a dataset sample or from a JSON file holding
// {"operations": [...]} or a bare array.
struct OpsSource {
    std::string dataset;
    std::string name;
    std::string ops_file;

    void add_to(CLI::App* app) {
        app->add_option("--dataset", dataset, "Dataset directory");
        app->add_option("--name", name, "Sample name inside the dataset");
        app->add_option("--ops", ops_file, "Region operations JSON file");
    }

    std::optional<LoadedSample> sample() const {
        if (dataset.empty()) return std::nullopt;
        return load_sample(dataset, name);
    }

    std::vector<RegionOp> ops(const std::optional<LoadedSample>& s) const {
        if (!ops_file.empty()) {
            Json j;
            try {
                j = Json::parse(read_text_file(ops_file));
            } catch (const Json::parse_error& e) {
                throw FormatError("$", std::string("malformed JSON: ") + e.what());
            }
            if (j.is_object()) {
                if (!j.contains("operations")) throw FormatError("operations", "missing field");
                return region_ops_from_json(j["operations"], "operations");
            }
            return region_ops_from_json(j, "");
        }
        if (s) return s->ops;
        throw InvalidArgument("give --ops FILE or --dataset DIR --name NAME");
    }

    void check() const {
        if (ops_file.empty() && (dataset.empty() || name.empty())) {
            throw InvalidArgument("give --ops FILE or --dataset DIR --name NAME");
        }
    }
};

Field load_field(const std::string& path) {
    if (fs::path(path).extension() == ".png") return image_to_field(read_png(path));
    return read_latent(path);
}

std::string frame_name(const char* prefix, int k) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_k%03d.png", prefix, k);
    return buf;
}

Mask2D union_of(const std::vector<Mask2D>& masks) {
    Mask2D u = masks.front();
    for (std::size_t i = 1; i < masks.size(); ++i) u |= masks[i];
    return u;
}

DragConfig load_config(const std::string& path) {
    if (path.empty()) return {};
    Json j;
    try {
        j = Json::parse(read_text_file(path));
    } catch (const Json::parse_error& e) {
        throw FormatError("$", std::string("malformed JSON: ") + e.what());
    }
    return drag_config_from_json(j, "");
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dragkit: region-level drag editing toolkit"};
    app.require_subcommand(1);

    // preview
    auto* preview = app.add_subcommand("preview", "Write step-k target masks and overlays");
    OpsSource preview_src;
    preview_src.add_to(preview);
    int preview_K = 50;
    std::optional<int> preview_k;
    int preview_every = 1;
    std::string preview_out = "preview";
    preview->add_option("--K", preview_K, "Schedule length")->check(CLI::PositiveNumber);
    preview->add_option("--k", preview_k, "Single step to render (default: 0..K)")
        ->check(CLI::NonNegativeNumber);
    preview->add_option("--every", preview_every, "Frame spacing when rendering all steps")
        ->check(CLI::PositiveNumber);
    preview->add_option("--out", preview_out, "Output directory");

    // run
    auto* run = app.add_subcommand("run", "Run the drag optimization");
    OpsSource run_src;
    run_src.add_to(run);
    std::string run_input, run_config, run_out = "run_out", run_method = "region";
    run->add_option("--input", run_input, "Initial latent (.dflt) or image (.png)");
    run->add_option("--config", run_config, "DragConfig JSON file");
    run->add_option("--out", run_out, "Output directory");
    run->add_option("--method", run_method, "region or point")
        ->check(CLI::IsMember({"region", "point"}));

    // eval
    auto* eval = app.add_subcommand("eval", "Score an edit (IF_bg, IF_s2t, IF_s2s, MD1, MD2)");
    OpsSource eval_src;
    eval_src.add_to(eval);
    std::string eval_original, eval_edited, eval_distance = "ssim", eval_label = "edit",
                                            eval_mask;
    int eval_K = 50;
    bool eval_json = false;
    eval->add_option("--original", eval_original, "Original latent or image (default: sample image)");
    eval->add_option("--edited", eval_edited, "Edited latent or image")->required();
    eval->add_option("--K", eval_K, "Schedule length")->check(CLI::PositiveNumber);
    eval->add_option("--distance", eval_distance, "ssim or mad")
        ->check(CLI::IsMember({"ssim", "mad"}));
    eval->add_option("--gradient-mask", eval_mask, "Gradient mask PNG (default: rebuilt)");
    eval->add_option("--label", eval_label, "Row label");
    eval->add_flag("--json", eval_json, "Print JSON instead of a table");

    // validate
    auto* validate = app.add_subcommand("validate", "Validate a benchmark dataset directory");
    std::string validate_dir;
    bool validate_json = false;
    validate->add_option("dir", validate_dir, "Dataset directory")->required();
    validate->add_flag("--json", validate_json, "Print the report as JSON");

    // mask
    auto* mask = app.add_subcommand("mask", "Write the gradient mask B as a PNG");
    OpsSource mask_src;
    mask_src.add_to(mask);
    int mask_K = 50;
    bool mask_no_sweep = false;
    std::string mask_out = "gradient_mask.png";
    mask->add_option("--K", mask_K, "Schedule length")->check(CLI::PositiveNumber);
    mask->add_flag("--no-sweep", mask_no_sweep, "Skip intermediate rotation positions");
    mask->add_option("--out", mask_out, "Output PNG");

    // drift
    auto* drift = app.add_subcommand("drift", "Inversion round-trip drift of a toy solver");
    std::string drift_solver = "rf", drift_input;
    int drift_steps = 25, drift_size = 32;
    double drift_beta = 0.02, drift_ratio = 1.0;
    std::uint64_t drift_seed = 0;
    drift->add_option("--solver", drift_solver, "rf (sin velocity) or ddim (linear predictor)")
        ->check(CLI::IsMember({"rf", "ddim"}));
    drift->add_option("--steps", drift_steps, "Number of steps")->check(CLI::PositiveNumber);
    drift->add_option("--input", drift_input, "Latent or image (default: random field)");
    drift->add_option("--size", drift_size, "Random field size")->check(CLI::PositiveNumber);
    drift->add_option("--seed", drift_seed, "Random field seed");
    drift->add_option("--beta", drift_beta, "DDIM uniform beta");
    drift->add_option("--ratio", drift_ratio, "DDIM data-to-noise ratio of the predictor");

    // serve
    auto* serve = app.add_subcommand("serve", "Run the local HTTP service");
    ServiceOptions serve_opts;
    long long intent_timeout_ms = serve_opts.intent.timeout.count();
    serve->add_option("--host", serve_opts.host, "Bind address (loopback by default)");
    serve->add_option("--port", serve_opts.port, "Port (0 picks a free one)");
    serve->add_option("--workers", serve_opts.workers, "Job workers (0 = logical cores)");
    serve->add_option("--intent-url", serve_opts.intent.url, "Chat-completions endpoint");
    serve->add_option("--intent-model", serve_opts.intent.model, "Model name");
    serve->add_option("--intent-key-env", serve_opts.intent.api_key_env,
                      "Environment variable holding the API key");
    serve->add_option("--intent-timeout-ms", intent_timeout_ms, "Request timeout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*preview) {
            preview_src.check();
            const auto sample = preview_src.sample();
            const auto ops = preview_src.ops(sample);
            ensure_dir(preview_out);
            std::vector<Mask2D> sources;
            for (const RegionOp& op : ops) sources.push_back(op.source_mask());
            const Mask2D src = union_of(sources);
            std::vector<int> steps;
            if (preview_k) {
                steps.push_back(*preview_k);
            } else {
                for (int k = 0; k <= preview_K; k += preview_every) steps.push_back(k);
                if (steps.back() != preview_K) steps.push_back(preview_K);
            }
            for (int k : steps) {
                std::vector<Mask2D> targets;
                for (const RegionOp& op : ops) targets.push_back(target_mask_at(op, k, preview_K));
                const Mask2D tgt = union_of(targets);
                write_mask_png(fs::path(preview_out) / frame_name("mask", k), tgt);
                write_png(fs::path(preview_out) / frame_name("overlay", k), render_overlay(src, tgt));
            }
            std::cout << "wrote " << steps.size() << " frames to " << preview_out << "\n";
        } else if (*run) {
            run_src.check();
            const auto sample = run_src.sample();
            const auto ops = run_src.ops(sample);
            Field z0;
            if (!run_input.empty()) {
                z0 = load_field(run_input);
            } else if (sample) {
                z0 = sample->image;
            } else {
                throw InvalidArgument("give --input when using --ops");
            }
            const DragConfig config = load_config(run_config);
            DragResult result;
            if (run_method == "region") {
                result = run_drag(z0, ops, config);
            } else {
                std::vector<PointOp> pops;
                if (sample && !sample->sample.begin_points.empty()) {
                    pops = to_point_ops(sample->sample);
                } else {
                    for (const RegionOp& op : ops) pops.push_back({op.begin(), op.target(), 1, 3});
                }
                const GradientMask B = build_gradient_mask(ops, z0.width(), z0.height(),
                                                           config.k_motion,
                                                           GradientMaskOptions{config.sweep});
                const auto extractor = make_extractor(config.extractor);
                result = run_point_drag(z0, pops, B, config, PointDragConfig{}, *extractor);
            }
            ensure_dir(run_out);
            Json j = drag_result_to_json(result);
            j["config"] = drag_config_to_json(config);
            j["method"] = run_method;
            write_text_file(fs::path(run_out) / "result.json", j.dump(2) + "\n");
            write_latent(fs::path(run_out) / "final.dflt", result.final_z);
            if (result.final_z.channels() == 1 || result.final_z.channels() == 3) {
                write_png(fs::path(run_out) / "final.png", field_to_image(result.final_z));
            }
            std::cout << "iterations " << result.iterations_run << ", final loss "
                      << (result.loss_trajectory.empty() ? 0.0 : result.loss_trajectory.back())
                      << "\n";
        } else if (*eval) {
            eval_src.check();
            const auto sample = eval_src.sample();
            const auto ops = eval_src.ops(sample);
            Field x;
            if (!eval_original.empty()) {
                x = load_field(eval_original);
            } else if (sample) {
                x = sample->image;
            } else {
                throw InvalidArgument("give --original when using --ops");
            }
            const Field xe = load_field(eval_edited);
            if (!x.same_shape(xe)) throw InvalidArgument("original and edited differ in shape");
            const Mask2D B = eval_mask.empty()
                                 ? build_gradient_mask(ops, x.width(), x.height(), eval_K).mask
                                 : read_mask_png(eval_mask);
            EvalOptions opts;
            opts.distance = eval_distance;
            const MetricReport report = evaluate_edit(x, xe, ops, B, eval_K, opts);
            if (eval_json) {
                std::cout << metric_report_to_json(report).dump(2) << "\n";
            } else {
                const std::pair<std::string, MetricReport> row{eval_label, report};
                std::cout << format_metric_table(std::span(&row, 1));
            }
        } else if (*validate) {
            const DatasetReport report = validate_dataset(validate_dir);
            std::cout << (validate_json ? report.to_json() + "\n" : report.to_text());
            return report.failed() == 0 ? 0 : 1;
        } else if (*mask) {
            mask_src.check();
            const auto sample = mask_src.sample();
            const auto ops = mask_src.ops(sample);
            const Mask2D& m0 = ops.front().source_mask();
            const GradientMask B = build_gradient_mask(ops, m0.width(), m0.height(), mask_K,
                                                       GradientMaskOptions{!mask_no_sweep});
            write_mask_png(mask_out, B.mask);
            std::cout << "gradient mask: " << B.mask.count() << " of "
                      << static_cast<long long>(m0.width()) * m0.height() << " cells\n";
        } else if (*drift) {
            Field z0;
            if (!drift_input.empty()) {
                z0 = load_field(drift_input);
            } else {
                std::mt19937_64 rng(drift_seed);
                std::normal_distribution<double> n(0.0, 1.0);
                z0 = Field(1, drift_size, drift_size);
                for (double& v : z0.values()) v = n(rng);
            }
            DriftReport report;
            if (drift_solver == "rf") {
                report = roundtrip_drift(z0, drift_steps, SinVelocity{});
            } else {
                const NoiseSchedule schedule = NoiseSchedule::uniform(drift_steps, drift_beta);
                report = roundtrip_drift(z0, schedule,
                                         ConsistentLinearNoisePredictor(schedule, drift_ratio));
            }
            std::cout << drift_report_to_json(report).dump(2) << "\n";
        } else if (*serve) {
            serve_opts.intent.timeout = std::chrono::milliseconds(intent_timeout_ms);
            Service service(serve_opts);
            const int port = service.bind();
            std::cout << "listening on http://" << serve_opts.host << ":" << port << " with "
                      << service.worker_count() << " workers\n"
                      << std::flush;
            service.listen();
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
