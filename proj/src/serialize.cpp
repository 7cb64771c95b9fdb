#include "dragkit/serialize.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "dragkit/error.hpp"
#include "dragkit/png_io.hpp"

namespace dragkit {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw FormatError(path.empty() ? "$" : path, message);
}

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
    return v;
}

double get_number(const Json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(path, "expected a finite number");
    return v;
}

int get_int(const Json& j, const std::string& path) {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<int>();
}

bool get_bool(const Json& j, const std::string& path) {
    if (!j.is_boolean()) fail(path, "expected true or false");
    return j.get<bool>();
}

std::string get_string(const Json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

void require_object(const Json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
}

void reject_unknown(const Json& j, const std::string& path,
                    std::initializer_list<const char*> known) {
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || item.key() == k;
        if (!ok) fail(join(path, item.key()), "unknown field");
    }
}

}  // namespace

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) fail("$", "base64 length is not a multiple of 4");
    if (text.empty()) return {};
    std::vector<std::uint8_t> out(text.size() / 4 * 3);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) fail("$", "invalid base64 data");
    std::size_t pad = 0;
    if (text.back() == '=') ++pad;
    if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> encode_latent(const Field& field) {
    std::vector<std::uint8_t> out{'D', 'F', 'L', 'T'};
    out.reserve(16 + 4 * field.size());
    put_u32(out, static_cast<std::uint32_t>(field.channels()));
    put_u32(out, static_cast<std::uint32_t>(field.height()));
    put_u32(out, static_cast<std::uint32_t>(field.width()));
    for (double v : field.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    return out;
}

Field decode_latent(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 16 || bytes[0] != 'D' || bytes[1] != 'F' || bytes[2] != 'L' ||
        bytes[3] != 'T') {
        throw IoError("latent data lacks the DFLT header");
    }
    const std::uint32_t c = get_u32(bytes, 4), h = get_u32(bytes, 8), w = get_u32(bytes, 12);
    if (c == 0 || h == 0 || w == 0 || c > 4096 || h > 65536 || w > 65536) {
        throw IoError("latent header has invalid dimensions");
    }
    const std::size_t n = static_cast<std::size_t>(c) * h * w;
    if (bytes.size() != 16 + 4 * n) throw IoError("latent payload size does not match its header");
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) {
        data[i] = std::bit_cast<float>(get_u32(bytes, 16 + 4 * i));
    }
    return Field(static_cast<int>(c), static_cast<int>(h), static_cast<int>(w), std::move(data));
}

void write_latent(const std::filesystem::path& path, const Field& field) {
    const auto bytes = encode_latent(field);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("cannot write " + path.string());
}

Field read_latent(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_latent(bytes);
}

// ---------------------------------------------------------------------------

Json point_to_json(Point2 p) { return Json::array({p.x, p.y}); }

Point2 point_from_json(const Json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2) fail(path, "expected a [x, y] pair");
    return {get_number(j[0], join(path, "0")), get_number(j[1], join(path, "1"))};
}

Mask2D mask_from_json(const Json& j, const std::string& path) {
    require_object(j, path);
    if (j.contains("rows")) {
        const Json& rows = j["rows"];
        if (!rows.is_array() || rows.empty()) fail(join(path, "rows"), "expected a non-empty array");
        std::vector<std::string> lines;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            lines.push_back(get_string(rows[i], join(path, "rows." + std::to_string(i))));
        }
        try {
            return Mask2D::from_rows(lines);
        } catch (const Error& e) {
            fail(join(path, "rows"), e.what());
        }
    }
    if (j.contains("png")) {
        const std::string text = get_string(j["png"], join(path, "png"));
        std::vector<std::uint8_t> bytes;
        try {
            bytes = base64_decode(text);
            return mask_from_image(decode_png(bytes));
        } catch (const FormatError& e) {
            fail(join(path, "png"), e.message());
        } catch (const IoError& e) {
            fail(join(path, "png"), e.what());
        }
    }
    fail(path, "expected \"rows\" or \"png\"");
}

Json mask_rows_json(const Mask2D& mask) { return Json{{"rows", mask.to_rows()}}; }

Json mask_png_json(const Mask2D& mask) {
    Json j{{"png", base64_encode(encode_png(mask_to_image(mask)))},
           {"count", mask.count()},
           {"width", mask.width()},
           {"height", mask.height()}};
    j["centroid"] = mask.none() ? Json(nullptr) : point_to_json(centroid(mask));
    return j;
}

RegionOp region_op_from_json(const Json& j, const std::string& path) {
    require_object(j, path);
    reject_unknown(j, path, {"task", "mask", "target", "anchor"});
    for (const char* key : {"task", "mask", "target"}) {
        if (!j.contains(key)) fail(join(path, key), "missing field");
    }
    const std::string label = get_string(j["task"], join(path, "task"));
    const auto kind = parse_task_kind(label);
    if (!kind) fail(join(path, "task"), "unknown task label '" + label + "'");
    Mask2D mask = mask_from_json(j["mask"], join(path, "mask"));
    const Point2 target = point_from_json(j["target"], join(path, "target"));
    std::optional<Point2> anchor;
    if (j.contains("anchor") && !j["anchor"].is_null()) {
        anchor = point_from_json(j["anchor"], join(path, "anchor"));
    }
    if ((*kind == TaskKind::Rotation) != anchor.has_value()) {
        fail(join(path, "anchor"), *kind == TaskKind::Rotation ? "rotation requires an anchor"
                                                              : "only rotation takes an anchor");
    }
    try {
        return RegionOp(*kind, std::move(mask), target, anchor);
    } catch (const EmptyRegionError& e) {
        fail(join(path, "mask"), e.what());
    }
}

Json region_op_to_json(const RegionOp& op) {
    Json j{{"task", std::string(to_string(op.kind()))},
           {"mask", mask_rows_json(op.source_mask())},
           {"target", point_to_json(op.target())}};
    j["anchor"] = op.anchor() ? point_to_json(*op.anchor()) : Json(nullptr);
    return j;
}

std::vector<RegionOp> region_ops_from_json(const Json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of region ops");
    std::vector<RegionOp> ops;
    for (std::size_t i = 0; i < j.size(); ++i) {
        ops.push_back(region_op_from_json(j[i], join(path, std::to_string(i))));
    }
    for (std::size_t i = 1; i < ops.size(); ++i) {
        if (!ops[i].source_mask().same_dims(ops[0].source_mask())) {
            fail(join(path, std::to_string(i) + ".mask"), "mask size differs from op 0");
        }
    }
    return ops;
}

DragConfig drag_config_from_json(const Json& j, const std::string& path) {
    require_object(j, path);
    reject_unknown(j, path,
                   {"k_motion", "k_refine", "lr_phase1", "lr_phase2", "loss_mode", "huber_delta",
                    "align_source", "normalized_gradient", "toy_step", "sweep", "extractor", "seed",
                    "inversion_steps", "skip_steps", "drag_start_step", "optimize_step"});
    DragConfig c;
    auto opt_int = [&](const char* key, int& out) {
        if (j.contains(key)) out = get_int(j[key], join(path, key));
    };
    auto opt_num = [&](const char* key, double& out) {
        if (j.contains(key)) out = get_number(j[key], join(path, key));
    };
    auto opt_bool = [&](const char* key, bool& out) {
        if (j.contains(key)) out = get_bool(j[key], join(path, key));
    };
    opt_int("k_motion", c.k_motion);
    opt_int("k_refine", c.k_refine);
    opt_num("lr_phase1", c.lr_phase1);
    opt_num("lr_phase2", c.lr_phase2);
    if (j.contains("loss_mode")) {
        const std::string m = get_string(j["loss_mode"], join(path, "loss_mode"));
        if (m == "l1") {
            c.loss_mode = LossMode::L1;
        } else if (m == "huber") {
            c.loss_mode = LossMode::Huber;
        } else {
            fail(join(path, "loss_mode"), "expected \"l1\" or \"huber\"");
        }
    }
    opt_num("huber_delta", c.huber_delta);
    opt_bool("align_source", c.align_source);
    opt_bool("normalized_gradient", c.normalized_gradient);
    opt_num("toy_step", c.toy_step);
    opt_bool("sweep", c.sweep);
    if (j.contains("extractor")) {
        const std::string ep = join(path, "extractor");
        const Json& e = j["extractor"];
        require_object(e, ep);
        reject_unknown(e, ep, {"kind", "sigma", "stride"});
        if (e.contains("kind")) c.extractor.kind = get_string(e["kind"], join(ep, "kind"));
        if (e.contains("sigma")) c.extractor.sigma = get_number(e["sigma"], join(ep, "sigma"));
        if (e.contains("stride")) c.extractor.stride = get_int(e["stride"], join(ep, "stride"));
        try {
            (void)make_extractor(c.extractor);
        } catch (const InvalidArgument& err) {
            fail(ep, err.what());
        }
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) {
            fail(join(path, "seed"), "expected a non-negative integer");
        }
        if (j["seed"].is_number_integer() && j["seed"].get<long long>() < 0) {
            fail(join(path, "seed"), "expected a non-negative integer");
        }
        c.seed = j["seed"].get<std::uint64_t>();
    }
    opt_int("inversion_steps", c.inversion_steps);
    opt_int("skip_steps", c.skip_steps);
    opt_int("drag_start_step", c.drag_start_step);
    opt_int("optimize_step", c.optimize_step);
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        fail(path, e.what());
    }
    return c;
}

Json drag_config_to_json(const DragConfig& c) {
    return Json{{"k_motion", c.k_motion},
                {"k_refine", c.k_refine},
                {"lr_phase1", c.lr_phase1},
                {"lr_phase2", c.lr_phase2},
                {"loss_mode", c.loss_mode == LossMode::L1 ? "l1" : "huber"},
                {"huber_delta", c.huber_delta},
                {"align_source", c.align_source},
                {"normalized_gradient", c.normalized_gradient},
                {"toy_step", c.toy_step},
                {"sweep", c.sweep},
                {"extractor",
                 {{"kind", c.extractor.kind}, {"sigma", c.extractor.sigma}, {"stride", c.extractor.stride}}},
                {"seed", c.seed},
                {"inversion_steps", c.inversion_steps},
                {"skip_steps", c.skip_steps},
                {"drag_start_step", c.drag_start_step},
                {"optimize_step", c.optimize_step}};
}

PointOp point_op_from_json(const Json& j, const std::string& path) {
    require_object(j, path);
    reject_unknown(j, path, {"handle", "target", "patch_radius", "track_radius"});
    for (const char* key : {"handle", "target"}) {
        if (!j.contains(key)) fail(join(path, key), "missing field");
    }
    PointOp op;
    op.handle = point_from_json(j["handle"], join(path, "handle"));
    op.target = point_from_json(j["target"], join(path, "target"));
    if (j.contains("patch_radius")) op.patch_radius = get_int(j["patch_radius"], join(path, "patch_radius"));
    if (j.contains("track_radius")) op.track_radius = get_int(j["track_radius"], join(path, "track_radius"));
    if (op.patch_radius < 0) fail(join(path, "patch_radius"), "must be >= 0");
    if (op.track_radius < 1) fail(join(path, "track_radius"), "must be >= 1");
    return op;
}

PointDragConfig point_config_from_json(const Json& j, const std::string& path) {
    require_object(j, path);
    reject_unknown(j, path, {"beta", "lambda"});
    PointDragConfig c;
    if (j.contains("beta")) c.beta = get_number(j["beta"], join(path, "beta"));
    if (j.contains("lambda")) c.lambda = get_number(j["lambda"], join(path, "lambda"));
    if (c.beta < 0.0 || c.beta > 1.0) fail(join(path, "beta"), "must be in [0, 1]");
    if (c.lambda < 0.0) fail(join(path, "lambda"), "must be >= 0");
    return c;
}

Json drag_result_to_json(const DragResult& r) {
    Json traj = Json::array();
    for (const auto& op : r.centroid_trajectory) {
        Json pts = Json::array();
        for (Point2 p : op) pts.push_back(point_to_json(p));
        traj.push_back(std::move(pts));
    }
    Json j{{"iterations_run", r.iterations_run},
           {"loss_trajectory", r.loss_trajectory},
           {"centroid_trajectory", std::move(traj)},
           {"gammas", r.gammas}};
    if (r.gradient_mask.width() > 0) j["gradient_mask"] = mask_png_json(r.gradient_mask);
    return j;
}

Json metric_report_to_json(const MetricReport& m) {
    return Json{{"if_bg", m.if_bg}, {"if_s2t", m.if_s2t}, {"if_s2s", m.if_s2s},
                {"md1", m.md1},     {"md2", m.md2},       {"distance", m.distance},
                {"variant", m.variant}};
}

Json drift_report_to_json(const DriftReport& r) {
    return Json{{"ssim", r.ssim},
                {"psnr_db", r.psnr_db},
                {"mae", r.mae},
                {"steps", r.steps},
                {"solver", std::string(to_string(r.solver))}};
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace dragkit
