#include "dragkit/benchio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dragkit/error.hpp"
#include "dragkit/png_io.hpp"

namespace dragkit {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw FormatError(path, message);
}

void require_keys(const json& obj, const std::string& path,
                  std::initializer_list<const char*> required) {
    const std::string prefix = path.empty() ? "" : path + ".";
    for (const char* key : required) {
        if (!obj.contains(key)) fail(prefix + key, "missing field");
    }
    for (const auto& item : obj.items()) {
        const bool known = std::any_of(required.begin(), required.end(),
                                       [&](const char* k) { return item.key() == k; });
        if (!known) fail(prefix + item.key(), "unknown field");
    }
}

Point2 parse_point(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2) fail(path, "expected a [x, y] pair");
    for (std::size_t i = 0; i < 2; ++i) {
        if (!j[i].is_number()) fail(path + "." + std::to_string(i), "expected a number");
    }
    const Point2 p{j[0].get<double>(), j[1].get<double>()};
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) fail(path, "coordinates must be finite");
    return p;
}

std::vector<Point2> parse_points(const json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "expected an array of [x, y] pairs");
    std::vector<Point2> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(parse_point(j[i], path + "." + std::to_string(i)));
    }
    return out;
}

std::string parse_string(const json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

RegionEntry parse_region(const std::string& key, const json& j) {
    const std::string path = "region_operations." + key;
    if (!j.is_object()) fail(path, "expected an object");
    require_keys(j, path, {"task", "centroids", "anchors"});

    RegionEntry e;
    e.index = std::stoi(key);
    const std::string label = parse_string(j["task"], path + ".task");
    const auto kind = parse_task_kind(label);
    if (!kind) {
        fail(path + ".task",
             "unknown task label '" + label + "' (expected relocation, deformation or rotation)");
    }
    e.task = *kind;

    const json& c = j["centroids"];
    if (!c.is_array() || c.size() != 2) {
        fail(path + ".centroids", "expected exactly two points [begin, target]");
    }
    e.begin = parse_point(c[0], path + ".centroids.0");
    e.target = parse_point(c[1], path + ".centroids.1");

    const json& a = j["anchors"];
    if (e.task == TaskKind::Rotation) {
        if (a.is_null()) fail(path + ".anchors", "rotation requires an anchor point");
        e.anchor = parse_point(a, path + ".anchors");
        if (*e.anchor == e.begin || *e.anchor == e.target) {
            fail(path + ".anchors", "anchor coincides with a centroid; angle undefined");
        }
    } else if (!a.is_null()) {
        fail(path + ".anchors", std::string(to_string(e.task)) + " requires \"anchors\": null");
    }
    return e;
}

bool is_index_key(const std::string& key) {
    if (key.empty() || key.size() > 6) return false;
    if (!std::all_of(key.begin(), key.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) {
        return false;
    }
    return key == "0" || key[0] != '0';
}

std::string format_number(double v) {
    if (std::floor(v) == v && std::abs(v) < 1e15) {
        return std::to_string(static_cast<long long>(v));
    }
    return json(v).dump();
}

std::string format_point(Point2 p) {
    return "[" + format_number(p.x) + ", " + format_number(p.y) + "]";
}

std::string format_points(const std::vector<Point2>& pts) {
    std::string s = "[";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) s += ", ";
        s += format_point(pts[i]);
    }
    return s + "]";
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

BenchSample parse_sample(std::string_view text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        fail("$", std::string("malformed JSON: ") + e.what());
    }
    if (!root.is_object()) fail("$", "expected a JSON object");
    require_keys(root, "",
                 {"region_operations", "point_operations", "background_prompt", "editing_prompt"});

    BenchSample s;
    const json& regions = root["region_operations"];
    if (!regions.is_object()) fail("region_operations", "expected an object keyed by index");
    if (regions.empty()) fail("region_operations", "at least one region operation is required");
    for (const auto& item : regions.items()) {
        if (!is_index_key(item.key())) {
            fail("region_operations." + item.key(), "keys must be non-negative integers");
        }
        s.region_operations.push_back(parse_region(item.key(), item.value()));
    }
    std::sort(s.region_operations.begin(), s.region_operations.end(),
              [](const RegionEntry& a, const RegionEntry& b) { return a.index < b.index; });

    const json& points = root["point_operations"];
    if (!points.is_object()) fail("point_operations", "expected an object");
    require_keys(points, "point_operations", {"begin_points", "target_points"});
    s.begin_points = parse_points(points["begin_points"], "point_operations.begin_points");
    s.target_points = parse_points(points["target_points"], "point_operations.target_points");
    if (s.begin_points.size() != s.target_points.size()) {
        fail("point_operations.target_points",
             "length " + std::to_string(s.target_points.size()) + " differs from begin_points (" +
                 std::to_string(s.begin_points.size()) + ")");
    }

    s.background_prompt = parse_string(root["background_prompt"], "background_prompt");
    s.editing_prompt = parse_string(root["editing_prompt"], "editing_prompt");
    return s;
}

std::string serialize_sample(const BenchSample& sample) {
    std::ostringstream out;
    out << "{\n    \"region_operations\": {\n";
    for (std::size_t i = 0; i < sample.region_operations.size(); ++i) {
        const RegionEntry& e = sample.region_operations[i];
        out << "        \"" << e.index << "\": {\n";
        out << "            \"task\": \"" << to_string(e.task) << "\",\n";
        out << "            \"centroids\": [" << format_point(e.begin) << ", "
            << format_point(e.target) << "],\n";
        out << "            \"anchors\": " << (e.anchor ? format_point(*e.anchor) : "null") << "\n";
        out << "        }" << (i + 1 < sample.region_operations.size() ? "," : "") << "\n";
    }
    out << "    },\n    \"point_operations\": {\n";
    out << "        \"begin_points\": " << format_points(sample.begin_points) << ",\n";
    out << "        \"target_points\": " << format_points(sample.target_points) << "\n";
    out << "    },\n";
    out << "    \"background_prompt\": " << json(sample.background_prompt).dump() << ",\n";
    out << "    \"editing_prompt\": " << json(sample.editing_prompt).dump() << "\n";
    out << "}\n";
    return out.str();
}

std::filesystem::path sample_json_path(const std::filesystem::path& dir, const std::string& name) {
    return dir / (name + ".json");
}

std::filesystem::path sample_image_path(const std::filesystem::path& dir, const std::string& name) {
    return dir / name / "image.png";
}

std::filesystem::path sample_mask_path(const std::filesystem::path& dir, const std::string& name,
                                       int index) {
    return dir / name / (std::to_string(index) + ".png");
}

std::vector<RegionOp> to_region_ops(const BenchSample& sample, const std::vector<Mask2D>& masks) {
    if (masks.size() != sample.region_operations.size()) {
        throw InvalidArgument("to_region_ops: one mask per region operation is required");
    }
    std::vector<RegionOp> ops;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        const RegionEntry& e = sample.region_operations[i];
        ops.emplace_back(e.task, masks[i], e.target, e.anchor);
    }
    return ops;
}

std::vector<PointOp> to_point_ops(const BenchSample& sample, int patch_radius, int track_radius) {
    std::vector<PointOp> ops;
    for (std::size_t i = 0; i < sample.begin_points.size(); ++i) {
        ops.push_back({sample.begin_points[i], sample.target_points[i], patch_radius, track_radius});
    }
    return ops;
}

LoadedSample load_sample(const std::filesystem::path& dir, const std::string& name) {
    LoadedSample out;
    out.name = name;
    out.sample = parse_sample(read_text(sample_json_path(dir, name)));
    out.image = image_to_field(read_png(sample_image_path(dir, name)));
    for (const RegionEntry& e : out.sample.region_operations) {
        Mask2D m = read_mask_png(sample_mask_path(dir, name, e.index));
        if (m.width() != out.image.width() || m.height() != out.image.height()) {
            throw FormatError("region_operations." + std::to_string(e.index),
                              "mask size differs from the image");
        }
        out.masks.push_back(std::move(m));
    }
    out.ops = to_region_ops(out.sample, out.masks);
    return out;
}

int DatasetReport::passed() const {
    return static_cast<int>(std::count_if(samples.begin(), samples.end(),
                                          [](const SampleReport& s) { return s.passed; }));
}

int DatasetReport::failed() const { return static_cast<int>(samples.size()) - passed(); }

std::string DatasetReport::to_text() const {
    std::ostringstream out;
    for (const SampleReport& s : samples) {
        out << (s.passed ? "PASS " : "FAIL ") << s.name << "\n";
        for (const std::string& r : s.reasons) out << "  - " << r << "\n";
    }
    out << passed() << " passed, " << failed() << " failed\n";
    return out.str();
}

std::string DatasetReport::to_json() const {
    json arr = json::array();
    for (const SampleReport& s : samples) {
        arr.push_back({{"name", s.name}, {"passed", s.passed}, {"reasons", s.reasons}});
    }
    return json{{"samples", arr}, {"passed", passed()}, {"failed", failed()}}.dump(2);
}

DatasetReport validate_dataset(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) {
        throw IoError("not a readable directory: " + dir.string());
    }
    std::vector<std::string> names;
    for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            names.push_back(entry.path().stem().string());
        }
    }
    if (ec) throw IoError("cannot list " + dir.string() + ": " + ec.message());
    std::sort(names.begin(), names.end());

    DatasetReport report;
    for (const std::string& name : names) {
        SampleReport r;
        r.name = name;
        BenchSample sample;
        try {
            sample = parse_sample(read_text(sample_json_path(dir, name)));
        } catch (const FormatError& e) {
            r.reasons.push_back(std::string("schema: ") + e.what());
            report.samples.push_back(std::move(r));
            continue;
        } catch (const IoError& e) {
            r.reasons.push_back(e.what());
            report.samples.push_back(std::move(r));
            continue;
        }

        int width = 0, height = 0;
        try {
            const Image8 img = read_png(sample_image_path(dir, name));
            width = img.width;
            height = img.height;
        } catch (const Error& e) {
            r.reasons.push_back(std::string("image: ") + e.what());
        }

        for (const RegionEntry& e : sample.region_operations) {
            const std::string tag = "region " + std::to_string(e.index) + ": ";
            Mask2D m;
            try {
                m = read_mask_png(sample_mask_path(dir, name, e.index));
            } catch (const Error& err) {
                r.reasons.push_back(tag + "mask: " + err.what());
                continue;
            }
            if (width > 0 && (m.width() != width || m.height() != height)) {
                r.reasons.push_back(tag + "mask is " + std::to_string(m.width()) + "x" +
                                    std::to_string(m.height()) + ", image is " +
                                    std::to_string(width) + "x" + std::to_string(height));
                continue;
            }
            if (m.none()) {
                r.reasons.push_back(tag + "mask is empty");
                continue;
            }
            const Point2 c = centroid(m);
            const double d = distance(c, e.begin);
            if (d > kCentroidTolerancePx) {
                char buf[200];
                std::snprintf(buf, sizeof buf,
                              "mask centroid (%.2f, %.2f) is %.2f px from declared begin "
                              "(%.2f, %.2f); tolerance %.1f px",
                              c.x, c.y, d, e.begin.x, e.begin.y, kCentroidTolerancePx);
                r.reasons.push_back(tag + buf);
            }
        }
        r.passed = r.reasons.empty();
        report.samples.push_back(std::move(r));
    }
    return report;
}

}  // namespace dragkit
