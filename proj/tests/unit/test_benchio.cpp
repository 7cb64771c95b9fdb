#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "dragkit/benchio.hpp"
#include "dragkit/error.hpp"
#include "dragkit/png_io.hpp"

using namespace dragkit;
namespace fs = std::filesystem;

namespace {

const fs::path kRed = fs::path(DRAGKIT_FIXTURES) / "red";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string error_path(const std::string& text) {
    try {
        parse_sample(text);
    } catch (const FormatError& e) {
        return e.path();
    }
    return "<none>";
}

std::string mutate(const std::string& text, const std::function<void(nlohmann::json&)>& f) {
    nlohmann::json j = nlohmann::json::parse(text);
    f(j);
    return j.dump();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("dragkit_benchio_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("fixtures parse") {
    const BenchSample a = parse_sample(slurp(kRed / "sample_a.json"));
    REQUIRE(a.region_operations.size() == 1);
    CHECK(a.region_operations[0].task == TaskKind::Rotation);
    CHECK(a.region_operations[0].begin == Point2{337, 175});
    CHECK(a.region_operations[0].anchor == Point2{351, 256});
    CHECK(a.begin_points.size() == 2);
    CHECK(a.editing_prompt.front() == ' ');

    const BenchSample b = parse_sample(slurp(kRed / "sample_b.json"));
    CHECK(b.region_operations.size() == 3);
    for (std::size_t i = 0; i < b.region_operations.size(); ++i)
        CHECK(b.region_operations[i].index == static_cast<int>(i));
}

TEST_CASE("canonical serialization round trips byte for byte") {
    for (const char* name : {"sample_a.json", "sample_b.json"}) {
        const std::string text = slurp(kRed / name);
        const BenchSample s = parse_sample(text);
        CHECK(serialize_sample(s) == text);
        CHECK(parse_sample(serialize_sample(s)) == s);
    }
    BenchSample frac = parse_sample(slurp(kRed / "sample_a.json"));
    frac.region_operations[0].target = {379.5, 179.25};
    CHECK(serialize_sample(frac).find("[379.5, 179.25]") != std::string::npos);
    CHECK(parse_sample(serialize_sample(frac)) == frac);
}

TEST_CASE("schema errors name the offending field") {
    const std::string a = slurp(kRed / "sample_a.json");
    using nlohmann::json;
    CHECK(error_path("{not json") == "$");
    CHECK(error_path("[]") == "$");
    CHECK(error_path(mutate(a, [](json& j) { j["region_operations"]["0"]["anchors"] = nullptr; })) ==
          "region_operations.0.anchors");
    CHECK(error_path(mutate(a, [](json& j) { j["region_operations"]["0"]["task"] = "scaling"; })) ==
          "region_operations.0.task");
    CHECK(error_path(mutate(a, [](json& j) {
              j["region_operations"]["0"]["task"] = "relocation";
          })) == "region_operations.0.anchors");
    CHECK(error_path(mutate(a, [](json& j) {
              j["region_operations"]["0"]["centroids"] = json::array({json::array({1, 2})});
          })) == "region_operations.0.centroids");
    CHECK(error_path(mutate(a, [](json& j) {
              j["region_operations"]["0"]["centroids"][1][0] = "x";
          })) == "region_operations.0.centroids.1.0");
    CHECK(error_path(mutate(a, [](json& j) { j["region_operations"]["0"]["anchors"] = {337, 175}; })) ==
          "region_operations.0.anchors");
    CHECK(error_path(mutate(a, [](json& j) {
              j["region_operations"]["first"] = j["region_operations"]["0"];
          })) == "region_operations.first");
    CHECK(error_path(mutate(a, [](json& j) { j["region_operations"] = json::object(); })) ==
          "region_operations");
    CHECK(error_path(mutate(a, [](json& j) { j["point_operations"]["target_points"].erase(0); })) ==
          "point_operations.target_points");
    CHECK(error_path(mutate(a, [](json& j) { j.erase("editing_prompt"); })) == "editing_prompt");
    CHECK(error_path(mutate(a, [](json& j) { j["extra"] = 1; })) == "extra");
    CHECK(error_path(mutate(a, [](json& j) { j["background_prompt"] = 3; })) == "background_prompt");
}

TEST_CASE("loading a sample") {
    const LoadedSample s = load_sample(kRed, "sample_b");
    CHECK(s.image.width() == 512);
    CHECK(s.masks.size() == 3);
    CHECK(s.ops.size() == 3);
    for (std::size_t i = 0; i < s.ops.size(); ++i)
        CHECK(distance(s.ops[i].begin(), s.sample.region_operations[i].begin) <= kCentroidTolerancePx);
    const auto pts = to_point_ops(s.sample);
    CHECK(pts.size() == s.sample.begin_points.size());
    CHECK_THROWS_AS(load_sample(kRed, "missing"), IoError);
}

TEST_CASE("dataset validation") {
    const DatasetReport ok = validate_dataset(kRed);
    CHECK(ok.passed() == 2);
    CHECK(ok.failed() == 0);
    CHECK(ok.to_text().find("2 passed, 0 failed") != std::string::npos);
    CHECK(nlohmann::json::parse(ok.to_json())["passed"] == 2);
    CHECK_THROWS_AS(validate_dataset(kRed / "nope"), IoError);

    // Mask moved 10 px away from its declared begin centroid.
    const fs::path d = fresh_dir("shifted");
    fs::copy_file(kRed / "sample_a.json", d / "sample_a.json");
    fs::create_directories(d / "sample_a");
    fs::copy_file(kRed / "sample_a" / "image.png", d / "sample_a" / "image.png");
    const Mask2D m = read_mask_png(kRed / "sample_a" / "0.png");
    Mask2D moved(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y)
        for (int x = 10; x < m.width(); ++x) moved.set(x, y, m.at(x - 10, y));
    write_mask_png(d / "sample_a" / "0.png", moved);
    std::ofstream(d / "broken.json") << "{\"region_operations\": 1}";

    const DatasetReport bad = validate_dataset(d);
    REQUIRE(bad.samples.size() == 2);
    CHECK(bad.failed() == 2);
    CHECK(bad.samples[0].name == "broken");
    CHECK(bad.samples[0].reasons.at(0).find("schema") != std::string::npos);
    CHECK(bad.samples[1].reasons.at(0).find("10.00 px") != std::string::npos);
    fs::remove_all(d);
}
