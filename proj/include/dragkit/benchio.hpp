#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dragkit/field.hpp"
#include "dragkit/geometry.hpp"
#include "dragkit/point_drag.hpp"
#include "dragkit/schedule.hpp"

namespace dragkit {

/// One entry of "region_operations". `begin` and `target` are the two
/// "centroids"; `anchor` is "anchors".
struct RegionEntry {
    int index = 0;
    TaskKind task = TaskKind::Relocation;
    Point2 begin;
    Point2 target;
    std::optional<Point2> anchor;

    friend bool operator==(const RegionEntry&, const RegionEntry&) = default;
};

struct BenchSample {
    std::vector<RegionEntry> region_operations;  // ascending index
    std::vector<Point2> begin_points;
    std::vector<Point2> target_points;
    std::string background_prompt;
    std::string editing_prompt;

    friend bool operator==(const BenchSample&, const BenchSample&) = default;
};

/// Parses and validates one sample. Throws FormatError whose path() names the
/// offending field ("region_operations.0.anchors", "point_operations", ...);
/// malformed JSON reports path "$".
BenchSample parse_sample(std::string_view text);

/// Canonical text: fixed field order, four-space indentation, points as
/// inline [x, y] arrays with integral values written as integers.
std::string serialize_sample(const BenchSample& sample);

// Dataset layout:
//   <dir>/<name>.json          sample instructions
//   <dir>/<name>/image.png     source image
//   <dir>/<name>/<index>.png   source mask of region <index>
std::filesystem::path sample_json_path(const std::filesystem::path& dir, const std::string& name);
std::filesystem::path sample_image_path(const std::filesystem::path& dir, const std::string& name);
std::filesystem::path sample_mask_path(const std::filesystem::path& dir, const std::string& name,
                                       int index);

/// Max distance between a mask centroid and its declared begin centroid.
inline constexpr double kCentroidTolerancePx = 2.0;

/// RegionOps from a sample and its masks (masks[i] belongs to
/// region_operations[i]).
std::vector<RegionOp> to_region_ops(const BenchSample& sample, const std::vector<Mask2D>& masks);
std::vector<PointOp> to_point_ops(const BenchSample& sample, int patch_radius = 1,
                                  int track_radius = 3);

struct LoadedSample {
    std::string name;
    BenchSample sample;
    Field image;
    std::vector<Mask2D> masks;
    std::vector<RegionOp> ops;
};

/// Reads the JSON, image and masks of one sample. Throws FormatError, IoError
/// or EmptyRegionError.
LoadedSample load_sample(const std::filesystem::path& dir, const std::string& name);

struct SampleReport {
    std::string name;
    bool passed = false;
    std::vector<std::string> reasons;
};

struct DatasetReport {
    std::vector<SampleReport> samples;
    int passed() const;
    int failed() const;
    std::string to_text() const;
    std::string to_json() const;
};

/// Checks every <name>.json in `dir`: schema, image readability, mask
/// dimensions and centroid consistency. File problems become failure reasons.
/// Throws IoError only when `dir` itself is not a readable directory.
DatasetReport validate_dataset(const std::filesystem::path& dir);

}  // namespace dragkit
