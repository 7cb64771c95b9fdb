#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dragkit/engine.hpp"
#include "dragkit/flow.hpp"
#include "dragkit/metrics.hpp"
#include "dragkit/point_drag.hpp"
#include "dragkit/schedule.hpp"

namespace dragkit {

using Json = nlohmann::json;

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
/// Throws FormatError (path "$") on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

// ---------------------------------------------------------------------------
// Latent files: "DFLT", u32 C, H, W (little-endian), then C*H*W float32
// values in channel-major, row-major order.

std::vector<std::uint8_t> encode_latent(const Field& field);
Field decode_latent(const std::vector<std::uint8_t>& bytes);
void write_latent(const std::filesystem::path& path, const Field& field);
Field read_latent(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// JSON. Every from_json-style function throws FormatError naming the field
// path (prefixed by `path` when given).

Json point_to_json(Point2 p);
Point2 point_from_json(const Json& j, const std::string& path);

/// {"rows": ["0110", ...]} or {"png": "<base64 PNG>"}.
Mask2D mask_from_json(const Json& j, const std::string& path);
Json mask_rows_json(const Mask2D& mask);
/// {"png": base64, "count": n, "centroid": [x, y] | null}.
Json mask_png_json(const Mask2D& mask);

/// {"task", "mask", "target", "anchor"}; anchor is null unless rotating.
RegionOp region_op_from_json(const Json& j, const std::string& path);
Json region_op_to_json(const RegionOp& op);
std::vector<RegionOp> region_ops_from_json(const Json& j, const std::string& path);

DragConfig drag_config_from_json(const Json& j, const std::string& path = "");
Json drag_config_to_json(const DragConfig& config);

PointOp point_op_from_json(const Json& j, const std::string& path);
PointDragConfig point_config_from_json(const Json& j, const std::string& path);

/// Trajectories as arrays; the final latent is not included.
Json drag_result_to_json(const DragResult& result);

Json metric_report_to_json(const MetricReport& report);
Json drift_report_to_json(const DriftReport& report);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace dragkit
