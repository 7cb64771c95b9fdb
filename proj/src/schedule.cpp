#include "dragkit/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "dragkit/error.hpp"

namespace dragkit {

std::string_view to_string(TaskKind kind) noexcept {
    switch (kind) {
        case TaskKind::Relocation: return "relocation";
        case TaskKind::Deformation: return "deformation";
        case TaskKind::Rotation: return "rotation";
    }
    return "unknown";
}

std::optional<TaskKind> parse_task_kind(std::string_view text) noexcept {
    if (text == "relocation") return TaskKind::Relocation;
    if (text == "deformation") return TaskKind::Deformation;
    if (text == "rotation") return TaskKind::Rotation;
    return std::nullopt;
}

AffineTransform to_transform(const MotionParams& params) {
    if (const auto* d = std::get_if<Displacement>(&params)) return make_translation(d->offset);
    const auto& r = std::get<Rotation>(params);
    return make_rotation(r.angle, r.anchor);
}

RegionOp::RegionOp(TaskKind kind, Mask2D source_mask, Point2 target, std::optional<Point2> anchor)
    : kind_(kind), source_mask_(std::move(source_mask)), target_(target), anchor_(anchor) {
    if (!std::isfinite(target.x) || !std::isfinite(target.y)) {
        throw InvalidArgument("RegionOp: non-finite target point");
    }
    if (kind == TaskKind::Rotation && !anchor) {
        throw InvalidArgument("RegionOp: rotation requires an anchor");
    }
    if (kind != TaskKind::Rotation && anchor) {
        throw InvalidArgument("RegionOp: only rotation takes an anchor");
    }
    begin_ = centroid(source_mask_);  // throws EmptyRegionError
}

MotionParams full_params(const RegionOp& op) {
    if (op.kind() != TaskKind::Rotation) return Displacement{op.target() - op.begin()};

    const Point2 a = *op.anchor();
    const Point2 u = op.begin() - a;
    const Point2 v = op.target() - a;
    if (norm(u) < 1e-12 || norm(v) < 1e-12) {
        throw UndefinedAngleError("rotation angle undefined: begin or target equals the anchor");
    }
    return Rotation{std::atan2(cross(u, v), dot(u, v)), a};
}

MotionParams interpolate(const MotionParams& full, int k, int K) {
    if (K < 1) throw InvalidArgument("interpolate: K must be >= 1");
    if (k < 0) throw InvalidArgument("interpolate: k must be >= 0");
    const double s = std::min(static_cast<double>(k) / static_cast<double>(K), 1.0);
    if (const auto* d = std::get_if<Displacement>(&full)) return Displacement{s * d->offset};
    const auto& r = std::get<Rotation>(full);
    return Rotation{s * r.angle, r.anchor};
}

AffineTransform transform_at(const RegionOp& op, int k, int K) {
    return to_transform(interpolate(full_params(op), k, K));
}

Mask2D target_mask_at(const RegionOp& op, int k, int K) {
    return warp_mask(op.source_mask(), transform_at(op, k, K));
}

}  // namespace dragkit
