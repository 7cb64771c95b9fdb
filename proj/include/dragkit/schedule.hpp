#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "dragkit/geometry.hpp"

namespace dragkit {

enum class TaskKind { Relocation, Deformation, Rotation };

std::string_view to_string(TaskKind kind) noexcept;
/// Accepts "relocation", "deformation", "rotation"; nullopt otherwise.
std::optional<TaskKind> parse_task_kind(std::string_view text) noexcept;

struct Displacement {
    Point2 offset;
    friend bool operator==(const Displacement&, const Displacement&) = default;
};

struct Rotation {
    double angle = 0.0;  // radians, math convention (see make_rotation)
    Point2 anchor;
    friend bool operator==(const Rotation&, const Rotation&) = default;
};

/// Motion parameter of one region at some schedule step: a displacement for
/// relocation/deformation, an angle about an anchor for rotation.
using MotionParams = std::variant<Displacement, Rotation>;

AffineTransform to_transform(const MotionParams& params);

/// One region-level drag instruction. Deformation uses the relocation motion;
/// it differs only in that the source mask covers an edge sub-region.
class RegionOp {
public:
    /// Throws EmptyRegionError for an empty mask and InvalidArgument when the
    /// anchor presence does not match the kind (required iff Rotation).
    RegionOp(TaskKind kind, Mask2D source_mask, Point2 target,
             std::optional<Point2> anchor = std::nullopt);

    TaskKind kind() const noexcept { return kind_; }
    const Mask2D& source_mask() const noexcept { return source_mask_; }
    Point2 target() const noexcept { return target_; }
    const std::optional<Point2>& anchor() const noexcept { return anchor_; }
    /// Centroid of the source mask (cached).
    Point2 begin() const noexcept { return begin_; }

private:
    TaskKind kind_;
    Mask2D source_mask_;
    Point2 target_;
    std::optional<Point2> anchor_;
    Point2 begin_;
};

/// Full motion at k = K: target - centroid, or the signed angle from
/// (begin - anchor) to (target - anchor). Throws UndefinedAngleError when the
/// begin or target point coincides with the anchor.
MotionParams full_params(const RegionOp& op);

/// Scales `full` by min(k/K, 1). Throws InvalidArgument for K < 1 or k < 0.
MotionParams interpolate(const MotionParams& full, int k, int K);

/// Transform applied to the source mask at step k.
AffineTransform transform_at(const RegionOp& op, int k, int K);

/// Target mask M^(k): the source mask warped by the step-k transform. The
/// transform is composed directly for step k, never accumulated across steps.
Mask2D target_mask_at(const RegionOp& op, int k, int K);

}  // namespace dragkit
