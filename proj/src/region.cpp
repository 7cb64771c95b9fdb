#include "dragkit/region.hpp"

#include <algorithm>

#include "dragkit/error.hpp"

namespace dragkit {

RegionWeights region_weights(std::span<const Mask2D> masks) {
    if (masks.empty()) throw InvalidArgument("region_weights: no masks");
    for (const Mask2D& m : masks) {
        if (!m.same_dims(masks[0])) throw DimensionMismatch("region_weights: mask sizes differ");
    }
    const std::size_t n = masks.size();
    if (n == 1) return {{1.0}};

    std::vector<double> raw(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double cells = static_cast<double>(masks[i].width()) * masks[i].height();
        const double s = static_cast<double>(masks[i].count()) / cells;
        raw[i] = std::clamp(1.0 + 0.5 / (s + 0.1), 1.0, 5.0);
        total += raw[i];
    }
    RegionWeights out;
    out.gammas.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.gammas[i] = total == 0.0 ? 1.0 / static_cast<double>(n) : raw[i] / total;
    }
    return out;
}

Mask2D swept_union(const RegionOp& op, int K, const GradientMaskOptions& options) {
    Mask2D u = op.source_mask() | target_mask_at(op, K, K);
    if (options.sweep && op.kind() == TaskKind::Rotation) {
        for (int k = 1; k < K; ++k) u |= target_mask_at(op, k, K);
    }
    return u;
}

Mask2D region_envelope(const RegionOp& op, int K, const GradientMaskOptions& options) {
    const Mask2D u = swept_union(op, K, options);
    const std::vector<Point2> cells = u.set_cells();
    const Mask2D canvas(u.width(), u.height());
    const auto corners = box_points(min_area_rect(cells));
    return fill_convex_poly(canvas, corners);
}

GradientMask build_gradient_mask(std::span<const RegionOp> ops, int width, int height, int K,
                                 const GradientMaskOptions& options) {
    if (ops.empty()) throw InvalidArgument("build_gradient_mask: no ops");
    Mask2D canvas(width, height);
    for (const RegionOp& op : ops) {
        if (op.source_mask().width() != width || op.source_mask().height() != height) {
            throw DimensionMismatch("build_gradient_mask: op mask does not match canvas");
        }
        canvas |= region_envelope(op, K, options);
    }
    return {canvas};
}

}  // namespace dragkit
