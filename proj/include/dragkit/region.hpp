#pragma once

#include <span>
#include <vector>

#include "dragkit/geometry.hpp"
#include "dragkit/schedule.hpp"

namespace dragkit {

/// Normalized per-region loss weights; they sum to 1.
struct RegionWeights {
    std::vector<double> gammas;
};

/// Size-adaptive weights: with S_i the set fraction of mask i,
/// w_i = clamp(1 + 0.5 / (S_i + 0.1), 1, 5) and gamma_i = w_i / sum(w).
/// A single mask gets weight 1. Throws InvalidArgument for an empty list and
/// DimensionMismatch when masks differ in size.
RegionWeights region_weights(std::span<const Mask2D> masks);

/// Editable-region mask B. Cells outside B are frozen during optimization.
struct GradientMask {
    Mask2D mask;
};

struct GradientMaskOptions {
    // Also enclose the intermediate positions of rotation ops (k = 1..K-1);
    // a rotating region can leave the endpoint rectangle mid-sweep.
    bool sweep = true;
};

/// Cells swept by one op: M^(0) | M^(K), plus intermediate rotation masks when
/// sweeping.
Mask2D swept_union(const RegionOp& op, int K, const GradientMaskOptions& options = {});

/// Filled minimum-area rectangle around swept_union(op).
Mask2D region_envelope(const RegionOp& op, int K, const GradientMaskOptions& options = {});

/// Union of region envelopes on an all-zero canvas of the given size.
GradientMask build_gradient_mask(std::span<const RegionOp> ops, int width, int height, int K,
                                 const GradientMaskOptions& options = {});

}  // namespace dragkit
