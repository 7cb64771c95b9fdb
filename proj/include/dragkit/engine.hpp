#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "dragkit/extractors.hpp"
#include "dragkit/field.hpp"
#include "dragkit/region.hpp"
#include "dragkit/schedule.hpp"

namespace dragkit {

enum class LossMode { L1, Huber };

struct DragConfig {
    int k_motion = 50;
    int k_refine = 20;
    double lr_phase1 = 1000.0;
    double lr_phase2 = 1200.0;
    LossMode loss_mode = LossMode::L1;
    double huber_delta = 1e-3;
    // Warp the stop-gradient source features into the step-k frame. Off gives
    // the unaligned form, which compares features at different locations.
    bool align_source = true;
    // Step size alpha_eff = toy_step * (alpha / lr_phase1) / max|grad over B|,
    // so phase 1 moves the largest editable cell by exactly toy_step.
    bool normalized_gradient = true;
    double toy_step = 0.1;
    bool sweep = true;  // GradientMaskOptions::sweep
    ExtractorSpec extractor;
    std::uint64_t seed = 0;  // only consumed by randomized extractor self-checks

    // Diffusion-step knobs of a full editing pipeline. The toy engine optimizes
    // a single latent and records these without interpreting them.
    int inversion_steps = 25;
    int skip_steps = 6;
    int drag_start_step = 19;
    int optimize_step = 7;

    int total_iterations() const noexcept { return k_motion + k_refine; }
    /// Throws InvalidArgument for out-of-range values.
    void validate() const;

    friend bool operator==(const DragConfig&, const DragConfig&) = default;
};

/// Per-op stop-gradient snapshot M^(0) (.) F(z^(0)) on the feature grid.
struct BaselineFeatures {
    Field masked;
    Mask2D source_mask;  // feature grid
};

struct DragState {
    Field z;
    Field z_orig;
    std::vector<BaselineFeatures> baseline_features;
    int k = 0;
    GradientMask B;
    RegionWeights gammas;
};

/// Captures the baseline features from z0 and builds B and the weights.
DragState make_drag_state(const Field& z0, std::span<const RegionOp> ops,
                          const FeatureExtractor& extractor, const DragConfig& config);

struct LossAndGrad {
    double loss = 0.0;
    Field grad;
};

/// Region-level drag loss at schedule step k of K and its gradient w.r.t. z.
LossAndGrad drag_loss(const DragState& state, std::span<const RegionOp> ops, int k, int K,
                      const FeatureExtractor& extractor, const DragConfig& config);

/// z <- B (.) (z - alpha grad) + (1 - B) (.) z_orig; background is copied
/// from z_orig bit for bit.
Field hard_step(const DragState& state, const Field& grad, double alpha);
Field constrained_update(const Field& z, const Field& z_orig, const Mask2D& B, const Field& grad,
                         double alpha);

/// || (z_next - z_next_ref) (.) (1 - B) ||_1, summed over channels.
double soft_bg_loss(const Field& z_next, const Field& z_next_ref, const GradientMask& B);

/// Step size actually applied for a gradient under the configured mode.
double effective_step(const DragConfig& config, double alpha, const Field& grad, const Mask2D& B);

/// Location of the dragged content for one op: the norm-weighted centroid of
/// envelope cells whose channel-vector norm is at least half the largest norm
/// inside the source region of z_orig. Falls back to `fallback` when no cell
/// qualifies.
Point2 content_centroid(const Field& z, const Field& z_orig, const Mask2D& source_mask,
                        const Mask2D& envelope, Point2 fallback);

struct DragProgress {
    int iteration = 0;  // completed iterations
    int total = 0;
    double loss = 0.0;
    const std::vector<std::vector<Point2>>* centroids = nullptr;
};

/// Return false to cancel; the run then throws CancelledError.
using ProgressFn = std::function<bool(const DragProgress&)>;

struct DragResult {
    Field final_z;
    std::vector<double> loss_trajectory;
    std::vector<std::vector<Point2>> centroid_trajectory;  // [op][iteration]
    int iterations_run = 0;
    Mask2D gradient_mask;
    std::vector<double> gammas;

    friend bool operator==(const DragResult&, const DragResult&) = default;
};

/// Iterates k = 0 .. k_motion + k_refine - 1 with schedule step min(k, k_motion)
/// and the phase learning rate. Deterministic. Throws NonFiniteLossError when
/// the loss or gradient stops being finite.
DragResult run_drag(const Field& z0, std::span<const RegionOp> ops, const DragConfig& config,
                    const ProgressFn& progress = {});
DragResult run_drag(const Field& z0, std::span<const RegionOp> ops, const DragConfig& config,
                    const FeatureExtractor& extractor, const ProgressFn& progress = {});

}  // namespace dragkit
