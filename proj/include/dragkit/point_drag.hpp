#pragma once

#include <span>
#include <vector>

#include "dragkit/engine.hpp"
#include "dragkit/extractors.hpp"
#include "dragkit/field.hpp"

namespace dragkit {

/// Point-level drag instruction of the baseline method. Handle and target are
/// latent coordinates; radii are feature cells.
struct PointOp {
    Point2 handle;
    Point2 target;
    int patch_radius = 1;  // 0 gives 1x1 patches
    int track_radius = 3;

    friend bool operator==(const PointOp&, const PointOp&) = default;
};

struct PointDragConfig {
    double beta = 0.9;    // align vs smooth balance
    double lambda = 0.1;  // background term weight
};

/// Optimization state of the baseline. Handles live on the feature grid.
struct PointState {
    Field z;
    Field z_orig;
    Field features0;      // sg F(z^0)
    Field features_prev;  // sg F of the previous iterate
    std::vector<Point2> handles0;
    std::vector<Point2> handles;
    GradientMask B;
};

PointState make_point_state(const Field& z0, std::span<const PointOp> ops, const GradientMask& B,
                            const FeatureExtractor& extractor);

/// Unit step from `handle` toward `target` (feature cells), clipped to the
/// remaining distance.
Point2 supervision_step(Point2 handle, Point2 target) noexcept;

/// L_MS = beta L_align + (1 - beta) L_smooth + lambda L_mask and its gradient.
///
/// L_align pairs offset o of the patch at h + d (h the tracked handle, d the
/// supervision step) with offset o of the stop-gradient original patch at h^0.
/// L_smooth compares the current handle patch with the previous iterate's
/// features. L_mask = ||(z - z^0) (.) (1 - B)||_1 on the latent. Features are
/// sampled bilinearly. Throws InvalidArgument when a patch leaves the grid.
LossAndGrad point_ms_loss(const PointState& state, std::span<const PointOp> ops, double beta,
                          double lambda, const FeatureExtractor& extractor);

/// Nearest-neighbour feature match: the cell of the window of radius r2 around
/// round(handle), clipped to the grid, minimizing the L1 distance to the
/// feature of `features_base` at `reference`. Ties go to the smallest
/// distance from `handle`, then to row-major order.
Point2 point_track(const Field& features_now, const Field& features_base, Point2 reference,
                   Point2 handle, int r2);
/// Same with reference == handle.
Point2 point_track(const Field& features_now, const Field& features_base, Point2 handle, int r2);

/// Runs the baseline for config.total_iterations() iterations with the same
/// phase learning rates, step normalization and hard background constraint as
/// run_drag. centroid_trajectory holds the tracked handles in latent
/// coordinates.
DragResult run_point_drag(const Field& z0, std::span<const PointOp> ops, const GradientMask& B,
                          const DragConfig& config, const PointDragConfig& point_config,
                          const FeatureExtractor& extractor, const ProgressFn& progress = {});

}  // namespace dragkit
