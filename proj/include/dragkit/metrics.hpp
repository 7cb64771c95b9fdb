#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dragkit/extractors.hpp"
#include "dragkit/field.hpp"
#include "dragkit/quality.hpp"
#include "dragkit/region.hpp"
#include "dragkit/schedule.hpp"

namespace dragkit {

/// Distance between two equally shaped fields, in [0, 1], zero on identical
/// inputs and symmetric.
class PerceptualDistance {
public:
    virtual ~PerceptualDistance() = default;
    virtual double distance(const Field& a, const Field& b) const = 0;
    virtual std::string name() const = 0;
};

/// (1 - SSIM) / 2. Bitwise-identical inputs score exactly 0.
class SsimDistance final : public PerceptualDistance {
public:
    explicit SsimDistance(SsimOptions options = {}) : options_(options) {}
    double distance(const Field& a, const Field& b) const override;
    std::string name() const override { return "ssim"; }

private:
    SsimOptions options_;
};

/// mean |a - b| / data_range, clamped to [0, 1].
class MeanAbsDistance final : public PerceptualDistance {
public:
    explicit MeanAbsDistance(double data_range = 1.0);
    double distance(const Field& a, const Field& b) const override;
    std::string name() const override { return "mad"; }

private:
    double data_range_;
};

/// "ssim" or "mad".
std::unique_ptr<PerceptualDistance> make_distance(const std::string& name);

/// Copy of `f` with every channel zeroed outside `mask`.
Field apply_mask(const Field& f, const Mask2D& mask);

/// 1 - mean_i dist(M_i^(0) x, M_i^(0) x'). Throws EmptyRegionError for an
/// empty mask.
double if_s2s(const Field& x, const Field& x_edited, std::span<const Mask2D> source_masks,
              const PerceptualDistance& dist);

/// 1 - mean_i dist(M_i^(K) x_aff, M_i^(K) x') with x_aff the source content
/// M_i^(0) x warped by the full transform. Throws EmptyRegionError when a
/// target mask is clipped away entirely.
double if_s2t(const Field& x, const Field& x_edited, std::span<const RegionOp> ops, int K,
              const PerceptualDistance& dist);

/// 1 - dist((1 - B) x, (1 - B) x'). Throws EmptyRegionError when B covers the
/// whole grid (no background).
double if_bg(const Field& x, const Field& x_edited, const Mask2D& B,
             const PerceptualDistance& dist);

struct MdOptions {
    int patch_radius = 3;  // feature cells
    int scope_radius = 5;  // latent pixels
    int stride = 1;        // feature stride of the supplied fields
};

/// Feature-matching drag distance at the region centroid.
///
/// The patch of radius r around the source centroid (rounded to the feature
/// grid) in x_feats is matched against every cell of x_edited_feats inside
/// `search_mask` (latent grid, max-pooled to the feature grid) by L1 distance;
/// out-of-grid patch cells read 0. The matched displacement carries the
/// centroid to b + stride * (q - src) and the result is its distance to the
/// target, in pixels. Ties go to the cell closest to src, then row-major.
/// Throws EmptyRegionError for an empty search region.
double md1(const Field& x_feats, const Field& x_edited_feats, const RegionOp& op,
           const Mask2D& search_mask, const MdOptions& options = {});

/// Mean of the md1 matching over integer offsets o with |o| <= scope_radius:
/// source point b + o, expected position t + L o with L the linear part of
/// the full transform. Radius 0 equals md1 exactly.
double md2(const Field& x_feats, const Field& x_edited_feats, const RegionOp& op,
           const Mask2D& search_mask, const MdOptions& options = {});

inline constexpr const char* kMetricVariant = "dragkit variant";

struct MetricReport {
    double if_bg = 0.0;
    double if_s2t = 0.0;
    double if_s2s = 0.0;
    double md1 = 0.0;
    double md2 = 0.0;
    std::string distance = "ssim";
    std::string variant = kMetricVariant;

    friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

struct EvalOptions {
    std::string distance = "ssim";
    MdOptions md;
    ExtractorSpec features;  // features for MD matching
};

/// All five metrics for one edit. IF values use the images directly; MD
/// values are averaged over ops and use `options.features` for matching.
MetricReport evaluate_edit(const Field& x, const Field& x_edited, std::span<const RegionOp> ops,
                           const Mask2D& B, int K, const EvalOptions& options = {});

/// Aligned text table with columns IF_bg, IF_s2t, IF_s2s, MD1, MD2.
std::string format_metric_table(std::span<const std::pair<std::string, MetricReport>> rows);

}  // namespace dragkit
