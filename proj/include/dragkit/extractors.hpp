#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dragkit/field.hpp"
#include "dragkit/geometry.hpp"

namespace dragkit {

struct ExtractorDescriptor {
    std::string name;
    int receptive_field_radius = 0;  // latent cells
    int stride = 1;
};

/// Differentiable feature map F(z) with its exact adjoint.
///
/// adjoint(g, z) is the gradient of <g, F(z)> with respect to z. Extractors
/// are immutable and safe to share between threads.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;

    virtual Field extract(const Field& z) const = 0;
    virtual Field adjoint(const Field& g, const Field& z) const = 0;
    virtual ExtractorDescriptor descriptor() const = 0;
    virtual bool is_linear() const { return true; }

    /// Feature grid size (height, width) for a latent of the given size.
    /// Throws InvalidArgument when the latent is too small.
    virtual std::pair<int, int> feature_size(int height, int width) const;

    int stride() const { return descriptor().stride; }
};

class IdentityExtractor final : public FeatureExtractor {
public:
    Field extract(const Field& z) const override;
    Field adjoint(const Field& g, const Field& z) const override;
    ExtractorDescriptor descriptor() const override;
};

/// Separable Gaussian blur with radius ceil(3 sigma). Near the borders the
/// kernel is renormalized over the in-bounds taps, so constants are preserved.
class GaussianBlurExtractor final : public FeatureExtractor {
public:
    explicit GaussianBlurExtractor(double sigma);

    Field extract(const Field& z) const override;
    Field adjoint(const Field& g, const Field& z) const override;
    ExtractorDescriptor descriptor() const override;

    double sigma() const noexcept { return sigma_; }
    int radius() const noexcept { return static_cast<int>(kernel_.size() / 2); }

private:
    double sigma_;
    std::vector<double> kernel_;  // 2R + 1 unnormalized taps
};

/// Average pooling over stride x stride blocks (floor(H/s) x floor(W/s) output;
/// trailing rows/columns are dropped), then a GaussianBlur on the coarse grid.
/// sigma = 0 disables the blur.
class PooledBlurExtractor final : public FeatureExtractor {
public:
    PooledBlurExtractor(int stride, double sigma);

    Field extract(const Field& z) const override;
    Field adjoint(const Field& g, const Field& z) const override;
    ExtractorDescriptor descriptor() const override;
    std::pair<int, int> feature_size(int height, int width) const override;

private:
    int stride_;
    double sigma_;
    std::unique_ptr<GaussianBlurExtractor> blur_;
};

/// Serializable extractor choice: "identity", "gaussian_blur", "pooled_blur".
struct ExtractorSpec {
    std::string kind = "identity";
    double sigma = 1.0;
    int stride = 4;

    friend bool operator==(const ExtractorSpec&, const ExtractorSpec&) = default;
};

std::unique_ptr<FeatureExtractor> make_extractor(const ExtractorSpec& spec);

/// Max-pools a latent-grid mask onto a feature grid of the given stride.
Mask2D downsample_mask(const Mask2D& mask, int stride);

/// Latent coordinates of a feature cell center: stride * f + (stride - 1) / 2.
Point2 feature_to_latent(Point2 f, int stride) noexcept;
Point2 latent_to_feature(Point2 p, int stride) noexcept;

/// A latent-grid affine transform expressed in feature-grid coordinates.
AffineTransform to_feature_frame(const AffineTransform& t, int stride);

// ---------------------------------------------------------------------------
// Finite-difference gradient checks

/// Loss value and its gradient with respect to the argument.
using LossFn = std::function<std::pair<double, Field>(const Field&)>;

struct FdCheckOptions {
    int samples = 64;
    std::uint64_t seed = 0;
    // Only sample coordinates whose analytic gradient is nonzero.
    bool nonzero_only = false;
    // Relative errors use max(|analytic|, |numeric|, floor) as denominator.
    double floor = 1e-12;
};

struct FdCheckResult {
    double max_rel_error = 0.0;
    int samples = 0;
};

/// Central differences over a random subset of coordinates, compared with the
/// analytic gradient of `loss`. Throws InvalidArgument when delta <= 0.
FdCheckResult fd_gradient_check(const LossFn& loss, const Field& z, double delta,
                                const FdCheckOptions& options = {});

/// Same check for a loss defined on features: `feature_loss` returns the loss
/// and dL/dF, and the chain rule goes through extractor.adjoint.
FdCheckResult fd_gradient_check(const FeatureExtractor& extractor, const LossFn& feature_loss,
                                const Field& z, double delta, const FdCheckOptions& options = {});

/// Threshold a nonlinear extractor must meet before the engine accepts it.
inline constexpr double kExtractorFdTolerance = 1e-3;

/// Runs the acceptance check for a nonlinear extractor on `z` (loss
/// 0.5 ||F(z)||^2). Linear extractors return 0 without evaluating.
double extractor_self_check(const FeatureExtractor& extractor, const Field& z,
                            std::uint64_t seed = 0);

}  // namespace dragkit
