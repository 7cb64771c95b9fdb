#include "dragkit/extractors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dragkit/error.hpp"

namespace dragkit {

namespace {

// One axis of the renormalized blur. `transpose` applies the exact transpose
// of the forward operator out[i] = sum_j k[j] in[i + j] / norm(i).
void blur_axis(const Field& in, Field& out, const std::vector<double>& kernel, bool vertical,
               bool transpose) {
    const int radius = static_cast<int>(kernel.size() / 2);
    const int n = vertical ? in.height() : in.width();
    std::vector<double> norm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = -radius; j <= radius; ++j) {
            if (i + j >= 0 && i + j < n) s += kernel[static_cast<std::size_t>(j + radius)];
        }
        norm[static_cast<std::size_t>(i)] = s;
    }

    std::vector<double> line(static_cast<std::size_t>(n)), res(static_cast<std::size_t>(n));
    const int lines = vertical ? in.width() : in.height();
    for (int c = 0; c < in.channels(); ++c) {
        for (int l = 0; l < lines; ++l) {
            for (int i = 0; i < n; ++i) {
                line[static_cast<std::size_t>(i)] = vertical ? in.at(c, i, l) : in.at(c, l, i);
            }
            std::fill(res.begin(), res.end(), 0.0);
            for (int i = 0; i < n; ++i) {
                const double inv = 1.0 / norm[static_cast<std::size_t>(i)];
                const int lo = std::max(-radius, -i);
                const int hi = std::min(radius, n - 1 - i);
                if (!transpose) {
                    double s = 0.0;
                    for (int j = lo; j <= hi; ++j) {
                        s += kernel[static_cast<std::size_t>(j + radius)] *
                             line[static_cast<std::size_t>(i + j)];
                    }
                    res[static_cast<std::size_t>(i)] = s * inv;
                } else {
                    const double g = line[static_cast<std::size_t>(i)] * inv;
                    for (int j = lo; j <= hi; ++j) {
                        res[static_cast<std::size_t>(i + j)] +=
                            kernel[static_cast<std::size_t>(j + radius)] * g;
                    }
                }
            }
            for (int i = 0; i < n; ++i) {
                (vertical ? out.at(c, i, l) : out.at(c, l, i)) = res[static_cast<std::size_t>(i)];
            }
        }
    }
}

void require_feature_shape(const FeatureExtractor& e, const Field& g, const Field& z,
                           const char* who) {
    const auto [h, w] = e.feature_size(z.height(), z.width());
    if (g.channels() != z.channels() || g.height() != h || g.width() != w) {
        throw DimensionMismatch(std::string(who) + ": gradient does not match feature shape");
    }
}

}  // namespace

std::pair<int, int> FeatureExtractor::feature_size(int height, int width) const {
    return {height, width};
}

// ---------------------------------------------------------------------------

Field IdentityExtractor::extract(const Field& z) const { return z; }

Field IdentityExtractor::adjoint(const Field& g, const Field& z) const {
    require_feature_shape(*this, g, z, "IdentityExtractor::adjoint");
    return g;
}

ExtractorDescriptor IdentityExtractor::descriptor() const { return {"identity", 0, 1}; }

// ---------------------------------------------------------------------------

GaussianBlurExtractor::GaussianBlurExtractor(double sigma) : sigma_(sigma) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
        throw InvalidArgument("GaussianBlurExtractor: sigma must be finite and >= 0");
    }
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    kernel_.resize(static_cast<std::size_t>(2 * radius + 1));
    for (int j = -radius; j <= radius; ++j) {
        kernel_[static_cast<std::size_t>(j + radius)] =
            radius == 0 ? 1.0 : std::exp(-0.5 * j * j / (sigma * sigma));
    }
}

Field GaussianBlurExtractor::extract(const Field& z) const {
    Field tmp(z.channels(), z.height(), z.width());
    Field out(z.channels(), z.height(), z.width());
    blur_axis(z, tmp, kernel_, false, false);
    blur_axis(tmp, out, kernel_, true, false);
    return out;
}

Field GaussianBlurExtractor::adjoint(const Field& g, const Field& z) const {
    require_feature_shape(*this, g, z, "GaussianBlurExtractor::adjoint");
    Field tmp(g.channels(), g.height(), g.width());
    Field out(g.channels(), g.height(), g.width());
    blur_axis(g, tmp, kernel_, true, true);
    blur_axis(tmp, out, kernel_, false, true);
    return out;
}

ExtractorDescriptor GaussianBlurExtractor::descriptor() const {
    return {"gaussian_blur", radius(), 1};
}

// ---------------------------------------------------------------------------

PooledBlurExtractor::PooledBlurExtractor(int stride, double sigma)
    : stride_(stride), sigma_(sigma), blur_(std::make_unique<GaussianBlurExtractor>(sigma)) {
    if (stride < 1) throw InvalidArgument("PooledBlurExtractor: stride must be >= 1");
}

std::pair<int, int> PooledBlurExtractor::feature_size(int height, int width) const {
    if (height < stride_ || width < stride_) {
        throw InvalidArgument("PooledBlurExtractor: latent smaller than the stride");
    }
    return {height / stride_, width / stride_};
}

Field PooledBlurExtractor::extract(const Field& z) const {
    const auto [h, w] = feature_size(z.height(), z.width());
    const double inv = 1.0 / (static_cast<double>(stride_) * stride_);
    Field pooled(z.channels(), h, w);
    for (int c = 0; c < z.channels(); ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double s = 0.0;
                for (int dy = 0; dy < stride_; ++dy) {
                    for (int dx = 0; dx < stride_; ++dx) {
                        s += z.at(c, y * stride_ + dy, x * stride_ + dx);
                    }
                }
                pooled.at(c, y, x) = s * inv;
            }
        }
    }
    return blur_->extract(pooled);
}

Field PooledBlurExtractor::adjoint(const Field& g, const Field& z) const {
    require_feature_shape(*this, g, z, "PooledBlurExtractor::adjoint");
    const Field gp = blur_->adjoint(g, g);
    const double inv = 1.0 / (static_cast<double>(stride_) * stride_);
    Field out(z.channels(), z.height(), z.width());
    for (int c = 0; c < g.channels(); ++c) {
        for (int y = 0; y < g.height(); ++y) {
            for (int x = 0; x < g.width(); ++x) {
                const double v = gp.at(c, y, x) * inv;
                for (int dy = 0; dy < stride_; ++dy) {
                    for (int dx = 0; dx < stride_; ++dx) {
                        out.at(c, y * stride_ + dy, x * stride_ + dx) = v;
                    }
                }
            }
        }
    }
    return out;
}

ExtractorDescriptor PooledBlurExtractor::descriptor() const {
    return {"pooled_blur", blur_->radius() * stride_ + stride_ / 2, stride_};
}

// ---------------------------------------------------------------------------

std::unique_ptr<FeatureExtractor> make_extractor(const ExtractorSpec& spec) {
    if (spec.kind == "identity") return std::make_unique<IdentityExtractor>();
    if (spec.kind == "gaussian_blur") return std::make_unique<GaussianBlurExtractor>(spec.sigma);
    if (spec.kind == "pooled_blur") {
        return std::make_unique<PooledBlurExtractor>(spec.stride, spec.sigma);
    }
    throw InvalidArgument("unknown extractor kind '" + spec.kind + "'");
}

Mask2D downsample_mask(const Mask2D& mask, int stride) {
    if (stride < 1) throw InvalidArgument("downsample_mask: stride must be >= 1");
    if (stride == 1) return mask;
    const int w = mask.width() / stride;
    const int h = mask.height() / stride;
    if (w < 1 || h < 1) throw InvalidArgument("downsample_mask: mask smaller than the stride");
    Mask2D out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            bool any = false;
            for (int dy = 0; dy < stride && !any; ++dy) {
                for (int dx = 0; dx < stride && !any; ++dx) {
                    any = mask.at(x * stride + dx, y * stride + dy);
                }
            }
            if (any) out.set(x, y);
        }
    }
    return out;
}

Point2 feature_to_latent(Point2 f, int stride) noexcept {
    const double c = (stride - 1) / 2.0;
    return {stride * f.x + c, stride * f.y + c};
}

Point2 latent_to_feature(Point2 p, int stride) noexcept {
    const double c = (stride - 1) / 2.0;
    return {(p.x - c) / stride, (p.y - c) / stride};
}

AffineTransform to_feature_frame(const AffineTransform& t, int stride) {
    if (stride == 1) return t;
    const double s = stride;
    const double c = (stride - 1) / 2.0;
    // f -> latent: p = s f + c; feature = (p - c) / s.
    const AffineTransform up(s, 0, c, 0, s, c);
    const AffineTransform down(1 / s, 0, -c / s, 0, 1 / s, -c / s);
    return down * t * up;
}

// ---------------------------------------------------------------------------

FdCheckResult fd_gradient_check(const LossFn& loss, const Field& z, double delta,
                                const FdCheckOptions& options) {
    if (!(delta > 0.0)) throw InvalidArgument("fd_gradient_check: delta must be > 0");
    if (options.samples < 1) throw InvalidArgument("fd_gradient_check: samples must be >= 1");

    const auto [value, grad] = loss(z);
    (void)value;
    require_same_shape(grad, z, "fd_gradient_check");

    std::vector<std::size_t> pool;
    pool.reserve(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (!options.nonzero_only || grad.values()[i] != 0.0) pool.push_back(i);
    }
    std::vector<std::size_t> picked;
    std::mt19937_64 rng(options.seed);
    std::sample(pool.begin(), pool.end(), std::back_inserter(picked),
                static_cast<std::size_t>(options.samples), rng);

    FdCheckResult result;
    Field probe = z;
    for (std::size_t i : picked) {
        const double orig = probe.values()[i];
        probe.values()[i] = orig + delta;
        const double up = loss(probe).first;
        probe.values()[i] = orig - delta;
        const double down = loss(probe).first;
        probe.values()[i] = orig;

        const double numeric = (up - down) / (2.0 * delta);
        const double analytic = grad.values()[i];
        const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
        const double err = std::abs(analytic - numeric) / denom;
        result.max_rel_error = std::max(result.max_rel_error, err);
        ++result.samples;
    }
    return result;
}

FdCheckResult fd_gradient_check(const FeatureExtractor& extractor, const LossFn& feature_loss,
                                const Field& z, double delta, const FdCheckOptions& options) {
    const LossFn composed = [&](const Field& x) {
        auto [value, dfeat] = feature_loss(extractor.extract(x));
        return std::pair<double, Field>{value, extractor.adjoint(dfeat, x)};
    };
    return fd_gradient_check(composed, z, delta, options);
}

double extractor_self_check(const FeatureExtractor& extractor, const Field& z,
                            std::uint64_t seed) {
    if (extractor.is_linear()) return 0.0;
    const LossFn half_square = [](const Field& f) {
        return std::pair<double, Field>{0.5 * inner_product(f, f), f};
    };
    FdCheckOptions opts;
    opts.seed = seed;
    return fd_gradient_check(extractor, half_square, z, 1e-5, opts).max_rel_error;
}

}  // namespace dragkit
