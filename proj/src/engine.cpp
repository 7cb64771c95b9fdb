#include "dragkit/engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dragkit/error.hpp"

namespace dragkit {

namespace {

void require_ops(std::span<const RegionOp> ops, const Field& z) {
    if (ops.empty()) throw InvalidArgument("no region operations");
    for (const RegionOp& op : ops) {
        if (op.source_mask().width() != z.width() || op.source_mask().height() != z.height()) {
            throw DimensionMismatch("region mask does not match the latent grid");
        }
    }
}

Mask2D feature_mask(const Mask2D& latent_mask, const FeatureExtractor& extractor, int fh, int fw) {
    Mask2D m = downsample_mask(latent_mask, extractor.stride());
    if (m.width() != fw || m.height() != fh) {
        throw DimensionMismatch("mask/feature grid mismatch after downsampling");
    }
    return m;
}

}  // namespace

void DragConfig::validate() const {
    if (k_motion < 1) throw InvalidArgument("k_motion must be >= 1");
    if (k_refine < 0) throw InvalidArgument("k_refine must be >= 0");
    if (!(lr_phase1 > 0.0) || !(lr_phase2 > 0.0) || !std::isfinite(lr_phase1) ||
        !std::isfinite(lr_phase2)) {
        throw InvalidArgument("learning rates must be finite and > 0");
    }
    if (!(huber_delta > 0.0)) throw InvalidArgument("huber_delta must be > 0");
    if (!(toy_step > 0.0)) throw InvalidArgument("toy_step must be > 0");
}

DragState make_drag_state(const Field& z0, std::span<const RegionOp> ops,
                          const FeatureExtractor& extractor, const DragConfig& config) {
    config.validate();
    require_ops(ops, z0);
    if (!z0.all_finite()) throw InvalidArgument("initial latent contains non-finite values");

    DragState state;
    state.z = z0;
    state.z_orig = z0;
    state.B = build_gradient_mask(ops, z0.width(), z0.height(), config.k_motion,
                                  GradientMaskOptions{config.sweep});
    std::vector<Mask2D> masks;
    masks.reserve(ops.size());
    for (const RegionOp& op : ops) masks.push_back(op.source_mask());
    state.gammas = region_weights(masks);

    const Field f0 = extractor.extract(z0);
    for (const RegionOp& op : ops) {
        BaselineFeatures b;
        b.source_mask = feature_mask(op.source_mask(), extractor, f0.height(), f0.width());
        b.masked = f0;
        for (int c = 0; c < f0.channels(); ++c) {
            for (int y = 0; y < f0.height(); ++y) {
                for (int x = 0; x < f0.width(); ++x) {
                    if (!b.source_mask.at(x, y)) b.masked.at(c, y, x) = 0.0;
                }
            }
        }
        state.baseline_features.push_back(std::move(b));
    }
    return state;
}

LossAndGrad drag_loss(const DragState& state, std::span<const RegionOp> ops, int k, int K,
                      const FeatureExtractor& extractor, const DragConfig& config) {
    require_ops(ops, state.z);
    if (state.baseline_features.size() != ops.size() || state.gammas.gammas.size() != ops.size()) {
        throw InvalidArgument("drag_loss: state was built for a different op list");
    }
    const Field f = extractor.extract(state.z);
    const int stride = extractor.stride();
    const bool huber = config.loss_mode == LossMode::Huber;
    const double delta = config.huber_delta;

    Field dfeat(f.channels(), f.height(), f.width());
    double loss = 0.0;
    for (std::size_t i = 0; i < ops.size(); ++i) {
        const RegionOp& op = ops[i];
        const double gamma = state.gammas.gammas[i];
        const Mask2D mk = feature_mask(target_mask_at(op, k, K), extractor, f.height(), f.width());
        const BaselineFeatures& base = state.baseline_features[i];
        require_same_shape(base.masked, f, "drag_loss");
        const Field reference =
            config.align_source
                ? warp_field(base.masked, to_feature_frame(transform_at(op, k, K), stride))
                : base.masked;

        double term = 0.0;
        for (int c = 0; c < f.channels(); ++c) {
            for (int y = 0; y < f.height(); ++y) {
                for (int x = 0; x < f.width(); ++x) {
                    const bool in = mk.at(x, y);
                    const double r = (in ? f.at(c, y, x) : 0.0) - reference.at(c, y, x);
                    const double a = std::abs(r);
                    double d;
                    if (huber) {
                        term += a <= delta ? r * r / (2.0 * delta) : a - delta / 2.0;
                        d = a <= delta ? r / delta : (r > 0 ? 1.0 : -1.0);
                    } else {
                        term += a;
                        d = r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0);
                    }
                    if (in) dfeat.at(c, y, x) += gamma * d;
                }
            }
        }
        loss += gamma * term;
    }
    return {loss, extractor.adjoint(dfeat, state.z)};
}

Field hard_step(const DragState& state, const Field& grad, double alpha) {
    return constrained_update(state.z, state.z_orig, state.B.mask, grad, alpha);
}

Field constrained_update(const Field& z, const Field& z_orig, const Mask2D& B, const Field& grad,
                         double alpha) {
    require_same_shape(z, z_orig, "hard_step");
    require_same_shape(z, grad, "hard_step");
    if (B.width() != z.width() || B.height() != z.height()) {
        throw DimensionMismatch("hard_step: gradient mask does not match the latent grid");
    }
    Field out = z;
    for (int c = 0; c < out.channels(); ++c) {
        for (int y = 0; y < out.height(); ++y) {
            for (int x = 0; x < out.width(); ++x) {
                out.at(c, y, x) =
                    B.at(x, y) ? z.at(c, y, x) - alpha * grad.at(c, y, x) : z_orig.at(c, y, x);
            }
        }
    }
    return out;
}

double soft_bg_loss(const Field& z_next, const Field& z_next_ref, const GradientMask& B) {
    require_same_shape(z_next, z_next_ref, "soft_bg_loss");
    if (B.mask.width() != z_next.width() || B.mask.height() != z_next.height()) {
        throw DimensionMismatch("soft_bg_loss: gradient mask does not match the latent grid");
    }
    double s = 0.0;
    for (int c = 0; c < z_next.channels(); ++c) {
        for (int y = 0; y < z_next.height(); ++y) {
            for (int x = 0; x < z_next.width(); ++x) {
                if (!B.mask.at(x, y)) s += std::abs(z_next.at(c, y, x) - z_next_ref.at(c, y, x));
            }
        }
    }
    return s;
}

double effective_step(const DragConfig& config, double alpha, const Field& grad, const Mask2D& B) {
    if (!config.normalized_gradient) return alpha;
    double peak = 0.0;
    for (int c = 0; c < grad.channels(); ++c) {
        for (int y = 0; y < grad.height(); ++y) {
            for (int x = 0; x < grad.width(); ++x) {
                if (B.at(x, y)) peak = std::max(peak, std::abs(grad.at(c, y, x)));
            }
        }
    }
    if (peak == 0.0) return 0.0;
    return config.toy_step * (alpha / config.lr_phase1) / peak;
}

Point2 content_centroid(const Field& z, const Field& z_orig, const Mask2D& source_mask,
                        const Mask2D& envelope, Point2 fallback) {
    auto cell_norm = [](const Field& f, int x, int y) {
        double s = 0.0;
        for (int c = 0; c < f.channels(); ++c) s += f.at(c, y, x) * f.at(c, y, x);
        return std::sqrt(s);
    };
    double peak = 0.0;
    for (int y = 0; y < source_mask.height(); ++y) {
        for (int x = 0; x < source_mask.width(); ++x) {
            if (source_mask.at(x, y)) peak = std::max(peak, cell_norm(z_orig, x, y));
        }
    }
    const double threshold = 0.5 * peak;
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (int y = 0; y < envelope.height(); ++y) {
        for (int x = 0; x < envelope.width(); ++x) {
            if (!envelope.at(x, y)) continue;
            const double n = cell_norm(z, x, y);
            if (n >= threshold && n > 0.0) {
                sw += n;
                sx += n * x;
                sy += n * y;
            }
        }
    }
    if (sw == 0.0) return fallback;
    return {sx / sw, sy / sw};
}

DragResult run_drag(const Field& z0, std::span<const RegionOp> ops, const DragConfig& config,
                    const ProgressFn& progress) {
    const auto extractor = make_extractor(config.extractor);
    return run_drag(z0, ops, config, *extractor, progress);
}

DragResult run_drag(const Field& z0, std::span<const RegionOp> ops, const DragConfig& config,
                    const FeatureExtractor& extractor, const ProgressFn& progress) {
    if (!extractor.is_linear()) {
        const double err = extractor_self_check(extractor, z0, config.seed);
        if (!(err <= kExtractorFdTolerance)) {
            throw InvalidArgument("extractor '" + extractor.descriptor().name +
                                  "' failed its gradient check");
        }
    }
    DragState state = make_drag_state(z0, ops, extractor, config);

    std::vector<Mask2D> envelopes;
    for (const RegionOp& op : ops) {
        envelopes.push_back(region_envelope(op, config.k_motion, GradientMaskOptions{config.sweep}));
    }

    DragResult result;
    result.centroid_trajectory.resize(ops.size());
    const int total = config.total_iterations();
    for (int it = 0; it < total; ++it) {
        const int k = std::min(it, config.k_motion);
        state.k = k;
        LossAndGrad lg = drag_loss(state, ops, k, config.k_motion, extractor, config);
        if (!std::isfinite(lg.loss) || !lg.grad.all_finite()) {
            std::ostringstream msg;
            msg << "non-finite drag loss at iteration " << it << " (k=" << k << ", loss=" << lg.loss
                << ")";
            throw NonFiniteLossError(msg.str());
        }
        const double alpha = it < config.k_motion ? config.lr_phase1 : config.lr_phase2;
        state.z = hard_step(state, lg.grad, effective_step(config, alpha, lg.grad, state.B.mask));

        result.loss_trajectory.push_back(lg.loss);
        for (std::size_t i = 0; i < ops.size(); ++i) {
            const Mask2D mk = target_mask_at(ops[i], k, config.k_motion);
            const Point2 fallback = mk.none() ? ops[i].begin() : centroid(mk);
            result.centroid_trajectory[i].push_back(content_centroid(
                state.z, state.z_orig, ops[i].source_mask(), envelopes[i], fallback));
        }
        ++result.iterations_run;
        if (progress && !progress({result.iterations_run, total, lg.loss,
                                   &result.centroid_trajectory})) {
            throw CancelledError("cancelled");
        }
    }
    result.final_z = std::move(state.z);
    result.gradient_mask = state.B.mask;
    result.gammas = state.gammas.gammas;
    return result;
}

}  // namespace dragkit
