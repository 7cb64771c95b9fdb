#include "dragkit/point_drag.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include "dragkit/error.hpp"

namespace dragkit {

namespace {

constexpr double kSnapTol = 1e-9;

struct Tap {
    int x = 0;
    int y = 0;
    double w = 0.0;
};

// Bilinear taps of a sample at p with the same snapping rule as
// sample_bilinear. Taps with zero weight are dropped.
int bilinear_taps(Point2 p, std::array<Tap, 4>& taps) {
    auto snap = [](double v) {
        const double r = std::round(v);
        return std::abs(v - r) < kSnapTol ? r : v;
    };
    const double x = snap(p.x), y = snap(p.y);
    const double fx = std::floor(x), fy = std::floor(y);
    const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
    const double ax = x - fx, ay = y - fy;
    int n = 0;
    if (ax < 1.0 && ay < 1.0) taps[n++] = {x0, y0, (1.0 - ax) * (1.0 - ay)};
    if (ax > 0.0) taps[n++] = {x0 + 1, y0, ax * (1.0 - ay)};
    if (ay > 0.0) taps[n++] = {x0, y0 + 1, (1.0 - ax) * ay};
    if (ax > 0.0 && ay > 0.0) taps[n++] = {x0 + 1, y0 + 1, ax * ay};
    return n;
}

void require_inside(const Field& f, Point2 p, const char* what) {
    const double tol = kSnapTol;
    if (p.x < -tol || p.y < -tol || p.x > f.width() - 1 + tol || p.y > f.height() - 1 + tol) {
        std::ostringstream msg;
        msg << what << " patch out of bounds at (" << p.x << ", " << p.y << ")";
        throw InvalidArgument(msg.str());
    }
}

double sign(double r) { return r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0); }

// Adds weight * |F(q) - ref_c| summed over channels to `loss` and the
// matching subgradient to dfeat.
double l1_term(const Field& f, Point2 q, const Field& ref, Point2 p, double weight, Field& dfeat) {
    std::array<Tap, 4> tq{}, tp{};
    const int nq = bilinear_taps(q, tq);
    const int np = bilinear_taps(p, tp);
    double sum = 0.0;
    for (int c = 0; c < f.channels(); ++c) {
        double vq = 0.0, vp = 0.0;
        for (int i = 0; i < nq; ++i) vq += tq[i].w * f.at(c, tq[i].y, tq[i].x);
        for (int i = 0; i < np; ++i) vp += tp[i].w * ref.at(c, tp[i].y, tp[i].x);
        const double r = vq - vp;
        sum += std::abs(r);
        const double s = weight * sign(r);
        if (s != 0.0) {
            for (int i = 0; i < nq; ++i) dfeat.at(c, tq[i].y, tq[i].x) += s * tq[i].w;
        }
    }
    return sum;
}

}  // namespace

PointState make_point_state(const Field& z0, std::span<const PointOp> ops, const GradientMask& B,
                            const FeatureExtractor& extractor) {
    if (ops.empty()) throw InvalidArgument("no point operations");
    if (B.mask.width() != z0.width() || B.mask.height() != z0.height()) {
        throw DimensionMismatch("gradient mask does not match the latent grid");
    }
    PointState s;
    s.z = z0;
    s.z_orig = z0;
    s.features0 = extractor.extract(z0);
    s.features_prev = s.features0;
    s.B = B;
    for (const PointOp& op : ops) {
        if (op.patch_radius < 0 || op.track_radius < 1) {
            throw InvalidArgument("point op radii must be patch >= 0 and track >= 1");
        }
        const Point2 h = latent_to_feature(op.handle, extractor.stride());
        require_inside(s.features0, h, "handle");
        s.handles0.push_back(h);
        s.handles.push_back(h);
    }
    return s;
}

Point2 supervision_step(Point2 handle, Point2 target) noexcept {
    const Point2 d = target - handle;
    const double n = norm(d);
    return n > 1.0 ? Point2{d.x / n, d.y / n} : d;
}

LossAndGrad point_ms_loss(const PointState& state, std::span<const PointOp> ops, double beta,
                          double lambda, const FeatureExtractor& extractor) {
    if (ops.size() != state.handles.size()) {
        throw InvalidArgument("point_ms_loss: state was built for a different op list");
    }
    if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidArgument("beta must be in [0, 1]");
    if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be >= 0");

    const Field f = extractor.extract(state.z);
    require_same_shape(f, state.features0, "point_ms_loss");
    const int stride = extractor.stride();
    Field dfeat(f.channels(), f.height(), f.width());

    double align = 0.0, smooth = 0.0;
    for (std::size_t i = 0; i < ops.size(); ++i) {
        const int r = ops[i].patch_radius;
        const Point2 h = state.handles[i];
        const Point2 h0 = state.handles0[i];
        const Point2 s = h + supervision_step(h, latent_to_feature(ops[i].target, stride));
        for (int oy = -r; oy <= r; ++oy) {
            for (int ox = -r; ox <= r; ++ox) {
                const Point2 o{static_cast<double>(ox), static_cast<double>(oy)};
                require_inside(f, s + o, "supervision");
                require_inside(f, h0 + o, "source");
                require_inside(f, h + o, "handle");
            }
        }
        for (int oy = -r; oy <= r; ++oy) {
            for (int ox = -r; ox <= r; ++ox) {
                const Point2 o{static_cast<double>(ox), static_cast<double>(oy)};
                align += l1_term(f, s + o, state.features0, h0 + o, beta, dfeat);
                smooth += l1_term(f, h + o, state.features_prev, h + o, 1.0 - beta, dfeat);
            }
        }
    }

    Field grad = extractor.adjoint(dfeat, state.z);
    double mask_term = 0.0;
    const Mask2D& B = state.B.mask;
    for (int c = 0; c < state.z.channels(); ++c) {
        for (int y = 0; y < state.z.height(); ++y) {
            for (int x = 0; x < state.z.width(); ++x) {
                if (B.at(x, y)) continue;
                const double r = state.z.at(c, y, x) - state.z_orig.at(c, y, x);
                mask_term += std::abs(r);
                grad.at(c, y, x) += lambda * sign(r);
            }
        }
    }
    return {beta * align + (1.0 - beta) * smooth + lambda * mask_term, std::move(grad)};
}

Point2 point_track(const Field& features_now, const Field& features_base, Point2 reference,
                   Point2 handle, int r2) {
    require_same_shape(features_now, features_base, "point_track");
    if (r2 < 0) throw InvalidArgument("point_track: radius must be >= 0");
    std::array<Tap, 4> taps{};
    const int n = bilinear_taps(reference, taps);
    std::vector<double> ref(static_cast<std::size_t>(features_base.channels()), 0.0);
    for (int c = 0; c < features_base.channels(); ++c) {
        for (int i = 0; i < n; ++i) {
            if (taps[i].x < 0 || taps[i].y < 0 || taps[i].x >= features_base.width() ||
                taps[i].y >= features_base.height()) {
                continue;
            }
            ref[static_cast<std::size_t>(c)] += taps[i].w * features_base.at(c, taps[i].y, taps[i].x);
        }
    }

    const int cx = static_cast<int>(std::lround(handle.x));
    const int cy = static_cast<int>(std::lround(handle.y));
    bool found = false;
    Point2 best;
    double best_cost = 0.0, best_dist = 0.0;
    for (int y = std::max(0, cy - r2); y <= std::min(features_now.height() - 1, cy + r2); ++y) {
        for (int x = std::max(0, cx - r2); x <= std::min(features_now.width() - 1, cx + r2); ++x) {
            double cost = 0.0;
            for (int c = 0; c < features_now.channels(); ++c) {
                cost += std::abs(features_now.at(c, y, x) - ref[static_cast<std::size_t>(c)]);
            }
            const Point2 q{static_cast<double>(x), static_cast<double>(y)};
            const double dist = distance(q, handle);
            if (!found || cost < best_cost || (cost == best_cost && dist < best_dist)) {
                found = true;
                best = q;
                best_cost = cost;
                best_dist = dist;
            }
        }
    }
    return found ? best : handle;
}

Point2 point_track(const Field& features_now, const Field& features_base, Point2 handle, int r2) {
    return point_track(features_now, features_base, handle, handle, r2);
}

DragResult run_point_drag(const Field& z0, std::span<const PointOp> ops, const GradientMask& B,
                          const DragConfig& config, const PointDragConfig& point_config,
                          const FeatureExtractor& extractor, const ProgressFn& progress) {
    config.validate();
    PointState state = make_point_state(z0, ops, B, extractor);
    const int stride = extractor.stride();

    DragResult result;
    result.centroid_trajectory.resize(ops.size());
    const int total = config.total_iterations();
    for (int it = 0; it < total; ++it) {
        LossAndGrad lg =
            point_ms_loss(state, ops, point_config.beta, point_config.lambda, extractor);
        if (!std::isfinite(lg.loss) || !lg.grad.all_finite()) {
            std::ostringstream msg;
            msg << "non-finite motion-supervision loss at iteration " << it;
            throw NonFiniteLossError(msg.str());
        }
        const double alpha = it < config.k_motion ? config.lr_phase1 : config.lr_phase2;
        state.features_prev = extractor.extract(state.z);
        state.z = constrained_update(state.z, state.z_orig, B.mask, lg.grad,
                                     effective_step(config, alpha, lg.grad, B.mask));

        const Field now = extractor.extract(state.z);
        for (std::size_t i = 0; i < ops.size(); ++i) {
            state.handles[i] = point_track(now, state.features0, state.handles0[i],
                                           state.handles[i], ops[i].track_radius);
            result.centroid_trajectory[i].push_back(feature_to_latent(state.handles[i], stride));
        }
        result.loss_trajectory.push_back(lg.loss);
        ++result.iterations_run;
        if (progress && !progress({result.iterations_run, total, lg.loss,
                                   &result.centroid_trajectory})) {
            throw CancelledError("cancelled");
        }
    }
    result.final_z = std::move(state.z);
    result.gradient_mask = B.mask;
    return result;
}

}  // namespace dragkit
