#include "dragkit/flow.hpp"

#include <cmath>

#include "dragkit/error.hpp"
#include "dragkit/quality.hpp"

namespace dragkit {

namespace {

// Slack for accumulated time grids such as i / steps.
constexpr double kTimeTol = 1e-12;

void require_shape(const Field& out, const Field& in, const char* who) {
    if (!out.same_shape(in)) throw DimensionMismatch(std::string(who) + ": predictor changed shape");
}

}  // namespace

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
    if (betas_.empty()) throw InvalidArgument("NoiseSchedule: no steps");
    alpha_bars_.reserve(betas_.size() + 1);
    alpha_bars_.push_back(1.0);
    for (double b : betas_) {
        if (!(b > 0.0 && b < 1.0)) throw InvalidArgument("NoiseSchedule: beta outside (0, 1)");
        const double next = alpha_bars_.back() * (1.0 - b);
        if (!(next < alpha_bars_.back()) || !(next > 0.0)) {
            throw InvalidArgument("NoiseSchedule: alpha_bar must decrease strictly and stay > 0");
        }
        alpha_bars_.push_back(next);
    }
}

NoiseSchedule NoiseSchedule::uniform(int steps, double beta) {
    if (steps < 1) throw InvalidArgument("NoiseSchedule::uniform: steps must be >= 1");
    return NoiseSchedule(std::vector<double>(static_cast<std::size_t>(steps), beta));
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
    if (steps < 1) throw InvalidArgument("NoiseSchedule::linear: steps must be >= 1");
    std::vector<double> betas(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) {
        const double f = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
        betas[static_cast<std::size_t>(i)] = beta_start + f * (beta_end - beta_start);
    }
    return NoiseSchedule(std::move(betas));
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t < 0 || t > steps()) throw InvalidArgument("NoiseSchedule::alpha_bar: t out of range");
    return alpha_bars_[static_cast<std::size_t>(t)];
}

Field ConstantVelocity::evaluate(const Field& z, double) const {
    require_same_shape(z, velocity_, "ConstantVelocity");
    return velocity_;
}

Field SinVelocity::evaluate(const Field& z, double) const {
    Field out = z;
    for (double& v : out.values()) v = std::sin(v);
    return out;
}

Field LinearNoisePredictor::evaluate(const Field& z, int) const { return scale_ * z; }

ConsistentLinearNoisePredictor::ConsistentLinearNoisePredictor(NoiseSchedule schedule,
                                                               double ratio)
    : schedule_(std::move(schedule)), ratio_(ratio) {
    if (!(ratio > 0.0)) throw InvalidArgument("ConsistentLinearNoisePredictor: ratio must be > 0");
}

Field ConsistentLinearNoisePredictor::evaluate(const Field& z, int t) const {
    const double ab = schedule_.alpha_bar(t);
    return (1.0 / (ratio_ * std::sqrt(ab) + std::sqrt(1.0 - ab))) * z;
}

Field rf_forward_step(const Field& z, double t, double dt, const VelocityPredictor& v) {
    if (!(dt > 0.0)) throw InvalidArgument("rf_forward_step: dt must be > 0");
    if (t < -kTimeTol || t + dt > 1.0 + kTimeTol) {
        throw InvalidArgument("rf_forward_step: step leaves [0, 1]");
    }
    Field vel = v.evaluate(z, t);
    require_shape(vel, z, "rf_forward_step");
    Field out = z;
    auto o = out.values();
    auto vv = vel.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += dt * vv[i];
    return out;
}

Field rf_backward_step(const Field& z, double t, double dt, const VelocityPredictor& v) {
    if (!(dt > 0.0)) throw InvalidArgument("rf_backward_step: dt must be > 0");
    if (t > 1.0 + kTimeTol || t - dt < -kTimeTol) {
        throw InvalidArgument("rf_backward_step: step leaves [0, 1]");
    }
    Field vel = v.evaluate(z, t);
    require_shape(vel, z, "rf_backward_step");
    Field out = z;
    auto o = out.values();
    auto vv = vel.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += (-dt) * vv[i];
    return out;
}

Field ddim_invert_step(const Field& z_prev, int t, const NoiseSchedule& schedule,
                       const NoisePredictor& eps) {
    if (t < 1 || t > schedule.steps()) throw InvalidArgument("ddim_invert_step: t out of range");
    const double ab_prev = schedule.alpha_bar(t - 1);
    const double ab = schedule.alpha_bar(t);
    Field e = eps.evaluate(z_prev, t - 1);
    require_shape(e, z_prev, "ddim_invert_step");

    const double sp = std::sqrt(1.0 - ab_prev), ap = std::sqrt(ab_prev);
    const double st = std::sqrt(1.0 - ab), at = std::sqrt(ab);
    Field out = z_prev;
    auto o = out.values();
    auto ev = e.values();
    for (std::size_t i = 0; i < o.size(); ++i) {
        const double z0_hat = (o[i] - sp * ev[i]) / ap;
        o[i] = at * z0_hat + st * ev[i];
    }
    return out;
}

Field ddim_denoise_step(const Field& z_t, int t, const NoiseSchedule& schedule,
                        const NoisePredictor& eps) {
    if (t < 1 || t > schedule.steps()) throw InvalidArgument("ddim_denoise_step: t out of range");
    const double ab = schedule.alpha_bar(t);
    const double ab_prev = schedule.alpha_bar(t - 1);
    if (!(ab > 0.0)) throw InvalidArgument("ddim_denoise_step: alpha_bar must be > 0");
    Field e = eps.evaluate(z_t, t);
    require_shape(e, z_t, "ddim_denoise_step");

    const double st = std::sqrt(1.0 - ab), at = std::sqrt(ab);
    const double sp = std::sqrt(1.0 - ab_prev), ap = std::sqrt(ab_prev);
    Field out = z_t;
    auto o = out.values();
    auto ev = e.values();
    for (std::size_t i = 0; i < o.size(); ++i) {
        const double z0_hat = (o[i] - st * ev[i]) / at;
        o[i] = ap * z0_hat + sp * ev[i];
    }
    return out;
}

Field rf_invert(const Field& z0, int steps, const VelocityPredictor& v) {
    if (steps < 1) throw InvalidArgument("rf_invert: steps must be >= 1");
    const double dt = 1.0 / steps;
    Field z = z0;
    for (int i = 0; i < steps; ++i) z = rf_forward_step(z, static_cast<double>(i) / steps, dt, v);
    return z;
}

Field rf_denoise(const Field& z1, int steps, const VelocityPredictor& v) {
    if (steps < 1) throw InvalidArgument("rf_denoise: steps must be >= 1");
    const double dt = 1.0 / steps;
    Field z = z1;
    for (int i = steps; i > 0; --i) z = rf_backward_step(z, static_cast<double>(i) / steps, dt, v);
    return z;
}

Field ddim_invert(const Field& z0, const NoiseSchedule& schedule, const NoisePredictor& eps) {
    Field z = z0;
    for (int t = 1; t <= schedule.steps(); ++t) z = ddim_invert_step(z, t, schedule, eps);
    return z;
}

Field ddim_denoise(const Field& zT, const NoiseSchedule& schedule, const NoisePredictor& eps) {
    Field z = zT;
    for (int t = schedule.steps(); t >= 1; --t) z = ddim_denoise_step(z, t, schedule, eps);
    return z;
}

std::string_view to_string(Solver solver) noexcept {
    return solver == Solver::RectifiedFlow ? "rf" : "ddim";
}

DriftReport measure_drift(const Field& original, const Field& reconstruction, int steps,
                          Solver solver) {
    require_same_shape(original, reconstruction, "measure_drift");
    const double range = dynamic_range(original);
    DriftReport r;
    r.ssim = ssim(original, reconstruction, SsimOptions{.data_range = range});
    r.psnr_db = psnr(original, reconstruction, range);
    r.mae = mean_abs_difference(original, reconstruction);
    r.steps = steps;
    r.solver = solver;
    return r;
}

DriftReport roundtrip_drift(const Field& z0, int steps, const VelocityPredictor& v) {
    const Field back = rf_denoise(rf_invert(z0, steps, v), steps, v);
    return measure_drift(z0, back, steps, Solver::RectifiedFlow);
}

DriftReport roundtrip_drift(const Field& z0, const NoiseSchedule& schedule,
                            const NoisePredictor& eps) {
    const Field back = ddim_denoise(ddim_invert(z0, schedule, eps), schedule, eps);
    return measure_drift(z0, back, schedule.steps(), Solver::Ddim);
}

}  // namespace dragkit
