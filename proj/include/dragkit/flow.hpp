#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dragkit/field.hpp"

namespace dragkit {

/// Discrete DDIM noise schedule. alpha_bar(t) = prod_{s<=t} (1 - beta_s) for
/// t = 1..T, and alpha_bar(0) = 1 by convention.
class NoiseSchedule {
public:
    /// Throws InvalidArgument unless every beta is in (0, 1) and alpha_bar is
    /// strictly decreasing.
    explicit NoiseSchedule(std::vector<double> betas);

    static NoiseSchedule uniform(int steps, double beta);
    static NoiseSchedule linear(int steps, double beta_start, double beta_end);

    int steps() const noexcept { return static_cast<int>(betas_.size()); }
    double beta(int s) const { return betas_.at(static_cast<std::size_t>(s - 1)); }
    double alpha_bar(int t) const;

private:
    std::vector<double> betas_;
    std::vector<double> alpha_bars_;  // index t, alpha_bars_[0] == 1
};

/// v_theta(z, t) for t in [0, 1]. Implementations must be deterministic and
/// safe to call concurrently.
class VelocityPredictor {
public:
    virtual ~VelocityPredictor() = default;
    virtual Field evaluate(const Field& z, double t) const = 0;
};

/// eps_theta(z, t) for integer steps t. Same requirements as above.
class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;
    virtual Field evaluate(const Field& z, int t) const = 0;
};

// ---------------------------------------------------------------------------
// Synthetic predictors for drift studies

class ConstantVelocity final : public VelocityPredictor {
public:
    explicit ConstantVelocity(Field velocity) : velocity_(std::move(velocity)) {}
    Field evaluate(const Field& z, double t) const override;

private:
    Field velocity_;
};

/// v(z, t) = sin(z), elementwise.
class SinVelocity final : public VelocityPredictor {
public:
    Field evaluate(const Field& z, double t) const override;
};

/// eps(z, t) = scale * z.
class LinearNoisePredictor final : public NoisePredictor {
public:
    explicit LinearNoisePredictor(double scale) : scale_(scale) {}
    Field evaluate(const Field& z, int t) const override;

private:
    double scale_;
};

/// eps(z, t) = z / (ratio * sqrt(abar_t) + sqrt(1 - abar_t)).
///
/// The exact noise predictor for data equal to `ratio` times the noise. It is
/// linear in z and predicts the same noise at every point of a DDIM
/// trajectory, so DDIM inversion followed by denoising is exact.
class ConsistentLinearNoisePredictor final : public NoisePredictor {
public:
    ConsistentLinearNoisePredictor(NoiseSchedule schedule, double ratio);
    Field evaluate(const Field& z, int t) const override;

private:
    NoiseSchedule schedule_;
    double ratio_;
};

// ---------------------------------------------------------------------------
// Single steps

/// Explicit Euler toward noise: z + dt * v(z, t). Requires dt > 0, t >= 0 and
/// t + dt <= 1.
Field rf_forward_step(const Field& z, double t, double dt, const VelocityPredictor& v);

/// Explicit Euler toward data: z - dt * v(z, t). Requires dt > 0, t <= 1 and
/// t - dt >= 0.
Field rf_backward_step(const Field& z, double t, double dt, const VelocityPredictor& v);

/// DDIM inversion step t-1 -> t (1 <= t <= T), using eps(z_prev, t-1).
Field ddim_invert_step(const Field& z_prev, int t, const NoiseSchedule& schedule,
                       const NoisePredictor& eps);

/// DDIM denoising step t -> t-1 (1 <= t <= T), using eps(z_t, t).
Field ddim_denoise_step(const Field& z_t, int t, const NoiseSchedule& schedule,
                        const NoisePredictor& eps);

// ---------------------------------------------------------------------------
// Full trajectories and drift

/// Integrates from t = 0 to t = 1 in `steps` uniform Euler steps.
Field rf_invert(const Field& z0, int steps, const VelocityPredictor& v);
/// Integrates from t = 1 back to t = 0.
Field rf_denoise(const Field& z1, int steps, const VelocityPredictor& v);

Field ddim_invert(const Field& z0, const NoiseSchedule& schedule, const NoisePredictor& eps);
Field ddim_denoise(const Field& zT, const NoiseSchedule& schedule, const NoisePredictor& eps);

enum class Solver { RectifiedFlow, Ddim };
std::string_view to_string(Solver solver) noexcept;

/// Reconstruction quality of invert-then-denoise. PSNR of an exact recovery
/// is kPsnrCapDb. SSIM and PSNR use the dynamic range of the input.
struct DriftReport {
    double ssim = 0.0;
    double psnr_db = 0.0;
    double mae = 0.0;
    int steps = 0;
    Solver solver = Solver::RectifiedFlow;
};

DriftReport measure_drift(const Field& original, const Field& reconstruction, int steps,
                          Solver solver);

DriftReport roundtrip_drift(const Field& z0, int steps, const VelocityPredictor& v);
DriftReport roundtrip_drift(const Field& z0, const NoiseSchedule& schedule,
                            const NoisePredictor& eps);

}  // namespace dragkit
