#pragma once

#include "dragkit/field.hpp"

namespace dragkit {

/// PSNR reported for identical inputs (and the upper cap for all results).
inline constexpr double kPsnrCapDb = 200.0;

struct SsimOptions {
    int window = 7;           // square uniform window, shrunk (odd) for small fields
    double k1 = 0.01;
    double k2 = 0.03;
    double data_range = 1.0;  // dynamic range L of the values
};

/// Mean SSIM over all valid windows of all channels, sample covariance.
double ssim(const Field& a, const Field& b, const SsimOptions& options = {});

/// 10 log10(L^2 / MSE), capped at kPsnrCapDb.
double psnr(const Field& a, const Field& b, double data_range = 1.0);

/// max - min of `f`, or 1 for a constant field.
double dynamic_range(const Field& f) noexcept;

}  // namespace dragkit
