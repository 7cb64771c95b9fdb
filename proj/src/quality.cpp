#include "dragkit/quality.hpp"

#include <algorithm>
#include <cmath>

#include "dragkit/error.hpp"

namespace dragkit {

double ssim(const Field& a, const Field& b, const SsimOptions& options) {
    require_same_shape(a, b, "ssim");
    if (options.window < 1) throw InvalidArgument("ssim: window must be >= 1");
    if (!(options.data_range > 0.0)) throw InvalidArgument("ssim: data_range must be > 0");

    int win = std::min({options.window, a.height(), a.width()});
    if (win % 2 == 0) --win;
    const double n = static_cast<double>(win) * win;
    const double cov_norm = n > 1.0 ? n / (n - 1.0) : 1.0;
    const double c1 = (options.k1 * options.data_range) * (options.k1 * options.data_range);
    const double c2 = (options.k2 * options.data_range) * (options.k2 * options.data_range);

    double total = 0.0;
    std::size_t windows = 0;
    for (int c = 0; c < a.channels(); ++c) {
        for (int y0 = 0; y0 + win <= a.height(); ++y0) {
            for (int x0 = 0; x0 + win <= a.width(); ++x0) {
                double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
                for (int y = y0; y < y0 + win; ++y) {
                    for (int x = x0; x < x0 + win; ++x) {
                        const double va = a.at(c, y, x);
                        const double vb = b.at(c, y, x);
                        sa += va;
                        sb += vb;
                        saa += va * va;
                        sbb += vb * vb;
                        sab += va * vb;
                    }
                }
                const double ma = sa / n;
                const double mb = sb / n;
                const double va = cov_norm * (saa / n - ma * ma);
                const double vb = cov_norm * (sbb / n - mb * mb);
                const double cab = cov_norm * (sab / n - ma * mb);
                const double num = (2.0 * ma * mb + c1) * (2.0 * cab + c2);
                const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
                total += num / den;
                ++windows;
            }
        }
    }
    return total / static_cast<double>(windows);
}

double psnr(const Field& a, const Field& b, double data_range) {
    require_same_shape(a, b, "psnr");
    double se = 0.0;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) se += (av[i] - bv[i]) * (av[i] - bv[i]);
    const double mse = se / static_cast<double>(av.size());
    if (mse == 0.0) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(data_range * data_range / mse));
}

double dynamic_range(const Field& f) noexcept {
    if (f.empty()) return 1.0;
    const auto [lo, hi] = std::minmax_element(f.values().begin(), f.values().end());
    const double r = *hi - *lo;
    return r > 0.0 ? r : 1.0;
}

}  // namespace dragkit
