#include "dragkit/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "dragkit/error.hpp"

namespace dragkit {

Mask2D disc_mask(int width, int height, Point2 center, double radius) {
    Mask2D m(width, height);
    const double r2 = radius * radius;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double dx = x - center.x, dy = y - center.y;
            if (dx * dx + dy * dy <= r2 + 1e-9) m.set(x, y);
        }
    }
    return m;
}

void add_gaussian_blob(Field& field, Point2 center, double sigma,
                       const std::vector<double>& signature, double amplitude) {
    if (static_cast<int>(signature.size()) != field.channels()) {
        throw DimensionMismatch("blob signature length differs from the channel count");
    }
    if (!(sigma > 0.0)) throw InvalidArgument("blob sigma must be > 0");
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int y = 0; y < field.height(); ++y) {
        for (int x = 0; x < field.width(); ++x) {
            const double dx = x - center.x, dy = y - center.y;
            const double g = amplitude * std::exp(-(dx * dx + dy * dy) * inv);
            for (int c = 0; c < field.channels(); ++c) field.at(c, y, x) += signature[c] * g;
        }
    }
}

std::vector<SyntheticCase> synthetic_suite(const SyntheticOptions& o) {
    if (o.size < 48) throw InvalidArgument("synthetic suite needs a grid of at least 48 cells");
    if (o.channels < 1) throw InvalidArgument("synthetic suite needs at least one channel");

    struct Plan {
        const char* name;
        Point2 begin;
        Point2 target;
        bool rotate;
        Point2 anchor;
    };
    const double c = 0.5 * (o.size - 1);
    const auto polar = [&](Point2 a, double r, double deg) {
        const double t = deg * std::numbers::pi / 180.0;
        return Point2{a.x + r * std::cos(t), a.y + r * std::sin(t)};
    };
    const Point2 mid{std::round(c), std::round(c)};
    const std::vector<Plan> plans = {
        {"reloc_right_8", {mid.x - 4, mid.y}, {mid.x + 4, mid.y}, false, {}},
        {"reloc_down_10", {mid.x, mid.y - 5}, {mid.x, mid.y + 5}, false, {}},
        {"reloc_diag_12", {mid.x - 6, mid.y - 6}, {mid.x + 2.5, mid.y + 2.5}, false, {}},
        {"reloc_left_14", {mid.x + 7, mid.y + 3}, {mid.x - 7, mid.y + 3}, false, {}},
        {"reloc_up_16", {mid.x - 2, mid.y + 8}, {mid.x - 2, mid.y - 8}, false, {}},
        {"reloc_antidiag_11", {mid.x + 4, mid.y - 4}, {mid.x - 4, mid.y + 3.5}, false, {}},
        {"rot_30", polar(mid, 16, 200), polar(mid, 16, 230), true, mid},
        {"rot_50", polar(mid, 14, 90), polar(mid, 14, 140), true, mid},
        {"rot_70", polar(mid, 18, -20), polar(mid, 18, 50), true, mid},
        {"rot_90", polar(mid, 12, 270), polar(mid, 12, 0), true, mid},
    };

    std::vector<SyntheticCase> out;
    out.reserve(plans.size());
    for (std::size_t i = 0; i < plans.size(); ++i) {
        const Plan& p = plans[i];
        std::mt19937_64 rng(o.seed * 1000003ULL + i);
        std::normal_distribution<double> noise(0.0, o.noise);
        std::uniform_real_distribution<double> level(0.5, 1.0);

        // Rotation begins sit on integer cells so the disc stays symmetric.
        const Point2 b = p.rotate ? Point2{std::round(p.begin.x), std::round(p.begin.y)} : p.begin;
        Point2 t = p.target;
        if (p.rotate) {
            const Point2 vb = b - p.anchor;
            const Point2 vt = p.target - p.anchor;
            t = p.anchor + (norm(vb) / norm(vt)) * vt;
        }

        Field z(o.channels, o.size, o.size);
        if (o.noise > 0.0) {
            for (double& v : z.values()) v = noise(rng);
        }
        std::vector<double> signature(static_cast<std::size_t>(o.channels));
        for (double& s : signature) s = level(rng);
        add_gaussian_blob(z, b, o.sigma, signature);

        Mask2D mask = disc_mask(o.size, o.size, b, o.mask_radius);
        RegionOp op = p.rotate ? RegionOp(TaskKind::Rotation, std::move(mask), t, p.anchor)
                               : RegionOp(TaskKind::Relocation, std::move(mask), t);
        PointOp point;
        point.handle = op.begin();
        point.target = t;
        out.push_back({p.name, std::move(z), std::move(op), point});
    }
    return out;
}

}  // namespace dragkit
