#include "dragkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "dragkit/error.hpp"

namespace dragkit {

namespace {

void require_grid(const Field& f, const Mask2D& m, const char* what) {
    if (m.width() != f.width() || m.height() != f.height()) {
        throw DimensionMismatch(std::string(what) + ": mask does not match the field grid");
    }
}

struct Cell {
    int x = 0;
    int y = 0;
};

Cell round_cell(Point2 p) {
    return {static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y))};
}

// Best match in `edited` for the patch of `original` centered at src.
Cell match_patch(const Field& original, const Field& edited, Cell src, int r,
                 const Mask2D& search) {
    const int C = original.channels();
    const int side = 2 * r + 1;
    std::vector<double> patch(static_cast<std::size_t>(C * side * side), 0.0);
    auto read = [](const Field& f, int c, int y, int x) {
        return (x < 0 || y < 0 || x >= f.width() || y >= f.height()) ? 0.0 : f.at(c, y, x);
    };
    for (int c = 0; c < C; ++c) {
        for (int oy = -r; oy <= r; ++oy) {
            for (int ox = -r; ox <= r; ++ox) {
                patch[static_cast<std::size_t>((c * side + oy + r) * side + ox + r)] =
                    read(original, c, src.y + oy, src.x + ox);
            }
        }
    }

    bool found = false;
    Cell best;
    double best_cost = 0.0, best_dist = 0.0;
    for (int y = 0; y < search.height(); ++y) {
        for (int x = 0; x < search.width(); ++x) {
            if (!search.at(x, y)) continue;
            double cost = 0.0;
            for (int c = 0; c < C && (!found || cost <= best_cost); ++c) {
                for (int oy = -r; oy <= r; ++oy) {
                    for (int ox = -r; ox <= r; ++ox) {
                        cost += std::abs(
                            read(edited, c, y + oy, x + ox) -
                            patch[static_cast<std::size_t>((c * side + oy + r) * side + ox + r)]);
                    }
                }
            }
            const double dist = std::hypot(x - src.x, y - src.y);
            if (!found || cost < best_cost || (cost == best_cost && dist < best_dist)) {
                found = true;
                best = {x, y};
                best_cost = cost;
                best_dist = dist;
            }
        }
    }
    return best;
}

double md_scope(const Field& x_feats, const Field& x_edited_feats, const RegionOp& op,
                const Mask2D& search_mask, const MdOptions& options, int scope) {
    require_same_shape(x_feats, x_edited_feats, "md");
    if (options.patch_radius < 0 || scope < 0 || options.stride < 1) {
        throw InvalidArgument("md: radii must be >= 0 and stride >= 1");
    }
    const int s = options.stride;
    const Mask2D search = downsample_mask(search_mask, s);
    if (search.width() != x_feats.width() || search.height() != x_feats.height()) {
        throw DimensionMismatch("md: search mask does not match the feature grid");
    }
    if (search.none()) throw EmptyRegionError("md: search region is empty");

    const AffineTransform full = transform_at(op, 1, 1);
    const Point2 b = op.begin();
    const Point2 t = op.target();
    double total = 0.0;
    int count = 0;
    for (int oy = -scope; oy <= scope; ++oy) {
        for (int ox = -scope; ox <= scope; ++ox) {
            if (ox * ox + oy * oy > scope * scope) continue;
            const Point2 o{static_cast<double>(ox), static_cast<double>(oy)};
            const Point2 from = b + o;
            const Cell src = round_cell(latent_to_feature(from, s));
            const Cell q = match_patch(x_feats, x_edited_feats, src, options.patch_radius, search);
            const Point2 moved{from.x + s * (q.x - src.x), from.y + s * (q.y - src.y)};
            const Point2 lo{full(0, 0) * o.x + full(0, 1) * o.y, full(1, 0) * o.x + full(1, 1) * o.y};
            total += distance(moved, t + lo);
            ++count;
        }
    }
    return total / count;
}

}  // namespace

double SsimDistance::distance(const Field& a, const Field& b) const {
    require_same_shape(a, b, "SsimDistance");
    if (a == b) return 0.0;
    return std::clamp((1.0 - ssim(a, b, options_)) / 2.0, 0.0, 1.0);
}

MeanAbsDistance::MeanAbsDistance(double data_range) : data_range_(data_range) {
    if (!(data_range > 0.0)) throw InvalidArgument("MeanAbsDistance: data_range must be > 0");
}

double MeanAbsDistance::distance(const Field& a, const Field& b) const {
    return std::clamp(mean_abs_difference(a, b) / data_range_, 0.0, 1.0);
}

std::unique_ptr<PerceptualDistance> make_distance(const std::string& name) {
    if (name == "ssim") return std::make_unique<SsimDistance>();
    if (name == "mad") return std::make_unique<MeanAbsDistance>();
    throw InvalidArgument("unknown perceptual distance '" + name + "'");
}

Field apply_mask(const Field& f, const Mask2D& mask) {
    require_grid(f, mask, "apply_mask");
    Field out = f;
    for (int c = 0; c < f.channels(); ++c) {
        for (int y = 0; y < f.height(); ++y) {
            for (int x = 0; x < f.width(); ++x) {
                if (!mask.at(x, y)) out.at(c, y, x) = 0.0;
            }
        }
    }
    return out;
}

double if_s2s(const Field& x, const Field& x_edited, std::span<const Mask2D> source_masks,
              const PerceptualDistance& dist) {
    require_same_shape(x, x_edited, "if_s2s");
    if (source_masks.empty()) throw InvalidArgument("if_s2s: no masks");
    double sum = 0.0;
    for (const Mask2D& m : source_masks) {
        if (m.none()) throw EmptyRegionError("if_s2s: empty source mask");
        sum += dist.distance(apply_mask(x, m), apply_mask(x_edited, m));
    }
    return 1.0 - sum / static_cast<double>(source_masks.size());
}

double if_s2t(const Field& x, const Field& x_edited, std::span<const RegionOp> ops, int K,
              const PerceptualDistance& dist) {
    require_same_shape(x, x_edited, "if_s2t");
    if (ops.empty()) throw InvalidArgument("if_s2t: no ops");
    double sum = 0.0;
    for (const RegionOp& op : ops) {
        const Mask2D mk = target_mask_at(op, K, K);
        if (mk.none()) throw EmptyRegionError("if_s2t: target mask is empty after warping");
        const Field x_aff = warp_field(apply_mask(x, op.source_mask()), transform_at(op, K, K));
        sum += dist.distance(apply_mask(x_aff, mk), apply_mask(x_edited, mk));
    }
    return 1.0 - sum / static_cast<double>(ops.size());
}

double if_bg(const Field& x, const Field& x_edited, const Mask2D& B,
             const PerceptualDistance& dist) {
    require_same_shape(x, x_edited, "if_bg");
    const Mask2D bg = ~B;
    if (bg.none()) throw EmptyRegionError("if_bg: gradient mask covers the whole image");
    return 1.0 - dist.distance(apply_mask(x, bg), apply_mask(x_edited, bg));
}

double md1(const Field& x_feats, const Field& x_edited_feats, const RegionOp& op,
           const Mask2D& search_mask, const MdOptions& options) {
    return md_scope(x_feats, x_edited_feats, op, search_mask, options, 0);
}

double md2(const Field& x_feats, const Field& x_edited_feats, const RegionOp& op,
           const Mask2D& search_mask, const MdOptions& options) {
    return md_scope(x_feats, x_edited_feats, op, search_mask, options, options.scope_radius);
}

MetricReport evaluate_edit(const Field& x, const Field& x_edited, std::span<const RegionOp> ops,
                           const Mask2D& B, int K, const EvalOptions& options) {
    require_same_shape(x, x_edited, "evaluate_edit");
    if (ops.empty()) throw InvalidArgument("evaluate_edit: no ops");
    const auto dist = make_distance(options.distance);
    const auto extractor = make_extractor(options.features);

    MetricReport r;
    r.distance = dist->name();
    std::vector<Mask2D> sources;
    for (const RegionOp& op : ops) sources.push_back(op.source_mask());
    r.if_bg = if_bg(x, x_edited, B, *dist);
    r.if_s2t = if_s2t(x, x_edited, ops, K, *dist);
    r.if_s2s = if_s2s(x, x_edited, sources, *dist);

    const Field fx = extractor->extract(x);
    const Field fe = extractor->extract(x_edited);
    MdOptions md = options.md;
    md.stride = extractor->stride();
    double s1 = 0.0, s2 = 0.0;
    for (const RegionOp& op : ops) {
        s1 += md1(fx, fe, op, B, md);
        s2 += md2(fx, fe, op, B, md);
    }
    r.md1 = s1 / static_cast<double>(ops.size());
    r.md2 = s2 / static_cast<double>(ops.size());
    return r;
}

std::string format_metric_table(std::span<const std::pair<std::string, MetricReport>> rows) {
    std::size_t label_w = 5;
    for (const auto& [label, _] : rows) label_w = std::max(label_w, label.size());
    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-*s  %8s  %8s  %8s  %8s  %8s\n", static_cast<int>(label_w),
                  "label", "IF_bg", "IF_s2t", "IF_s2s", "MD1", "MD2");
    out << buf;
    for (const auto& [label, m] : rows) {
        std::snprintf(buf, sizeof buf, "%-*s  %8.4f  %8.4f  %8.4f  %8.3f  %8.3f\n",
                      static_cast<int>(label_w), label.c_str(), m.if_bg, m.if_s2t, m.if_s2s, m.md1,
                      m.md2);
        out << buf;
    }
    if (!rows.empty()) {
        out << "distance: " << rows.front().second.distance << " (" << rows.front().second.variant
            << ")\n";
    }
    return out.str();
}

}  // namespace dragkit
