#include "dragkit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dragkit/error.hpp"

namespace dragkit {

namespace {

// Distance tolerance for on-boundary tests and coordinate snapping.
constexpr double kBoundaryTol = 1e-9;

double snap(double v) noexcept {
    const double r = std::round(v);
    return std::abs(v - r) < kBoundaryTol ? r : v;
}

double sample_bits(const Mask2D& mask, double x, double y) noexcept {
    const double fx0 = std::floor(x);
    const double fy0 = std::floor(y);
    const int x0 = static_cast<int>(fx0);
    const int y0 = static_cast<int>(fy0);
    const double ax = x - fx0;
    const double ay = y - fy0;
    auto bit = [&](int cx, int cy) -> double {
        return mask.in_bounds(cx, cy) && mask.at(cx, cy) ? 1.0 : 0.0;
    };
    double v = 0.0;
    if (ax < 1.0 && ay < 1.0) v += (1.0 - ax) * (1.0 - ay) * bit(x0, y0);
    if (ax > 0.0) v += ax * (1.0 - ay) * bit(x0 + 1, y0);
    if (ay > 0.0) v += (1.0 - ax) * ay * bit(x0, y0 + 1);
    if (ax > 0.0 && ay > 0.0) v += ax * ay * bit(x0 + 1, y0 + 1);
    return v;
}

// Reduces a nonzero direction to the equivalent axis direction with angle in
// [0, 90) by quarter-turn rotations, which are exact.
Point2 canonical_axis(Point2 e) noexcept {
    Point2 u = (1.0 / norm(e)) * e;
    for (int i = 0; i < 4 && !(u.x > 0.0 && u.y >= 0.0); ++i) {
        u = {u.y, -u.x};
    }
    return u;
}

RotatedRect rect_for_axis(std::span<const Point2> hull, Point2 u) {
    const Point2 v{-u.y, u.x};
    double umin = dot(hull[0], u), umax = umin;
    double vmin = dot(hull[0], v), vmax = vmin;
    for (const Point2& p : hull.subspan(1)) {
        const double pu = dot(p, u);
        const double pv = dot(p, v);
        umin = std::min(umin, pu);
        umax = std::max(umax, pu);
        vmin = std::min(vmin, pv);
        vmax = std::max(vmax, pv);
    }
    RotatedRect r;
    r.center = 0.5 * (umin + umax) * u + 0.5 * (vmin + vmax) * v;
    r.width = umax - umin;
    r.height = vmax - vmin;
    double deg = std::atan2(u.y, u.x) * 180.0 / std::numbers::pi;
    if (deg < 0.0 || deg >= 90.0 - 1e-12) deg = 0.0;
    r.angle_deg = deg;
    return r;
}

std::vector<Point2> dedupe_ring(std::span<const Point2> vertices) {
    std::vector<Point2> out;
    out.reserve(vertices.size());
    for (const Point2& p : vertices) {
        if (out.empty() || distance(out.back(), p) > kBoundaryTol) out.push_back(p);
    }
    while (out.size() > 1 && distance(out.front(), out.back()) <= kBoundaryTol) out.pop_back();
    return out;
}

double signed_area2(std::span<const Point2> ring) noexcept {
    double a = 0.0;
    for (std::size_t i = 0; i < ring.size(); ++i) {
        a += cross(ring[i], ring[(i + 1) % ring.size()]);
    }
    return a;
}

void fill_segment(Mask2D& canvas, Point2 a, Point2 b) {
    const int x0 = std::max(0, static_cast<int>(std::ceil(std::min(a.x, b.x) - kBoundaryTol)));
    const int x1 = std::min(canvas.width() - 1,
                            static_cast<int>(std::floor(std::max(a.x, b.x) + kBoundaryTol)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(std::min(a.y, b.y) - kBoundaryTol)));
    const int y1 = std::min(canvas.height() - 1,
                            static_cast<int>(std::floor(std::max(a.y, b.y) + kBoundaryTol)));
    const Point2 e = b - a;
    const double len2 = dot(e, e);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const Point2 p{static_cast<double>(x), static_cast<double>(y)};
            Point2 closest = a;
            if (len2 > 0.0) {
                const double s = std::clamp(dot(p - a, e) / len2, 0.0, 1.0);
                closest = a + s * e;
            }
            if (distance(p, closest) <= kBoundaryTol) canvas.set(x, y);
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Mask2D

Mask2D::Mask2D(int width, int height) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw InvalidArgument("Mask2D dimensions must be >= 1");
    bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

Mask2D Mask2D::from_rows(std::span<const std::string> rows) {
    if (rows.empty()) throw InvalidArgument("Mask2D::from_rows: no rows");
    Mask2D m(static_cast<int>(rows[0].size()), static_cast<int>(rows.size()));
    for (int y = 0; y < m.height(); ++y) {
        const std::string& row = rows[static_cast<std::size_t>(y)];
        if (static_cast<int>(row.size()) != m.width()) {
            throw DimensionMismatch("Mask2D::from_rows: ragged rows");
        }
        for (int x = 0; x < m.width(); ++x) {
            const char c = row[static_cast<std::size_t>(x)];
            if (c != '0' && c != '1') throw InvalidArgument("Mask2D::from_rows: expected 0/1");
            m.set(x, y, c == '1');
        }
    }
    return m;
}

std::size_t Mask2D::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::vector<Point2> Mask2D::set_cells() const {
    std::vector<Point2> cells;
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            if (at(x, y)) cells.push_back({static_cast<double>(x), static_cast<double>(y)});
        }
    }
    return cells;
}

Mask2D& Mask2D::operator|=(const Mask2D& other) {
    if (!same_dims(other)) throw DimensionMismatch("Mask2D union: dimension mismatch");
    for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] |= other.bits_[i];
    return *this;
}

Mask2D& Mask2D::operator&=(const Mask2D& other) {
    if (!same_dims(other)) throw DimensionMismatch("Mask2D intersection: dimension mismatch");
    for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] &= other.bits_[i];
    return *this;
}

Mask2D Mask2D::operator~() const {
    Mask2D out = *this;
    for (auto& b : out.bits_) b = b ? 0 : 1;
    return out;
}

std::vector<std::string> Mask2D::to_rows() const {
    std::vector<std::string> rows(static_cast<std::size_t>(height_), std::string(width_, '0'));
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            if (at(x, y)) rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = '1';
        }
    }
    return rows;
}

Mask2D operator|(Mask2D a, const Mask2D& b) { return a |= b; }
Mask2D operator&(Mask2D a, const Mask2D& b) { return a &= b; }

// ---------------------------------------------------------------------------
// AffineTransform

AffineTransform::AffineTransform() : m_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}

AffineTransform::AffineTransform(double a, double b, double tx, double c, double d, double ty)
    : m_{a, b, tx, c, d, ty, 0, 0, 1} {
    for (double v : m_) {
        if (!std::isfinite(v)) throw InvalidArgument("AffineTransform: non-finite entry");
    }
}

AffineTransform AffineTransform::inverse() const {
    const double det = linear_determinant();
    if (std::abs(det) < kSingularDeterminant) {
        throw SingularTransformError("affine transform is not invertible (|det| < 1e-9)");
    }
    const double a = m_[4] / det;
    const double b = -m_[1] / det;
    const double c = -m_[3] / det;
    const double d = m_[0] / det;
    return {a, b, -(a * m_[2] + b * m_[5]), c, d, -(c * m_[2] + d * m_[5])};
}

AffineTransform operator*(const AffineTransform& x, const AffineTransform& y) {
    AffineTransform r;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += x.m_[i * 3 + k] * y.m_[k * 3 + j];
            r.m_[i * 3 + j] = s;
        }
    }
    return r;
}

AffineTransform make_translation(Point2 d) {
    if (!std::isfinite(d.x) || !std::isfinite(d.y)) {
        throw InvalidArgument("make_translation: non-finite displacement");
    }
    return {1.0, 0.0, d.x, 0.0, 1.0, d.y};
}

AffineTransform make_rotation(double angle, Point2 anchor) {
    if (!std::isfinite(angle)) throw InvalidArgument("make_rotation: non-finite angle");
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const AffineTransform rot(c, -s, 0.0, s, c, 0.0);
    return make_translation(anchor) * rot * make_translation({-anchor.x, -anchor.y});
}

// ---------------------------------------------------------------------------
// Resampling

Mask2D warp_mask(const Mask2D& mask, const AffineTransform& t) {
    const AffineTransform inv = t.inverse();
    Mask2D out(mask.width(), mask.height());
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            const Point2 q = inv.apply({static_cast<double>(x), static_cast<double>(y)});
            if (sample_bits(mask, snap(q.x), snap(q.y)) >= 0.5) out.set(x, y);
        }
    }
    return out;
}

double sample_bilinear(const Field& field, int channel, Point2 p) noexcept {
    const double x = snap(p.x);
    const double y = snap(p.y);
    const double fx0 = std::floor(x);
    const double fy0 = std::floor(y);
    const int x0 = static_cast<int>(fx0);
    const int y0 = static_cast<int>(fy0);
    const double ax = x - fx0;
    const double ay = y - fy0;
    auto value = [&](int cx, int cy) -> double {
        if (cx < 0 || cy < 0 || cx >= field.width() || cy >= field.height()) return 0.0;
        return field.at(channel, cy, cx);
    };
    double v = 0.0;
    if (ax < 1.0 && ay < 1.0) v += (1.0 - ax) * (1.0 - ay) * value(x0, y0);
    if (ax > 0.0) v += ax * (1.0 - ay) * value(x0 + 1, y0);
    if (ay > 0.0) v += (1.0 - ax) * ay * value(x0, y0 + 1);
    if (ax > 0.0 && ay > 0.0) v += ax * ay * value(x0 + 1, y0 + 1);
    return v;
}

Field warp_field(const Field& field, const AffineTransform& t) {
    const AffineTransform inv = t.inverse();
    Field out(field.channels(), field.height(), field.width());
    for (int y = 0; y < field.height(); ++y) {
        for (int x = 0; x < field.width(); ++x) {
            const Point2 q = inv.apply({static_cast<double>(x), static_cast<double>(y)});
            for (int c = 0; c < field.channels(); ++c) out.at(c, y, x) = sample_bilinear(field, c, q);
        }
    }
    return out;
}

Point2 centroid(const Mask2D& mask) {
    double sx = 0.0, sy = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask.at(x, y)) {
                sx += x;
                sy += y;
                ++n;
            }
        }
    }
    if (n == 0) throw EmptyRegionError("centroid of an empty mask");
    return {sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

// ---------------------------------------------------------------------------
// Hull, rectangles, rasterization

std::vector<Point2> convex_hull(std::vector<Point2> points) {
    std::sort(points.begin(), points.end(), [](Point2 a, Point2 b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    points.erase(std::unique(points.begin(), points.end()), points.end());
    if (points.size() < 3) return points;

    std::vector<Point2> hull(2 * points.size());
    std::size_t k = 0;
    for (const Point2& p : points) {
        while (k >= 2 && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = points.size() - 1, lower = k + 1; i-- > 0;) {
        const Point2& p = points[i];
        while (k >= lower && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
        hull[k++] = p;
    }
    hull.resize(k - 1);
    return hull;
}

RotatedRect min_area_rect(std::span<const Point2> points) {
    if (points.empty()) throw InvalidArgument("min_area_rect: no points");
    const std::vector<Point2> hull = convex_hull({points.begin(), points.end()});
    if (hull.size() == 1) return RotatedRect{hull[0], 0.0, 0.0, 0.0};

    RotatedRect best;
    bool have = false;
    const std::size_t edges = hull.size() == 2 ? 1 : hull.size();
    for (std::size_t i = 0; i < edges; ++i) {
        const Point2 e = hull[(i + 1) % hull.size()] - hull[i];
        if (norm(e) == 0.0) continue;
        const RotatedRect r = rect_for_axis(hull, canonical_axis(e));
        const double tie = 1e-9 * std::max(1.0, best.area());
        if (!have || r.area() < best.area() - tie ||
            (std::abs(r.area() - best.area()) <= tie && r.angle_deg < best.angle_deg)) {
            best = r;
            have = true;
        }
    }
    return best;
}

std::array<Point2, 4> box_points(const RotatedRect& r) {
    const double a = r.angle_deg * std::numbers::pi / 180.0;
    const Point2 u{std::cos(a), std::sin(a)};
    const Point2 v{-u.y, u.x};
    const Point2 hu = 0.5 * r.width * u;
    const Point2 hv = 0.5 * r.height * v;
    return {r.center - hu - hv, r.center + hu - hv, r.center + hu + hv, r.center - hu + hv};
}

Mask2D fill_convex_poly(const Mask2D& canvas, std::span<const Point2> vertices) {
    if (vertices.empty()) throw InvalidArgument("fill_convex_poly: no vertices");
    for (const Point2& p : vertices) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw InvalidArgument("fill_convex_poly: non-finite vertex");
        }
    }
    Mask2D out = canvas;
    std::vector<Point2> ring = dedupe_ring(vertices);

    double extent = 0.0;
    for (const Point2& p : ring) extent = std::max(extent, distance(p, ring[0]));
    const double area2 = ring.size() >= 3 ? signed_area2(ring) : 0.0;

    if (ring.size() < 3 || std::abs(area2) <= kBoundaryTol * std::max(1.0, extent)) {
        // Degenerate polygon: rasterize the segment between the extreme points.
        Point2 a = ring[0], b = ring[0];
        double best = -1.0;
        for (const Point2& p : ring) {
            for (const Point2& q : ring) {
                if (distance(p, q) > best) {
                    best = distance(p, q);
                    a = p;
                    b = q;
                }
            }
        }
        for (const Point2& p : ring) {
            const Point2 e = b - a;
            if (norm(e) > 0.0 && std::abs(cross(e, p - a)) / norm(e) > kBoundaryTol) {
                throw ConvexityError("fill_convex_poly: zero-area polygon is not a segment");
            }
        }
        fill_segment(out, a, b);
        return out;
    }

    if (area2 < 0.0) std::reverse(ring.begin(), ring.end());
    const std::size_t n = ring.size();

    // Every turn must be left (or straight) and the boundary must wind once.
    double turning = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point2 e0 = ring[(i + 1) % n] - ring[i];
        const Point2 e1 = ring[(i + 2) % n] - ring[(i + 1) % n];
        const double c = cross(e0, e1);
        if (c < -kBoundaryTol * norm(e0) * norm(e1)) {
            throw ConvexityError("fill_convex_poly: vertex list is not convex");
        }
        turning += std::atan2(c, dot(e0, e1));
    }
    if (std::abs(turning - 2.0 * std::numbers::pi) > 1e-6) {
        throw ConvexityError("fill_convex_poly: vertex list is self-intersecting");
    }

    auto inside = [&](double px, double py) {
        for (std::size_t i = 0; i < n; ++i) {
            const Point2 a = ring[i];
            const Point2 e = ring[(i + 1) % n] - a;
            if (cross(e, Point2{px - a.x, py - a.y}) < -kBoundaryTol * norm(e)) return false;
        }
        return true;
    };

    double ymin = ring[0].y, ymax = ring[0].y;
    for (const Point2& p : ring) {
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    const int y0 = std::max(0, static_cast<int>(std::ceil(ymin - kBoundaryTol)));
    const int y1 = std::min(out.height() - 1, static_cast<int>(std::floor(ymax + kBoundaryTol)));
    const int w = out.width();

    for (int y = y0; y <= y1; ++y) {
        const double py = y;
        double lo = -1e300, hi = 1e300;
        bool empty = false;
        for (std::size_t i = 0; i < n && !empty; ++i) {
            const Point2 a = ring[i];
            const Point2 e = ring[(i + 1) % n] - a;
            // cross(e, p - a) = C - e.y * px
            const double c0 = e.x * (py - a.y) + e.y * a.x + kBoundaryTol * norm(e);
            if (e.y > 0.0) {
                hi = std::min(hi, c0 / e.y);
            } else if (e.y < 0.0) {
                lo = std::max(lo, c0 / e.y);
            } else if (c0 < 0.0) {
                empty = true;
            }
        }
        if (empty || lo > hi + 1.0) continue;

        int xs = std::clamp(static_cast<int>(std::ceil(std::max(lo, -1.0))), 0, w - 1);
        int xe = std::clamp(static_cast<int>(std::floor(std::min(hi, static_cast<double>(w)))), 0,
                            w - 1);
        // The analytic bounds can be off by rounding; settle each end on the
        // exact predicate (row sections of a convex set are contiguous).
        if (xs > xe) {
            int hit = -1;
            for (int x = std::max(0, xe - 1); x <= std::min(w - 1, xs + 1); ++x) {
                if (inside(x, py)) {
                    hit = x;
                    break;
                }
            }
            if (hit < 0) continue;
            xs = xe = hit;
        }
        while (xs <= xe && !inside(xs, py)) ++xs;
        if (xs > xe) continue;
        while (xs > 0 && inside(xs - 1, py)) --xs;
        while (xe >= xs && !inside(xe, py)) --xe;
        while (xe < w - 1 && inside(xe + 1, py)) ++xe;
        for (int x = xs; x <= xe; ++x) out.set(x, y);
    }
    return out;
}

double mask_iou(const Mask2D& a, const Mask2D& b) {
    if (!a.same_dims(b)) throw DimensionMismatch("mask_iou: dimension mismatch");
    std::size_t inter = 0, uni = 0;
    auto ab = a.bits();
    auto bb = b.bits();
    for (std::size_t i = 0; i < ab.size(); ++i) {
        inter += (ab[i] & bb[i]);
        uni += (ab[i] | bb[i]);
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace dragkit
