#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dragkit/field.hpp"

namespace dragkit {

// Image coordinates: x grows rightward (columns), y grows downward (rows).
// Cell (x, y) has its center at the integer point (x, y).
struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator+(Point2 a, Point2 b) noexcept { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) noexcept { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 p) noexcept { return {s * p.x, s * p.y}; }
inline double dot(Point2 a, Point2 b) noexcept { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) noexcept { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 p) noexcept { return std::hypot(p.x, p.y); }
inline double distance(Point2 a, Point2 b) noexcept { return norm(a - b); }

/// Binary mask over a width x height grid.
class Mask2D {
public:
    Mask2D() = default;
    Mask2D(int width, int height);

    /// Builds a mask from rows of '0'/'1' characters (row 0 first).
    static Mask2D from_rows(std::span<const std::string> rows);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool in_bounds(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }
    bool at(int x, int y) const noexcept {
        return bits_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                     static_cast<std::size_t>(x)] != 0;
    }
    void set(int x, int y, bool value = true) noexcept {
        bits_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
              static_cast<std::size_t>(x)] = value ? 1 : 0;
    }

    std::size_t count() const noexcept;
    bool none() const noexcept { return count() == 0; }
    bool same_dims(const Mask2D& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    /// Centers of all set cells in row-major order.
    std::vector<Point2> set_cells() const;
    std::span<const std::uint8_t> bits() const noexcept { return bits_; }

    Mask2D& operator|=(const Mask2D& other);
    Mask2D& operator&=(const Mask2D& other);
    Mask2D operator~() const;

    std::vector<std::string> to_rows() const;

    friend bool operator==(const Mask2D&, const Mask2D&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

Mask2D operator|(Mask2D a, const Mask2D& b);
Mask2D operator&(Mask2D a, const Mask2D& b);

/// 3x3 homogeneous transform whose last row is always (0, 0, 1).
class AffineTransform {
public:
    AffineTransform();  // identity

    /// Upper 2x3 block, row-major: [a b tx; c d ty].
    AffineTransform(double a, double b, double tx, double c, double d, double ty);

    static AffineTransform identity() { return {}; }

    double operator()(int row, int col) const noexcept { return m_[row * 3 + col]; }
    Point2 apply(Point2 p) const noexcept {
        return {m_[0] * p.x + m_[1] * p.y + m_[2], m_[3] * p.x + m_[4] * p.y + m_[5]};
    }
    double linear_determinant() const noexcept { return m_[0] * m_[4] - m_[1] * m_[3]; }

    /// Throws SingularTransformError when |det| of the 2x2 block is below 1e-9.
    AffineTransform inverse() const;

    /// Composition: (a * b).apply(p) == a.apply(b.apply(p)).
    friend AffineTransform operator*(const AffineTransform& a, const AffineTransform& b);
    friend bool operator==(const AffineTransform&, const AffineTransform&) = default;

    std::array<double, 9> matrix() const noexcept { return m_; }

private:
    std::array<double, 9> m_;
};

/// Rectangle with `width` measured along (cos a, sin a) and `height` along
/// (-sin a, cos a), where a = angle_deg in [0, 90).
struct RotatedRect {
    Point2 center;
    double width = 0.0;
    double height = 0.0;
    double angle_deg = 0.0;

    double area() const noexcept { return width * height; }
};

inline constexpr double kSingularDeterminant = 1e-9;

AffineTransform make_translation(Point2 d);

/// Rotation by `angle` radians about `anchor`, composed as
/// T(anchor) * R(angle) * T(-anchor) with R = [cos -sin; sin cos].
///
/// The matrix is the standard math-convention rotation applied to raw image
/// coordinates. Because y points down, a positive angle turns content
/// clockwise on screen.
AffineTransform make_rotation(double angle, Point2 anchor);

/// Resamples `mask` under `t` by inverse mapping: each output cell pulls the
/// bilinear interpolation of the source bits at t^-1(cell) and is set when that
/// value is >= 0.5. Samples outside the grid read as 0.
Mask2D warp_mask(const Mask2D& mask, const AffineTransform& t);

/// Real-valued counterpart of warp_mask (no thresholding), per channel.
Field warp_field(const Field& field, const AffineTransform& t);

/// Bilinear sample of one channel at a real position; outside reads as 0.
double sample_bilinear(const Field& field, int channel, Point2 p) noexcept;

/// Mean of set-cell centers. Throws EmptyRegionError for an empty mask.
Point2 centroid(const Mask2D& mask);

/// Convex hull in counter-clockwise order (math orientation), collinear
/// points removed. Degenerate inputs yield 1 or 2 points.
std::vector<Point2> convex_hull(std::vector<Point2> points);

/// Minimum-area enclosing rectangle via rotating calipers over the hull.
/// Ties are broken by the smallest angle in [0, 90).
RotatedRect min_area_rect(std::span<const Point2> points);

/// Corners of `r` in order around the rectangle.
std::array<Point2, 4> box_points(const RotatedRect& r);

/// Sets every cell whose center lies inside or on the polygon (union with the
/// existing canvas). Degenerate (collinear) inputs rasterize as a segment.
/// Throws ConvexityError for non-convex or self-intersecting vertex lists.
Mask2D fill_convex_poly(const Mask2D& canvas, std::span<const Point2> vertices);

/// |a & b| / |a | b|; 1 when both are empty.
double mask_iou(const Mask2D& a, const Mask2D& b);

}  // namespace dragkit
