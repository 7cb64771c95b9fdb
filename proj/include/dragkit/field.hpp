#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dragkit {

/// Dense C x H x W grid of reals stored channel-major, then row-major.
///
/// Used for latents, feature maps and images alike. Dimensions are fixed at
/// construction; element values are mutable.
class Field {
public:
    Field() = default;
    Field(int channels, int height, int width, double fill = 0.0);
    Field(int channels, int height, int width, std::vector<double> data);

    int channels() const noexcept { return channels_; }
    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t plane_size() const noexcept {
        return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
    }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& at(int c, int y, int x) noexcept { return data_[index(c, y, x)]; }
    double at(int c, int y, int x) const noexcept { return data_[index(c, y, x)]; }

    std::size_t index(int c, int y, int x) const noexcept {
        return (static_cast<std::size_t>(c) * static_cast<std::size_t>(height_) +
                static_cast<std::size_t>(y)) *
                   static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    std::span<double> plane(int c) noexcept;
    std::span<const double> plane(int c) const noexcept;

    bool same_shape(const Field& other) const noexcept {
        return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
    }
    bool all_finite() const noexcept;

    Field& operator+=(const Field& other);
    Field& operator-=(const Field& other);
    Field& operator*=(double s) noexcept;

    friend bool operator==(const Field&, const Field&) = default;

private:
    int channels_ = 0;
    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double s, Field a);

/// Sum of elementwise products. Throws DimensionMismatch on shape mismatch.
double inner_product(const Field& a, const Field& b);
double max_abs(const Field& a) noexcept;
double max_abs_difference(const Field& a, const Field& b);
double mean_abs_difference(const Field& a, const Field& b);

// Throws DimensionMismatch with `what` in the message.
void require_same_shape(const Field& a, const Field& b, const char* what);

using LatentField = Field;
using FeatureField = Field;

}  // namespace dragkit
