#include "dragkit/field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dragkit/error.hpp"

namespace dragkit {

Field::Field(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
    if (channels < 1 || height < 1 || width < 1) {
        throw InvalidArgument("Field dimensions must be >= 1");
    }
    data_.assign(static_cast<std::size_t>(channels) * plane_size(), fill);
}

Field::Field(int channels, int height, int width, std::vector<double> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
    if (channels < 1 || height < 1 || width < 1) {
        throw InvalidArgument("Field dimensions must be >= 1");
    }
    if (data_.size() != static_cast<std::size_t>(channels) * plane_size()) {
        throw DimensionMismatch("Field data length does not match C*H*W");
    }
}

std::span<double> Field::plane(int c) noexcept {
    return std::span<double>(data_).subspan(static_cast<std::size_t>(c) * plane_size(),
                                            plane_size());
}

std::span<const double> Field::plane(int c) const noexcept {
    return std::span<const double>(data_).subspan(static_cast<std::size_t>(c) * plane_size(),
                                                  plane_size());
}

bool Field::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Field& Field::operator+=(const Field& other) {
    require_same_shape(*this, other, "Field::operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Field& Field::operator-=(const Field& other) {
    require_same_shape(*this, other, "Field::operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Field& Field::operator*=(double s) noexcept {
    for (double& v : data_) v *= s;
    return *this;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double s, Field a) { return a *= s; }

void require_same_shape(const Field& a, const Field& b, const char* what) {
    if (!a.same_shape(b)) {
        throw DimensionMismatch(std::string(what) + ": field shapes differ (" +
                                std::to_string(a.channels()) + "x" + std::to_string(a.height()) +
                                "x" + std::to_string(a.width()) + " vs " +
                                std::to_string(b.channels()) + "x" + std::to_string(b.height()) +
                                "x" + std::to_string(b.width()) + ")");
    }
}

double inner_product(const Field& a, const Field& b) {
    require_same_shape(a, b, "inner_product");
    double sum = 0.0;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) sum += av[i] * bv[i];
    return sum;
}

double max_abs(const Field& a) noexcept {
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_difference(const Field& a, const Field& b) {
    require_same_shape(a, b, "max_abs_difference");
    double m = 0.0;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) m = std::max(m, std::abs(av[i] - bv[i]));
    return m;
}

double mean_abs_difference(const Field& a, const Field& b) {
    require_same_shape(a, b, "mean_abs_difference");
    double s = 0.0;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) s += std::abs(av[i] - bv[i]);
    return av.empty() ? 0.0 : s / static_cast<double>(av.size());
}

}  // namespace dragkit
