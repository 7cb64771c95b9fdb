#include <doctest.h>

#include <random>

#include "dragkit/error.hpp"
#include "dragkit/extractors.hpp"

using namespace dragkit;

namespace {

Field random_field(int c, int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Field f(c, h, w);
    for (double& v : f.values()) v = n(rng);
    return f;
}

double mean(const Field& f) {
    double s = 0.0;
    for (double v : f.values()) s += v;
    return s / static_cast<double>(f.size());
}

}  // namespace

TEST_CASE("identity extractor") {
    const IdentityExtractor id;
    const Field z = random_field(2, 5, 6, 1);
    CHECK(id.extract(z) == z);
    CHECK(id.adjoint(z, z) == z);
    CHECK(id.descriptor().name == "identity");
    CHECK(id.descriptor().receptive_field_radius == 0);
    CHECK(id.stride() == 1);
}

TEST_CASE("gaussian blur keeps constants") {
    const GaussianBlurExtractor blur(1.5);
    CHECK(blur.radius() == 5);
    const Field f = blur.extract(Field(1, 9, 7, 3.25));
    for (double v : f.values()) CHECK(v == doctest::Approx(3.25).epsilon(1e-14));
    CHECK(blur.descriptor().receptive_field_radius == 5);
    CHECK(GaussianBlurExtractor(0.0).radius() == 0);
    CHECK_THROWS_AS(GaussianBlurExtractor(-1.0), InvalidArgument);
}

TEST_CASE("pooled blur preserves the mean") {
    const PooledBlurExtractor pool(2, 0.0);
    const Field z = random_field(1, 16, 16, 2);
    const Field f = pool.extract(z);
    CHECK(f.height() == 8);
    CHECK(f.width() == 8);
    CHECK(mean(f) == doctest::Approx(mean(z)).epsilon(1e-9));
    const PooledBlurExtractor odd(4, 1.0);
    CHECK(odd.feature_size(18, 13) == std::pair<int, int>{4, 3});
    CHECK(odd.descriptor().receptive_field_radius == 3 * 4 + 2);
    CHECK_THROWS_AS(odd.feature_size(3, 3), InvalidArgument);
}

TEST_CASE("adjoints satisfy the inner-product identity") {
    const Field z = random_field(2, 17, 14, 3);
    const IdentityExtractor id;
    const GaussianBlurExtractor blur(1.2);
    const PooledBlurExtractor pool(3, 0.8);
    for (const FeatureExtractor* e : std::initializer_list<const FeatureExtractor*>{&id, &blur, &pool}) {
        const Field fz = e->extract(z);
        const Field g = random_field(fz.channels(), fz.height(), fz.width(), 4);
        const double lhs = inner_product(g, fz);
        const double rhs = inner_product(e->adjoint(g, z), z);
        CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("finite-difference checks") {
    const Field z = random_field(1, 8, 8, 5);
    const IdentityExtractor id;
    const LossFn half_sq = [](const Field& f) { return std::pair{0.5 * inner_product(f, f), f}; };
    CHECK(fd_gradient_check(id, half_sq, z, 1e-4).max_rel_error <= 1e-6);

    const GaussianBlurExtractor blur(1.0);
    CHECK(fd_gradient_check(blur, half_sq, z, 1e-4).max_rel_error <= 1e-6);

    const Field zero(1, 6, 6);
    const auto [loss, grad] = half_sq(id.extract(zero));
    CHECK(loss == 0.0);
    CHECK(max_abs(id.adjoint(grad, zero)) == 0.0);

    CHECK_THROWS_AS(fd_gradient_check(half_sq, z, 0.0), InvalidArgument);
    CHECK(extractor_self_check(id, z, 0) == 0.0);
}

TEST_CASE("mask downsampling and coordinate frames") {
    Mask2D m(8, 8);
    m.set(5, 2);
    const Mask2D d = downsample_mask(m, 4);
    CHECK(d.width() == 2);
    CHECK(d.height() == 2);
    CHECK(d.at(1, 0));
    CHECK(d.count() == 1);

    CHECK(feature_to_latent({1, 2}, 4) == Point2{5.5, 9.5});
    CHECK(latent_to_feature({5.5, 9.5}, 4) == Point2{1, 2});
    const AffineTransform t = to_feature_frame(make_translation({8, -4}), 4);
    CHECK(t.apply({0, 0}).x == doctest::Approx(2));
    CHECK(t.apply({0, 0}).y == doctest::Approx(-1));
}

TEST_CASE("make_extractor") {
    CHECK(make_extractor({"identity", 1.0, 4})->descriptor().name == "identity");
    CHECK(make_extractor({"gaussian_blur", 2.0, 4})->descriptor().receptive_field_radius == 6);
    const auto p = make_extractor({"pooled_blur", 1.0, 2});
    CHECK(p->stride() == 2);
    CHECK(p->descriptor().receptive_field_radius == 7);
    CHECK_THROWS_AS(make_extractor({"vgg", 1.0, 4}), InvalidArgument);
}
