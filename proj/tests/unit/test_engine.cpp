#include <doctest.h>

#include <cmath>
#include <random>

#include "dragkit/engine.hpp"
#include "dragkit/error.hpp"
#include "dragkit/synthetic.hpp"

using namespace dragkit;

namespace {

Field random_field(int c, int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Field f(c, h, w);
    for (double& v : f.values()) v = n(rng);
    return f;
}

Mask2D block(int w, int h, int x0, int y0, int bw, int bh) {
    Mask2D m(w, h);
    for (int y = y0; y < y0 + bh; ++y)
        for (int x = x0; x < x0 + bw; ++x) m.set(x, y);
    return m;
}

bool background_unchanged(const Field& z, const Field& z0, const Mask2D& B) {
    for (int c = 0; c < z.channels(); ++c)
        for (int y = 0; y < z.height(); ++y)
            for (int x = 0; x < z.width(); ++x)
                if (!B.at(x, y) && z.at(c, y, x) != z0.at(c, y, x)) return false;
    return true;
}

}  // namespace

TEST_CASE("config validation") {
    DragConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.total_iterations() == 70);
    c.k_motion = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.lr_phase2 = -1;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("loss is exactly zero at k = 0") {
    const Field z = random_field(3, 32, 32, 1);
    const std::vector<RegionOp> ops{
        RegionOp(TaskKind::Relocation, block(32, 32, 4, 4, 6, 5), {20.3, 17.9}),
        RegionOp(TaskKind::Rotation, block(32, 32, 18, 20, 5, 5), {12, 26}, Point2{16, 26})};
    for (const char* kind : {"identity", "gaussian_blur", "pooled_blur"}) {
        DragConfig cfg;
        cfg.extractor = {kind, 1.0, 4};
        const auto e = make_extractor(cfg.extractor);
        const DragState s = make_drag_state(z, ops, *e, cfg);
        CHECK(drag_loss(s, ops, 0, 50, *e, cfg).loss == 0.0);
    }
}

TEST_CASE("single-cell hand evaluation") {
    Field z(2, 4, 4);
    z.at(0, 1, 1) = 0.75;
    z.at(1, 1, 1) = -0.5;
    z.at(0, 1, 2) = 0.25;
    z.at(1, 1, 2) = 0.5;
    Mask2D m(4, 4);
    m.set(1, 1);
    const RegionOp op(TaskKind::Relocation, m, {2, 1});
    DragConfig cfg;
    const IdentityExtractor id;
    const DragState s = make_drag_state(z, std::span(&op, 1), id, cfg);
    const LossAndGrad lg = drag_loss(s, std::span(&op, 1), 1, 1, id, cfg);
    CHECK(lg.loss == doctest::Approx(std::abs(0.25 - 0.75) + std::abs(0.5 + 0.5)));
    CHECK(lg.grad.at(0, 1, 2) == -1.0);
    CHECK(lg.grad.at(1, 1, 2) == 1.0);
    CHECK(lg.grad.at(0, 1, 1) == 0.0);
}

TEST_CASE("constrained update") {
    const Field z = random_field(2, 6, 6, 2);
    const Field z0 = random_field(2, 6, 6, 3);
    const Field g = random_field(2, 6, 6, 4);
    const Mask2D B = block(6, 6, 1, 1, 3, 3);

    const Field still = constrained_update(z, z0, B, Field(2, 6, 6), 5.0);
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 6; ++x)
                CHECK(still.at(c, y, x) == (B.at(x, y) ? z.at(c, y, x) : z0.at(c, y, x)));

    const Field full = constrained_update(z, z0, ~Mask2D(6, 6), g, 0.5);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(full.values()[i] == z.values()[i] - 0.5 * g.values()[i]);

    CHECK(constrained_update(z, z0, Mask2D(6, 6), g, 0.5) == z0);
}

TEST_CASE("soft background loss") {
    const Field a = random_field(1, 5, 5, 5);
    GradientMask B{block(5, 5, 0, 0, 2, 2)};
    CHECK(soft_bg_loss(a, a, B) == 0.0);
    Field b = a;
    b.at(0, 0, 0) += 3.0;
    CHECK(soft_bg_loss(b, a, B) == 0.0);
    Field c = a;
    for (int x = 0; x < 5; ++x) c.at(0, 4, x) += 1.0;
    CHECK(soft_bg_loss(c, a, B) == doctest::Approx(5.0));
}

TEST_CASE("effective step") {
    DragConfig cfg;
    Field g(1, 4, 4);
    g.at(0, 1, 1) = -4.0;
    g.at(0, 3, 3) = 100.0;  // outside B
    const Mask2D B = block(4, 4, 0, 0, 2, 2);
    CHECK(effective_step(cfg, cfg.lr_phase1, g, B) == doctest::Approx(0.1 / 4.0));
    CHECK(effective_step(cfg, cfg.lr_phase2, g, B) == doctest::Approx(0.1 * 1.2 / 4.0));
    CHECK(effective_step(cfg, 1000, Field(1, 4, 4), B) == 0.0);
    cfg.normalized_gradient = false;
    CHECK(effective_step(cfg, 1000, g, B) == 1000.0);
}

TEST_CASE("toy blob relocation reaches the target") {
    Field z(1, 64, 64);
    add_gaussian_blob(z, {20, 30}, 2.0, {1.0});
    const Mask2D src = disc_mask(64, 64, {20, 30}, 5);
    const RegionOp op(TaskKind::Relocation, src, {32, 30});
    const DragResult r = run_drag(z, std::span(&op, 1), DragConfig{});
    CHECK(r.iterations_run == 70);
    CHECK(r.loss_trajectory.size() == 70);
    CHECK(r.centroid_trajectory.at(0).size() == 70);
    CHECK(distance(r.centroid_trajectory[0].back(), op.target()) <= 2.0);
    CHECK(background_unchanged(r.final_z, z, r.gradient_mask));
    CHECK(r.loss_trajectory.front() == 0.0);
}

TEST_CASE("zero displacement keeps the loss at zero") {
    const Field z = random_field(2, 24, 24, 6);
    const Mask2D src = block(24, 24, 8, 8, 5, 5);
    const RegionOp op(TaskKind::Relocation, src, centroid(src));
    DragConfig cfg;
    cfg.k_motion = 5;
    cfg.k_refine = 2;
    const DragResult r = run_drag(z, std::span(&op, 1), cfg);
    for (double l : r.loss_trajectory) CHECK(l == 0.0);
    CHECK(r.final_z == z);
}

TEST_CASE("runs are deterministic and the baseline snapshot is frozen") {
    const Field z = random_field(2, 32, 32, 7);
    const RegionOp op(TaskKind::Relocation, block(32, 32, 6, 6, 6, 6), {18.5, 12.5});
    DragConfig cfg;
    cfg.k_motion = 10;
    cfg.k_refine = 3;
    cfg.extractor = {"gaussian_blur", 1.0, 4};
    CHECK(run_drag(z, std::span(&op, 1), cfg) == run_drag(z, std::span(&op, 1), cfg));

    const auto e = make_extractor(cfg.extractor);
    DragState s = make_drag_state(z, std::span(&op, 1), *e, cfg);
    const Field snapshot = s.baseline_features[0].masked;
    for (int k = 1; k <= 4; ++k) {
        const auto lg = drag_loss(s, std::span(&op, 1), k, 10, *e, cfg);
        s.z = hard_step(s, lg.grad, 0.01);
    }
    CHECK(s.baseline_features[0].masked == snapshot);
}

TEST_CASE("huber loss is non-increasing in the refinement phase") {
    Field z(1, 32, 32);
    add_gaussian_blob(z, {10, 16}, 2.0, {1.0});
    const RegionOp op(TaskKind::Relocation, disc_mask(32, 32, {10, 16}, 4), {16, 16});
    DragConfig cfg;
    cfg.loss_mode = LossMode::Huber;
    cfg.normalized_gradient = false;
    const IdentityExtractor id;
    DragState s = make_drag_state(z, std::span(&op, 1), id, cfg);
    double prev = drag_loss(s, std::span(&op, 1), 50, 50, id, cfg).loss;
    for (int it = 0; it < 20; ++it) {
        const auto lg = drag_loss(s, std::span(&op, 1), 50, 50, id, cfg);
        s.z = hard_step(s, lg.grad, 1e-4);
        const double next = drag_loss(s, std::span(&op, 1), 50, 50, id, cfg).loss;
        CHECK(next <= prev + 1e-12);
        prev = next;
    }
}

TEST_CASE("progress callback can cancel") {
    const Field z = random_field(1, 16, 16, 8);
    const RegionOp op(TaskKind::Relocation, block(16, 16, 2, 2, 4, 4), {9.5, 3.5});
    int calls = 0;
    const ProgressFn stop_at_3 = [&](const DragProgress& p) {
        ++calls;
        CHECK(p.total == 70);
        CHECK(p.centroids != nullptr);
        return p.iteration < 3;
    };
    CHECK_THROWS_AS(run_drag(z, std::span(&op, 1), DragConfig{}, stop_at_3), CancelledError);
    CHECK(calls == 3);
}

TEST_CASE("non-finite inputs are rejected") {
    Field z = random_field(1, 16, 16, 9);
    z.at(0, 3, 3) = std::nan("");
    const RegionOp op(TaskKind::Relocation, block(16, 16, 2, 2, 4, 4), {9.5, 3.5});
    CHECK_THROWS_AS(run_drag(z, std::span(&op, 1), DragConfig{}), InvalidArgument);

    DragConfig cfg;
    cfg.normalized_gradient = false;
    cfg.lr_phase1 = 1e308;
    cfg.lr_phase2 = 1e308;
    const Field ok = random_field(1, 16, 16, 10);
    CHECK_THROWS_AS(run_drag(ok, std::span(&op, 1), cfg), NonFiniteLossError);
}

TEST_CASE("content centroid falls back when nothing qualifies") {
    const Field z(1, 8, 8);
    const Mask2D src = block(8, 8, 1, 1, 2, 2);
    CHECK(content_centroid(z, z, src, ~Mask2D(8, 8), {4, 4}) == Point2{4, 4});
    Field one(1, 8, 8);
    one.at(0, 5, 6) = 1.0;
    Field orig(1, 8, 8);
    orig.at(0, 1, 1) = 1.0;
    CHECK(content_centroid(one, orig, src, ~Mask2D(8, 8), {0, 0}) == Point2{6, 5});
}
