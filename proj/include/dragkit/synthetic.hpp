#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dragkit/field.hpp"
#include "dragkit/point_drag.hpp"
#include "dragkit/schedule.hpp"

namespace dragkit {

/// Cells whose center lies within `radius` of `center`.
Mask2D disc_mask(int width, int height, Point2 center, double radius);

/// Adds amplitude * signature[c] * exp(-|p - center|^2 / (2 sigma^2)) to
/// every channel c of `field`.
void add_gaussian_blob(Field& field, Point2 center, double sigma,
                       const std::vector<double>& signature, double amplitude = 1.0);

struct SyntheticOptions {
    int size = 64;
    int channels = 4;
    double sigma = 2.0;
    double noise = 0.05;
    double mask_radius = 5.0;
    std::uint64_t seed = 7;
};

/// One toy editing case: a blob latent, the region op dragging it, and the
/// matching point op (handle at the blob center) for the baseline.
struct SyntheticCase {
    std::string name;
    Field z0;
    RegionOp op;
    PointOp point;
};

/// Fixed suite of six relocations (8 to 16 cells) followed by four rotations
/// (30 to 90 degrees). Deterministic for a given seed.
std::vector<SyntheticCase> synthetic_suite(const SyntheticOptions& options = {});

}  // namespace dragkit
