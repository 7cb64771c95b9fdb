#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dragkit/field.hpp"
#include "dragkit/geometry.hpp"

namespace dragkit {

/// Decoded 8-bit image, interleaved channels (1 = gray, 3 = RGB, 4 = RGBA).
struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;
};

Image8 decode_png(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_png(const Image8& image);

Image8 read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image8& image);

// Masks are single-channel PNGs: 0 = unset, 255 = set. When reading, any
// pixel whose first channel is >= 128 counts as set.
Mask2D mask_from_image(const Image8& image);
Image8 mask_to_image(const Mask2D& mask);
Mask2D read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const Mask2D& mask);

/// Image -> Field with values in [0, 1]; alpha is dropped.
Field image_to_field(const Image8& image);
/// Field with 1 or 3 channels -> 8-bit image, values clamped to [0, 1].
Image8 field_to_image(const Field& field);

/// RGB preview: gray background, `source` tinted blue, `target` green.
Image8 render_overlay(const Mask2D& source, const Mask2D& target);

}  // namespace dragkit
