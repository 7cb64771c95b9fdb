#include "dragkit/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dragkit/error.hpp"

namespace dragkit {

namespace {

struct ReadCursor {
    const std::vector<std::uint8_t>* bytes;
    std::size_t offset;
};

void read_callback(png_structp png, png_bytep out, png_size_t length) {
    auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cursor->offset + length > cursor->bytes->size()) {
        png_error(png, "truncated PNG stream");
    }
    std::memcpy(out, cursor->bytes->data() + cursor->offset, length);
    cursor->offset += length;
}

void write_callback(png_structp png, png_bytep data, png_size_t length) {
    auto* sink = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    sink->insert(sink->end(), data, data + length);
}

void flush_callback(png_structp) {}

[[noreturn]] void error_callback(png_structp, png_const_charp message) {
    throw IoError(std::string("PNG: ") + message);
}

void warning_callback(png_structp, png_const_charp) {}

}  // namespace

Image8 decode_png(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
        throw IoError("PNG: bad signature");
    }
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, error_callback, warning_callback);
    if (!png) throw IoError("PNG: cannot allocate reader");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("PNG: cannot allocate info");
    }

    Image8 img;
    ReadCursor cursor{&bytes, 0};
    try {
        png_set_read_fn(png, &cursor, read_callback);
        png_read_info(png, info);
        const png_byte color = png_get_color_type(png, info);
        const png_byte depth = png_get_bit_depth(png, info);
        if (depth == 16) png_set_strip_16(png);
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
        png_read_update_info(png, info);

        img.width = static_cast<int>(png_get_image_width(png, info));
        img.height = static_cast<int>(png_get_image_height(png, info));
        img.channels = png_get_channels(png, info);
        const std::size_t stride = png_get_rowbytes(png, info);
        std::vector<std::uint8_t> raw(stride * static_cast<std::size_t>(img.height));
        std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
        for (int y = 0; y < img.height; ++y) rows[static_cast<std::size_t>(y)] = raw.data() + stride * y;
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);

        if (img.channels == 2) {  // gray + alpha: keep gray
            std::vector<std::uint8_t> gray(static_cast<std::size_t>(img.width) * img.height);
            for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = raw[2 * i];
            img.pixels = std::move(gray);
            img.channels = 1;
        } else {
            img.pixels = std::move(raw);
        }
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

std::vector<std::uint8_t> encode_png(const Image8& image) {
    int color = 0;
    switch (image.channels) {
        case 1: color = PNG_COLOR_TYPE_GRAY; break;
        case 3: color = PNG_COLOR_TYPE_RGB; break;
        case 4: color = PNG_COLOR_TYPE_RGBA; break;
        default: throw InvalidArgument("encode_png: unsupported channel count");
    }
    if (image.pixels.size() !=
        static_cast<std::size_t>(image.width) * image.height * image.channels) {
        throw DimensionMismatch("encode_png: pixel buffer size mismatch");
    }
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, error_callback, warning_callback);
    if (!png) throw IoError("PNG: cannot allocate writer");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("PNG: cannot allocate info");
    }
    std::vector<std::uint8_t> out;
    try {
        png_set_write_fn(png, &out, write_callback, flush_callback);
        png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                     static_cast<png_uint_32>(image.height), 8, color, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
        for (int y = 0; y < image.height; ++y) {
            png_write_row(png, const_cast<png_bytep>(image.pixels.data() + stride * y));
        }
        png_write_end(png, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
    return out;
}

Image8 read_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    try {
        return decode_png(bytes);
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_png(const std::filesystem::path& path, const Image8& image) {
    const std::vector<std::uint8_t> bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
}

Mask2D mask_from_image(const Image8& image) {
    Mask2D m(image.width, image.height);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const std::size_t i =
                (static_cast<std::size_t>(y) * image.width + static_cast<std::size_t>(x)) *
                image.channels;
            if (image.pixels[i] >= 128) m.set(x, y);
        }
    }
    return m;
}

Image8 mask_to_image(const Mask2D& mask) {
    Image8 img{mask.width(), mask.height(), 1, {}};
    img.pixels.resize(static_cast<std::size_t>(mask.width()) * mask.height());
    auto bits = mask.bits();
    for (std::size_t i = 0; i < bits.size(); ++i) img.pixels[i] = bits[i] ? 255 : 0;
    return img;
}

Mask2D read_mask_png(const std::filesystem::path& path) { return mask_from_image(read_png(path)); }

void write_mask_png(const std::filesystem::path& path, const Mask2D& mask) {
    write_png(path, mask_to_image(mask));
}

Field image_to_field(const Image8& image) {
    const int channels = image.channels >= 3 ? 3 : 1;
    Field f(channels, image.height, image.width);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const std::size_t base =
                (static_cast<std::size_t>(y) * image.width + static_cast<std::size_t>(x)) *
                image.channels;
            for (int c = 0; c < channels; ++c) f.at(c, y, x) = image.pixels[base + c] / 255.0;
        }
    }
    return f;
}

Image8 field_to_image(const Field& field) {
    if (field.channels() != 1 && field.channels() != 3) {
        throw InvalidArgument("field_to_image: expected 1 or 3 channels");
    }
    Image8 img{field.width(), field.height(), field.channels(), {}};
    img.pixels.resize(field.size());
    for (int y = 0; y < field.height(); ++y) {
        for (int x = 0; x < field.width(); ++x) {
            for (int c = 0; c < field.channels(); ++c) {
                const double v = std::clamp(field.at(c, y, x), 0.0, 1.0);
                img.pixels[(static_cast<std::size_t>(y) * field.width() + x) * field.channels() + c] =
                    static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
        }
    }
    return img;
}

Image8 render_overlay(const Mask2D& source, const Mask2D& target) {
    if (!source.same_dims(target)) throw DimensionMismatch("render_overlay: dimension mismatch");
    Image8 img{source.width(), source.height(), 3, {}};
    img.pixels.assign(static_cast<std::size_t>(img.width) * img.height * 3, 40);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            auto* px = &img.pixels[(static_cast<std::size_t>(y) * img.width + x) * 3];
            if (source.at(x, y)) px[2] = 230;
            if (target.at(x, y)) px[1] = 210;
        }
    }
    return img;
}

}  // namespace dragkit
