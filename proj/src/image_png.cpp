#include "sogr/image.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>

#include "sogr/errors.hpp"

namespace sogr {

ImageU8::ImageU8(int h, int w, int c) : height(h), width(w), channels(c) {
    if (h < 1 || w < 1 || (c != 1 && c != 3))
        throw ShapeError("image: bad dimensions " + std::to_string(h) + "x" + std::to_string(w) +
                         "x" + std::to_string(c));
    pixels.assign(static_cast<size_t>(h) * static_cast<size_t>(w) * static_cast<size_t>(c), 0);
}

double luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return 0.299 * r + 0.587 * g + 0.114 * b;
}

namespace {

struct ReadGuard {
    std::FILE* fp = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~ReadGuard() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};

struct WriteGuard {
    std::FILE* fp = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~WriteGuard() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};

}  // namespace

ImageU8 read_png(const std::filesystem::path& path) {
    ReadGuard g;
    g.fp = std::fopen(path.c_str(), "rb");
    if (!g.fp) throw DataError("cannot open '" + path.string() + "'");
    g.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (g.png) g.info = png_create_info_struct(g.png);
    if (!g.png || !g.info) throw DataError("libpng initialization failed");
    if (setjmp(png_jmpbuf(g.png)))
        throw DataError("undecodable PNG '" + path.string() + "'");

    png_init_io(g.png, g.fp);
    png_read_png(g.png, g.info,
                 PNG_TRANSFORM_STRIP_16 | PNG_TRANSFORM_STRIP_ALPHA | PNG_TRANSFORM_EXPAND |
                     PNG_TRANSFORM_PACKING,
                 nullptr);

    const png_uint_32 h = png_get_image_height(g.png, g.info);
    const png_uint_32 w = png_get_image_width(g.png, g.info);
    const int channels = png_get_channels(g.png, g.info);
    if (h < 1 || w < 1 || (channels != 1 && channels != 3))
        throw DataError("'" + path.string() + "': unsupported PNG layout (" +
                        std::to_string(channels) + " channels after expansion)");

    ImageU8 img(static_cast<int>(h), static_cast<int>(w), channels);
    png_bytepp rows = png_get_rows(g.png, g.info);
    const size_t row_bytes = static_cast<size_t>(w) * static_cast<size_t>(channels);
    for (png_uint_32 y = 0; y < h; ++y)
        std::memcpy(img.pixels.data() + static_cast<size_t>(y) * row_bytes, rows[y], row_bytes);
    return img;
}

void write_png(const ImageU8& img, const std::filesystem::path& path) {
    if (img.height < 1 || img.width < 1 || (img.channels != 1 && img.channels != 3))
        throw ShapeError("write_png: bad image shape");
    if (img.pixels.size() !=
        static_cast<size_t>(img.height) * static_cast<size_t>(img.width) *
            static_cast<size_t>(img.channels))
        throw ShapeError("write_png: pixel buffer does not match dimensions");

    WriteGuard g;
    g.fp = std::fopen(path.c_str(), "wb");
    if (!g.fp) throw DataError("cannot open '" + path.string() + "' for writing");
    g.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (g.png) g.info = png_create_info_struct(g.png);
    if (!g.png || !g.info) throw DataError("libpng initialization failed");
    if (setjmp(png_jmpbuf(g.png)))
        throw DataError("PNG encode failed for '" + path.string() + "'");

    png_init_io(g.png, g.fp);
    png_set_IHDR(g.png, g.info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(g.png, g.info);
    const size_t row_bytes =
        static_cast<size_t>(img.width) * static_cast<size_t>(img.channels);
    for (int y = 0; y < img.height; ++y)
        png_write_row(g.png,
                      const_cast<png_bytep>(img.pixels.data() + static_cast<size_t>(y) * row_bytes));
    png_write_end(g.png, g.info);
    if (std::fflush(g.fp) != 0) throw DataError("write to '" + path.string() + "' failed");
}

}  // namespace sogr
