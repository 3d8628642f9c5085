#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace sogr {

/// 8-bit image in HWC row-major order; 1 (gray) or 3 (RGB) channels.
struct ImageU8 {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    ImageU8() = default;
    ImageU8(int h, int w, int c);

    std::uint8_t& at(int y, int x, int c) {
        return pixels[static_cast<size_t>((static_cast<std::int64_t>(y) * width + x) * channels + c)];
    }
    std::uint8_t at(int y, int x, int c) const {
        return pixels[static_cast<size_t>((static_cast<std::int64_t>(y) * width + x) * channels + c)];
    }
    bool same_shape(const ImageU8& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
    friend bool operator==(const ImageU8& a, const ImageU8& b) = default;
};

/// Decodes an 8-bit gray or RGB PNG; palette and low-bit images are expanded,
/// 16-bit stripped, alpha dropped.
ImageU8 read_png(const std::filesystem::path& path);

void write_png(const ImageU8& img, const std::filesystem::path& path);

/// BT.601 luminance on the 0-255 scale, no rounding.
double luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b);

}  // namespace sogr
