#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace talkhead {

// 8-bit image, interleaved channels (1 = gray, 3 = RGB), row-major.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(int w, int h, int c = 1, std::uint8_t fill = 0)
        : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w) * h * c, fill) {}

    std::uint8_t& at(int x, int y, int c = 0) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int x, int y, int c = 0) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool operator==(const Image&) const = default;
};

// Binary PGM (P5) for one channel, PPM (P6) for three; maxval 255.
std::string encode_pnm(const Image& image);
Image decode_pnm(const std::string& bytes);

void write_pnm(const std::filesystem::path& path, const Image& image);
Image read_pnm(const std::filesystem::path& path);

}  // namespace talkhead
