#include "talkhead/image.hpp"

#include <cctype>
#include <fstream>

#include "talkhead/errors.hpp"

namespace talkhead {

std::string encode_pnm(const Image& image) {
    if (image.channels != 1 && image.channels != 3)
        throw DataError("PNM output supports 1 or 3 channels, got " + std::to_string(image.channels));
    std::string out = image.channels == 1 ? "P5\n" : "P6\n";
    out += std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
    return out;
}

namespace {

// Reads one whitespace-delimited header integer, skipping '#' comments.
int header_int(const std::string& bytes, std::size_t& pos) {
    while (pos < bytes.size()) {
        if (bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
            ++pos;
        } else {
            break;
        }
    }
    long long v = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
        v = v * 10 + (bytes[pos] - '0');
        if (v > (1 << 24)) throw FormatError("PNM header value too large");
        ++pos;
        ++digits;
    }
    if (digits == 0) throw FormatError("malformed PNM header");
    return static_cast<int>(v);
}

}  // namespace

Image decode_pnm(const std::string& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
        throw FormatError("expected a binary PGM (P5) or PPM (P6) image");
    std::size_t pos = 2;
    const int w = header_int(bytes, pos);
    const int h = header_int(bytes, pos);
    const int maxval = header_int(bytes, pos);
    if (maxval != 255) throw FormatError("only maxval 255 is supported");
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
        throw FormatError("malformed PNM header");
    ++pos;
    Image img(w, h, bytes[1] == '5' ? 1 : 3);
    if (bytes.size() - pos != img.pixels.size()) throw FormatError("PNM pixel data has the wrong size");
    std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), img.pixels.begin());
    return img;
}

void write_pnm(const std::filesystem::path& path, const Image& image) {
    const std::string bytes = encode_pnm(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write image " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Image read_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_pnm(bytes);
}

}  // namespace talkhead
