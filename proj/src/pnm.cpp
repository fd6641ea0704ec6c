#include "fednam/pnm.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "fednam/error.hpp"

namespace fednam {
namespace {

unsigned char quantize(double v) {
    const double scaled = std::round(v * 255.0);
    if (scaled <= 0.0) return 0;
    if (scaled >= 255.0) return 255;
    return static_cast<unsigned char>(scaled);
}

void check_shape(std::span<const double> image, std::size_t height, std::size_t width,
                 const std::string& path) {
    if (height * width != image.size()) {
        throw DimensionError("image for '" + path + "' has " + std::to_string(image.size()) +
                             " pixels, expected " + std::to_string(height) + "x" +
                             std::to_string(width));
    }
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    return out;
}

// Reads the next whitespace-delimited integer token, skipping '#'
// comment lines, as the PNM headers allow.
std::size_t next_header_value(std::istream& in, const std::string& path) {
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    if (c == EOF || !std::isdigit(c)) {
        throw DataError("file '" + path + "' has a malformed PNM header");
    }
    std::size_t value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + static_cast<std::size_t>(c - '0');
        c = in.get();
    }
    return value;
}

std::vector<unsigned char> read_payload(std::istream& in, std::size_t count,
                                        const std::string& path) {
    std::vector<unsigned char> bytes(count);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count) {
        throw DataError("file '" + path + "' is truncated: expected " +
                        std::to_string(count) + " payload bytes");
    }
    return bytes;
}

void check_magic_and_maxval(std::istream& in, const std::string& path,
                            const std::string& expected_magic) {
    std::string magic;
    in >> magic;
    if (magic != expected_magic) {
        throw DataError("file '" + path + "' has magic '" + magic + "', expected '" +
                        expected_magic + "'");
    }
}

}  // namespace

void write_pgm(const std::string& path, std::span<const double> image, std::size_t height,
               std::size_t width) {
    check_shape(image, height, width, path);
    std::ofstream out = open_out(path);
    out << "P5\n" << width << " " << height << "\n255\n";
    for (const double v : image) out.put(static_cast<char>(quantize(v)));
    if (!out) {
        throw IoError("write failure on '" + path + "'");
    }
}

void write_ppm(const std::string& path, std::span<const double> image, std::size_t height,
               std::size_t width, const std::vector<bool>& flagged) {
    check_shape(image, height, width, path);
    if (flagged.size() != image.size()) {
        throw DimensionError("mask for '" + path + "' has " + std::to_string(flagged.size()) +
                             " entries, image has " + std::to_string(image.size()));
    }
    std::ofstream out = open_out(path);
    out << "P6\n" << width << " " << height << "\n255\n";
    for (std::size_t i = 0; i < image.size(); ++i) {
        const unsigned char g = quantize(image[i]);
        if (flagged[i]) {
            out.put(static_cast<char>(255));
            out.put(static_cast<char>(g / 2));
            out.put(static_cast<char>(g / 2));
        } else {
            out.put(static_cast<char>(g));
            out.put(static_cast<char>(g));
            out.put(static_cast<char>(g));
        }
    }
    if (!out) {
        throw IoError("write failure on '" + path + "'");
    }
}

PgmImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    check_magic_and_maxval(in, path, "P5");
    PgmImage image;
    image.width = next_header_value(in, path);
    image.height = next_header_value(in, path);
    const std::size_t maxval = next_header_value(in, path);
    if (maxval != 255) {
        throw DataError("file '" + path + "' has maxval " + std::to_string(maxval) +
                        ", expected 255");
    }
    const auto bytes = read_payload(in, image.height * image.width, path);
    image.pixels.resize(bytes.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        image.pixels[i] = static_cast<double>(bytes[i]) / 255.0;
    }
    return image;
}

PpmOverlay read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    check_magic_and_maxval(in, path, "P6");
    PpmOverlay overlay;
    overlay.width = next_header_value(in, path);
    overlay.height = next_header_value(in, path);
    const std::size_t maxval = next_header_value(in, path);
    if (maxval != 255) {
        throw DataError("file '" + path + "' has maxval " + std::to_string(maxval) +
                        ", expected 255");
    }
    const std::size_t pixels = overlay.height * overlay.width;
    const auto bytes = read_payload(in, pixels * 3, path);
    overlay.gray.resize(pixels);
    overlay.flagged.resize(pixels);
    for (std::size_t i = 0; i < pixels; ++i) {
        const unsigned char r = bytes[3 * i];
        const unsigned char g = bytes[3 * i + 1];
        overlay.gray[i] = static_cast<double>(g) / 255.0;
        overlay.flagged[i] = (r != g);
    }
    return overlay;
}

}  // namespace fednam
