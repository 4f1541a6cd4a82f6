#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "retina/error.hpp"

namespace retina {

// 8-bit sRGB raster, row-major from the top-left.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::array<std::uint8_t, 3>> pixels;

    Image() = default;
    Image(int w, int h, std::array<std::uint8_t, 3> fill = {0, 0, 0})
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {
        if (w <= 0 || h <= 0) throw ValidationError("image dimensions must be positive", "image");
    }

    bool empty() const noexcept { return pixels.empty(); }
    auto& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    const auto& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

inline std::string pnm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

inline int pnm_int(std::istream& in, const char* what) {
    std::string t = pnm_token(in);
    try {
        std::size_t pos = 0;
        int v = std::stoi(t, &pos);
        if (pos != t.size()) throw std::invalid_argument(t);
        return v;
    } catch (const std::exception&) {
        throw ValidationError(std::string("bad PPM ") + what + " '" + t + "'", "image");
    }
}

}  // namespace detail

// Binary (P6) or ASCII (P3) PPM with maxval <= 255.
inline Image read_ppm(std::istream& in) {
    std::string magic = detail::pnm_token(in);
    if (magic != "P6" && magic != "P3") throw ValidationError("not a PPM image (P3/P6)", "image");
    int w = detail::pnm_int(in, "width");
    int h = detail::pnm_int(in, "height");
    int maxval = detail::pnm_int(in, "maxval");
    if (w <= 0 || h <= 0) throw ValidationError("PPM dimensions must be positive", "image");
    if (maxval <= 0 || maxval > 255) throw ValidationError("PPM maxval must be 1..255", "image");
    Image img(w, h);
    auto scale = [&](int v) {
        if (v < 0 || v > maxval) throw ValidationError("PPM sample out of range", "image");
        return static_cast<std::uint8_t>((v * 255 + maxval / 2) / maxval);
    };
    for (auto& px : img.pixels) {
        for (auto& ch : px) {
            if (magic == "P6") {
                int c = in.get();
                if (c == EOF) throw ValidationError("truncated PPM data", "image");
                ch = scale(c);
            } else {
                ch = scale(detail::pnm_int(in, "sample"));
            }
        }
    }
    return img;
}

inline Image read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open image " + path.string(), "image");
    return read_ppm(in);
}

inline void write_ppm(std::ostream& out, const Image& img) {
    out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    for (const auto& px : img.pixels) out.write(reinterpret_cast<const char*>(px.data()), 3);
}

}  // namespace retina
