#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "splatguide/error.hpp"
#include "splatguide/image.hpp"

namespace splatguide {

inline unsigned char to_byte(double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

/// Binary PPM (3 channels) or PGM (1 channel), 8 bits per sample.
inline void write_pnm(const std::string& path, const Image& img) {
    require(img.channels == 3 || img.channels == 1, "write_pnm: image must have 1 or 3 channels");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidInput("cannot open " + path + " for writing");
    os << (img.channels == 3 ? "P6" : "P5") << '\n' << img.width << ' ' << img.height << "\n255\n";
    std::string bytes(img.size(), '\0');
    for (std::size_t i = 0; i < img.size(); ++i) bytes[i] = static_cast<char>(to_byte(img.data[i]));
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline Image read_pnm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InvalidInput("cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    is >> magic >> w >> h >> maxval;
    if ((magic != "P6" && magic != "P5") || w <= 0 || h <= 0 || maxval != 255)
        throw InvalidInput(path + ": unsupported image format");
    is.get();
    Image img(w, h, magic == "P6" ? 3 : 1);
    std::string bytes(img.size(), '\0');
    if (!is.read(bytes.data(), static_cast<std::streamsize>(bytes.size()))) throw InvalidInput(path + ": truncated image");
    for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = static_cast<unsigned char>(bytes[i]) / 255.0;
    return img;
}

}  // namespace splatguide
