#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "splatguide/error.hpp"

namespace splatguide {

/// Dense row-major H x W x C image of doubles. Color images hold linear RGB in [0,1].
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {
        require(w >= 0 && h >= 0 && c >= 0, "image dimensions must be non-negative");
    }

    std::size_t index(int x, int y, int c = 0) const {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    double& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
    double at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

    std::size_t size() const { return data.size(); }
    std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
    bool operator==(const Image&) const = default;
};

using Sequence = std::vector<Image>;

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b)) throw InvalidInput(std::string(what) + ": image shape mismatch");
}

inline Image multiply(const Image& img, const Image& mask) {
    // mask has one channel (broadcast) or the same channel count as img
    require(img.width == mask.width && img.height == mask.height, "mask size mismatch");
    require(mask.channels == 1 || mask.channels == img.channels, "mask channel mismatch");
    Image out = img;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                out.at(x, y, c) *= mask.at(x, y, mask.channels == 1 ? 0 : c);
    return out;
}

inline Image clamp01(Image img) {
    for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
    return img;
}

/// L x h x w x d tensor evolved by the denoising sampler.
struct Latent {
    int frames = 0;
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    Latent() = default;
    Latent(int l, int h, int w, int d, double fill = 0.0)
        : frames(l), height(h), width(w), channels(d),
          data(static_cast<std::size_t>(l) * h * w * d, fill) {}

    std::size_t frame_size() const { return static_cast<std::size_t>(height) * width * channels; }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Latent& o) const {
        return frames == o.frames && height == o.height && width == o.width && channels == o.channels;
    }

    std::span<double> frame(int j) { return {data.data() + j * frame_size(), frame_size()}; }
    std::span<const double> frame(int j) const {
        return {data.data() + j * frame_size(), frame_size()};
    }

    Image frame_image(int j) const {
        Image img(width, height, channels);
        auto f = frame(j);
        std::copy(f.begin(), f.end(), img.data.begin());
        return img;
    }

    static Latent from_frames(const Sequence& seq) {
        require(!seq.empty(), "empty sequence");
        const Image& f0 = seq.front();
        Latent out(static_cast<int>(seq.size()), f0.height, f0.width, f0.channels);
        for (std::size_t j = 0; j < seq.size(); ++j) {
            require(seq[j].same_shape(f0), "sequence frames differ in shape");
            std::copy(seq[j].data.begin(), seq[j].data.end(), out.frame(static_cast<int>(j)).begin());
        }
        return out;
    }

    Sequence to_frames() const {
        Sequence seq;
        seq.reserve(frames);
        for (int j = 0; j < frames; ++j) seq.push_back(frame_image(j));
        return seq;
    }

    bool operator==(const Latent&) const = default;
};

}  // namespace splatguide
