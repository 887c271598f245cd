#pragma once

#include <vector>

#include "regen3d/core.hpp"
#include "regen3d/png.hpp"

namespace regen3d {

// Float image, values in [0,1], channel-interleaved.
struct Image {
    int width = 0, height = 0, channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int w, int h, int c) : width(w), height(h), channels(c), data(size_t(w) * h * c, 0.0f) {}

    float& at(int x, int y, int c) {
        return data[(size_t(y) * size_t(width) + size_t(x)) * size_t(channels) + size_t(c)];
    }
    float at(int x, int y, int c) const {
        return data[(size_t(y) * size_t(width) + size_t(x)) * size_t(channels) + size_t(c)];
    }
    bool same_size(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

inline void save_png(const Image& img, const std::string& path) {
    std::vector<uint8_t> px(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i)
        px[i] = uint8_t(std::lround(std::clamp(img.data[i], 0.0f, 1.0f) * 255.0f));
    png::write_png(path, px, img.width, img.height, img.channels);
}

inline Image load_png(const std::string& path) {
    const png::PngImage p = png::read_png(path);
    Image img(p.width, p.height, p.channels);
    for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = float(p.pixels[i]) / 255.0f;
    return img;
}

inline Image gaussian_blur(const Image& img, float sigma) {
    if (sigma <= 0.01f) return img;
    const int radius = std::max(1, int(std::ceil(3.0f * sigma)));
    std::vector<float> kernel(size_t(2 * radius + 1));
    float sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[size_t(i + radius)] = std::exp(-0.5f * float(i) * float(i) / (sigma * sigma));
        sum += kernel[size_t(i + radius)];
    }
    for (auto& k : kernel) k /= sum;
    Image tmp(img.width, img.height, img.channels);
    Image out(img.width, img.height, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                float acc = 0;
                for (int i = -radius; i <= radius; ++i) {
                    const int xx = std::clamp(x + i, 0, img.width - 1);
                    acc += kernel[size_t(i + radius)] * img.at(xx, y, c);
                }
                tmp.at(x, y, c) = acc;
            }
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                float acc = 0;
                for (int i = -radius; i <= radius; ++i) {
                    const int yy = std::clamp(y + i, 0, img.height - 1);
                    acc += kernel[size_t(i + radius)] * tmp.at(x, yy, c);
                }
                out.at(x, y, c) = acc;
            }
    return out;
}

inline float bilinear_sample(const Image& img, float x, float y, int c) {
    const float fx = std::clamp(x, 0.0f, float(img.width - 1) - 1e-4f);
    const float fy = std::clamp(y, 0.0f, float(img.height - 1) - 1e-4f);
    const int x0 = int(fx), y0 = int(fy);
    const float tx = fx - float(x0), ty = fy - float(y0);
    const float a = img.at(x0, y0, c), b = img.at(x0 + 1, y0, c);
    const float d = img.at(x0, y0 + 1, c), e = img.at(x0 + 1, y0 + 1, c);
    return (a * (1 - tx) + b * tx) * (1 - ty) + (d * (1 - tx) + e * tx) * ty;
}

// Conditioning-image augmentation: a random subset (each applied with
// probability 0.5) of crop-and-resize, brightness/contrast jitter,
// random-gray background fill, and Gaussian blur. Resolution is preserved
// and an all-off draw returns the image unchanged.
inline Image augment_image(const Image& img, uint64_t seed) {
    Rng rng(hash_combine(seed, 0x1a6eULL));
    Image out = img;
    const bool do_crop = rng.uniform() < 0.5f;
    const bool do_jitter = rng.uniform() < 0.5f;
    const bool do_background = rng.uniform() < 0.5f;
    const bool do_blur = rng.uniform() < 0.5f;
    if (do_background) {
        // background = pixels where every channel is (near) zero
        const float gray = rng.uniform(0.1f, 0.6f);
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x) {
                bool bg = true;
                for (int c = 0; c < out.channels; ++c) bg = bg && out.at(x, y, c) < 1e-3f;
                if (bg)
                    for (int c = 0; c < out.channels; ++c) out.at(x, y, c) = gray;
            }
    }
    if (do_crop) {
        const float scale = rng.uniform(0.8f, 1.0f);
        const float max_off_x = float(out.width) * (1.0f - scale);
        const float max_off_y = float(out.height) * (1.0f - scale);
        const float ox = rng.uniform(0.0f, max_off_x);
        const float oy = rng.uniform(0.0f, max_off_y);
        Image resized(out.width, out.height, out.channels);
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x)
                for (int c = 0; c < out.channels; ++c)
                    resized.at(x, y, c) = bilinear_sample(out, ox + float(x) * scale, oy + float(y) * scale, c);
        out = resized;
    }
    if (do_jitter) {
        const float brightness = rng.uniform(-0.2f, 0.2f);
        const float contrast = rng.uniform(0.8f, 1.2f);
        for (auto& v : out.data) v = std::clamp((v - 0.5f) * contrast + 0.5f + brightness, 0.0f, 1.0f);
    }
    if (do_blur) {
        out = gaussian_blur(out, rng.uniform(0.3f, 1.5f));
    }
    return out;
}

}  // namespace regen3d
