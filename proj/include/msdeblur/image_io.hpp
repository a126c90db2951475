#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "msdeblur/tensor.hpp"

namespace msdeblur {

class ImageIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Decodes any PNG to RGB, 8-bit values mapped to v / 255. Shape (1, 3, H, W).
inline Tensor<float> read_png(const std::string& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str()))
        throw ImageIoError("cannot read PNG " + path + ": " + img.message);
    img.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&img);
        throw ImageIoError("cannot decode PNG " + path + ": " + img.message);
    }
    const int h = static_cast<int>(img.height);
    const int w = static_cast<int>(img.width);
    Tensor<float> out(1, 3, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                out(0, c, y, x) = static_cast<float>(buf[(static_cast<std::size_t>(y) * w + x) * 3 + c]) / 255.0f;
    return out;
}

inline std::uint8_t to_u8(float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

// Writes batch item `b` (3 channels) as an 8-bit RGB PNG.
template <class T>
void write_png(const std::string& path, const Tensor<T>& t, int b = 0) {
    require(t.c() == 3, "write_png: expected 3 channels");
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(t.h()) * t.w() * 3);
    for (int y = 0; y < t.h(); ++y)
        for (int x = 0; x < t.w(); ++x)
            for (int c = 0; c < 3; ++c)
                buf[(static_cast<std::size_t>(y) * t.w() + x) * 3 + c] = to_u8(static_cast<float>(t(b, c, y, x)));
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(t.w());
    img.height = static_cast<png_uint_32>(t.h());
    img.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr))
        throw ImageIoError("cannot write PNG " + path + ": " + img.message);
}

// Rounds values to the 8-bit grid, matching a write_png/read_png round trip.
template <class T>
Tensor<T> quantize_u8(Tensor<T> t) {
    for (auto& v : t.values()) v = static_cast<T>(to_u8(static_cast<float>(v))) / T(255);
    return t;
}

}  // namespace msdeblur
