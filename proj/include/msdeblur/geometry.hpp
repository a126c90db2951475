#pragma once

#include <algorithm>
#include <utility>

#include "msdeblur/tensor.hpp"

namespace msdeblur {

struct PadRecord {
    int original_h = 0;
    int original_w = 0;
    int pad_bottom = 0;
    int pad_right = 0;

    friend bool operator==(const PadRecord&, const PadRecord&) = default;
};

// Pads bottom/right with edge replication so both spatial dims become the
// smallest multiple of `m` that is >= the input dims.
template <class T>
std::pair<Tensor<T>, PadRecord> pad_to_multiple(const Tensor<T>& img, int m) {
    require(m >= 1, "pad_to_multiple: m must be >= 1");
    const int h = img.h();
    const int w = img.w();
    const int ph = (h + m - 1) / m * m;
    const int pw = (w + m - 1) / m * m;
    PadRecord rec{h, w, ph - h, pw - w};
    if (ph == h && pw == w) return {img, rec};

    Tensor<T> out(img.n(), img.c(), ph, pw);
    for (int b = 0; b < img.n(); ++b)
        for (int c = 0; c < img.c(); ++c)
            for (int y = 0; y < ph; ++y) {
                const int sy = std::min(y, h - 1);
                for (int x = 0; x < pw; ++x) out(b, c, y, x) = img(b, c, sy, std::min(x, w - 1));
            }
    return {std::move(out), rec};
}

template <class T>
Tensor<T> crop_back(const Tensor<T>& img, const PadRecord& rec) {
    require(rec.original_h >= 1 && rec.original_w >= 1 && rec.pad_bottom >= 0 && rec.pad_right >= 0,
            "crop_back: malformed pad record");
    require(img.h() >= rec.original_h && img.w() >= rec.original_w,
            "crop_back: image " + to_string(img.shape()) + " smaller than recorded original " +
                std::to_string(rec.original_h) + "x" + std::to_string(rec.original_w));
    if (img.h() == rec.original_h && img.w() == rec.original_w) return img;

    Tensor<T> out(img.n(), img.c(), rec.original_h, rec.original_w);
    for (int b = 0; b < img.n(); ++b)
        for (int c = 0; c < img.c(); ++c)
            for (int y = 0; y < rec.original_h; ++y) {
                const T* src = &img(b, c, y, 0);
                std::copy(src, src + rec.original_w, &out(b, c, y, 0));
            }
    return out;
}

template <class T>
Tensor<T> clamp_image(Tensor<T> img) {
    for (auto& v : img.values()) v = std::clamp(v, T(0), T(1));
    return img;
}

// Gradient of clamp_image: passes through where the pre-clamp value was inside [0,1].
template <class T>
Tensor<T> clamp_image_backward(const Tensor<T>& pre_clamp, Tensor<T> grad) {
    require(pre_clamp.shape() == grad.shape(), "clamp backward: shape mismatch");
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (pre_clamp[i] < T(0) || pre_clamp[i] > T(1)) grad[i] = T(0);
    return grad;
}

}  // namespace msdeblur
