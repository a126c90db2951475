#pragma once

// Down-scaling stages: learned strided convolutions and the fixed bicubic
// resampler they replace.

#include <cmath>
#include <string>
#include <vector>

#include "msdeblur/config.hpp"
#include "msdeblur/layers.hpp"

namespace msdeblur {

namespace detail {

// Cubic convolution kernel with a = -0.5.
inline double cubic(double x) {
    const double ax = std::abs(x);
    const double ax2 = ax * ax;
    const double ax3 = ax2 * ax;
    if (ax <= 1.0) return 1.5 * ax3 - 2.5 * ax2 + 1.0;
    if (ax <= 2.0) return -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0;
    return 0.0;
}

// Symmetric boundary: -1 -> 0, n -> n-1.
inline int mirror_index(int j, int n) {
    const int period = 2 * n;
    j %= period;
    if (j < 0) j += period;
    return j < n ? j : period - 1 - j;
}

struct ResampleTap {
    int index;
    double weight;
};

// Per-output-sample taps for an antialiased 1/factor bicubic reduction.
inline std::vector<std::vector<ResampleTap>> bicubic_taps(int in_size, int factor) {
    const int out_size = in_size / factor;
    std::vector<std::vector<ResampleTap>> taps(out_size);
    for (int i = 0; i < out_size; ++i) {
        const double center = (i + 0.5) * factor - 0.5;
        const int lo = static_cast<int>(std::floor(center - 2.0 * factor));
        const int hi = static_cast<int>(std::ceil(center + 2.0 * factor));
        double total = 0.0;
        std::vector<ResampleTap> row;
        for (int j = lo; j <= hi; ++j) {
            const double wgt = cubic((center - j) / factor);
            if (wgt == 0.0) continue;
            row.push_back({mirror_index(j, in_size), wgt});
            total += wgt;
        }
        for (auto& t : row) t.weight /= total;
        taps[i] = std::move(row);
    }
    return taps;
}

}  // namespace detail

// Antialiased bicubic reduction by `factor` (imresize convention): cubic
// kernel a = -0.5 stretched by the factor, symmetric boundary extension,
// separable rows-then-columns.
template <class T>
Tensor<T> bicubic_downsample(const Tensor<T>& img, int factor) {
    require(factor == 2 || factor == 4, "bicubic_downsample: factor must be 2 or 4");
    require(img.h() % factor == 0 && img.w() % factor == 0,
            "bicubic_downsample: dims " + to_string(img.shape()) + " not divisible by " + std::to_string(factor));
    const auto tx = detail::bicubic_taps(img.w(), factor);
    const auto ty = detail::bicubic_taps(img.h(), factor);
    const int oh = img.h() / factor;
    const int ow = img.w() / factor;
    Tensor<T> out(img.n(), img.c(), oh, ow);
    std::vector<double> rows(static_cast<std::size_t>(img.h()) * ow);
    for (int n = 0; n < img.n(); ++n)
        for (int c = 0; c < img.c(); ++c) {
            const T* src = img.plane(n, c).data();
            for (int y = 0; y < img.h(); ++y)
                for (int x = 0; x < ow; ++x) {
                    double acc = 0.0;
                    for (const auto& t : tx[x]) acc += t.weight * src[static_cast<std::size_t>(y) * img.w() + t.index];
                    rows[static_cast<std::size_t>(y) * ow + x] = acc;
                }
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x) {
                    double acc = 0.0;
                    for (const auto& t : ty[y]) acc += t.weight * rows[static_cast<std::size_t>(t.index) * ow + x];
                    out(n, c, y, x) = static_cast<T>(acc);
                }
        }
    return out;
}

// Down-Scaling 1: conv(s1) -> ReLU -> conv(s2), 3 -> width channels. The
// multi-scale network uses strides 2/2 (x4); single-scale variants lower
// them. In bicubic mode the image is resampled by s1*s2 and a single
// stride-1 head conv lifts it to feature width.
template <class T>
class DownScale1 {
public:
    DownScale1() = default;
    DownScale1(int width, DownscaleMode mode, int stride1 = 2, int stride2 = 2)
        : mode_(mode), factor_(stride1 * stride2) {
        if (mode == DownscaleMode::learned) {
            conv1 = Conv2d<T>(3, width, 3, stride1);
            conv2 = Conv2d<T>(width, width, 3, stride2);
        } else {
            require(factor_ == 1 || factor_ == 2 || factor_ == 4, "DownScale1: unsupported bicubic factor");
            conv1 = Conv2d<T>(3, width, 3, 1);
        }
    }

    Conv2d<T> conv1;
    Conv2d<T> conv2;  // unused in bicubic mode

    [[nodiscard]] DownscaleMode mode() const { return mode_; }
    [[nodiscard]] int factor() const { return factor_; }

    void init(Rng& rng) {
        conv1.init(rng);
        if (learned()) conv2.init(rng);
    }

    template <class F>
    void visit(F&& f, const std::string& prefix) {
        conv1.visit(f, prefix + "conv1.");
        if (learned()) conv2.visit(f, prefix + "conv2.");
    }

    Tensor<T> forward(const Tensor<T>& img) {
        require(img.c() == 3, "DownScale1: expected a 3-channel image, got " + std::to_string(img.c()));
        require(img.h() % factor_ == 0 && img.w() % factor_ == 0,
                "DownScale1: dims " + to_string(img.shape()) + " not divisible by " + std::to_string(factor_));
        if (!learned()) return conv1.forward(factor_ == 1 ? img : bicubic_downsample(img, factor_));
        Tensor<T> a = conv1.forward(img);
        if (grad_enabled()) pre_relu_ = a;
        return conv2.forward(relu(std::move(a)));
    }

    // Returns the gradient w.r.t. the input image (learned mode only; the
    // fixed resampler has no trainable input path).
    Tensor<T> backward(const Tensor<T>& grad) {
        if (!learned()) return conv1.backward(grad);
        return conv1.backward(relu_backward(pre_relu_, conv2.backward(grad)));
    }

private:
    [[nodiscard]] bool learned() const { return mode_ == DownscaleMode::learned; }

    DownscaleMode mode_ = DownscaleMode::learned;
    int factor_ = 4;
    Tensor<T> pre_relu_;
};

template <class T>
struct FuseGrad {
    Tensor<T> image;
    Tensor<T> guide;
};

// Down-Scaling 2: conv(stride) on the image, concatenated along channels
// with a 3-channel guide image from the previous scale, then ReLU and a
// stride-1 conv back to feature width. Stride 2 is the x2 fusion; stride 1
// mirrors it at full resolution for the optional x1 path. In bicubic mode
// the resampled image is concatenated directly with the guide.
template <class T>
class DownScale2 {
public:
    DownScale2() = default;
    DownScale2(int width, DownscaleMode mode, int stride = 2, int guide_channels = 3)
        : mode_(mode), stride_(stride), guide_channels_(guide_channels) {
        if (mode == DownscaleMode::learned) {
            conv1 = Conv2d<T>(3, width, 3, stride);
            conv2 = Conv2d<T>(width + guide_channels, width, 3, 1);
        } else {
            conv2 = Conv2d<T>(3 + guide_channels, width, 3, 1);
        }
    }

    Conv2d<T> conv1;  // unused in bicubic mode
    Conv2d<T> conv2;

    [[nodiscard]] int stride() const { return stride_; }

    void init(Rng& rng) {
        if (learned()) conv1.init(rng);
        conv2.init(rng);
    }

    template <class F>
    void visit(F&& f, const std::string& prefix) {
        if (learned()) conv1.visit(f, prefix + "conv1.");
        conv2.visit(f, prefix + "conv2.");
    }

    Tensor<T> forward(const Tensor<T>& img, const Tensor<T>& guide) {
        require(img.c() == 3, "DownScale2: expected a 3-channel image");
        require(guide.c() == guide_channels_, "DownScale2: guide channel mismatch");
        require(img.h() == guide.h() * stride_ && img.w() == guide.w() * stride_ && img.n() == guide.n(),
                "DownScale2: guide " + to_string(guide.shape()) + " must be image " + to_string(img.shape()) +
                    " reduced by " + std::to_string(stride_));
        if (!learned()) {
            Tensor<T> small = stride_ == 1 ? img : bicubic_downsample(img, stride_);
            return conv2.forward(concat_channels(small, guide));
        }
        Tensor<T> cat = concat_channels(conv1.forward(img), guide);
        if (grad_enabled()) pre_relu_ = cat;
        return conv2.forward(relu(std::move(cat)));
    }

    FuseGrad<T> backward(const Tensor<T>& grad) {
        if (!learned()) {
            auto [dimg, dguide] = split_channels(conv2.backward(grad), 3);
            return {Tensor<T>(), std::move(dguide)};
        }
        Tensor<T> dcat = relu_backward(pre_relu_, conv2.backward(grad));
        auto [dfeat, dguide] = split_channels(dcat, conv1.out_channels());
        return {conv1.backward(dfeat), std::move(dguide)};
    }

private:
    [[nodiscard]] bool learned() const { return mode_ == DownscaleMode::learned; }

    DownscaleMode mode_ = DownscaleMode::learned;
    int stride_ = 2;
    int guide_channels_ = 3;
    Tensor<T> pre_relu_;
};

}  // namespace msdeblur
