#pragma once

// Differentiable primitives. Layers cache what they need during forward()
// (only while gradients are enabled) and accumulate parameter gradients in
// backward(), which returns the gradient w.r.t. the layer input.

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "msdeblur/random.hpp"
#include "msdeblur/tensor.hpp"

namespace msdeblur {

namespace detail {
inline thread_local bool grad_enabled = true;
}

inline bool grad_enabled() { return detail::grad_enabled; }

// Disables activation caching for the current thread (inference mode).
class NoGradGuard {
public:
    NoGradGuard() : prev_(detail::grad_enabled) { detail::grad_enabled = false; }
    ~NoGradGuard() { detail::grad_enabled = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

template <class T>
struct Parameter {
    Tensor<T> value;
    Tensor<T> grad;

    Parameter() = default;
    explicit Parameter(Shape s) : value(s), grad(s) {}

    void zero_grad() { grad.fill(T(0)); }
    [[nodiscard]] std::size_t size() const { return value.size(); }
};

template <class T>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(int in_channels, int out_channels, int kernel, int stride)
        : weight(Shape{out_channels, in_channels, kernel, kernel}),
          bias(Shape{1, out_channels, 1, 1}),
          in_(in_channels),
          out_(out_channels),
          k_(kernel),
          stride_(stride),
          pad_(kernel / 2) {
        require(kernel % 2 == 1 && stride >= 1, "conv: odd kernel and positive stride required");
    }

    Parameter<T> weight;
    Parameter<T> bias;

    [[nodiscard]] int in_channels() const { return in_; }
    [[nodiscard]] int out_channels() const { return out_; }
    [[nodiscard]] int kernel() const { return k_; }
    [[nodiscard]] int stride() const { return stride_; }

    // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
    void init(Rng& rng) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_ * k_ * k_));
        for (auto& v : weight.value.values()) v = static_cast<T>(rng.uniform(-bound, bound));
        for (auto& v : bias.value.values()) v = static_cast<T>(rng.uniform(-bound, bound));
    }

    template <class F>
    void visit(F&& f, const std::string& prefix) {
        f(prefix + "weight", weight);
        f(prefix + "bias", bias);
    }

    [[nodiscard]] int out_size(int in) const { return (in + 2 * pad_ - k_) / stride_ + 1; }

    Tensor<T> forward(const Tensor<T>& x) {
        require(x.c() == in_, "conv: expected " + std::to_string(in_) + " input channels, got " +
                                  std::to_string(x.c()));
        const int ho = out_size(x.h());
        const int wo = out_size(x.w());
        require(ho >= 1 && wo >= 1, "conv: input too small");
        Tensor<T> y(x.n(), out_, ho, wo);
        const auto K = static_cast<Eigen::Index>(in_) * k_ * k_;
        const auto P = static_cast<Eigen::Index>(ho) * wo;
        const MatMap wmat(weight.value.data(), out_, K);
        const int nb = x.n();

#pragma omp parallel for schedule(static) if (nb > 1)
        for (int b = 0; b < nb; ++b) {
            AlignedVector<T> col;
            const T* src = columns(x, b, ho, wo, col);
            CMatMap cmat(src, K, P);
            MatMap ymat(y.item(b).data(), out_, P);
            ymat.noalias() = wmat * cmat;
            for (int o = 0; o < out_; ++o) ymat.row(o).array() += bias.value[o];
        }
        if (grad_enabled()) cached_input_ = x;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        require(!cached_input_.empty(), "conv backward without cached forward");
        const Tensor<T>& x = cached_input_;
        const int ho = out_size(x.h());
        const int wo = out_size(x.w());
        require(dy.shape() == Shape{x.n(), out_, ho, wo}, "conv backward: gradient shape mismatch");
        const auto K = static_cast<Eigen::Index>(in_) * k_ * k_;
        const auto P = static_cast<Eigen::Index>(ho) * wo;
        const MatMap wmat(weight.value.data(), out_, K);
        const int nb = x.n();
        Tensor<T> dx(x.shape());
        std::vector<Mat> dw(nb);
        std::vector<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(nb);

#pragma omp parallel for schedule(static) if (nb > 1)
        for (int b = 0; b < nb; ++b) {
            AlignedVector<T> col;
            const T* src = columns(x, b, ho, wo, col);
            CMatMap cmat(src, K, P);
            CMatMap gmat(dy.item(b).data(), out_, P);
            dw[b].noalias() = gmat * cmat.transpose();
            db[b] = gmat.rowwise().sum();
            if (is_pointwise()) {
                MatMap dxmat(dx.item(b).data(), K, P);
                dxmat.noalias() = wmat.transpose() * gmat;
            } else {
                Mat dcol = wmat.transpose() * gmat;
                col2im(dcol.data(), dx, b, ho, wo);
            }
        }
        // Summed in batch order so results do not depend on thread count.
        MatMap gw(weight.grad.data(), out_, K);
        for (int b = 0; b < nb; ++b) {
            gw += dw[b];
            for (int o = 0; o < out_; ++o) bias.grad[o] += db[b](o);
        }
        return dx;
    }

    void clear_cache() { cached_input_ = Tensor<T>(); }

private:
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using MatMap = Eigen::Map<Mat>;
    using CMatMap = Eigen::Map<const Mat>;

    [[nodiscard]] bool is_pointwise() const { return k_ == 1 && stride_ == 1; }

    // Returns a (in*k*k, ho*wo) row-major column matrix for batch item b.
    const T* columns(const Tensor<T>& x, int b, int ho, int wo, AlignedVector<T>& col) const {
        if (is_pointwise()) return x.item(b).data();
        const int h = x.h();
        const int w = x.w();
        const std::size_t P = static_cast<std::size_t>(ho) * wo;
        col.assign(static_cast<std::size_t>(in_) * k_ * k_ * P, T(0));
        for (int c = 0; c < in_; ++c) {
            const T* plane = x.plane(b, c).data();
            for (int ky = 0; ky < k_; ++ky)
                for (int kx = 0; kx < k_; ++kx) {
                    T* row = col.data() + ((static_cast<std::size_t>(c) * k_ + ky) * k_ + kx) * P;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * stride_ - pad_ + ky;
                        if (iy < 0 || iy >= h) continue;
                        const T* srow = plane + static_cast<std::size_t>(iy) * w;
                        T* drow = row + static_cast<std::size_t>(oy) * wo;
                        for (int ox = 0; ox < wo; ++ox) {
                            const int ix = ox * stride_ - pad_ + kx;
                            if (ix >= 0 && ix < w) drow[ox] = srow[ix];
                        }
                    }
                }
        }
        return col.data();
    }

    void col2im(const T* col, Tensor<T>& dx, int b, int ho, int wo) const {
        const int h = dx.h();
        const int w = dx.w();
        const std::size_t P = static_cast<std::size_t>(ho) * wo;
        for (int c = 0; c < in_; ++c) {
            T* plane = dx.plane(b, c).data();
            for (int ky = 0; ky < k_; ++ky)
                for (int kx = 0; kx < k_; ++kx) {
                    const T* row = col + ((static_cast<std::size_t>(c) * k_ + ky) * k_ + kx) * P;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * stride_ - pad_ + ky;
                        if (iy < 0 || iy >= h) continue;
                        T* drow = plane + static_cast<std::size_t>(iy) * w;
                        const T* srow = row + static_cast<std::size_t>(oy) * wo;
                        for (int ox = 0; ox < wo; ++ox) {
                            const int ix = ox * stride_ - pad_ + kx;
                            if (ix >= 0 && ix < w) drow[ix] += srow[ox];
                        }
                    }
                }
        }
    }

    int in_ = 0;
    int out_ = 0;
    int k_ = 1;
    int stride_ = 1;
    int pad_ = 0;
    Tensor<T> cached_input_;
};

template <class T>
Tensor<T> relu(Tensor<T> x) {
    for (auto& v : x.values()) v = v > T(0) ? v : T(0);
    return x;
}

template <class T>
Tensor<T> relu_backward(const Tensor<T>& pre, Tensor<T> grad) {
    require(pre.shape() == grad.shape(), "relu backward: shape mismatch");
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!(pre[i] > T(0))) grad[i] = T(0);
    return grad;
}

template <class T>
T sigmoid(T v) {
    return T(1) / (T(1) + std::exp(-v));
}

template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.n() == b.n() && a.shape().same_spatial(b.shape()),
            "concat: mismatched shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
    Tensor<T> out(a.n(), a.c() + b.c(), a.h(), a.w());
    for (int n = 0; n < a.n(); ++n) {
        auto ai = a.item(n);
        auto bi = b.item(n);
        T* dst = out.item(n).data();
        std::copy(ai.begin(), ai.end(), dst);
        std::copy(bi.begin(), bi.end(), dst + ai.size());
    }
    return out;
}

// Splits a concat gradient back into its (first `ca` channels, rest) parts.
template <class T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& g, int ca) {
    require(ca > 0 && ca < g.c(), "split_channels: bad split point");
    Tensor<T> a(g.n(), ca, g.h(), g.w());
    Tensor<T> b(g.n(), g.c() - ca, g.h(), g.w());
    for (int n = 0; n < g.n(); ++n) {
        auto gi = g.item(n);
        std::copy(gi.begin(), gi.begin() + a.item(n).size(), a.item(n).data());
        std::copy(gi.begin() + a.item(n).size(), gi.end(), b.item(n).data());
    }
    return {std::move(a), std::move(b)};
}

// (C*f*f, h, w) -> (C, h*f, w*f); input channel c*f*f + i*f + j lands at
// sub-pixel offset (i, j).
template <class T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int f) {
    require(f >= 1 && x.c() % (f * f) == 0,
            "pixel_shuffle: channels " + std::to_string(x.c()) + " not divisible by " + std::to_string(f * f));
    const int c = x.c() / (f * f);
    Tensor<T> out(x.n(), c, x.h() * f, x.w() * f);
    for (int n = 0; n < x.n(); ++n)
        for (int ch = 0; ch < c; ++ch)
            for (int i = 0; i < f; ++i)
                for (int j = 0; j < f; ++j) {
                    const int src = ch * f * f + i * f + j;
                    for (int y = 0; y < x.h(); ++y)
                        for (int xx = 0; xx < x.w(); ++xx) out(n, ch, y * f + i, xx * f + j) = x(n, src, y, xx);
                }
    return out;
}

// Inverse permutation of pixel_shuffle (and therefore also its gradient).
template <class T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, int f) {
    require(f >= 1 && x.h() % f == 0 && x.w() % f == 0, "pixel_unshuffle: dims not divisible by factor");
    const int h = x.h() / f;
    const int w = x.w() / f;
    Tensor<T> out(x.n(), x.c() * f * f, h, w);
    for (int n = 0; n < x.n(); ++n)
        for (int ch = 0; ch < x.c(); ++ch)
            for (int i = 0; i < f; ++i)
                for (int j = 0; j < f; ++j) {
                    const int dst = ch * f * f + i * f + j;
                    for (int y = 0; y < h; ++y)
                        for (int xx = 0; xx < w; ++xx) out(n, dst, y, xx) = x(n, ch, y * f + i, xx * f + j);
                }
    return out;
}

// 2x2 average pooling, stride 2.
template <class T>
Tensor<T> avg_pool2(const Tensor<T>& x) {
    require(x.h() % 2 == 0 && x.w() % 2 == 0, "avg_pool2: odd spatial dims " + to_string(x.shape()));
    Tensor<T> out(x.n(), x.c(), x.h() / 2, x.w() / 2);
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c)
            for (int y = 0; y < out.h(); ++y)
                for (int xx = 0; xx < out.w(); ++xx)
                    out(n, c, y, xx) = (x(n, c, 2 * y, 2 * xx) + x(n, c, 2 * y, 2 * xx + 1) +
                                        x(n, c, 2 * y + 1, 2 * xx) + x(n, c, 2 * y + 1, 2 * xx + 1)) *
                                       T(0.25);
    return out;
}

template <class T>
Tensor<T> avg_pool2_backward(const Tensor<T>& g) {
    Tensor<T> out(g.n(), g.c(), g.h() * 2, g.w() * 2);
    for (int n = 0; n < g.n(); ++n)
        for (int c = 0; c < g.c(); ++c)
            for (int y = 0; y < out.h(); ++y)
                for (int xx = 0; xx < out.w(); ++xx) out(n, c, y, xx) = g(n, c, y / 2, xx / 2) * T(0.25);
    return out;
}

}  // namespace msdeblur
