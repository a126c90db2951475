#pragma once

// Training losses with analytic gradients: mean L1, windowed SSIM, the
// three-level average-pool MS-SSIM loss, and the weighted mix of the two.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "msdeblur/layers.hpp"
#include "msdeblur/tensor.hpp"

namespace msdeblur {

struct LossWeights {
    double lambda_l1 = 0.22;
    double lambda_ss = 0.78;
    std::array<double, 3> pyramid{0.448, 0.353, 0.199};

    void validate() const {
        require(lambda_l1 >= 0 && lambda_ss >= 0, "loss weights must be nonnegative");
        for (double w : pyramid) require(w > 0, "pyramid weights must be positive");
    }
};

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
    // Images smaller than the window use a window of size min(h, w);
    // otherwise they are rejected.
    bool shrink_window = true;
};

template <class T>
struct LossTerms {
    T total{};
    T l1{};
    T ss{};
};

// Normalized 1-D Gaussian of the given size; the 2-D window is its outer
// product and therefore also sums to one.
inline std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> g(size);
    const double c = (size - 1) / 2.0;
    double total = 0;
    for (int i = 0; i < size; ++i) {
        g[i] = std::exp(-(i - c) * (i - c) / (2 * sigma * sigma));
        total += g[i];
    }
    for (auto& v : g) v /= total;
    return g;
}

template <class T>
T l1_loss(const Tensor<T>& out, const Tensor<T>& gt, Tensor<T>* grad = nullptr) {
    require(out.shape() == gt.shape(),
            "l1_loss: shape mismatch " + to_string(out.shape()) + " vs " + to_string(gt.shape()));
    const T inv = T(1) / static_cast<T>(out.size());
    T acc = 0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += std::abs(out[i] - gt[i]);
    if (grad) {
        *grad = Tensor<T>(out.shape());
        for (std::size_t i = 0; i < out.size(); ++i) {
            const T d = out[i] - gt[i];
            (*grad)[i] = d > 0 ? inv : (d < 0 ? -inv : T(0));
        }
    }
    return acc * inv;
}

namespace detail {

// Valid-region separable filtering of one plane and its adjoint.
template <class T>
class ValidFilter {
public:
    ValidFilter(int h, int w, const std::vector<double>& g)
        : h_(h), w_(w), k_(static_cast<int>(g.size())), oh_(h - k_ + 1), ow_(w - k_ + 1), g_(g.begin(), g.end()),
          tmp_(static_cast<std::size_t>(h) * ow_) {}

    [[nodiscard]] int out_h() const { return oh_; }
    [[nodiscard]] int out_w() const { return ow_; }
    [[nodiscard]] std::size_t out_size() const { return static_cast<std::size_t>(oh_) * ow_; }

    void apply(const T* x, T* out) {
        for (int y = 0; y < h_; ++y)
            for (int j = 0; j < ow_; ++j) {
                T acc = 0;
                const T* row = x + static_cast<std::size_t>(y) * w_ + j;
                for (int k = 0; k < k_; ++k) acc += g_[k] * row[k];
                tmp_[static_cast<std::size_t>(y) * ow_ + j] = acc;
            }
        for (int i = 0; i < oh_; ++i)
            for (int j = 0; j < ow_; ++j) {
                T acc = 0;
                for (int k = 0; k < k_; ++k) acc += g_[k] * tmp_[static_cast<std::size_t>(i + k) * ow_ + j];
                out[static_cast<std::size_t>(i) * ow_ + j] = acc;
            }
    }

    // out (h x w) = adjoint applied to d (oh x ow); overwrites out.
    void adjoint(const T* d, T* out) {
        std::fill(tmp_.begin(), tmp_.end(), T(0));
        for (int i = 0; i < oh_; ++i)
            for (int k = 0; k < k_; ++k)
                for (int j = 0; j < ow_; ++j)
                    tmp_[static_cast<std::size_t>(i + k) * ow_ + j] += g_[k] * d[static_cast<std::size_t>(i) * ow_ + j];
        std::fill(out, out + static_cast<std::size_t>(h_) * w_, T(0));
        for (int y = 0; y < h_; ++y)
            for (int j = 0; j < ow_; ++j) {
                const T v = tmp_[static_cast<std::size_t>(y) * ow_ + j];
                T* row = out + static_cast<std::size_t>(y) * w_ + j;
                for (int k = 0; k < k_; ++k) row[k] += g_[k] * v;
            }
    }

private:
    int h_, w_, k_, oh_, ow_;
    std::vector<T> g_;
    std::vector<T> tmp_;
};

}  // namespace detail

// Mean SSIM over valid window positions, channels and batch. Gaussian
// window, C1 = (k1 L)^2, C2 = (k2 L)^2. Optionally returns d(ssim)/d(a).
template <class T>
T ssim(const Tensor<T>& a, const Tensor<T>& b, const SsimParams& p = {}, Tensor<T>* grad_a = nullptr) {
    require(a.shape() == b.shape(), "ssim: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    int win = p.window;
    if (a.h() < win || a.w() < win) {
        require(p.shrink_window, "ssim: image " + to_string(a.shape()) + " smaller than the " +
                                     std::to_string(p.window) + "x" + std::to_string(p.window) + " window");
        win = std::min(a.h(), a.w());
    }
    const auto g = gaussian_window(win, p.sigma);
    const T c1 = static_cast<T>((p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range));
    const T c2 = static_cast<T>((p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range));

    detail::ValidFilter<T> filt(a.h(), a.w(), g);
    const std::size_t m = filt.out_size();
    const std::size_t plane = a.shape().plane();
    const T inv_total = T(1) / static_cast<T>(m * a.n() * a.c());
    std::vector<T> mu_a(m), mu_b(m), e_aa(m), e_bb(m), e_ab(m), sq(plane), tmp(plane);
    std::vector<T> d_mu(m), d_aa(m), d_ab(m);
    if (grad_a) *grad_a = Tensor<T>(a.shape());

    T total = 0;
    for (int n = 0; n < a.n(); ++n)
        for (int c = 0; c < a.c(); ++c) {
            const T* pa = a.plane(n, c).data();
            const T* pb = b.plane(n, c).data();
            filt.apply(pa, mu_a.data());
            filt.apply(pb, mu_b.data());
            for (std::size_t i = 0; i < plane; ++i) sq[i] = pa[i] * pa[i];
            filt.apply(sq.data(), e_aa.data());
            for (std::size_t i = 0; i < plane; ++i) sq[i] = pb[i] * pb[i];
            filt.apply(sq.data(), e_bb.data());
            for (std::size_t i = 0; i < plane; ++i) sq[i] = pa[i] * pb[i];
            filt.apply(sq.data(), e_ab.data());

            for (std::size_t i = 0; i < m; ++i) {
                const T ma = mu_a[i], mb = mu_b[i];
                const T num1 = 2 * ma * mb + c1;
                const T num2 = 2 * (e_ab[i] - ma * mb) + c2;
                const T den1 = ma * ma + mb * mb + c1;
                const T den2 = (e_aa[i] - ma * ma) + (e_bb[i] - mb * mb) + c2;
                const T s = (num1 * num2) / (den1 * den2);
                total += s;
                if (grad_a) {
                    // Grouped so every term cancels bit-exactly when a == b.
                    const T k = inv_total * 2 / (den1 * den2);
                    d_mu[i] = k * ((mb * num2 - ma * (s * den2)) + (ma * (s * den1) - mb * num1));
                    d_aa[i] = k * (s * den1);
                    d_ab[i] = k * num1;
                }
            }
            if (grad_a) {
                T* ga = grad_a->plane(n, c).data();
                filt.adjoint(d_mu.data(), ga);
                filt.adjoint(d_aa.data(), tmp.data());
                filt.adjoint(d_ab.data(), sq.data());
                for (std::size_t i = 0; i < plane; ++i) ga[i] += pb[i] * sq[i] - pa[i] * tmp[i];
            }
        }
    return total * inv_total;
}

// 1 - sum_m w_m * ssim(pool^m(out), pool^m(gt)), m = 0..2, pool = 2x2 average.
template <class T>
T msssim_loss(const Tensor<T>& out, const Tensor<T>& gt, const LossWeights& w = {}, const SsimParams& p = {},
              Tensor<T>* grad = nullptr) {
    require(out.shape() == gt.shape(), "msssim_loss: shape mismatch");
    require(out.h() % 4 == 0 && out.w() % 4 == 0,
            "msssim_loss: dims " + to_string(out.shape()) + " must be divisible by 4");
    std::array<Tensor<T>, 3> a{out, Tensor<T>(), Tensor<T>()};
    std::array<Tensor<T>, 3> b{gt, Tensor<T>(), Tensor<T>()};
    for (int lvl = 1; lvl < 3; ++lvl) {
        a[lvl] = avg_pool2(a[lvl - 1]);
        b[lvl] = avg_pool2(b[lvl - 1]);
    }
    T loss = 1;
    std::array<Tensor<T>, 3> g;
    for (int lvl = 0; lvl < 3; ++lvl)
        loss -= static_cast<T>(w.pyramid[lvl]) * ssim(a[lvl], b[lvl], p, grad ? &g[lvl] : nullptr);
    if (grad) {
        Tensor<T> acc = g[2];
        acc *= -static_cast<T>(w.pyramid[2]);
        for (int lvl = 1; lvl >= 0; --lvl) {
            acc = avg_pool2_backward(acc);
            Tensor<T> term = g[lvl];
            term *= -static_cast<T>(w.pyramid[lvl]);
            acc += term;
        }
        *grad = std::move(acc);
    }
    return loss;
}

// lambda_l1 * l1 + lambda_ss * msssim_loss.
template <class T>
LossTerms<T> mix_loss(const Tensor<T>& out, const Tensor<T>& gt, const LossWeights& w = {}, const SsimParams& p = {},
                      Tensor<T>* grad = nullptr) {
    w.validate();
    Tensor<T> gl1, gss;
    LossTerms<T> t;
    t.l1 = l1_loss(out, gt, grad ? &gl1 : nullptr);
    t.ss = msssim_loss(out, gt, w, p, grad ? &gss : nullptr);
    const T l1w = static_cast<T>(w.lambda_l1);
    const T ssw = static_cast<T>(w.lambda_ss);
    t.total = l1w * t.l1 + ssw * t.ss;
    if (grad) {
        *grad = Tensor<T>(out.shape());
        for (std::size_t i = 0; i < out.size(); ++i) (*grad)[i] = l1w * gl1[i] + ssw * gss[i];
    }
    return t;
}

// Coarse-stage loss: the same mix, at half resolution against the x2
// bicubic-reduced ground truth.
template <class T>
LossTerms<T> sub_loss(const Tensor<T>& coarse_out, const Tensor<T>& gt_x2, const LossWeights& w = {},
                      const SsimParams& p = {}, Tensor<T>* grad = nullptr) {
    require(coarse_out.shape() == gt_x2.shape(), "sub_loss: coarse output " + to_string(coarse_out.shape()) +
                                                     " does not match x2 target " + to_string(gt_x2.shape()));
    return mix_loss(coarse_out, gt_x2, w, p, grad);
}

}  // namespace msdeblur
