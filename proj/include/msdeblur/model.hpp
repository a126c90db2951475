#pragma once

// Network assembly: coarse sub-network (x4 down, output at half
// resolution), fine sub-network (x2 fusion, output at full resolution), the
// optional full-resolution x1 path, and the single-scale variants.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "msdeblur/blocks.hpp"
#include "msdeblur/config.hpp"
#include "msdeblur/downscale.hpp"
#include "msdeblur/geometry.hpp"

namespace msdeblur {

struct ForwardOptions {
    bool bypass_backbone = false;
    bool long_skip = true;
};

namespace detail {

template <class T>
void set_head_bias(Upscaler<T>& up, T v) {
    up.head.bias.value.fill(v);
}

}  // namespace detail

// Image in (b,3,H,W), H and W divisible by 4 -> clamped image (b,3,H/2,W/2).
template <class T>
class CoarseNet {
public:
    CoarseNet() = default;
    explicit CoarseNet(const ModelConfig& cfg)
        : down(cfg.channels, cfg.downscale_mode, 2, 2),
          backbone(cfg.channels, cfg.n_groups, cfg.n_blocks_per_group, cfg.backbone == BackboneKind::rcan,
                   cfg.ca_reduction),
          up(cfg.channels, 2) {}

    DownScale1<T> down;
    Backbone<T> backbone;
    Upscaler<T> up;

    void init(Rng& rng) {
        down.init(rng);
        backbone.init(rng);
        up.init(rng);
        detail::set_head_bias(up, T(0.5));
    }

    template <class F>
    void visit(F&& f, const std::string& prefix) {
        down.visit(f, prefix + "down.");
        backbone.visit(f, prefix + "backbone.");
        up.visit(f, prefix + "up.");
    }

    Tensor<T> forward(const Tensor<T>& img) {
        Tensor<T> out = up.forward(backbone.forward(down.forward(img)));
        if (grad_enabled()) pre_clamp_ = out;
        return clamp_image(std::move(out));
    }

    Tensor<T> backward(const Tensor<T>& grad) {
        return down.backward(backbone.backward(up.backward(clamp_image_backward(pre_clamp_, grad))));
    }

private:
    Tensor<T> pre_clamp_;
};

// Fuses the image with a guide image (the previous scale's estimate), runs a
// backbone, and up-scales by `factor`. Used for the fine sub-network
// (stride 2, factor 2) and for the x1 path (stride 1, factor 1).
template <class T>
class FusionNet {
public:
    FusionNet() = default;
    FusionNet(const ModelConfig& cfg, int stride)
        : fuse(cfg.channels, cfg.downscale_mode, stride),
          backbone(cfg.channels, cfg.n_groups, cfg.n_blocks_per_group, cfg.backbone == BackboneKind::rcan,
                   cfg.ca_reduction),
          up(cfg.channels, stride) {}

    DownScale2<T> fuse;
    Backbone<T> backbone;
    Upscaler<T> up;

    void init(Rng& rng) {
        fuse.init(rng);
        backbone.init(rng);
        up.init(rng);
        detail::set_head_bias(up, T(0.5));
    }

    template <class F>
    void visit(F&& f, const std::string& prefix) {
        fuse.visit(f, prefix + "fuse.");
        backbone.visit(f, prefix + "backbone.");
        up.visit(f, prefix + "up.");
    }

    Tensor<T> forward(const Tensor<T>& img, const Tensor<T>& guide) {
        Tensor<T> out = up.forward(backbone.forward(fuse.forward(img, guide)));
        if (grad_enabled()) pre_clamp_ = out;
        return clamp_image(std::move(out));
    }

    FuseGrad<T> backward(const Tensor<T>& grad) {
        return fuse.backward(backbone.backward(up.backward(clamp_image_backward(pre_clamp_, grad))));
    }

private:
    Tensor<T> pre_clamp_;
};

// x1->xk->x1 network: Down-Scaling 1 with reduced strides, one backbone, and
// an up-scaler restoring full resolution.
template <class T>
class SingleScaleNet {
public:
    SingleScaleNet() = default;
    explicit SingleScaleNet(const ModelConfig& cfg)
        : down(cfg.channels, cfg.downscale_mode, strides(cfg.scale_variant).first,
               strides(cfg.scale_variant).second),
          backbone(cfg.channels, cfg.n_groups, cfg.n_blocks_per_group, cfg.backbone == BackboneKind::rcan,
                   cfg.ca_reduction),
          up(cfg.channels, down.factor()) {}

    DownScale1<T> down;
    Backbone<T> backbone;
    Upscaler<T> up;

    static std::pair<int, int> strides(ScaleVariant v) {
        switch (v) {
            case ScaleVariant::x1_x1_x1: return {1, 1};
            case ScaleVariant::x1_x2_x1: return {2, 1};
            default: return {2, 2};
        }
    }

    void init(Rng& rng) {
        down.init(rng);
        backbone.init(rng);
        up.init(rng);
        detail::set_head_bias(up, T(0.5));
    }

    template <class F>
    void visit(F&& f, const std::string& prefix) {
        down.visit(f, prefix + "down.");
        backbone.visit(f, prefix + "backbone.");
        up.visit(f, prefix + "up.");
    }

    Tensor<T> forward(const Tensor<T>& img) {
        Tensor<T> out = up.forward(backbone.forward(down.forward(img)));
        if (grad_enabled()) pre_clamp_ = out;
        return clamp_image(std::move(out));
    }

    Tensor<T> backward(const Tensor<T>& grad) {
        return down.backward(backbone.backward(up.backward(clamp_image_backward(pre_clamp_, grad))));
    }

private:
    Tensor<T> pre_clamp_;
};

template <class T>
struct ModelOutput {
    Tensor<T> coarse;  // half resolution of the padded input; empty for single-scale models
    Tensor<T> final;   // same dims as the input
};

enum class BuildScope { full, coarse_only };

// The assembled network. Multi-scale models own `coarse` and (unless built
// coarse-only for stage-1 training) `fine` and optionally `x1`; single-scale
// variants own `single`.
template <class T>
class DeblurModel {
public:
    explicit DeblurModel(const ModelConfig& cfg, BuildScope scope = BuildScope::full) : cfg_(cfg), scope_(scope) {
        cfg.validate();
        if (cfg.multiscale()) {
            coarse.emplace(cfg);
            if (scope == BuildScope::full) {
                fine.emplace(cfg, 2);
                if (cfg.include_x1_path) x1.emplace(cfg, 1);
            }
        } else {
            require(scope == BuildScope::full, "single-scale variants have no coarse-only scope");
            single.emplace(cfg);
        }
    }

    std::optional<CoarseNet<T>> coarse;
    std::optional<FusionNet<T>> fine;
    std::optional<FusionNet<T>> x1;
    std::optional<SingleScaleNet<T>> single;

    [[nodiscard]] const ModelConfig& config() const { return cfg_; }
    [[nodiscard]] BuildScope scope() const { return scope_; }
    [[nodiscard]] bool multiscale() const { return cfg_.multiscale(); }

    // Each sub-network draws from its own stream, so a coarse-only model and a
    // full model built from the same seed share identical coarse weights.
    void init(std::uint64_t seed) {
        if (coarse) {
            Rng r(derive_seed(seed, 1));
            coarse->init(r);
        }
        if (fine) {
            Rng r(derive_seed(seed, 2));
            fine->init(r);
        }
        if (x1) {
            Rng r(derive_seed(seed, 3));
            x1->init(r);
        }
        if (single) {
            Rng r(derive_seed(seed, 4));
            single->init(r);
        }
    }

    // Visits (name, Parameter&) for every learnable tensor in a stable order.
    template <class F>
    void visit(F&& f) {
        visit_coarse(f);
        visit_fine(f);
    }
    template <class F>
    void visit_coarse(F&& f) {
        if (coarse) coarse->visit(f, "coarse.");
    }
    // Everything trained in stage 2 (fine sub-network, x1 path, or the whole
    // single-scale network).
    template <class F>
    void visit_fine(F&& f) {
        if (fine) fine->visit(f, "fine.");
        if (x1) x1->visit(f, "x1.");
        if (single) single->visit(f, "net.");
    }

    void zero_grad() {
        visit([](const std::string&, Parameter<T>& p) { p.zero_grad(); });
    }

    void set_options(const ForwardOptions& o) {
        auto apply = [&](Backbone<T>& b) {
            b.options.bypass = o.bypass_backbone;
            b.options.long_skip = o.long_skip;
        };
        if (coarse) apply(coarse->backbone);
        if (fine) apply(fine->backbone);
        if (x1) apply(x1->backbone);
        if (single) apply(single->backbone);
    }

    // Spatial multiple the network needs.
    [[nodiscard]] int pad_multiple() const {
        if (multiscale()) return 4;
        const auto [s1, s2] = SingleScaleNet<T>::strides(cfg_.scale_variant);
        return s1 * s2;
    }

    // I^{c,out}: caller pads to a multiple of 4.
    Tensor<T> coarse_forward(const Tensor<T>& img) {
        require(coarse.has_value(), "model has no coarse sub-network");
        require(img.h() % 4 == 0 && img.w() % 4 == 0,
                "coarse_forward: dims " + to_string(img.shape()) + " must be divisible by 4");
        return coarse->forward(img);
    }

    // Fine stage (and x1 path when configured) given the coarse estimate.
    Tensor<T> fine_forward(const Tensor<T>& img, const Tensor<T>& coarse_img) {
        require(fine.has_value(), "model has no fine sub-network (built coarse-only?)");
        Tensor<T> out = fine->forward(img, coarse_img);
        if (x1) out = x1->forward(img, out);
        return out;
    }

    // Back-propagates through the fine stage; returns the gradient w.r.t. the
    // coarse estimate.
    Tensor<T> fine_backward(const Tensor<T>& grad) {
        Tensor<T> g = grad;
        if (x1) g = x1->backward(g).guide;
        return fine->backward(g).guide;
    }

    // Any input size: pads (edge replication), runs, crops back.
    ModelOutput<T> full_forward(const Tensor<T>& img) {
        require(img.c() == 3, "full_forward: expected a 3-channel image");
        auto [padded, rec] = pad_to_multiple(img, pad_multiple());
        ModelOutput<T> out;
        if (single) {
            out.final = crop_back(single->forward(padded), rec);
            return out;
        }
        out.coarse = coarse_forward(padded);
        out.final = crop_back(fine_forward(padded, out.coarse), rec);
        return out;
    }

    Tensor<T> infer(const Tensor<T>& img) {
        NoGradGuard guard;
        return full_forward(img).final;
    }

private:
    ModelConfig cfg_;
    BuildScope scope_;
};

template <class T>
DeblurModel<T> build_variant(const ModelConfig& cfg, std::uint64_t seed = 0) {
    DeblurModel<T> m(cfg);
    m.init(seed);
    return m;
}

template <class T>
std::size_t count_parameters(DeblurModel<T>& model) {
    std::size_t total = 0;
    model.visit([&](const std::string&, Parameter<T>& p) { total += p.size(); });
    return total;
}

// Parameter count straight from the config, without allocating weights.
inline std::size_t count_parameters(const ModelConfig& cfg) {
    cfg.validate();
    const std::size_t c = cfg.channels;
    auto conv = [](std::size_t in, std::size_t out, std::size_t k) { return in * out * k * k + out; };
    const bool rcan = cfg.backbone == BackboneKind::rcan;
    const std::size_t ca = rcan ? conv(c, c / cfg.ca_reduction, 1) + conv(c / cfg.ca_reduction, c, 1) : 0;
    const std::size_t block = 2 * conv(c, c, 3) + ca;
    const std::size_t group = cfg.n_blocks_per_group * block + conv(c, c, 3);
    const std::size_t backbone = cfg.n_groups * group + conv(c, c, 3);
    const bool learned = cfg.downscale_mode == DownscaleMode::learned;
    auto upscaler = [&](int factor) {
        std::size_t n = conv(c, 3, 3);
        for (int f = factor; f > 1; f /= 2) n += conv(c, 4 * c, 3);
        return n;
    };
    const std::size_t down1 = learned ? conv(3, c, 3) + conv(c, c, 3) : conv(3, c, 3);
    const std::size_t fuse = learned ? conv(3, c, 3) + conv(c + 3, c, 3) : conv(6, c, 3);
    if (!cfg.multiscale()) {
        const auto [s1, s2] = SingleScaleNet<float>::strides(cfg.scale_variant);
        return down1 + backbone + upscaler(s1 * s2);
    }
    std::size_t total = (down1 + backbone + upscaler(2)) + (fuse + backbone + upscaler(2));
    if (cfg.include_x1_path) total += fuse + backbone + upscaler(1);
    return total;
}

}  // namespace msdeblur
