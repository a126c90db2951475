#pragma once

// Backbone building blocks: channel attention, residual blocks (RCAB and the
// plain EDSR variant), residual groups, the residual-in-residual backbone and
// pixel-shuffle up-scaling.

#include <string>
#include <vector>

#include "msdeblur/layers.hpp"

namespace msdeblur {

// Per-channel gate: global average pool -> 1x1 squeeze -> ReLU -> 1x1 excite
// -> sigmoid, multiplied back onto the input.
template <class T>
class ChannelAttention {
public:
    ChannelAttention() = default;
    ChannelAttention(int channels, int reduction)
        : squeeze(channels, channels / reduction, 1, 1), excite(channels / reduction, channels, 1, 1) {
        require(reduction > 0 && channels % reduction == 0,
                "channel attention: reduction must divide channel count");
    }

    Conv2d<T> squeeze;
    Conv2d<T> excite;

    void init(Rng& rng) {
        squeeze.init(rng);
        excite.init(rng);
    }

    template <class F>
    void visit(F&& f, const std::string& prefix) {
        squeeze.visit(f, prefix + "squeeze.");
        excite.visit(f, prefix + "excite.");
    }

    // Gate values from the most recent forward(), shape (n, C, 1, 1).
    [[nodiscard]] const Tensor<T>& last_gate() const { return gate_; }

    Tensor<T> forward(const Tensor<T>& f) {
        require(f.c() == squeeze.in_channels(), "channel attention: expected " +
                                                    std::to_string(squeeze.in_channels()) + " channels, got " +
                                                    std::to_string(f.c()));
        Tensor<T> pooled(f.n(), f.c(), 1, 1);
        const T inv = T(1) / static_cast<T>(f.shape().plane());
        for (int n = 0; n < f.n(); ++n)
            for (int c = 0; c < f.c(); ++c) {
                T acc = 0;
                for (T v : f.plane(n, c)) acc += v;
                pooled(n, c, 0, 0) = acc * inv;
            }
        Tensor<T> s = squeeze.forward(pooled);
        Tensor<T> e = excite.forward(relu(s));
        Tensor<T> gate = e;
        for (auto& v : gate.values()) v = sigmoid(v);
        Tensor<T> out = f;
        for (int n = 0; n < f.n(); ++n)
            for (int c = 0; c < f.c(); ++c) {
                const T g = gate(n, c, 0, 0);
                for (T& v : out.plane(n, c)) v *= g;
            }
        if (grad_enabled()) {
            input_ = f;
            pre_relu_ = std::move(s);
        }
        gate_ = std::move(gate);
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const Tensor<T>& f = input_;
        require(dy.shape() == f.shape(), "channel attention backward: shape mismatch");
        Tensor<T> df(f.shape());
        Tensor<T> dlogit(f.n(), f.c(), 1, 1);
        for (int n = 0; n < f.n(); ++n)
            for (int c = 0; c < f.c(); ++c) {
                const T g = gate_(n, c, 0, 0);
                auto fp = f.plane(n, c);
                auto gp = dy.plane(n, c);
                auto dp = df.plane(n, c);
                T dgate = 0;
                for (std::size_t i = 0; i < fp.size(); ++i) {
                    dgate += gp[i] * fp[i];
                    dp[i] = gp[i] * g;
                }
                dlogit(n, c, 0, 0) = dgate * g * (T(1) - g);
            }
        Tensor<T> dpooled = squeeze.backward(relu_backward(pre_relu_, excite.backward(dlogit)));
        const T inv = T(1) / static_cast<T>(f.shape().plane());
        for (int n = 0; n < f.n(); ++n)
            for (int c = 0; c < f.c(); ++c) {
                const T d = dpooled(n, c, 0, 0) * inv;
                for (T& v : df.plane(n, c)) v += d;
            }
        return df;
    }

private:
    Tensor<T> input_;
    Tensor<T> pre_relu_;
    Tensor<T> gate_;
};

// x + [CA](conv -> ReLU -> conv)(x). Without attention this is the EDSR
// residual block; there is no batch norm and no residual scaling.
template <class T>
class ResidualBlock {
public:
    ResidualBlock() = default;
    ResidualBlock(int channels, bool attention, int reduction)
        : conv1(channels, channels, 3, 1), conv2(channels, channels, 3, 1), attention_(attention) {
        if (attention) ca = ChannelAttention<T>(channels, reduction);
    }

    Conv2d<T> conv1;
    Conv2d<T> conv2;
    ChannelAttention<T> ca;

    [[nodiscard]] bool has_attention() const { return attention_; }

    void init(Rng& rng) {
        conv1.init(rng);
        conv2.init(rng);
        if (attention_) ca.init(rng);
    }

    template <class F>
    void visit(F&& f, const std::string& prefix) {
        conv1.visit(f, prefix + "conv1.");
        conv2.visit(f, prefix + "conv2.");
        if (attention_) ca.visit(f, prefix + "ca.");
    }

    Tensor<T> forward(const Tensor<T>& x) {
        Tensor<T> a = conv1.forward(x);
        Tensor<T> b = conv2.forward(relu(a));
        if (grad_enabled()) pre_relu_ = std::move(a);
        if (attention_) b = ca.forward(b);
        return b += x;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> db = attention_ ? ca.backward(dy) : dy;
        Tensor<T> dx = conv1.backward(relu_backward(pre_relu_, conv2.backward(db)));
        return dx += dy;
    }

private:
    bool attention_ = true;
    Tensor<T> pre_relu_;
};

// Blocks followed by a tail conv, with a short skip around the whole group.
template <class T>
class ResidualGroup {
public:
    ResidualGroup() = default;
    ResidualGroup(int channels, int n_blocks, bool attention, int reduction) : tail(channels, channels, 3, 1) {
        blocks.reserve(n_blocks);
        for (int i = 0; i < n_blocks; ++i) blocks.emplace_back(channels, attention, reduction);
    }

    std::vector<ResidualBlock<T>> blocks;
    Conv2d<T> tail;

    void init(Rng& rng) {
        for (auto& b : blocks) b.init(rng);
        tail.init(rng);
    }

    template <class F>
    void visit(F&& f, const std::string& prefix) {
        for (std::size_t i = 0; i < blocks.size(); ++i)
            blocks[i].visit(f, prefix + "block" + std::to_string(i) + ".");
        tail.visit(f, prefix + "tail.");
    }

    Tensor<T> forward(const Tensor<T>& x) {
        Tensor<T> h = x;
        for (auto& b : blocks) h = b.forward(h);
        return tail.forward(h) += x;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> g = tail.backward(dy);
        for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) g = it->backward(g);
        return g += dy;
    }
};

// Switches used by the decomposition diagnostic.
struct BackboneOptions {
    bool bypass = false;           // backbone replaced by identity
    bool long_skip = true;         // residual-in-residual skip around the body
};

// Residual-in-residual backbone: groups, a tail conv, and a long skip adding
// the backbone input to the tail output.
template <class T>
class Backbone {
public:
    Backbone() = default;
    Backbone(int channels, int n_groups, int n_blocks, bool attention, int reduction)
        : tail(channels, channels, 3, 1), channels_(channels) {
        require(n_groups >= 1 && n_blocks >= 1, "backbone: need at least one group and one block");
        groups.reserve(n_groups);
        for (int i = 0; i < n_groups; ++i) groups.emplace_back(channels, n_blocks, attention, reduction);
    }

    std::vector<ResidualGroup<T>> groups;
    Conv2d<T> tail;
    BackboneOptions options;

    [[nodiscard]] int channels() const { return channels_; }

    void init(Rng& rng) {
        for (auto& g : groups) g.init(rng);
        tail.init(rng);
    }

    template <class F>
    void visit(F&& f, const std::string& prefix) {
        for (std::size_t i = 0; i < groups.size(); ++i)
            groups[i].visit(f, prefix + "group" + std::to_string(i) + ".");
        tail.visit(f, prefix + "tail.");
    }

    Tensor<T> forward(const Tensor<T>& x) {
        require(x.c() == channels_, "backbone: expected " + std::to_string(channels_) + " channels, got " +
                                        std::to_string(x.c()));
        if (options.bypass) return x;
        Tensor<T> h = x;
        for (auto& g : groups) h = g.forward(h);
        Tensor<T> out = tail.forward(h);
        if (options.long_skip) out += x;
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        if (options.bypass) return dy;
        Tensor<T> g = tail.backward(dy);
        for (auto it = groups.rbegin(); it != groups.rend(); ++it) g = it->backward(g);
        if (options.long_skip) g += dy;
        return g;
    }

private:
    int channels_ = 0;
};

// Chained (conv C -> 4C, pixel shuffle x2) stages, optionally followed by a
// 3x3 conv to a 3-channel image. Factor 1 keeps only the image conv.
template <class T>
class Upscaler {
public:
    Upscaler() = default;
    Upscaler(int channels, int factor, bool image_head = true) : factor_(factor), image_head_(image_head) {
        require(factor == 1 || factor == 2 || factor == 4, "upscaler: factor must be 1, 2 or 4");
        for (int f = factor; f > 1; f /= 2) stages.emplace_back(channels, channels * 4, 3, 1);
        if (image_head) head = Conv2d<T>(channels, 3, 3, 1);
    }

    std::vector<Conv2d<T>> stages;
    Conv2d<T> head;

    [[nodiscard]] int factor() const { return factor_; }

    void init(Rng& rng) {
        for (auto& s : stages) s.init(rng);
        if (image_head_) head.init(rng);
    }

    template <class F>
    void visit(F&& f, const std::string& prefix) {
        for (std::size_t i = 0; i < stages.size(); ++i) stages[i].visit(f, prefix + "shuffle" + std::to_string(i) + ".");
        if (image_head_) head.visit(f, prefix + "image.");
    }

    Tensor<T> forward(const Tensor<T>& x) {
        Tensor<T> h = x;
        for (auto& s : stages) h = pixel_shuffle(s.forward(h), 2);
        return image_head_ ? head.forward(h) : h;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> g = image_head_ ? head.backward(dy) : dy;
        for (auto it = stages.rbegin(); it != stages.rend(); ++it) g = it->backward(pixel_unshuffle(g, 2));
        return g;
    }

private:
    int factor_ = 2;
    bool image_head_ = true;
};

}  // namespace msdeblur
