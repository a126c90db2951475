#pragma once

// Dense 4-D tensors in (batch, channels, height, width) layout.

#include <algorithm>
#include <cstddef>
#include <new>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace msdeblur {

// Thrown when a caller breaks an operation's preconditions (shape, range).
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Shape {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    [[nodiscard]] std::size_t size() const {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    [[nodiscard]] std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    [[nodiscard]] bool same_spatial(const Shape& o) const { return h == o.h && w == o.w; }

    friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
    std::ostringstream os;
    os << s.n << "x" << s.c << "x" << s.h << "x" << s.w;
    return os.str();
}

inline void require(bool cond, const std::string& what) {
    if (!cond) throw ContractError(what);
}

// Fixed 64-byte alignment. Eigen's vectorized kernels round differently
// depending on pointer alignment, so heap-dependent alignment would make
// results vary between otherwise identical runs.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

    template <class U>
    friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) {
        return true;
    }
};

template <class T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

template <class T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape s, T fill = T(0)) : shape_(checked(s)), data_(s.size(), fill) {}
    Tensor(int n, int c, int h, int w, T fill = T(0)) : Tensor(Shape{n, c, h, w}, fill) {}

    [[nodiscard]] const Shape& shape() const { return shape_; }
    [[nodiscard]] int n() const { return shape_.n; }
    [[nodiscard]] int c() const { return shape_.c; }
    [[nodiscard]] int h() const { return shape_.h; }
    [[nodiscard]] int w() const { return shape_.w; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }
    [[nodiscard]] bool empty() const { return data_.empty(); }

    T& operator()(int b, int ch, int y, int x) { return data_[index(b, ch, y, x)]; }
    const T& operator()(int b, int ch, int y, int x) const { return data_[index(b, ch, y, x)]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }
    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    // One (height, width) plane.
    std::span<T> plane(int b, int ch) {
        return {data_.data() + index(b, ch, 0, 0), shape_.plane()};
    }
    std::span<const T> plane(int b, int ch) const {
        return {data_.data() + index(b, ch, 0, 0), shape_.plane()};
    }
    // All channels of one batch item.
    std::span<T> item(int b) {
        return {data_.data() + index(b, 0, 0, 0), shape_.plane() * shape_.c};
    }
    std::span<const T> item(int b) const {
        return {data_.data() + index(b, 0, 0, 0), shape_.plane() * shape_.c};
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor& operator+=(const Tensor& o) {
        require(shape_ == o.shape_, "shape mismatch in +=: " + to_string(shape_) + " vs " + to_string(o.shape_));
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Tensor& operator*=(T s) {
        for (auto& v : data_) v *= s;
        return *this;
    }
    friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    static Shape checked(const Shape& s) {
        require(s.n >= 1 && s.c >= 1 && s.h >= 1 && s.w >= 1,
                "tensor dims must be positive, got " + to_string(s));
        return s;
    }
    [[nodiscard]] std::size_t index(int b, int ch, int y, int x) const {
        return ((static_cast<std::size_t>(b) * shape_.c + ch) * shape_.h + y) * shape_.w + x;
    }

    Shape shape_{};
    AlignedVector<T> data_;
};

template <class To, class From>
Tensor<To> tensor_cast(const Tensor<From>& src) {
    Tensor<To> out(src.shape());
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = static_cast<To>(src[i]);
    return out;
}

// Extract batch item `b` as a 1-batch tensor.
template <class T>
Tensor<T> batch_item(const Tensor<T>& t, int b) {
    require(b >= 0 && b < t.n(), "batch index out of range");
    Tensor<T> out(1, t.c(), t.h(), t.w());
    auto src = t.item(b);
    std::copy(src.begin(), src.end(), out.data());
    return out;
}

// Stack equally shaped 1-batch tensors along the batch axis.
template <class T>
Tensor<T> stack_batch(std::span<const Tensor<T>> items) {
    require(!items.empty(), "stack_batch needs at least one tensor");
    const Shape s = items.front().shape();
    Tensor<T> out(static_cast<int>(items.size()) * s.n, s.c, s.h, s.w);
    std::size_t off = 0;
    for (const auto& it : items) {
        require(it.shape() == s, "stack_batch shape mismatch");
        std::copy(it.values().begin(), it.values().end(), out.data() + off);
        off += it.size();
    }
    return out;
}

template <class T>
Tensor<T> stack_batch(const std::vector<Tensor<T>>& items) {
    return stack_batch(std::span<const Tensor<T>>(items));
}

}  // namespace msdeblur
