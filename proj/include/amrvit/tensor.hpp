#pragma once

#include <cstdint>
#include <initializer_list>
#include <new>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace amrvit {

// 64-byte-aligned storage. Keeping every value buffer on the same alignment
// makes vectorized kernels take identical code paths on every allocation,
// which run-to-run bit reproducibility depends on.
template <typename T, size_t Align>
struct AlignedAlloc {
    using value_type = T;
    template <class U>
    struct rebind {
        using other = AlignedAlloc<U, Align>;
    };
    AlignedAlloc() = default;
    template <class U>
    AlignedAlloc(const AlignedAlloc<U, Align>&) {}
    T* allocate(size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(Align))); }
    void deallocate(T* p, size_t n) noexcept { ::operator delete(p, n * sizeof(T), std::align_val_t(Align)); }
    bool operator==(const AlignedAlloc&) const { return true; }
    bool operator!=(const AlignedAlloc&) const { return false; }
};

// Dense row-major tensor of 32-bit floats (training) or 64-bit doubles
// (gradient-checking mode).
template <typename T>
struct Tensor {
    using Storage = std::vector<T, AlignedAlloc<T, 64>>;

    std::vector<int64_t> shape;
    Storage v;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
        v.assign(static_cast<size_t>(count(shape)), T{0});
    }
    Tensor(std::vector<int64_t> s, Storage data) : shape(std::move(s)), v(std::move(data)) {
        if (static_cast<int64_t>(v.size()) != count(shape))
            throw std::invalid_argument("Tensor: data size does not match shape");
    }

    static int64_t count(const std::vector<int64_t>& s) {
        int64_t n = 1;
        for (int64_t d : s) {
            if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension");
            n *= d;
        }
        return n;
    }

    static Tensor zeros(std::vector<int64_t> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int64_t> s, T value) {
        Tensor t(std::move(s));
        std::fill(t.v.begin(), t.v.end(), value);
        return t;
    }
    static Tensor scalar(T value) { return Tensor({1}, {value}); }

    int64_t numel() const { return static_cast<int64_t>(v.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int64_t dim(int k) const { return shape[static_cast<size_t>(k)]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    T* data() { return v.data(); }
    const T* data() const { return v.data(); }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.v.resize(v.size());
        for (size_t k = 0; k < v.size(); ++k) out.v[k] = static_cast<U>(v[k]);
        return out;
    }

    void operator+=(const Tensor& o) {
        for (size_t k = 0; k < v.size(); ++k) v[k] += o.v[k];
    }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t k = 0; k < shape.size(); ++k) s += (k ? "," : "") + std::to_string(shape[k]);
        return s + "]";
    }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace amrvit
