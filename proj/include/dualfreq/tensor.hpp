#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dualfreq/common.hpp"

namespace dualfreq {

/// Dense N-dimensional array, row-major, immutable shape.
///
/// The network runs on TensorT<float>; TensorT<double> instantiations back
/// the finite-difference harness and the DFT oracle path. Reductions
/// (matmul, convolution) accumulate in the natural loop order with the
/// reduced index ascending, which makes results reproducible bit-for-bit.
template <class T>
class TensorT {
public:
    using Shape = std::vector<std::size_t>;

    TensorT() = default;

    explicit TensorT(Shape shape) : shape_(std::move(shape)) {
        data_.assign(checked_size(shape_), T(0));
    }

    TensorT(Shape shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (checked_size(shape_) != data_.size()) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_string(shape_));
        }
    }

    static TensorT zeros(const Shape& shape) { return TensorT(shape); }

    static TensorT full(const Shape& shape, T value) {
        TensorT t(shape);
        for (auto& x : t.data_) x = value;
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return data_.size(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    // Rank-checked element access for 2-d and 3-d tensors.
    T& at2(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    const T& at2(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    T& at3(std::size_t c, std::size_t i, std::size_t j) {
        return data_[(c * shape_[1] + i) * shape_[2] + j];
    }
    const T& at3(std::size_t c, std::size_t i, std::size_t j) const {
        return data_[(c * shape_[1] + i) * shape_[2] + j];
    }

    /// Same data, new shape; element counts must match.
    TensorT reshape(const Shape& new_shape) const {
        if (checked_size(new_shape) != data_.size()) {
            throw ShapeError("reshape to " + shape_string(new_shape) + " changes element count " +
                             std::to_string(data_.size()));
        }
        return TensorT(new_shape, data_);
    }

    TensorT flatten() const { return reshape({data_.size()}); }

    void fill(T value) {
        for (auto& x : data_) x = value;
    }

    bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

    static std::string shape_string(const Shape& s) {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
        os << "]";
        return os.str();
    }

private:
    static std::size_t checked_size(const Shape& shape) {
        if (shape.empty()) throw ShapeError("tensor shape must have at least one extent");
        std::size_t n = 1;
        for (std::size_t e : shape) {
            if (e == 0) throw ShapeError("tensor extent must be >= 1, got shape " + shape_string(shape));
            n *= e;
        }
        return n;
    }

    Shape shape_;
    std::vector<T> data_;
};

using Tensor = TensorT<float>;

enum class BinaryOp { add, sub, mul };

template <class T>
TensorT<T> elementwise(const TensorT<T>& a, const TensorT<T>& b, BinaryOp op) {
    if (!a.same_shape(b)) {
        throw ShapeError("elementwise shapes differ: " + TensorT<T>::shape_string(a.shape()) +
                         " vs " + TensorT<T>::shape_string(b.shape()));
    }
    TensorT<T> out(a.shape());
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    switch (op) {
        case BinaryOp::add:
            for (std::size_t i = 0; i < a.size(); ++i) po[i] = pa[i] + pb[i];
            break;
        case BinaryOp::sub:
            for (std::size_t i = 0; i < a.size(); ++i) po[i] = pa[i] - pb[i];
            break;
        case BinaryOp::mul:
            for (std::size_t i = 0; i < a.size(); ++i) po[i] = pa[i] * pb[i];
            break;
    }
    return out;
}

template <class T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) { return elementwise(a, b, BinaryOp::add); }

/// dst += src, elementwise.
template <class T>
void accumulate(TensorT<T>& dst, const TensorT<T>& src) {
    if (!dst.same_shape(src)) {
        throw ShapeError("accumulate shapes differ: " + TensorT<T>::shape_string(dst.shape()) +
                         " vs " + TensorT<T>::shape_string(src.shape()));
    }
    T* d = dst.data();
    const T* s = src.data();
    for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

template <class T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) { return elementwise(a, b, BinaryOp::sub); }
template <class T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) { return elementwise(a, b, BinaryOp::mul); }

/// C = A·B for rank-2 tensors. Per output element the reduction runs with k
/// ascending, identical to the naive i,j,k loop; the i,k,j form below only
/// reorders independent elements so it vectorizes without changing rounding.
template <class T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeError("matmul requires rank-2 tensors");
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw ShapeError("matmul inner dimensions differ: " + TensorT<T>::shape_string(a.shape()) +
                         " vs " + TensorT<T>::shape_string(b.shape()));
    }
    TensorT<T> c({m, n});
    const T* pa = a.data();
    const T* pb = b.data();
    T* pc = c.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const T aik = pa[i * k + kk];
            const T* brow = pb + kk * n;
            T* crow = pc + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

} // namespace dualfreq
