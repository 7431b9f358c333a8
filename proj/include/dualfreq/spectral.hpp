#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "dualfreq/common.hpp"
#include "dualfreq/tensor.hpp"

namespace dualfreq {

/// Complex-valued A×B frequency grid: entry (h,k) holds F_hk split into
/// real and imaginary parts.
template <class T>
struct ComplexGridT {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> re;
    std::vector<T> im;

    ComplexGridT() = default;
    ComplexGridT(std::size_t r, std::size_t c)
        : rows(r), cols(c), re(r * c, T(0)), im(r * c, T(0)) {}

    std::size_t idx(std::size_t h, std::size_t k) const { return h * cols + k; }
};

/// Log-magnitude spectrum of one channel of one block: values = ln(M + eps).
template <class T>
struct SpectrumBlockT {
    TensorT<T> values; // rank-2 [A,B]
    T epsilon = T(0);
};

using ComplexGrid = ComplexGridT<double>;
using SpectrumBlock = SpectrumBlockT<float>;

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Iterative radix-2 Cooley-Tukey, forward transform (e^{-2pi i jk/n}).
/// Twiddles are computed from the angle at every butterfly; n is small here
/// and the extra cosines keep the roundoff at the few-ulp level.
template <class T>
void fft_radix2(std::vector<T>& re, std::vector<T>& im) {
    const std::size_t n = re.size();
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j |= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len >> 1;
        for (std::size_t start = 0; start < n; start += len) {
            for (std::size_t k = 0; k < half; ++k) {
                const double ang = -2.0 * M_PI * static_cast<double>(k) / static_cast<double>(len);
                const T wr = static_cast<T>(std::cos(ang));
                const T wi = static_cast<T>(std::sin(ang));
                const std::size_t a = start + k;
                const std::size_t b = a + half;
                const T tr = wr * re[b] - wi * im[b];
                const T ti = wr * im[b] + wi * re[b];
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
            }
        }
    }
}

template <class T>
void check_finite_block(const TensorT<T>& block) {
    const T* p = block.data();
    for (std::size_t i = 0; i < block.size(); ++i) {
        if (!std::isfinite(static_cast<double>(p[i]))) {
            throw NumericError("dft2d input contains a non-finite value");
        }
    }
}

} // namespace detail

/// Direct evaluation of the 2-d DFT double sum:
///   F_hk = sum_l sum_j f_lj * exp(-2*pi*i*(h*l/A + k*j/B)).
/// This is the oracle route; dft2d dispatches to the radix-2 path when both
/// extents are powers of two and must agree with this within 1e-6 absolute.
template <class T>
ComplexGridT<T> dft2d_direct(const TensorT<T>& block) {
    if (block.rank() != 2) throw ShapeError("dft2d expects a rank-2 block");
    detail::check_finite_block(block);
    const std::size_t A = block.dim(0), B = block.dim(1);
    ComplexGridT<T> out(A, B);
    for (std::size_t h = 0; h < A; ++h) {
        for (std::size_t k = 0; k < B; ++k) {
            double acc_re = 0.0, acc_im = 0.0;
            for (std::size_t l = 0; l < A; ++l) {
                for (std::size_t j = 0; j < B; ++j) {
                    const double ang = -2.0 * M_PI *
                        (static_cast<double>(h) * static_cast<double>(l) / static_cast<double>(A) +
                         static_cast<double>(k) * static_cast<double>(j) / static_cast<double>(B));
                    const double f = static_cast<double>(block.at2(l, j));
                    acc_re += f * std::cos(ang);
                    acc_im += f * std::sin(ang);
                }
            }
            out.re[out.idx(h, k)] = static_cast<T>(acc_re);
            out.im[out.idx(h, k)] = static_cast<T>(acc_im);
        }
    }
    return out;
}

/// Row-column radix-2 FFT; requires both extents to be powers of two.
template <class T>
ComplexGridT<T> dft2d_fft(const TensorT<T>& block) {
    if (block.rank() != 2) throw ShapeError("dft2d expects a rank-2 block");
    const std::size_t A = block.dim(0), B = block.dim(1);
    if (!detail::is_pow2(A) || !detail::is_pow2(B)) {
        throw ShapeError("dft2d_fft requires power-of-two extents");
    }
    detail::check_finite_block(block);
    ComplexGridT<T> out(A, B);
    // transform rows
    std::vector<T> row_re(B), row_im(B);
    for (std::size_t l = 0; l < A; ++l) {
        for (std::size_t j = 0; j < B; ++j) {
            row_re[j] = block.at2(l, j);
            row_im[j] = T(0);
        }
        detail::fft_radix2(row_re, row_im);
        for (std::size_t k = 0; k < B; ++k) {
            out.re[out.idx(l, k)] = row_re[k];
            out.im[out.idx(l, k)] = row_im[k];
        }
    }
    // transform columns
    std::vector<T> col_re(A), col_im(A);
    for (std::size_t k = 0; k < B; ++k) {
        for (std::size_t l = 0; l < A; ++l) {
            col_re[l] = out.re[out.idx(l, k)];
            col_im[l] = out.im[out.idx(l, k)];
        }
        detail::fft_radix2(col_re, col_im);
        for (std::size_t h = 0; h < A; ++h) {
            out.re[out.idx(h, k)] = col_re[h];
            out.im[out.idx(h, k)] = col_im[h];
        }
    }
    return out;
}

/// 2-d DFT of a pixel block; radix-2 fast path when both extents are powers
/// of two, direct double sum otherwise.
template <class T>
ComplexGridT<T> dft2d(const TensorT<T>& block) {
    if (block.rank() == 2 && detail::is_pow2(block.dim(0)) && detail::is_pow2(block.dim(1))) {
        return dft2d_fft(block);
    }
    return dft2d_direct(block);
}

/// M_hk = sqrt(Re^2 + Im^2), elementwise.
template <class T>
TensorT<T> magnitude(const ComplexGridT<T>& grid) {
    TensorT<T> out({grid.rows, grid.cols});
    T* po = out.data();
    for (std::size_t i = 0; i < grid.re.size(); ++i) {
        po[i] = static_cast<T>(std::sqrt(static_cast<double>(grid.re[i]) * grid.re[i] +
                                         static_cast<double>(grid.im[i]) * grid.im[i]));
    }
    return out;
}

/// values = ln(m + epsilon). epsilon floors the log where M_hk is exactly 0.
template <class T>
SpectrumBlockT<T> log_magnitude(const TensorT<T>& m, T epsilon) {
    if (!(epsilon > T(0))) throw ConfigError("log_magnitude epsilon must be > 0");
    SpectrumBlockT<T> out;
    out.epsilon = epsilon;
    out.values = TensorT<T>(m.shape());
    const T* pm = m.data();
    T* po = out.values.data();
    for (std::size_t i = 0; i < m.size(); ++i) {
        po[i] = static_cast<T>(std::log(static_cast<double>(pm[i]) + static_cast<double>(epsilon)));
    }
    return out;
}

/// Swap quadrants so the DC entry lands at (rows/2, cols/2), numpy-style.
/// Display helper only; the training path consumes the raw-ordered spectrum.
template <class T>
SpectrumBlockT<T> fftshift(const SpectrumBlockT<T>& block) {
    const std::size_t rows = block.values.dim(0), cols = block.values.dim(1);
    SpectrumBlockT<T> out;
    out.epsilon = block.epsilon;
    out.values = TensorT<T>({rows, cols});
    const std::size_t dr = rows / 2, dc = cols / 2;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            out.values.at2((i + dr) % rows, (j + dc) % cols) = block.values.at2(i, j);
        }
    }
    return out;
}

} // namespace dualfreq
