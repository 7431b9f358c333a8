#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dualfreq/common.hpp"
#include "dualfreq/rng.hpp"
#include "dualfreq/tensor.hpp"

namespace dualfreq {
namespace nn {

/// Convolution parameters. One instance is shared by every block of a given
/// size within a branch; weight gradients therefore accumulate additively
/// across those blocks.
template <class T>
struct ConvFilterT {
    TensorT<T> weights; // [C_out, C_in, K, K]
    TensorT<T> bias;    // [C_out]
    std::size_t stride = 1;
    std::size_t padding = 0;

    std::size_t out_channels() const { return weights.dim(0); }
    std::size_t in_channels() const { return weights.dim(1); }
    std::size_t kernel() const { return weights.dim(2); }
};

template <class T>
struct LinearLayerT {
    TensorT<T> weights; // [out, in]
    TensorT<T> bias;    // [out]

    std::size_t out_features() const { return weights.dim(0); }
    std::size_t in_features() const { return weights.dim(1); }
};

using ConvFilter = ConvFilterT<float>;
using LinearLayer = LinearLayerT<float>;

namespace detail {

template <class T>
TensorT<T> pad2d(const TensorT<T>& x, std::size_t pad) {
    if (pad == 0) return x;
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    TensorT<T> out({C, H + 2 * pad, W + 2 * pad});
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < H; ++i) {
            for (std::size_t j = 0; j < W; ++j) {
                out.at3(c, i + pad, j + pad) = x.at3(c, i, j);
            }
        }
    }
    return out;
}

template <class T>
void conv_check(const TensorT<T>& x, const ConvFilterT<T>& f) {
    if (x.rank() != 3) throw ShapeError("conv2d expects a rank-3 [C,H,W] input");
    if (f.weights.rank() != 4 || f.weights.dim(2) != f.weights.dim(3)) {
        throw ShapeError("conv2d filter must be [C_out,C_in,K,K]");
    }
    if (x.dim(0) != f.in_channels()) {
        throw ShapeError("conv2d input channels " + std::to_string(x.dim(0)) +
                         " != filter C_in " + std::to_string(f.in_channels()));
    }
    if (f.stride < 1) throw ShapeError("conv2d stride must be >= 1");
    const std::size_t K = f.kernel();
    const std::size_t Hp = x.dim(1) + 2 * f.padding, Wp = x.dim(2) + 2 * f.padding;
    if (Hp < K || Wp < K) throw ShapeError("conv2d input smaller than kernel after padding");
    if ((Hp - K) % f.stride != 0 || (Wp - K) % f.stride != 0) {
        throw ShapeError("conv2d extents do not tile with stride " + std::to_string(f.stride));
    }
}

} // namespace detail

/// Cross-correlation with bias. Output extent = (H + 2*pad - K)/stride + 1.
/// Contributions accumulate per output pixel in fixed (C_in, ky, kx) order.
template <class T>
TensorT<T> conv2d(const TensorT<T>& x, const ConvFilterT<T>& f) {
    detail::conv_check(x, f);
    const std::size_t Cin = f.in_channels(), Cout = f.out_channels();
    const std::size_t K = f.kernel(), s = f.stride, p = f.padding;
    const std::size_t Ho = (x.dim(1) + 2 * p - K) / s + 1;
    const std::size_t Wo = (x.dim(2) + 2 * p - K) / s + 1;
    const TensorT<T> xp = detail::pad2d(x, p);
    const std::size_t Wp = xp.dim(2);

    TensorT<T> out({Cout, Ho, Wo});
    for (std::size_t oc = 0; oc < Cout; ++oc) {
        T* ochan = out.data() + oc * Ho * Wo;
        const T bias = f.bias[oc];
        for (std::size_t i = 0; i < Ho * Wo; ++i) ochan[i] = bias;
        for (std::size_t ic = 0; ic < Cin; ++ic) {
            const T* xchan = xp.data() + ic * xp.dim(1) * Wp;
            for (std::size_t ky = 0; ky < K; ++ky) {
                for (std::size_t kx = 0; kx < K; ++kx) {
                    const T w = f.weights[((oc * Cin + ic) * K + ky) * K + kx];
                    for (std::size_t oy = 0; oy < Ho; ++oy) {
                        const T* xrow = xchan + (oy * s + ky) * Wp + kx;
                        T* orow = ochan + oy * Wo;
                        if (s == 1) {
                            for (std::size_t ox = 0; ox < Wo; ++ox) orow[ox] += w * xrow[ox];
                        } else {
                            for (std::size_t ox = 0; ox < Wo; ++ox) orow[ox] += w * xrow[ox * s];
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <class T>
struct Conv2dGrads {
    TensorT<T> x;
    TensorT<T> weights;
    TensorT<T> bias;
};

template <class T>
Conv2dGrads<T> conv2d_backward(const TensorT<T>& x, const ConvFilterT<T>& f,
                               const TensorT<T>& upstream) {
    detail::conv_check(x, f);
    const std::size_t Cin = f.in_channels(), Cout = f.out_channels();
    const std::size_t K = f.kernel(), s = f.stride, p = f.padding;
    const std::size_t Ho = upstream.dim(1), Wo = upstream.dim(2);
    if (upstream.dim(0) != Cout) throw ShapeError("conv2d_backward upstream channel mismatch");
    const TensorT<T> xp = detail::pad2d(x, p);
    const std::size_t Hp = xp.dim(1), Wp = xp.dim(2);

    Conv2dGrads<T> g{TensorT<T>(x.shape()), TensorT<T>(f.weights.shape()), TensorT<T>(f.bias.shape())};
    TensorT<T> gxp({Cin, Hp, Wp});

    for (std::size_t oc = 0; oc < Cout; ++oc) {
        const T* uchan = upstream.data() + oc * Ho * Wo;
        T acc_b = T(0);
        for (std::size_t i = 0; i < Ho * Wo; ++i) acc_b += uchan[i];
        g.bias[oc] = acc_b;
        for (std::size_t ic = 0; ic < Cin; ++ic) {
            const T* xchan = xp.data() + ic * Hp * Wp;
            T* gxchan = gxp.data() + ic * Hp * Wp;
            for (std::size_t ky = 0; ky < K; ++ky) {
                for (std::size_t kx = 0; kx < K; ++kx) {
                    const std::size_t widx = ((oc * Cin + ic) * K + ky) * K + kx;
                    const T w = f.weights[widx];
                    T acc_w = T(0);
                    for (std::size_t oy = 0; oy < Ho; ++oy) {
                        const T* xrow = xchan + (oy * s + ky) * Wp + kx;
                        T* gxrow = gxchan + (oy * s + ky) * Wp + kx;
                        const T* urow = uchan + oy * Wo;
                        if (s == 1) {
                            for (std::size_t ox = 0; ox < Wo; ++ox) {
                                acc_w += urow[ox] * xrow[ox];
                                gxrow[ox] += w * urow[ox];
                            }
                        } else {
                            for (std::size_t ox = 0; ox < Wo; ++ox) {
                                acc_w += urow[ox] * xrow[ox * s];
                                gxrow[ox * s] += w * urow[ox];
                            }
                        }
                    }
                    g.weights[widx] = acc_w;
                }
            }
        }
    }
    // crop padding off the input gradient
    if (p == 0) {
        g.x = std::move(gxp);
    } else {
        for (std::size_t c = 0; c < Cin; ++c) {
            for (std::size_t i = 0; i < x.dim(1); ++i) {
                for (std::size_t j = 0; j < x.dim(2); ++j) {
                    g.x.at3(c, i, j) = gxp.at3(c, i + p, j + p);
                }
            }
        }
    }
    return g;
}

template <class T>
struct MaxPoolResult {
    TensorT<T> out;
    std::vector<std::size_t> argmax; // flat input index per output element
    typename TensorT<T>::Shape in_shape;
};

/// Window max with stride = window. Ties resolve to the first element in
/// row-major scan order so the backward pass is deterministic.
template <class T>
MaxPoolResult<T> maxpool2d(const TensorT<T>& x, std::size_t window = 2, std::size_t stride = 2) {
    if (x.rank() != 3) throw ShapeError("maxpool2d expects a rank-3 [C,H,W] input");
    if (window < 1 || stride < 1) throw ShapeError("maxpool2d window/stride must be >= 1");
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    if (H < window || W < window || (H - window) % stride != 0 || (W - window) % stride != 0) {
        throw ShapeError("maxpool2d extents " + TensorT<T>::shape_string(x.shape()) +
                         " do not tile with window " + std::to_string(window));
    }
    const std::size_t Ho = (H - window) / stride + 1;
    const std::size_t Wo = (W - window) / stride + 1;
    MaxPoolResult<T> r{TensorT<T>({C, Ho, Wo}), {}, x.shape()};
    r.argmax.resize(C * Ho * Wo);
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t oy = 0; oy < Ho; ++oy) {
            for (std::size_t ox = 0; ox < Wo; ++ox) {
                std::size_t best = (c * H + oy * stride) * W + ox * stride;
                T best_val = x[best];
                for (std::size_t wy = 0; wy < window; ++wy) {
                    for (std::size_t wx = 0; wx < window; ++wx) {
                        const std::size_t idx = (c * H + oy * stride + wy) * W + ox * stride + wx;
                        if (x[idx] > best_val) {
                            best_val = x[idx];
                            best = idx;
                        }
                    }
                }
                const std::size_t oidx = (c * Ho + oy) * Wo + ox;
                r.out[oidx] = best_val;
                r.argmax[oidx] = best;
            }
        }
    }
    return r;
}

/// Routes each upstream element to its window's argmax position.
template <class T>
TensorT<T> maxpool2d_backward(const MaxPoolResult<T>& fwd, const TensorT<T>& upstream) {
    if (upstream.size() != fwd.argmax.size()) throw ShapeError("maxpool2d_backward size mismatch");
    TensorT<T> gx(fwd.in_shape);
    for (std::size_t i = 0; i < fwd.argmax.size(); ++i) gx[fwd.argmax[i]] += upstream[i];
    return gx;
}

/// y = W x + b for rank-1 x.
template <class T>
TensorT<T> linear(const TensorT<T>& x, const LinearLayerT<T>& layer) {
    if (x.rank() != 1) throw ShapeError("linear expects a rank-1 input");
    const std::size_t in = layer.in_features(), out = layer.out_features();
    if (x.size() != in) {
        throw ShapeError("linear input length " + std::to_string(x.size()) +
                         " != layer in features " + std::to_string(in));
    }
    TensorT<T> y({out});
    const T* px = x.data();
    for (std::size_t o = 0; o < out; ++o) {
        const T* wrow = layer.weights.data() + o * in;
        T acc = layer.bias[o];
        for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * px[i];
        y[o] = acc;
    }
    return y;
}

template <class T>
struct LinearGrads {
    TensorT<T> x;
    TensorT<T> weights;
    TensorT<T> bias;
};

template <class T>
LinearGrads<T> linear_backward(const TensorT<T>& x, const LinearLayerT<T>& layer,
                               const TensorT<T>& upstream) {
    const std::size_t in = layer.in_features(), out = layer.out_features();
    if (upstream.size() != out) throw ShapeError("linear_backward upstream length mismatch");
    LinearGrads<T> g{TensorT<T>({in}), TensorT<T>(layer.weights.shape()), upstream};
    const T* px = x.data();
    const T* pu = upstream.data();
    for (std::size_t o = 0; o < out; ++o) {
        const T u = pu[o];
        const T* wrow = layer.weights.data() + o * in;
        T* gwrow = g.weights.data() + o * in;
        T* gx = g.x.data();
        for (std::size_t i = 0; i < in; ++i) {
            gwrow[i] = u * px[i];
            gx[i] += u * wrow[i];
        }
    }
    return g;
}

/// y = x for x >= 0, else 0.01*x. Slope at exactly 0 is 1.
template <class T>
TensorT<T> lrelu(const TensorT<T>& x) {
    TensorT<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] >= T(0) ? x[i] : T(0.01) * x[i];
    return y;
}

template <class T>
TensorT<T> lrelu_backward(const TensorT<T>& x, const TensorT<T>& upstream) {
    TensorT<T> g(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        g[i] = x[i] >= T(0) ? upstream[i] : T(0.01) * upstream[i];
    }
    return g;
}

/// y = x for x >= 0, else p*x; p is learned. Slope at exactly 0 is 1.
template <class T>
TensorT<T> prelu(const TensorT<T>& x, T p) {
    TensorT<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] >= T(0) ? x[i] : p * x[i];
    return y;
}

template <class T>
struct PReluGrads {
    TensorT<T> x;
    T p; // dL/dp = sum over x<0 of upstream * x
};

template <class T>
PReluGrads<T> prelu_backward(const TensorT<T>& x, T p, const TensorT<T>& upstream) {
    PReluGrads<T> g{TensorT<T>(x.shape()), T(0)};
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] >= T(0)) {
            g.x[i] = upstream[i];
        } else {
            g.x[i] = p * upstream[i];
            g.p += upstream[i] * x[i];
        }
    }
    return g;
}

/// Numerically stable logistic function.
template <class T>
T sigmoid(T x) {
    if (x >= T(0)) {
        return T(1) / (T(1) + static_cast<T>(std::exp(-static_cast<double>(x))));
    }
    const T e = static_cast<T>(std::exp(static_cast<double>(x)));
    return e / (T(1) + e);
}

template <class T>
T sigmoid_backward(T y, T upstream) {
    return upstream * y * (T(1) - y);
}

template <class T>
struct DropoutResult {
    TensorT<T> y;
    TensorT<T> mask; // 0 for dropped units, 1/(1-rate) for survivors
};

/// Inverted dropout: training zeroes units with probability `rate` and
/// scales survivors by 1/(1-rate); eval mode is the bit-exact identity.
template <class T>
DropoutResult<T> dropout(const TensorT<T>& x, double rate, bool train, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ConfigError("dropout rate must be in [0,1), got " + std::to_string(rate));
    }
    DropoutResult<T> r{TensorT<T>(x.shape()), TensorT<T>(x.shape())};
    if (!train || rate == 0.0) {
        r.y = x;
        r.mask.fill(T(1));
        return r;
    }
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T m = rng.bernoulli(rate) ? T(0) : scale;
        r.mask[i] = m;
        r.y[i] = x[i] * m;
    }
    return r;
}

template <class T>
TensorT<T> dropout_backward(const DropoutResult<T>& fwd, const TensorT<T>& upstream) {
    return mul(upstream, fwd.mask);
}

/// Uniform on [-a, a] with a = sqrt(6/(fan_in+fan_out)). Draws consume one
/// double each so float and double nets seeded alike get the same values.
template <class T>
TensorT<T> glorot_uniform(const typename TensorT<T>::Shape& shape, std::size_t fan_in,
                          std::size_t fan_out, Rng& rng) {
    if (fan_in < 1 || fan_out < 1) throw ConfigError("glorot fans must be >= 1");
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    TensorT<T> t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<T>((2.0 * rng.next_double() - 1.0) * a);
    }
    return t;
}

/// Order-preserving concatenation of rank-1 parts.
template <class T>
TensorT<T> concat(const std::vector<TensorT<T>>& parts) {
    if (parts.empty()) throw ConfigError("concat requires a non-empty list of parts");
    std::size_t total = 0;
    for (const auto& p : parts) total += p.size();
    TensorT<T> out({total});
    std::size_t offset = 0;
    for (const auto& p : parts) {
        for (std::size_t i = 0; i < p.size(); ++i) out[offset + i] = p[i];
        offset += p.size();
    }
    return out;
}

/// Splits a rank-1 tensor back into segments; the gradient of concat.
template <class T>
std::vector<TensorT<T>> split_segments(const TensorT<T>& v, const std::vector<std::size_t>& lengths) {
    std::size_t total = 0;
    for (std::size_t len : lengths) total += len;
    if (total != v.size()) throw ShapeError("split_segments lengths do not sum to input size");
    std::vector<TensorT<T>> parts;
    parts.reserve(lengths.size());
    std::size_t offset = 0;
    for (std::size_t len : lengths) {
        TensorT<T> part({len});
        for (std::size_t i = 0; i < len; ++i) part[i] = v[offset + i];
        offset += len;
        parts.push_back(std::move(part));
    }
    return parts;
}

} // namespace nn
} // namespace dualfreq
