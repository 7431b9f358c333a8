#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "dualfreq/blockdecomp.hpp"
#include "dualfreq/common.hpp"
#include "dualfreq/nn.hpp"
#include "dualfreq/rng.hpp"
#include "dualfreq/spectral.hpp"
#include "dualfreq/tensor.hpp"

namespace dualfreq {

/// Architecture hyperparameters. Every knob has a documented default; the
/// parameter set of a DualBranchNet is a pure function of this struct, which
/// checkpoints rely on for validation.
struct ModelConfig {
    std::size_t image_size = 32;
    std::size_t channels = 3;
    std::size_t pyramid_depth = 1;
    std::size_t conv_out_channels = 16;
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t padding = 1;
    // Hidden widths of the per-branch FC stack; the input width is derived
    // from the conv/pool geometry (8192 for the defaults).
    std::vector<std::size_t> branch_fc_widths = {256, 128};
    // Widths of the merged head; input is twice the branch output, the last
    // entry must be 1 (the probability neuron).
    std::vector<std::size_t> merged_fc_widths = {64, 1};
    float prelu_init = 0.05f;
    double dropout_rate = 0.5;
    float epsilon_log = 1e-6f;
    // Whether the DFT consumes the normalized image (true) or de-normalized
    // [0,1] pixels (false).
    bool dft_on_normalized = true;
    // Ablation switch: feed zeros to the frequency branch convolutions.
    bool zero_frequency_input = false;
    // Per-channel normalization constants, persisted so inference matches.
    std::vector<float> norm_mean = {0.485f, 0.456f, 0.406f};
    std::vector<float> norm_std = {0.229f, 0.224f, 0.225f};

    std::size_t levels() const { return pyramid_depth + 1; }
    std::size_t block_extent(std::size_t level) const { return image_size >> level; }

    std::size_t conv_out_extent(std::size_t n) const {
        const std::size_t padded = n + 2 * padding;
        if (padded < kernel) throw ConfigError("block smaller than kernel after padding");
        if ((padded - kernel) % stride != 0) {
            throw ConfigError("conv extents do not tile with stride " + std::to_string(stride));
        }
        return (padded - kernel) / stride + 1;
    }

    /// Flattened width entering the frequency branch FC stack
    /// (pool -> conv per block).
    std::size_t freq_flat_width() const {
        std::size_t total = 0;
        for (std::size_t l = 0; l < levels(); ++l) {
            const std::size_t s = block_extent(l);
            if (s < 2 || s % 2 != 0) {
                throw ConfigError("level " + std::to_string(l) + " block extent " +
                                  std::to_string(s) + " cannot be max-pooled");
            }
            const std::size_t e = conv_out_extent(s / 2);
            total += (std::size_t(1) << (2 * l)) * conv_out_channels * e * e;
        }
        return total;
    }

    /// Flattened width entering the spatial branch FC stack
    /// (conv -> pool per block).
    std::size_t spatial_flat_width() const {
        std::size_t total = 0;
        for (std::size_t l = 0; l < levels(); ++l) {
            const std::size_t e = conv_out_extent(block_extent(l));
            if (e < 2 || e % 2 != 0) {
                throw ConfigError("level " + std::to_string(l) + " conv output extent " +
                                  std::to_string(e) + " cannot be max-pooled");
            }
            total += (std::size_t(1) << (2 * l)) * conv_out_channels * (e / 2) * (e / 2);
        }
        return total;
    }

    void validate() const {
        if (image_size < 2) throw ConfigError("image_size must be >= 2");
        if (channels < 1) throw ConfigError("channels must be >= 1");
        if (image_size % (std::size_t(1) << pyramid_depth) != 0) {
            throw ConfigError("image_size " + std::to_string(image_size) +
                              " not divisible by 2^pyramid_depth");
        }
        if (conv_out_channels < 1) throw ConfigError("conv_out_channels must be >= 1");
        if (kernel < 1) throw ConfigError("kernel must be >= 1");
        if (stride < 1) throw ConfigError("stride must be >= 1");
        if (branch_fc_widths.empty()) throw ConfigError("branch_fc_widths must be non-empty");
        if (merged_fc_widths.empty() || merged_fc_widths.back() != 1) {
            throw ConfigError("merged_fc_widths must end in 1 (the output neuron)");
        }
        if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
            throw ConfigError("dropout_rate must be in [0,1)");
        }
        if (!(epsilon_log > 0.0f)) throw ConfigError("epsilon_log must be > 0");
        if (norm_mean.size() != channels || norm_std.size() != channels) {
            throw ConfigError("norm_mean/norm_std must have one entry per channel");
        }
        for (float s : norm_std) {
            if (!(s > 0.0f)) throw ConfigError("norm_std entries must be > 0");
        }
        freq_flat_width();
        spatial_flat_width();
    }
};

/// Linear layer plus its PReLU slope (absent on the final output layer).
template <class T>
struct FcBlockT {
    nn::LinearLayerT<T> lin;
    TensorT<T> prelu;
    bool has_prelu = true;
};

/// All learnable parameters of the two-branch model. The frequency and
/// spatial filters are entirely distinct tensors; nothing is shared across
/// branches.
template <class T>
class DualBranchNetT {
public:
    ModelConfig config;
    std::vector<nn::ConvFilterT<T>> freq_conv;    // one filter per block size
    std::vector<nn::ConvFilterT<T>> spatial_conv; // one filter per block size
    std::vector<FcBlockT<T>> freq_fc;
    std::vector<FcBlockT<T>> spatial_fc;
    std::vector<FcBlockT<T>> merged_fc;

    /// Allocates all parameter tensors (zero-filled) for `cfg`.
    static DualBranchNetT build(const ModelConfig& cfg) {
        cfg.validate();
        DualBranchNetT net;
        net.config = cfg;
        const std::size_t cout = cfg.conv_out_channels, k = cfg.kernel;
        for (std::size_t l = 0; l < cfg.levels(); ++l) {
            nn::ConvFilterT<T> f;
            f.weights = TensorT<T>({cout, cfg.channels, k, k});
            f.bias = TensorT<T>({cout});
            f.stride = cfg.stride;
            f.padding = cfg.padding;
            net.freq_conv.push_back(f);
            net.spatial_conv.push_back(std::move(f));
        }
        auto make_stack = [&](std::size_t in_width, const std::vector<std::size_t>& widths,
                              bool prelu_on_last) {
            std::vector<FcBlockT<T>> stack;
            std::size_t in = in_width;
            for (std::size_t i = 0; i < widths.size(); ++i) {
                FcBlockT<T> blk;
                blk.lin.weights = TensorT<T>({widths[i], in});
                blk.lin.bias = TensorT<T>({widths[i]});
                blk.prelu = TensorT<T>({1});
                blk.has_prelu = prelu_on_last || i + 1 < widths.size();
                stack.push_back(std::move(blk));
                in = widths[i];
            }
            return stack;
        };
        net.freq_fc = make_stack(cfg.freq_flat_width(), cfg.branch_fc_widths, true);
        net.spatial_fc = make_stack(cfg.spatial_flat_width(), cfg.branch_fc_widths, true);
        net.merged_fc = make_stack(2 * cfg.branch_fc_widths.back(), cfg.merged_fc_widths, false);
        return net;
    }

    /// Glorot-uniform weights, zero biases, PReLU slopes at prelu_init.
    /// Draws consume the init stream in parameter visitation order.
    static DualBranchNetT init(const ModelConfig& cfg, Rng init_rng) {
        DualBranchNetT net = build(cfg);
        const std::size_t k = cfg.kernel;
        auto init_conv = [&](nn::ConvFilterT<T>& f) {
            const std::size_t fan_in = f.in_channels() * k * k;
            const std::size_t fan_out = f.out_channels() * k * k;
            f.weights = nn::glorot_uniform<T>(f.weights.shape(), fan_in, fan_out, init_rng);
        };
        auto init_stack = [&](std::vector<FcBlockT<T>>& stack) {
            for (auto& blk : stack) {
                blk.lin.weights = nn::glorot_uniform<T>(
                    blk.lin.weights.shape(), blk.lin.in_features(), blk.lin.out_features(), init_rng);
                if (blk.has_prelu) blk.prelu[0] = static_cast<T>(cfg.prelu_init);
            }
        };
        for (auto& f : net.freq_conv) init_conv(f);
        for (auto& f : net.spatial_conv) init_conv(f);
        init_stack(net.freq_fc);
        init_stack(net.spatial_fc);
        init_stack(net.merged_fc);
        return net;
    }

    /// Same structure and hyperparameters, all parameters zero. Serves as
    /// the gradient tape: shapes mirror the parameters by construction.
    static DualBranchNetT zeros_like(const DualBranchNetT& other) {
        return build(other.config);
    }
};

using DualBranchNet = DualBranchNetT<float>;

/// Gradient carrier: one tensor per parameter, mirrored shapes.
template <class T>
using GradTapeT = DualBranchNetT<T>;
using GradTape = GradTapeT<float>;

/// Visits every parameter tensor in a fixed, documented order:
/// freq convs, spatial convs, freq FC, spatial FC, merged FC; within a conv
/// weight then bias, within an FC block weight, bias, then PReLU slope.
/// Checkpoint manifests, Adam state and gradient reduction all share this
/// order.
template <class Net, class Fn>
void visit_params(Net& net, Fn&& fn) {
    auto visit_convs = [&](auto& convs, const std::string& prefix) {
        for (std::size_t l = 0; l < convs.size(); ++l) {
            const std::string base = prefix + ".conv" + std::to_string(l);
            fn(base + ".weight", convs[l].weights);
            fn(base + ".bias", convs[l].bias);
        }
    };
    auto visit_stack = [&](auto& stack, const std::string& prefix) {
        for (std::size_t i = 0; i < stack.size(); ++i) {
            const std::string base = prefix + ".fc" + std::to_string(i);
            fn(base + ".weight", stack[i].lin.weights);
            fn(base + ".bias", stack[i].lin.bias);
            if (stack[i].has_prelu) fn(base + ".prelu", stack[i].prelu);
        }
    };
    visit_convs(net.freq_conv, "freq");
    visit_convs(net.spatial_conv, "spatial");
    visit_stack(net.freq_fc, "freq");
    visit_stack(net.spatial_fc, "spatial");
    visit_stack(net.merged_fc, "merged");
}

template <class T>
std::size_t param_count(const DualBranchNetT<T>& net) {
    std::size_t n = 0;
    visit_params(net, [&](const std::string&, const TensorT<T>& t) { n += t.size(); });
    return n;
}

template <class T>
bool params_equal(const DualBranchNetT<T>& a, const DualBranchNetT<T>& b) {
    std::vector<const TensorT<T>*> ta, tb;
    visit_params(a, [&](const std::string&, const TensorT<T>& t) { ta.push_back(&t); });
    visit_params(b, [&](const std::string&, const TensorT<T>& t) { tb.push_back(&t); });
    if (ta.size() != tb.size()) return false;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (ta[i]->shape() != tb[i]->shape()) return false;
        for (std::size_t j = 0; j < ta[i]->size(); ++j) {
            if ((*ta[i])[j] != (*tb[i])[j]) return false;
        }
    }
    return true;
}

/// tape += sample gradients, tensor by tensor in visitation order.
template <class T>
void accumulate_tape(GradTapeT<T>& tape, const GradTapeT<T>& delta) {
    std::vector<TensorT<T>*> dst;
    std::vector<const TensorT<T>*> src;
    visit_params(tape, [&](const std::string&, TensorT<T>& t) { dst.push_back(&t); });
    visit_params(delta, [&](const std::string&, const TensorT<T>& t) { src.push_back(&t); });
    for (std::size_t i = 0; i < dst.size(); ++i) {
        T* d = dst[i]->data();
        const T* s = src[i]->data();
        for (std::size_t j = 0; j < dst[i]->size(); ++j) d[j] += s[j];
    }
}

template <class T>
void zero_tape(GradTapeT<T>& tape) {
    visit_params(tape, [&](const std::string&, TensorT<T>& t) { t.fill(T(0)); });
}

/// Inverse of the per-channel normalization: x*std_c + mean_c.
template <class T>
TensorT<T> denormalize_image(const TensorT<T>& x, const ModelConfig& cfg) {
    TensorT<T> out(x.shape());
    const std::size_t hw = x.dim(1) * x.dim(2);
    for (std::size_t c = 0; c < x.dim(0); ++c) {
        const T m = static_cast<T>(cfg.norm_mean[c]);
        const T s = static_cast<T>(cfg.norm_std[c]);
        for (std::size_t i = 0; i < hw; ++i) {
            out[c * hw + i] = x[c * hw + i] * s + m;
        }
    }
    return out;
}

namespace detail {

template <class T>
struct FcStackCacheT {
    std::vector<TensorT<T>> in;   // input to each linear
    std::vector<TensorT<T>> pre;  // linear output, pre-PReLU
    std::vector<nn::DropoutResult<T>> drop;
    TensorT<T> out;
};

template <class T>
struct BranchCacheT {
    std::vector<TensorT<T>> conv_in;  // pooled spectrum / raw block
    std::vector<TensorT<T>> conv_pre; // conv output before LReLU
    std::vector<nn::MaxPoolResult<T>> pool; // spatial branch only
    std::vector<std::size_t> level_of_block;
    std::vector<std::size_t> flat_lengths;
    FcStackCacheT<T> fc;
};

} // namespace detail

/// Per-sample intermediates captured by the forward pass; the hand-wired
/// backward pass replays them in reverse.
template <class T>
struct ForwardCacheT {
    bool valid = false;
    bool train = false;
    detail::BranchCacheT<T> freq;
    detail::BranchCacheT<T> spatial;
    std::vector<std::size_t> merged_split; // branch output widths
    detail::FcStackCacheT<T> merged;
    T pre_sigmoid = T(0);
    T prob = T(0);
};

using ForwardCache = ForwardCacheT<float>;

namespace detail {

/// linear -> PReLU -> dropout per block (final merged layer: linear only).
template <class T>
TensorT<T> fc_stack_forward(const std::vector<FcBlockT<T>>& stack, const TensorT<T>& input,
                            double dropout_rate, bool train, Rng* rng, FcStackCacheT<T>& cache) {
    cache.in.clear();
    cache.pre.clear();
    cache.drop.clear();
    TensorT<T> h = input;
    for (const auto& blk : stack) {
        cache.in.push_back(h);
        TensorT<T> pre = nn::linear(h, blk.lin);
        cache.pre.push_back(pre);
        if (blk.has_prelu) {
            TensorT<T> act = nn::prelu(pre, blk.prelu[0]);
            if (train && dropout_rate > 0.0 && rng == nullptr) {
                throw StateError("training forward pass requires a dropout RNG");
            }
            Rng unused(0);
            auto drop = nn::dropout(act, dropout_rate, train, rng ? *rng : unused);
            cache.drop.push_back(drop);
            h = drop.y;
        } else {
            cache.drop.push_back(nn::DropoutResult<T>{});
            h = pre;
        }
    }
    cache.out = h;
    return h;
}

/// Returns the gradient w.r.t. the stack input; parameter gradients land in
/// the matching tape stack.
template <class T>
TensorT<T> fc_stack_backward(const std::vector<FcBlockT<T>>& stack, const FcStackCacheT<T>& cache,
                             const TensorT<T>& upstream, std::vector<FcBlockT<T>>& tape) {
    TensorT<T> g = upstream;
    for (std::size_t ii = stack.size(); ii-- > 0;) {
        const auto& blk = stack[ii];
        if (blk.has_prelu) {
            g = nn::dropout_backward(cache.drop[ii], g);
            auto pg = nn::prelu_backward(cache.pre[ii], blk.prelu[0], g);
            tape[ii].prelu[0] += pg.p;
            g = std::move(pg.x);
        }
        auto lg = nn::linear_backward(cache.in[ii], blk.lin, g);
        accumulate(tape[ii].lin.weights, lg.weights);
        accumulate(tape[ii].lin.bias, lg.bias);
        g = std::move(lg.x);
    }
    return g;
}

/// DFT -> magnitude -> ln(M + eps) per channel, assembled into one
/// [C, H, W] tensor. Computed in double regardless of T so the fast path
/// keeps oracle-level precision, then cast.
template <class T>
TensorT<T> spectrum_features(const TensorT<T>& block, float epsilon) {
    const std::size_t C = block.dim(0), H = block.dim(1), W = block.dim(2);
    TensorT<T> out({C, H, W});
    TensorT<double> chan({H, W});
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < H * W; ++i) {
            chan[i] = static_cast<double>(block[c * H * W + i]);
        }
        const auto grid = dft2d(chan);
        const auto mag = magnitude(grid);
        const auto logmag = log_magnitude(mag, static_cast<double>(epsilon));
        for (std::size_t i = 0; i < H * W; ++i) {
            out[c * H * W + i] = static_cast<T>(logmag.values[i]);
        }
    }
    return out;
}

} // namespace detail

/// Frequency branch: per block, DFT features -> maxpool -> conv (filter
/// shared per block size) -> LReLU; flatten in pyramid order, concat, FC
/// stack with PReLU. Gradients stop at the conv input; the DFT is
/// preprocessing, not a differentiated layer.
template <class T>
TensorT<T> freq_branch_forward(const DualBranchNetT<T>& net, const TensorT<T>& image, bool train,
                               Rng* rng, detail::BranchCacheT<T>& cache) {
    const ModelConfig& cfg = net.config;
    const TensorT<T> src =
        cfg.dft_on_normalized ? image : denormalize_image(image, cfg);
    const auto pyramid = build_pyramid(src, cfg.pyramid_depth);
    cache.conv_in.clear();
    cache.conv_pre.clear();
    cache.pool.clear();
    cache.level_of_block.clear();
    cache.flat_lengths.clear();
    std::vector<TensorT<T>> flat_parts;
    for (std::size_t l = 0; l < pyramid.levels.size(); ++l) {
        for (const auto& block : pyramid.levels[l]) {
            TensorT<T> pooled;
            if (cfg.zero_frequency_input) {
                pooled = TensorT<T>({block.dim(0), block.dim(1) / 2, block.dim(2) / 2});
            } else {
                const TensorT<T> features = detail::spectrum_features(block, cfg.epsilon_log);
                pooled = nn::maxpool2d(features).out;
            }
            TensorT<T> pre = nn::conv2d(pooled, net.freq_conv[l]);
            TensorT<T> act = nn::lrelu(pre);
            cache.conv_in.push_back(std::move(pooled));
            cache.conv_pre.push_back(std::move(pre));
            cache.level_of_block.push_back(l);
            cache.flat_lengths.push_back(act.size());
            flat_parts.push_back(act.flatten());
        }
    }
    const TensorT<T> flat = nn::concat(flat_parts);
    return detail::fc_stack_forward(net.freq_fc, flat, cfg.dropout_rate, train, rng, cache.fc);
}

/// Spatial branch: per block, conv -> LReLU -> maxpool (note the reversed
/// order relative to the frequency branch); flatten, concat, FC stack.
template <class T>
TensorT<T> spatial_branch_forward(const DualBranchNetT<T>& net, const TensorT<T>& image, bool train,
                                  Rng* rng, detail::BranchCacheT<T>& cache) {
    const ModelConfig& cfg = net.config;
    const auto pyramid = build_pyramid(image, cfg.pyramid_depth);
    cache.conv_in.clear();
    cache.conv_pre.clear();
    cache.pool.clear();
    cache.level_of_block.clear();
    cache.flat_lengths.clear();
    std::vector<TensorT<T>> flat_parts;
    for (std::size_t l = 0; l < pyramid.levels.size(); ++l) {
        for (const auto& block : pyramid.levels[l]) {
            TensorT<T> pre = nn::conv2d(block, net.spatial_conv[l]);
            TensorT<T> act = nn::lrelu(pre);
            auto pool = nn::maxpool2d(act);
            cache.conv_in.push_back(block);
            cache.conv_pre.push_back(std::move(pre));
            cache.level_of_block.push_back(l);
            cache.flat_lengths.push_back(pool.out.size());
            flat_parts.push_back(pool.out.flatten());
            cache.pool.push_back(std::move(pool));
        }
    }
    const TensorT<T> flat = nn::concat(flat_parts);
    return detail::fc_stack_forward(net.spatial_fc, flat, cfg.dropout_rate, train, rng, cache.fc);
}

/// Full forward pass: probability that the image is AI-generated.
/// Eval mode (train=false) is deterministic; rng may be null.
template <class T>
T net_forward(const DualBranchNetT<T>& net, const TensorT<T>& image, bool train, Rng* rng,
              ForwardCacheT<T>& cache) {
    const ModelConfig& cfg = net.config;
    if (image.rank() != 3 || image.dim(0) != cfg.channels || image.dim(1) != cfg.image_size ||
        image.dim(2) != cfg.image_size) {
        throw ShapeError("net_forward expects a [" + std::to_string(cfg.channels) + "," +
                         std::to_string(cfg.image_size) + "," + std::to_string(cfg.image_size) +
                         "] image, got " + TensorT<T>::shape_string(image.shape()));
    }
    cache.train = train;
    const TensorT<T> freq_out = freq_branch_forward(net, image, train, rng, cache.freq);
    const TensorT<T> spatial_out = spatial_branch_forward(net, image, train, rng, cache.spatial);
    cache.merged_split = {freq_out.size(), spatial_out.size()};
    const TensorT<T> merged_in = nn::concat<T>({freq_out, spatial_out});
    const TensorT<T> head =
        detail::fc_stack_forward(net.merged_fc, merged_in, cfg.dropout_rate, train, rng, cache.merged);
    cache.pre_sigmoid = head[0];
    cache.prob = nn::sigmoid(head[0]);
    cache.valid = true;
    return cache.prob;
}

/// Convenience eval-mode forward without an external cache.
template <class T>
T net_predict(const DualBranchNetT<T>& net, const TensorT<T>& image) {
    ForwardCacheT<T> cache;
    return net_forward(net, image, /*train=*/false, nullptr, cache);
}

namespace detail {

template <class T>
void branch_backward_freq(const DualBranchNetT<T>& net, const BranchCacheT<T>& cache,
                          const TensorT<T>& upstream, GradTapeT<T>& tape) {
    TensorT<T> g_flat = fc_stack_backward(net.freq_fc, cache.fc, upstream, tape.freq_fc);
    const auto parts = nn::split_segments(g_flat, cache.flat_lengths);
    for (std::size_t b = 0; b < parts.size(); ++b) {
        const std::size_t l = cache.level_of_block[b];
        const TensorT<T> g_act = parts[b].reshape(cache.conv_pre[b].shape());
        const TensorT<T> g_pre = nn::lrelu_backward(cache.conv_pre[b], g_act);
        auto cg = nn::conv2d_backward(cache.conv_in[b], net.freq_conv[l], g_pre);
        accumulate(tape.freq_conv[l].weights, cg.weights);
        accumulate(tape.freq_conv[l].bias, cg.bias);
        // cg.x is dropped: no learnable parameters upstream of the DFT.
    }
}

template <class T>
void branch_backward_spatial(const DualBranchNetT<T>& net, const BranchCacheT<T>& cache,
                             const TensorT<T>& upstream, GradTapeT<T>& tape) {
    TensorT<T> g_flat = fc_stack_backward(net.spatial_fc, cache.fc, upstream, tape.spatial_fc);
    const auto parts = nn::split_segments(g_flat, cache.flat_lengths);
    for (std::size_t b = 0; b < parts.size(); ++b) {
        const std::size_t l = cache.level_of_block[b];
        const TensorT<T> g_pool = parts[b].reshape(cache.pool[b].out.shape());
        const TensorT<T> g_act = nn::maxpool2d_backward(cache.pool[b], g_pool);
        const TensorT<T> g_pre = nn::lrelu_backward(cache.conv_pre[b], g_act);
        auto cg = nn::conv2d_backward(cache.conv_in[b], net.spatial_conv[l], g_pre);
        accumulate(tape.spatial_conv[l].weights, cg.weights);
        accumulate(tape.spatial_conv[l].bias, cg.bias);
    }
}

} // namespace detail

/// Reverse pass from dLoss/dProb; gradients accumulate into `tape`
/// (additively, so batch accumulation is a sequence of calls).
template <class T>
void net_backward(const DualBranchNetT<T>& net, const ForwardCacheT<T>& cache, T upstream,
                  GradTapeT<T>& tape) {
    if (!cache.valid) throw StateError("net_backward requires a forward pass cache");
    const T g_pre_sigmoid = nn::sigmoid_backward(cache.prob, upstream);
    TensorT<T> g({1});
    g[0] = g_pre_sigmoid;
    const TensorT<T> g_merged_in =
        detail::fc_stack_backward(net.merged_fc, cache.merged, g, tape.merged_fc);
    const auto branch_grads = nn::split_segments(g_merged_in, cache.merged_split);
    detail::branch_backward_freq(net, cache.freq, branch_grads[0], tape);
    detail::branch_backward_spatial(net, cache.spatial, branch_grads[1], tape);
}

} // namespace dualfreq
