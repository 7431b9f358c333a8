#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dualfreq/model.hpp"
#include "dualfreq/nn.hpp"
#include "dualfreq/rng.hpp"
#include "dualfreq/tensor.hpp"
#include "dualfreq/train.hpp"

namespace dualfreq {
namespace gradcheck {

inline constexpr double kStep = 1e-4; // central-difference step, 64-bit
inline constexpr double kTolerance = 1e-3;

inline double rel_error(double analytic, double numeric) {
    const double mag = std::max(std::abs(analytic), std::abs(numeric));
    if (mag < 1e-10) return 0.0;
    return std::abs(analytic - numeric) / std::max(mag, 1e-8);
}

/// (f(x+h) - f(x-h)) / 2h with the coordinate restored afterwards.
template <class F>
double central_diff(double& coord, F&& f, double h = kStep) {
    const double saved = coord;
    coord = saved + h;
    const double up = f();
    coord = saved - h;
    const double down = f();
    coord = saved;
    return (up - down) / (2.0 * h);
}

struct Report {
    std::string name;
    double max_rel_error = 0.0;
    bool pass(double tol = kTolerance) const { return max_rel_error <= tol; }
};

struct Check {
    std::string name;
    std::function<double(Rng&)> run; // returns the max relative error
};

namespace detail {

inline TensorT<double> rand_tensor(const std::vector<std::size_t>& shape, Rng& rng,
                                   double lo = -1.0, double hi = 1.0) {
    TensorT<double> t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = lo + (hi - lo) * rng.next_double();
    }
    return t;
}

/// Max relative error of analytic tensor grads vs FD over every coordinate
/// of `inputs`, for a scalar loss L = sum(out * projection).
inline double fd_compare(std::vector<std::pair<TensorT<double>*, const TensorT<double>*>> pairs,
                         const std::function<double()>& loss, double h = kStep) {
    double worst = 0.0;
    for (auto& [input, analytic] : pairs) {
        for (std::size_t i = 0; i < input->size(); ++i) {
            const double fd = central_diff((*input)[i], loss, h);
            worst = std::max(worst, rel_error((*analytic)[i], fd));
        }
    }
    return worst;
}

inline double check_conv2d(Rng& rng) {
    double worst = 0.0;
    struct Cfg {
        std::size_t h, w, stride, pad;
    };
    for (const Cfg c : {Cfg{6, 6, 1, 1}, Cfg{7, 7, 2, 0}}) {
        TensorT<double> x = rand_tensor({2, c.h, c.w}, rng);
        nn::ConvFilterT<double> f;
        f.weights = rand_tensor({3, 2, 3, 3}, rng);
        f.bias = rand_tensor({3}, rng);
        f.stride = c.stride;
        f.padding = c.pad;
        const TensorT<double> proj = rand_tensor(nn::conv2d(x, f).shape(), rng);
        auto loss = [&] {
            const auto out = nn::conv2d(x, f);
            double acc = 0.0;
            for (std::size_t i = 0; i < out.size(); ++i) acc += out[i] * proj[i];
            return acc;
        };
        const auto grads = nn::conv2d_backward(x, f, proj);
        worst = std::max(worst, fd_compare({{&x, &grads.x},
                                            {&f.weights, &grads.weights},
                                            {&f.bias, &grads.bias}},
                                           loss));
    }
    return worst;
}

inline double check_maxpool2d(Rng& rng) {
    // Values spaced 0.01 apart so +/-h never flips an argmax.
    TensorT<double> x({2, 4, 4});
    std::vector<std::size_t> order(x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order, rng);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = 0.01 * static_cast<double>(order[i]) - 0.15;
    }
    const auto fwd = nn::maxpool2d(x);
    const TensorT<double> proj = rand_tensor(fwd.out.shape(), rng);
    auto loss = [&] {
        const auto out = nn::maxpool2d(x).out;
        double acc = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) acc += out[i] * proj[i];
        return acc;
    };
    const auto gx = nn::maxpool2d_backward(fwd, proj);
    return fd_compare({{&x, &gx}}, loss);
}

inline double check_linear(Rng& rng) {
    TensorT<double> x = rand_tensor({7}, rng);
    nn::LinearLayerT<double> layer;
    layer.weights = rand_tensor({5, 7}, rng);
    layer.bias = rand_tensor({5}, rng);
    const TensorT<double> proj = rand_tensor({5}, rng);
    auto loss = [&] {
        const auto y = nn::linear(x, layer);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * proj[i];
        return acc;
    };
    const auto g = nn::linear_backward(x, layer, proj);
    return fd_compare(
        {{&x, &g.x}, {&layer.weights, &g.weights}, {&layer.bias, &g.bias}}, loss);
}

/// Random values bounded away from the activation kink at zero.
inline TensorT<double> rand_kink_free(std::size_t n, Rng& rng) {
    TensorT<double> x({n});
    for (std::size_t i = 0; i < n; ++i) {
        const double mag = 0.05 + 0.95 * rng.next_double();
        x[i] = rng.bernoulli(0.5) ? mag : -mag;
    }
    return x;
}

inline double check_lrelu(Rng& rng) {
    TensorT<double> x = rand_kink_free(9, rng);
    const TensorT<double> proj = rand_tensor({9}, rng);
    auto loss = [&] {
        const auto y = nn::lrelu(x);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * proj[i];
        return acc;
    };
    const auto g = nn::lrelu_backward(x, proj);
    TensorT<double> gx = g;
    return fd_compare({{&x, &gx}}, loss);
}

inline double check_prelu(Rng& rng) {
    TensorT<double> x = rand_kink_free(9, rng);
    TensorT<double> p({1});
    p[0] = 0.05;
    const TensorT<double> proj = rand_tensor({9}, rng);
    auto loss = [&] {
        const auto y = nn::prelu(x, p[0]);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * proj[i];
        return acc;
    };
    const auto g = nn::prelu_backward(x, p[0], proj);
    TensorT<double> gp({1});
    gp[0] = g.p;
    TensorT<double> gx = g.x;
    return fd_compare({{&x, &gx}, {&p, &gp}}, loss);
}

inline double check_sigmoid(Rng& rng) {
    double worst = 0.0;
    for (int i = 0; i < 8; ++i) {
        TensorT<double> x({1});
        x[0] = -4.0 + 8.0 * rng.next_double();
        auto loss = [&] { return nn::sigmoid(x[0]); };
        const double y = nn::sigmoid(x[0]);
        const double analytic = nn::sigmoid_backward(y, 1.0);
        const double fd = central_diff(x[0], loss);
        worst = std::max(worst, rel_error(analytic, fd));
    }
    return worst;
}

inline double check_bce(Rng& rng) {
    double worst = 0.0;
    for (int label : {0, 1}) {
        for (int i = 0; i < 8; ++i) {
            TensorT<double> p({1});
            p[0] = 0.05 + 0.9 * rng.next_double();
            auto loss = [&] { return static_cast<double>(bce_loss(p[0], label).loss); };
            const double analytic = bce_loss(p[0], label).grad;
            const double fd = central_diff(p[0], loss);
            worst = std::max(worst, rel_error(analytic, fd));
        }
    }
    return worst;
}

inline ModelConfig tiny_model_config() {
    ModelConfig cfg;
    cfg.image_size = 8;
    cfg.pyramid_depth = 1;
    cfg.conv_out_channels = 4;
    cfg.branch_fc_widths = {16, 8};
    cfg.merged_fc_widths = {8, 1};
    cfg.dropout_rate = 0.0;
    return cfg;
}

/// Whole-model check on a double-precision net: sampled coordinates from
/// every parameter tensor, FD through the full forward + BCE loss.
inline double check_model(Rng& rng) {
    const ModelConfig cfg = tiny_model_config();
    DualBranchNetT<double> net = DualBranchNetT<double>::init(cfg, rng.split(7));
    TensorT<double> image = rand_tensor({3, 8, 8}, rng);
    const int label = 1;

    auto loss = [&] {
        ForwardCacheT<double> cache;
        const double p = net_forward(net, image, /*train=*/false, nullptr, cache);
        return static_cast<double>(bce_loss(p, label).loss);
    };

    GradTapeT<double> tape = GradTapeT<double>::zeros_like(net);
    {
        ForwardCacheT<double> cache;
        const double p = net_forward(net, image, /*train=*/false, nullptr, cache);
        net_backward(net, cache, bce_loss(p, label).grad, tape);
    }

    std::vector<std::pair<std::string, TensorT<double>*>> params;
    std::vector<TensorT<double>*> grads;
    visit_params(net, [&](const std::string& name, TensorT<double>& t) {
        params.emplace_back(name, &t);
    });
    visit_params(tape, [&](const std::string&, TensorT<double>& t) { grads.push_back(&t); });

    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        TensorT<double>& p = *params[i].second;
        const TensorT<double>& g = *grads[i];
        const std::size_t coords[] = {0, p.size() / 2, p.size() - 1};
        for (std::size_t c : coords) {
            const double fd = central_diff(p[c], loss);
            worst = std::max(worst, rel_error(g[c], fd));
        }
    }
    return worst;
}

} // namespace detail

/// The acceptance set: every layer kind plus the whole-model sampled check.
inline std::vector<Check> default_checks() {
    return {
        {"conv2d", detail::check_conv2d},
        {"maxpool2d", detail::check_maxpool2d},
        {"linear", detail::check_linear},
        {"lrelu", detail::check_lrelu},
        {"prelu", detail::check_prelu},
        {"sigmoid", detail::check_sigmoid},
        {"bce", detail::check_bce},
        {"model", detail::check_model},
    };
}

inline std::vector<Report> run_checks(const std::vector<Check>& checks, std::uint64_t seed) {
    std::vector<Report> reports;
    Rng root(seed);
    for (std::size_t i = 0; i < checks.size(); ++i) {
        Rng rng = root.split(i);
        reports.push_back({checks[i].name, checks[i].run(rng)});
    }
    return reports;
}

inline std::vector<Report> run_default_checks(std::uint64_t seed) {
    return run_checks(default_checks(), seed);
}

} // namespace gradcheck
} // namespace dualfreq
