#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "dualfreq/common.hpp"
#include "dualfreq/data.hpp"
#include "dualfreq/model.hpp"
#include "dualfreq/rng.hpp"
#include "dualfreq/tensor.hpp"

namespace dualfreq {

/// Training recipe constants. Defaults: 15 epochs, batch 32, Adam at 1e-4
/// dropping by 10x every 10 epochs.
struct TrainConfig {
    std::size_t epochs = 15;
    std::size_t batch_size = 32;
    double lr_initial = 1e-4;
    std::size_t lr_drop_every = 10;
    double lr_drop_factor = 10.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 42;
    bool deterministic = false;
    bool augment = true; // horizontal flip on the train split
    std::size_t threads = 1;

    void validate() const {
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (!(lr_initial > 0.0)) throw ConfigError("lr_initial must be > 0");
        if (lr_drop_every < 1) throw ConfigError("lr_drop_every must be >= 1");
        if (!(lr_drop_factor >= 1.0)) throw ConfigError("lr_drop_factor must be >= 1");
        if (threads < 1) throw ConfigError("threads must be >= 1");
    }

    std::size_t effective_threads() const { return deterministic ? 1 : threads; }
};

/// lr(epoch) = lr_initial / factor^floor((epoch-1)/drop_every), epoch 1-based.
inline double lr_for_epoch(std::size_t epoch, const TrainConfig& cfg) {
    if (epoch < 1) throw ConfigError("epochs are 1-based");
    const auto drops = static_cast<double>((epoch - 1) / cfg.lr_drop_every);
    return cfg.lr_initial / std::pow(cfg.lr_drop_factor, drops);
}

template <class T>
struct BceResult {
    T loss;
    T grad; // dL/dp
};

/// Binary cross-entropy on a single probability, clamped to
/// [1e-7, 1-1e-7] before the logs.
template <class T>
BceResult<T> bce_loss(T p, int label) {
    if (label != 0 && label != 1) {
        throw ConfigError("bce_loss label must be 0 or 1, got " + std::to_string(label));
    }
    const double lo = 1e-7, hi = 1.0 - 1e-7;
    const double pc = std::min(hi, std::max(lo, static_cast<double>(p)));
    const double y = static_cast<double>(label);
    const double loss = -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
    const double grad = (pc - y) / (pc * (1.0 - pc));
    return {static_cast<T>(loss), static_cast<T>(grad)};
}

/// First/second moment estimates per parameter, in visitation order.
template <class T>
struct AdamStateT {
    std::vector<TensorT<T>> m;
    std::vector<TensorT<T>> v;
    std::int64_t t = 0;
};

using AdamState = AdamStateT<float>;

template <class T>
AdamStateT<T> make_adam_state(const DualBranchNetT<T>& net) {
    AdamStateT<T> state;
    visit_params(net, [&](const std::string&, const TensorT<T>& p) {
        state.m.push_back(TensorT<T>(p.shape()));
        state.v.push_back(TensorT<T>(p.shape()));
    });
    return state;
}

/// One Adam update with bias correction:
///   m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
/// Aborts with the parameter's name if any gradient is NaN.
template <class T>
void adam_step(DualBranchNetT<T>& net, const GradTapeT<T>& tape, AdamStateT<T>& state, double lr,
               const TrainConfig& cfg) {
    std::vector<std::pair<std::string, TensorT<T>*>> params;
    std::vector<const TensorT<T>*> grads;
    visit_params(net, [&](const std::string& name, TensorT<T>& p) { params.emplace_back(name, &p); });
    visit_params(tape, [&](const std::string&, const TensorT<T>& g) { grads.push_back(&g); });

    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        TensorT<T>& p = *params[i].second;
        const TensorT<T>& g = *grads[i];
        TensorT<T>& m = state.m[i];
        TensorT<T>& v = state.v[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double gj = static_cast<double>(g[j]);
            if (std::isnan(gj)) {
                throw NumericError("NaN gradient in parameter '" + params[i].first + "'");
            }
            const double mj = cfg.beta1 * static_cast<double>(m[j]) + (1.0 - cfg.beta1) * gj;
            const double vj = cfg.beta2 * static_cast<double>(v[j]) + (1.0 - cfg.beta2) * gj * gj;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            const double m_hat = mj / bc1;
            const double v_hat = vj / bc2;
            p[j] = static_cast<T>(static_cast<double>(p[j]) -
                                  lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps));
        }
    }
}

/// Confusion matrix with class 1 = AI-generated, plus the derived scores.
/// Degenerate denominators yield a flagged zero, never NaN.
struct Metrics {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0, accuracy = 0.0;
    bool precision_defined = true, recall_defined = true, f1_defined = true;

    static Metrics from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
        Metrics m;
        m.tp = tp;
        m.fp = fp;
        m.tn = tn;
        m.fn = fn;
        const std::size_t total = tp + fp + tn + fn;
        if (total == 0) throw ConfigError("metrics require at least one sample");
        if (tp + fp > 0) {
            m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        } else {
            m.precision_defined = false;
        }
        if (tp + fn > 0) {
            m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
        } else {
            m.recall_defined = false;
        }
        if (m.precision + m.recall > 0.0) {
            m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        } else {
            m.f1_defined = false;
        }
        m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(total);
        return m;
    }
};

struct EvalResult {
    Metrics metrics;
    double mean_loss = 0.0;
};

namespace detail {

/// Static-chunk parallel for with a fixed thread->range map; with one
/// thread it degenerates to a plain loop on the caller's thread.
template <class Fn>
void parallel_chunks(std::size_t n, std::size_t threads, Fn&& fn) {
    const std::size_t t = std::max<std::size_t>(1, std::min(threads, n == 0 ? 1 : n));
    if (t == 1) {
        fn(0, 0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(t);
    const std::size_t chunk = (n + t - 1) / t;
    for (std::size_t k = 0; k < t; ++k) {
        const std::size_t begin = k * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        pool.emplace_back([&, k, begin, end] { fn(k, begin, end); });
    }
    for (auto& th : pool) th.join();
}

} // namespace detail

/// Dropout-free forward over a labeled dataset: confusion matrix at the
/// given threshold plus mean BCE loss. Read-only on the net.
inline EvalResult evaluate(const DualBranchNet& net, const Dataset& dataset,
                           double threshold = 0.5, std::size_t threads = 1) {
    const std::size_t n = dataset.samples.size();
    if (n == 0) throw ConfigError("evaluate requires a non-empty dataset");
    const std::size_t nthreads = std::max<std::size_t>(1, threads);
    struct Part {
        std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
        double loss = 0.0;
    };
    std::vector<Part> parts(std::max<std::size_t>(1, std::min(nthreads, n)));
    detail::parallel_chunks(n, nthreads, [&](std::size_t tid, std::size_t begin, std::size_t end) {
        ForwardCacheT<float> cache;
        Part& part = parts[tid];
        for (std::size_t i = begin; i < end; ++i) {
            const Sample& s = dataset.samples[i];
            const float p = net_forward(net, s.image, /*train=*/false, nullptr, cache);
            part.loss += static_cast<double>(bce_loss(p, s.label).loss);
            const int pred = (static_cast<double>(p) >= threshold) ? 1 : 0;
            if (pred == 1 && s.label == 1) ++part.tp;
            else if (pred == 1 && s.label == 0) ++part.fp;
            else if (pred == 0 && s.label == 0) ++part.tn;
            else ++part.fn;
        }
    });
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double loss = 0.0;
    for (const Part& part : parts) { // fixed reduction order
        tp += part.tp;
        fp += part.fp;
        tn += part.tn;
        fn += part.fn;
        loss += part.loss;
    }
    return {Metrics::from_counts(tp, fp, tn, fn), loss / static_cast<double>(n)};
}

struct EpochStats {
    double mean_loss = 0.0;
    double accuracy = 0.0;
};

/// Owns the optimizer state and the derived RNG streams of one training
/// run. Sample-level randomness (dropout masks, flip decisions) is keyed by
/// (epoch, dataset index), so results do not depend on batch-parallel
/// scheduling.
class Trainer {
public:
    Trainer(DualBranchNet& net, TrainConfig cfg)
        : net_(net),
          cfg_(cfg),
          tape_(GradTape::zeros_like(net)),
          state_(make_adam_state(net)),
          shuffle_root_(Rng(cfg.seed).split(stream::kShuffle)),
          dropout_root_(Rng(cfg.seed).split(stream::kDropout)),
          augment_root_(Rng(cfg.seed).split(stream::kAugment)) {
        cfg_.validate();
    }

    /// One pass over the train split: seeded shuffle, batches of
    /// cfg.batch_size (final partial batch kept), forward/backward/Adam per
    /// batch. Returns the mean sample loss and train-mode accuracy.
    EpochStats train_epoch(const Dataset& dataset, std::size_t epoch) {
        const std::size_t n = dataset.samples.size();
        if (n == 0) throw ConfigError("train_epoch requires a non-empty dataset");
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng = shuffle_root_.split(epoch);
        shuffle(order, shuffle_rng);

        const double lr = lr_for_epoch(epoch, cfg_);
        const std::size_t nthreads = cfg_.effective_threads();
        std::vector<GradTape> thread_tapes;
        for (std::size_t t = 1; t < std::min(nthreads, cfg_.batch_size); ++t) {
            thread_tapes.push_back(GradTape::zeros_like(net_));
        }

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < n; start += cfg_.batch_size) {
            const std::size_t bsz = std::min(cfg_.batch_size, n - start);
            zero_tape(tape_);
            for (auto& t : thread_tapes) zero_tape(t);
            std::vector<double> losses(bsz, 0.0);
            std::vector<int> hits(bsz, 0);
            detail::parallel_chunks(bsz, nthreads,
                                    [&](std::size_t tid, std::size_t begin, std::size_t end) {
                GradTape& tape = tid == 0 ? tape_ : thread_tapes[tid - 1];
                ForwardCacheT<float> cache;
                for (std::size_t k = begin; k < end; ++k) {
                    const std::size_t idx = order[start + k];
                    const Sample& s = dataset.samples[idx];
                    Rng sample_aug = augment_root_.split(epoch).split(idx);
                    Rng sample_drop = dropout_root_.split(epoch).split(idx);
                    const Tensor image =
                        cfg_.augment ? augment_hflip(s.image, sample_aug) : s.image;
                    const float p = net_forward(net_, image, /*train=*/true, &sample_drop, cache);
                    const auto bce = bce_loss(p, s.label);
                    losses[k] = static_cast<double>(bce.loss);
                    hits[k] = ((p >= 0.5f ? 1 : 0) == s.label) ? 1 : 0;
                    const float upstream = bce.grad / static_cast<float>(bsz);
                    net_backward(net_, cache, upstream, tape);
                }
            });
            for (auto& t : thread_tapes) accumulate_tape(tape_, t);
            double batch_loss = 0.0;
            for (std::size_t k = 0; k < bsz; ++k) {
                batch_loss += losses[k];
                correct += static_cast<std::size_t>(hits[k]);
            }
            if (!std::isfinite(batch_loss)) {
                throw NumericError("non-finite loss in epoch " + std::to_string(epoch) +
                                   " at batch starting " + std::to_string(start));
            }
            loss_sum += batch_loss;
            adam_step(net_, tape_, state_, lr, cfg_);
        }
        return {loss_sum / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
    }

    const TrainConfig& config() const { return cfg_; }
    AdamState& adam_state() { return state_; }
    GradTape& tape() { return tape_; }

private:
    DualBranchNet& net_;
    TrainConfig cfg_;
    GradTape tape_;
    AdamState state_;
    Rng shuffle_root_;
    Rng dropout_root_;
    Rng augment_root_;
};

} // namespace dualfreq
