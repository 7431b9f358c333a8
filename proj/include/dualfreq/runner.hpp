#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dualfreq/checkpoint.hpp"
#include "dualfreq/data.hpp"
#include "dualfreq/model.hpp"
#include "dualfreq/train.hpp"

namespace dualfreq {

/// Where samples come from: a CIFAKE-layout directory or the built-in
/// planted-artifact generator.
struct DataConfig {
    bool synthetic = false;
    std::string data_dir;
    std::size_t synth_train_per_class = 500;
    std::size_t synth_test_per_class = 200;
    std::size_t limit_per_class = 0;      // train subset; 0 = all
    std::size_t limit_per_class_test = 0; // test subset; 0 = all
};

inline void to_json(nlohmann::json& j, const DataConfig& c) {
    j = nlohmann::json{{"synthetic", c.synthetic},
                       {"data_dir", c.data_dir},
                       {"synth_train_per_class", c.synth_train_per_class},
                       {"synth_test_per_class", c.synth_test_per_class},
                       {"limit_per_class", c.limit_per_class},
                       {"limit_per_class_test", c.limit_per_class_test}};
}

inline void from_json(const nlohmann::json& j, DataConfig& c) {
    c.synthetic = j.value("synthetic", c.synthetic);
    c.data_dir = j.value("data_dir", c.data_dir);
    c.synth_train_per_class = j.value("synth_train_per_class", c.synth_train_per_class);
    c.synth_test_per_class = j.value("synth_test_per_class", c.synth_test_per_class);
    c.limit_per_class = j.value("limit_per_class", c.limit_per_class);
    c.limit_per_class_test = j.value("limit_per_class_test", c.limit_per_class_test);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"lr_initial", c.lr_initial},
                       {"lr_drop_every", c.lr_drop_every},
                       {"lr_drop_factor", c.lr_drop_factor},
                       {"beta1", c.beta1},
                       {"beta2", c.beta2},
                       {"adam_eps", c.adam_eps},
                       {"seed", c.seed},
                       {"deterministic", c.deterministic},
                       {"augment", c.augment},
                       {"threads", c.threads}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr_initial = j.value("lr_initial", c.lr_initial);
    c.lr_drop_every = j.value("lr_drop_every", c.lr_drop_every);
    c.lr_drop_factor = j.value("lr_drop_factor", c.lr_drop_factor);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.seed = j.value("seed", c.seed);
    c.deterministic = j.value("deterministic", c.deterministic);
    c.augment = j.value("augment", c.augment);
    c.threads = j.value("threads", c.threads);
}

/// One experiment bundle: architecture, recipe, data source and outputs.
/// Loadable from a JSON file; command-line flags override fields.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    DataConfig data;
    std::string checkpoint_out = "model.ckpt";
    std::string csv_out = "train_log.csv";

    void validate() const {
        model.validate();
        train.validate();
        if (!data.synthetic && data.data_dir.empty()) {
            throw ConfigError("either synthetic data or a data_dir is required");
        }
    }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
    j = nlohmann::json{{"model", c.model},
                       {"train", c.train},
                       {"data", c.data},
                       {"checkpoint_out", c.checkpoint_out},
                       {"csv_out", c.csv_out}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
    if (j.contains("model")) from_json(j.at("model"), c.model);
    if (j.contains("train")) from_json(j.at("train"), c.train);
    if (j.contains("data")) from_json(j.at("data"), c.data);
    c.checkpoint_out = j.value("checkpoint_out", c.checkpoint_out);
    c.csv_out = j.value("csv_out", c.csv_out);
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("unparseable config file " + path + ": " + e.what());
    }
    RunConfig rc;
    from_json(j, rc);
    return rc;
}

/// Train/test pair for a run. Synthetic sets draw from disjoint splits of
/// the synth stream; CIFAKE comes from disk.
inline std::pair<Dataset, Dataset> load_train_test(const RunConfig& rc) {
    if (rc.data.synthetic) {
        const Rng synth_root = Rng(rc.train.seed).split(stream::kSynth);
        Dataset train = synth_spectral_dataset(rc.data.synth_train_per_class, synth_root.split(0),
                                               "train", rc.model.image_size);
        Dataset test = synth_spectral_dataset(rc.data.synth_test_per_class, synth_root.split(1),
                                              "test", rc.model.image_size);
        return {std::move(train), std::move(test)};
    }
    Dataset train =
        load_cifake(rc.data.data_dir, "train", rc.data.limit_per_class, rc.model.image_size);
    Dataset test =
        load_cifake(rc.data.data_dir, "test", rc.data.limit_per_class_test, rc.model.image_size);
    return {std::move(train), std::move(test)};
}

struct EpochRow {
    std::size_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double test_loss = 0.0;
    double test_acc = 0.0;
};

inline constexpr const char* kCsvHeader = "epoch,lr,train_loss,train_acc,test_loss,test_acc";

inline std::string format_csv_row(const EpochRow& r) {
    char buf[192];
    std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.8f,%.8f,%.8f,%.8f", r.epoch, r.lr, r.train_loss,
                  r.train_acc, r.test_loss, r.test_acc);
    return buf;
}

struct TrainOutcome {
    Metrics final_metrics;
    double final_test_loss = 0.0;
    std::vector<EpochRow> rows;
};

/// Full training run: init, epoch loop with per-epoch test evaluation, CSV
/// log, checkpoint. The per-epoch evaluation is read-only and never feeds
/// back into optimization.
inline TrainOutcome run_train(const RunConfig& rc, std::ostream& log) {
    rc.validate();
    auto [train_ds, test_ds] = load_train_test(rc);
    log << "train samples: " << train_ds.samples.size()
        << ", test samples: " << test_ds.samples.size() << "\n";

    DualBranchNet net = DualBranchNet::init(rc.model, Rng(rc.train.seed).split(stream::kInit));
    Trainer trainer(net, rc.train);

    std::ofstream csv;
    if (!rc.csv_out.empty()) {
        csv.open(rc.csv_out);
        if (!csv) throw IoError("cannot open CSV log for writing: " + rc.csv_out);
        csv << kCsvHeader << "\n";
    }

    TrainOutcome outcome;
    const std::size_t threads = rc.train.effective_threads();
    for (std::size_t epoch = 1; epoch <= rc.train.epochs; ++epoch) {
        const EpochStats stats = trainer.train_epoch(train_ds, epoch);
        const EvalResult eval = evaluate(net, test_ds, 0.5, threads);
        EpochRow row{epoch,        lr_for_epoch(epoch, rc.train),
                     stats.mean_loss, stats.accuracy,
                     eval.mean_loss,  eval.metrics.accuracy};
        if (csv.is_open()) csv << format_csv_row(row) << "\n";
        log << "epoch " << epoch << "/" << rc.train.epochs << " lr=" << row.lr
            << " train_loss=" << row.train_loss << " train_acc=" << row.train_acc
            << " test_loss=" << row.test_loss << " test_acc=" << row.test_acc << "\n";
        outcome.rows.push_back(row);
        outcome.final_metrics = eval.metrics;
        outcome.final_test_loss = eval.mean_loss;
    }
    if (csv.is_open() && !csv) throw IoError("CSV log write failed: " + rc.csv_out);

    if (!rc.checkpoint_out.empty()) {
        save_checkpoint(net, rc.checkpoint_out);
        log << "checkpoint written to " << rc.checkpoint_out << "\n";
    }
    return outcome;
}

/// Key/value evaluation report, keys in a fixed order.
inline nlohmann::ordered_json metrics_report(const Metrics& m, double threshold) {
    nlohmann::ordered_json j;
    j["tp"] = m.tp;
    j["fp"] = m.fp;
    j["tn"] = m.tn;
    j["fn"] = m.fn;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    j["accuracy"] = m.accuracy;
    j["threshold"] = threshold;
    j["precision_defined"] = m.precision_defined;
    j["recall_defined"] = m.recall_defined;
    j["f1_defined"] = m.f1_defined;
    return j;
}

} // namespace dualfreq
