#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dualfreq/runner.hpp"
#include "dualfreq/train.hpp"

using namespace dualfreq;

namespace {

// 16x16 architecture used where full 32x32 cost is unnecessary.
ModelConfig small_config() {
    ModelConfig cfg;
    cfg.image_size = 16;
    cfg.pyramid_depth = 1;
    cfg.conv_out_channels = 8;
    cfg.branch_fc_widths = {32, 16};
    cfg.merged_fc_widths = {16, 1};
    cfg.dropout_rate = 0.0;
    return cfg;
}

Dataset small_synth(std::size_t n_per_class, std::uint64_t seed) {
    return synth_spectral_dataset(n_per_class, Rng(seed), "train", 16);
}

double dataset_loss(const DualBranchNet& net, const Dataset& ds) {
    return evaluate(net, ds).mean_loss;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

TEST(LrSchedule, PaperValues) {
    const TrainConfig cfg;
    EXPECT_DOUBLE_EQ(lr_for_epoch(1, cfg), 1e-4);
    EXPECT_DOUBLE_EQ(lr_for_epoch(10, cfg), 1e-4);
    EXPECT_DOUBLE_EQ(lr_for_epoch(11, cfg), 1e-5);
    EXPECT_DOUBLE_EQ(lr_for_epoch(15, cfg), 1e-5);
    EXPECT_DOUBLE_EQ(lr_for_epoch(21, cfg), 1e-6);
    EXPECT_THROW(lr_for_epoch(0, cfg), ConfigError);
}

TEST(Bce, Examples) {
    const auto perfect = bce_loss(1.0f, 1);
    EXPECT_LE(perfect.loss, 1.2e-7f);
    EXPECT_GE(perfect.loss, 0.0f);

    EXPECT_NEAR(bce_loss(0.5f, 1).loss, std::log(2.0f), 1e-6f);
    EXPECT_NEAR(bce_loss(0.5f, 0).loss, std::log(2.0f), 1e-6f);

    EXPECT_THROW(bce_loss(0.5f, 2), ConfigError);
    EXPECT_THROW(bce_loss(0.5f, -1), ConfigError);
}

TEST(Bce, GradientMatchesFiniteDifferences) {
    for (const double p : {0.1, 0.35, 0.5, 0.82}) {
        for (const int y : {0, 1}) {
            const double h = 1e-6;
            const double fd =
                (static_cast<double>(bce_loss(p + h, y).loss) - bce_loss(p - h, y).loss) / (2 * h);
            const double analytic = bce_loss(p, y).grad;
            EXPECT_NEAR(analytic, fd, 1e-4 * std::max(1.0, std::abs(analytic)));
        }
    }
}

TEST(Adam, HandComputedSingleStep) {
    // Fresh state, g = 1 everywhere: m_hat = 1, v_hat = 1, so the update is
    // lr/(1 + eps) for every parameter.
    const ModelConfig mc = small_config();
    DualBranchNet net = DualBranchNet::build(mc); // zero params
    GradTape tape = GradTape::zeros_like(net);
    visit_params(tape, [](const std::string&, Tensor& t) { t.fill(1.0f); });
    AdamState state = make_adam_state(net);
    TrainConfig tc;
    adam_step(net, tape, state, 1e-4, tc);
    EXPECT_EQ(state.t, 1);
    visit_params(net, [](const std::string& name, Tensor& t) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            EXPECT_NEAR(t[i], -1e-4f, 1e-9f) << name;
        }
    });
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    const ModelConfig mc = small_config();
    DualBranchNet net = DualBranchNet::init(mc, Rng(31));
    const DualBranchNet before = net;
    GradTape tape = GradTape::zeros_like(net);
    AdamState state = make_adam_state(net);
    TrainConfig tc;
    adam_step(net, tape, state, 1e-4, tc);
    EXPECT_TRUE(params_equal(before, net));
}

TEST(Adam, NanGradientAbortsNamingParameter) {
    const ModelConfig mc = small_config();
    DualBranchNet net = DualBranchNet::init(mc, Rng(32));
    GradTape tape = GradTape::zeros_like(net);
    tape.freq_conv[0].weights[3] = std::nanf("");
    AdamState state = make_adam_state(net);
    TrainConfig tc;
    try {
        adam_step(net, tape, state, 1e-4, tc);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("freq.conv0.weight"), std::string::npos);
    }
}

TEST(Metrics, PerfectPredictor) {
    const Metrics m = Metrics::from_counts(10, 0, 10, 0);
    EXPECT_DOUBLE_EQ(m.precision, 1.0);
    EXPECT_DOUBLE_EQ(m.recall, 1.0);
    EXPECT_DOUBLE_EQ(m.f1, 1.0);
    EXPECT_DOUBLE_EQ(m.accuracy, 1.0);
}

TEST(Metrics, TableRowHarmonicMean) {
    // F1 is computed as the harmonic mean of precision and recall; for
    // P=0.9444, R=0.9321 that is 0.9382.
    const double p = 0.9444, r = 0.9321;
    const double f1 = 2.0 * p * r / (p + r);
    EXPECT_NEAR(f1, 0.9382, 5e-5);
}

TEST(Metrics, DegenerateAllNegativePredictor) {
    const Metrics m = Metrics::from_counts(0, 0, 50, 50);
    EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
    EXPECT_DOUBLE_EQ(m.recall, 0.0);
    EXPECT_TRUE(m.recall_defined);
    EXPECT_DOUBLE_EQ(m.precision, 0.0);
    EXPECT_FALSE(m.precision_defined); // tp+fp == 0
    EXPECT_FALSE(m.f1_defined);
    EXPECT_FALSE(std::isnan(m.precision));
    EXPECT_FALSE(std::isnan(m.f1));
}

TEST(Metrics, RandomizedIdentities) {
    Rng rng(33);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t tp = rng.bounded(20);
        const std::size_t fp = rng.bounded(20);
        const std::size_t tn = rng.bounded(20);
        const std::size_t fn = rng.bounded(20);
        if (tp + fp + tn + fn == 0) continue;
        const Metrics m = Metrics::from_counts(tp, fp, tn, fn);

        EXPECT_EQ(m.tp + m.fp + m.tn + m.fn, tp + fp + tn + fn);
        if (tp + fp > 0) {
            EXPECT_EQ(m.precision, static_cast<double>(tp) / static_cast<double>(tp + fp));
        } else {
            EXPECT_FALSE(m.precision_defined);
            EXPECT_EQ(m.precision, 0.0);
        }
        if (tp + fn > 0) {
            EXPECT_EQ(m.recall, static_cast<double>(tp) / static_cast<double>(tp + fn));
        } else {
            EXPECT_FALSE(m.recall_defined);
        }
        if (m.precision + m.recall > 0) {
            EXPECT_EQ(m.f1, 2.0 * m.precision * m.recall / (m.precision + m.recall));
            // harmonic-mean identity, cross-multiplied
            EXPECT_NEAR(m.f1 * (m.precision + m.recall), 2.0 * m.precision * m.recall,
                        1e-12 * std::max(1.0, 2.0 * m.precision * m.recall));
        } else {
            EXPECT_FALSE(m.f1_defined);
        }
        EXPECT_EQ(m.accuracy,
                  static_cast<double>(tp + tn) / static_cast<double>(tp + fp + tn + fn));
        for (const double v : {m.precision, m.recall, m.f1, m.accuracy}) {
            EXPECT_FALSE(std::isnan(v));
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(Evaluate, UnattainableThresholdGivesZeroRecall) {
    const ModelConfig mc = small_config();
    DualBranchNet net = DualBranchNet::init(mc, Rng(34));
    const Dataset ds = small_synth(4, 35);
    const EvalResult r = evaluate(net, ds, 1.0);
    EXPECT_EQ(r.metrics.tp, 0u);
    EXPECT_EQ(r.metrics.fp, 0u);
    EXPECT_DOUBLE_EQ(r.metrics.recall, 0.0);
}

TEST(Evaluate, FreshGlorotModelNearChanceLoss) {
    // Near-chance predictions on a balanced set: loss within 15% of ln 2.
    DualBranchNet net = DualBranchNet::init(ModelConfig{}, Rng(36).split(stream::kInit));
    const Dataset ds = synth_spectral_dataset(32, Rng(37), "test", 32);
    const double loss = dataset_loss(net, ds);
    EXPECT_NEAR(loss, std::log(2.0), 0.15 * std::log(2.0));
}

TEST(Evaluate, ThreadCountDoesNotChangeResults) {
    const ModelConfig mc = small_config();
    DualBranchNet net = DualBranchNet::init(mc, Rng(41));
    const Dataset ds = small_synth(10, 42);
    const EvalResult serial = evaluate(net, ds, 0.5, 1);
    const EvalResult parallel = evaluate(net, ds, 0.5, 3);
    EXPECT_EQ(serial.metrics.tp, parallel.metrics.tp);
    EXPECT_EQ(serial.metrics.fp, parallel.metrics.fp);
    EXPECT_EQ(serial.metrics.tn, parallel.metrics.tn);
    EXPECT_EQ(serial.metrics.fn, parallel.metrics.fn);
    EXPECT_NEAR(serial.mean_loss, parallel.mean_loss, 1e-12);
}

TEST(TrainEpoch, OptimizerStepArithmetic) {
    const ModelConfig mc = small_config();
    TrainConfig tc;
    tc.batch_size = 32;
    tc.epochs = 1;
    tc.augment = false;

    {
        DualBranchNet net = DualBranchNet::init(mc, Rng(38));
        Trainer trainer(net, tc);
        const Dataset ds = small_synth(16, 39); // 32 samples -> exactly 1 step
        trainer.train_epoch(ds, 1);
        EXPECT_EQ(trainer.adam_state().t, 1);
    }
    {
        DualBranchNet net = DualBranchNet::init(mc, Rng(38));
        Trainer trainer(net, tc);
        const Dataset ds = small_synth(50, 39); // 100 samples -> 32,32,32,4
        trainer.train_epoch(ds, 1);
        EXPECT_EQ(trainer.adam_state().t, 4);
    }
}

TEST(TrainEpoch, EmptyDatasetRejected) {
    const ModelConfig mc = small_config();
    DualBranchNet net = DualBranchNet::init(mc, Rng(40));
    TrainConfig tc;
    Trainer trainer(net, tc);
    Dataset empty;
    EXPECT_THROW(trainer.train_epoch(empty, 1), ConfigError);
}

TEST(TrainEpoch, SingleAdamStepDecreasesBatchLoss) {
    // One step on one batch strictly decreases that batch's loss for
    // lr = 1e-4, over 20 seeds with at most 2 failures allowed.
    const ModelConfig mc = small_config();
    TrainConfig tc;
    tc.batch_size = 8;
    tc.augment = false;
    tc.lr_initial = 1e-4;

    int failures = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        tc.seed = seed;
        DualBranchNet net = DualBranchNet::init(mc, Rng(seed).split(stream::kInit));
        const Dataset batch = small_synth(4, 1000 + seed); // 8 samples, one batch
        const double before = dataset_loss(net, batch);
        Trainer trainer(net, tc);
        trainer.train_epoch(batch, 1);
        const double after = dataset_loss(net, batch);
        if (!(after < before)) ++failures;
    }
    EXPECT_LE(failures, 2);
}

TEST(TrainEpoch, MemorizesTinySubset) {
    const ModelConfig mc = small_config();
    TrainConfig tc;
    tc.batch_size = 8;
    tc.augment = false;
    tc.lr_initial = 1e-3;
    tc.lr_drop_every = 1000;
    tc.seed = 5;

    DualBranchNet net = DualBranchNet::init(mc, Rng(tc.seed).split(stream::kInit));
    const Dataset subset = small_synth(4, 77); // 8 images, balanced
    Trainer trainer(net, tc);
    double first = 0.0, last = 0.0;
    for (std::size_t epoch = 1; epoch <= 60; ++epoch) {
        const EpochStats stats = trainer.train_epoch(subset, epoch);
        if (epoch == 1) first = stats.mean_loss;
        last = stats.mean_loss;
    }
    EXPECT_LT(last, 0.05);
    EXPECT_LT(last, first / 10.0);
    const EvalResult final_eval = evaluate(net, subset);
    EXPECT_DOUBLE_EQ(final_eval.metrics.accuracy, 1.0);
}

TEST(RunTrain, DeterministicTrajectoriesAreByteIdentical) {
    namespace fs = std::filesystem;
    RunConfig rc;
    rc.model = small_config();
    rc.train.epochs = 2;
    rc.train.batch_size = 16;
    rc.train.seed = 7;
    rc.train.deterministic = true;
    rc.data.synthetic = true;
    rc.data.synth_train_per_class = 12;
    rc.data.synth_test_per_class = 6;

    const auto dir = fs::temp_directory_path();
    std::ostringstream sink;

    rc.checkpoint_out = (dir / "dualfreq_det_a.ckpt").string();
    rc.csv_out = (dir / "dualfreq_det_a.csv").string();
    run_train(rc, sink);

    RunConfig rc2 = rc;
    rc2.checkpoint_out = (dir / "dualfreq_det_b.ckpt").string();
    rc2.csv_out = (dir / "dualfreq_det_b.csv").string();
    run_train(rc2, sink);

    EXPECT_EQ(read_file(rc.csv_out), read_file(rc2.csv_out));
    EXPECT_EQ(read_file(rc.checkpoint_out), read_file(rc2.checkpoint_out));
    EXPECT_FALSE(read_file(rc.csv_out).empty());
    for (const auto& p : {rc.checkpoint_out, rc.csv_out, rc2.checkpoint_out, rc2.csv_out}) {
        fs::remove(p);
    }
}

TEST(RunTrain, CsvHasHeaderAndOneRowPerEpoch) {
    namespace fs = std::filesystem;
    RunConfig rc;
    rc.model = small_config();
    rc.train.epochs = 3;
    rc.train.batch_size = 8;
    rc.train.seed = 9;
    rc.data.synthetic = true;
    rc.data.synth_train_per_class = 6;
    rc.data.synth_test_per_class = 4;
    rc.checkpoint_out = (fs::temp_directory_path() / "dualfreq_csv_test.ckpt").string();
    rc.csv_out = (fs::temp_directory_path() / "dualfreq_csv_test.csv").string();

    std::ostringstream sink;
    const TrainOutcome outcome = run_train(rc, sink);
    EXPECT_EQ(outcome.rows.size(), 3u);

    std::ifstream csv(rc.csv_out);
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, kCsvHeader);
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        if (!line.empty()) ++rows;
    }
    EXPECT_EQ(rows, 3u);

    // lr column follows the schedule
    EXPECT_DOUBLE_EQ(outcome.rows[0].lr, 1e-4);
    fs::remove(rc.checkpoint_out);
    fs::remove(rc.csv_out);
}
