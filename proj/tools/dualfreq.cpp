// Command-line front end: train, eval, predict, inspect-spectrum, gradcheck.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dualfreq/checkpoint.hpp"
#include "dualfreq/data.hpp"
#include "dualfreq/gradcheck.hpp"
#include "dualfreq/image_io.hpp"
#include "dualfreq/model.hpp"
#include "dualfreq/runner.hpp"
#include "dualfreq/spectral.hpp"
#include "dualfreq/train.hpp"

namespace {

using namespace dualfreq;

std::size_t default_threads() {
    if (const char* env = std::getenv("DUALFREQ_THREADS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
    }
    return 1;
}

std::array<float, 3> norm_array(const std::vector<float>& v) {
    return {v.at(0), v.at(1), v.at(2)};
}

struct TrainFlags {
    std::string config_path;
    std::string data_dir;
    bool synthetic = false;
    std::size_t n_per_class = 500;
    std::size_t n_per_class_test = 200;
    std::size_t limit_per_class = 0;
    std::size_t limit_per_class_test = 0;
    std::size_t epochs = 15;
    std::size_t batch_size = 32;
    double lr = 1e-4;
    std::uint64_t seed = 42;
    bool deterministic = false;
    bool no_augment = false;
    double dropout = 0.5;
    std::size_t pyramid_depth = 1;
    std::size_t threads = default_threads();
    bool ablate_frequency = false;
    std::string out = "model.ckpt";
    std::string log = "train_log.csv";
};

int cmd_train(const CLI::App& sub, TrainFlags& f) {
    RunConfig rc;
    if (sub.count("--config")) rc = load_run_config(f.config_path);
    if (sub.count("--data-dir")) rc.data.data_dir = f.data_dir;
    if (sub.count("--synthetic")) rc.data.synthetic = true;
    if (sub.count("--n-per-class")) rc.data.synth_train_per_class = f.n_per_class;
    if (sub.count("--n-per-class-test")) rc.data.synth_test_per_class = f.n_per_class_test;
    if (sub.count("--limit-per-class")) rc.data.limit_per_class = f.limit_per_class;
    if (sub.count("--limit-per-class-test")) rc.data.limit_per_class_test = f.limit_per_class_test;
    if (sub.count("--epochs")) rc.train.epochs = f.epochs;
    if (sub.count("--batch-size")) rc.train.batch_size = f.batch_size;
    if (sub.count("--lr")) rc.train.lr_initial = f.lr;
    if (sub.count("--seed")) rc.train.seed = f.seed;
    if (sub.count("--deterministic")) rc.train.deterministic = true;
    if (sub.count("--no-augment")) rc.train.augment = false;
    if (sub.count("--dropout")) rc.model.dropout_rate = f.dropout;
    if (sub.count("--pyramid-depth")) rc.model.pyramid_depth = f.pyramid_depth;
    if (sub.count("--threads")) rc.train.threads = f.threads;
    if (sub.count("--ablate-frequency")) rc.model.zero_frequency_input = true;
    if (sub.count("--out")) rc.checkpoint_out = f.out;
    if (sub.count("--log")) rc.csv_out = f.log;

    nlohmann::json echo;
    to_json(echo, rc);
    std::cout << "effective config: " << echo.dump() << "\n";

    const TrainOutcome outcome = run_train(rc, std::cout);
    std::cout << "final test metrics: " << metrics_report(outcome.final_metrics, 0.5).dump()
              << "\n";
    return 0;
}

struct EvalFlags {
    std::string checkpoint;
    std::string config_path;
    std::string data_dir;
    std::string split = "test";
    bool synthetic = false;
    std::size_t n_per_class_test = 200;
    std::size_t limit_per_class = 0;
    std::uint64_t seed = 42;
    double threshold = 0.5;
    std::size_t threads = default_threads();
};

int cmd_eval(const CLI::App& sub, EvalFlags& f) {
    DualBranchNet net = [&] {
        if (sub.count("--config")) {
            const RunConfig rc = load_run_config(f.config_path);
            return load_checkpoint(f.checkpoint, rc.model);
        }
        return load_checkpoint(f.checkpoint);
    }();

    Dataset ds;
    if (f.synthetic) {
        const Rng synth_root = Rng(f.seed).split(stream::kSynth);
        ds = synth_spectral_dataset(f.n_per_class_test, synth_root.split(f.split == "train" ? 0 : 1),
                                    f.split, net.config.image_size);
    } else {
        if (f.data_dir.empty()) throw ConfigError("eval requires --data-dir or --synthetic");
        ds = load_cifake(f.data_dir, f.split, f.limit_per_class, net.config.image_size);
    }
    std::cout << "evaluating " << ds.samples.size() << " samples from split '" << f.split << "'\n";
    const EvalResult result = evaluate(net, ds, f.threshold, f.threads);
    auto report = metrics_report(result.metrics, f.threshold);
    report["mean_loss"] = result.mean_loss;
    std::cout << report.dump() << "\n";
    return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& image_path) {
    const DualBranchNet net = load_checkpoint(checkpoint);
    const ImageU8 img = png_read_rgb8(image_path);
    if (img.width != net.config.image_size || img.height != net.config.image_size) {
        throw IoError("expected " + std::to_string(net.config.image_size) + "x" +
                      std::to_string(net.config.image_size) + " image, got " +
                      std::to_string(img.width) + "x" + std::to_string(img.height) + " in " +
                      image_path);
    }
    const Tensor pixels = image_to_tensor01(img);
    const Tensor input = normalize(pixels, norm_array(net.config.norm_mean),
                                   norm_array(net.config.norm_std));
    const float p = net_predict(net, input);
    std::printf("probability=%.4f class=%s\n", static_cast<double>(p), p >= 0.5f ? "fake" : "real");
    return 0;
}

int cmd_inspect_spectrum(const std::string& image_path, const std::string& out_path) {
    const ImageU8 img = png_read_rgb8(image_path);
    const TensorT<double> gray = luma_gray(img);
    const auto grid = dft2d(gray);
    const auto logmag = log_magnitude(magnitude(grid), 1e-6);
    const auto shifted = fftshift(logmag);

    double lo = shifted.values[0], hi = shifted.values[0];
    for (std::size_t i = 0; i < shifted.values.size(); ++i) {
        lo = std::min(lo, shifted.values[i]);
        hi = std::max(hi, shifted.values[i]);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    std::vector<unsigned char> gray8(shifted.values.size());
    for (std::size_t i = 0; i < gray8.size(); ++i) {
        gray8[i] = static_cast<unsigned char>(255.0 * (shifted.values[i] - lo) / span + 0.5);
    }
    pgm_write(out_path, img.width, img.height, gray8);
    std::cout << "wrote " << img.width << "x" << img.height << " spectrum to " << out_path << "\n";
    return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
    const auto reports = gradcheck::run_default_checks(seed);
    std::vector<std::string> failing;
    for (const auto& r : reports) {
        std::printf("%-10s max_rel_error=%.3e %s\n", r.name.c_str(), r.max_rel_error,
                    r.pass() ? "PASS" : "FAIL");
        if (!r.pass()) failing.push_back(r.name);
    }
    if (!failing.empty()) {
        std::string joined;
        for (const auto& name : failing) joined += (joined.empty() ? "" : ", ") + name;
        std::cerr << "gradient check failed for: " << joined << "\n";
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dual-branch (spatial + Fourier) detector for AI-generated images"};
    app.require_subcommand(1);

    TrainFlags tf;
    auto* train = app.add_subcommand("train", "train a model and write checkpoint + CSV log");
    train->add_option("--config", tf.config_path, "JSON config file (flags override)");
    train->add_option("--data-dir", tf.data_dir, "CIFAKE-layout dataset root");
    train->add_flag("--synthetic", tf.synthetic, "use the built-in planted-artifact dataset");
    train->add_option("--n-per-class", tf.n_per_class, "synthetic train images per class");
    train->add_option("--n-per-class-test", tf.n_per_class_test, "synthetic test images per class");
    train->add_option("--limit-per-class", tf.limit_per_class, "cap train images per class (0=all)");
    train->add_option("--limit-per-class-test", tf.limit_per_class_test,
                      "cap test images per class (0=all)");
    train->add_option("--epochs", tf.epochs, "training epochs");
    train->add_option("--batch-size", tf.batch_size, "batch size");
    train->add_option("--lr", tf.lr, "initial learning rate");
    train->add_option("--seed", tf.seed, "root RNG seed");
    train->add_flag("--deterministic", tf.deterministic,
                    "force single-threaded, order-stable execution");
    train->add_flag("--no-augment", tf.no_augment, "disable horizontal-flip augmentation");
    train->add_option("--dropout", tf.dropout, "dropout rate for FC layers");
    train->add_option("--pyramid-depth", tf.pyramid_depth, "block decomposition depth");
    train->add_option("--threads", tf.threads, "worker threads (default: DUALFREQ_THREADS or 1)");
    train->add_flag("--ablate-frequency", tf.ablate_frequency,
                    "zero the frequency branch input (spatial-only ablation)");
    train->add_option("--out", tf.out, "checkpoint output path");
    train->add_option("--log", tf.log, "CSV log output path");

    EvalFlags ef;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a labeled dataset");
    eval->add_option("--checkpoint", ef.checkpoint, "model checkpoint")->required();
    eval->add_option("--config", ef.config_path, "JSON config; model section must match checkpoint");
    eval->add_option("--data-dir", ef.data_dir, "CIFAKE-layout dataset root");
    eval->add_option("--split", ef.split, "dataset split (default: test)");
    eval->add_flag("--synthetic", ef.synthetic, "use the built-in synthetic dataset");
    eval->add_option("--n-per-class-test", ef.n_per_class_test, "synthetic images per class");
    eval->add_option("--limit-per-class", ef.limit_per_class, "cap images per class (0=all)");
    eval->add_option("--seed", ef.seed, "seed for the synthetic dataset");
    eval->add_option("--threshold", ef.threshold, "classification threshold");
    eval->add_option("--threads", ef.threads, "worker threads");

    std::string predict_checkpoint, predict_image;
    auto* predict = app.add_subcommand("predict", "classify one 32x32 RGB PNG");
    predict->add_option("--checkpoint", predict_checkpoint, "model checkpoint")->required();
    predict->add_option("image", predict_image, "input PNG path")->required();

    std::string spect_image, spect_out;
    auto* inspect = app.add_subcommand("inspect-spectrum",
                                       "write the centered log-magnitude spectrum as a PGM");
    inspect->add_option("image", spect_image, "input PNG path")->required();
    inspect->add_option("--out", spect_out, "output PGM path")->required();

    std::uint64_t gc_seed = 42;
    auto* gradcheck_cmd =
        app.add_subcommand("gradcheck", "finite-difference gradient checks for every layer kind");
    gradcheck_cmd->add_option("--seed", gc_seed, "RNG seed for the check instances");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(*train, tf);
        if (eval->parsed()) return cmd_eval(*eval, ef);
        if (predict->parsed()) return cmd_predict(predict_checkpoint, predict_image);
        if (inspect->parsed()) return cmd_inspect_spectrum(spect_image, spect_out);
        if (gradcheck_cmd->parsed()) return cmd_gradcheck(gc_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
