// End-to-end checks of the CLI surface through the real binary
// (path supplied via DUALFREQ_CLI).

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dualfreq/image_io.hpp"
#include "dualfreq/data.hpp"
#include "dualfreq/rng.hpp"

using namespace dualfreq;
namespace fs = std::filesystem;

namespace {

std::string cli() {
    const char* env = std::getenv("DUALFREQ_CLI");
    return env ? env : "";
}

fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / ("dualfreq_cli_test_" + name);
}

int run(const std::string& args, const fs::path& out) {
    const std::string cmd = cli() + " " + args + " > " + out.string() + " 2>&1";
    return std::system(cmd.c_str());
}

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_synth_png(const fs::path& path, int label, std::uint64_t seed) {
    Rng rng(seed);
    const Tensor pixels = synth_image01(rng, label);
    ImageU8 img;
    img.width = 32;
    img.height = 32;
    img.rgb.resize(32 * 32 * 3);
    for (std::size_t i = 0; i < 32 * 32; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            const float v = pixels[c * 32 * 32 + i];
            img.rgb[i * 3 + c] = static_cast<unsigned char>(255.0f * v + 0.5f);
        }
    }
    png_write_rgb8(path.string(), img);
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        if (cli().empty()) GTEST_SKIP() << "DUALFREQ_CLI not set; run via ctest";
    }
};

} // namespace

TEST_F(CliTest, GradcheckExitsZero) {
    const auto out = temp_file("gradcheck.out");
    EXPECT_EQ(run("gradcheck --seed 11", out), 0) << read_file(out);
    const std::string text = read_file(out);
    for (const char* name : {"conv2d", "maxpool2d", "linear", "lrelu", "prelu", "sigmoid", "bce",
                             "model"}) {
        EXPECT_NE(text.find(name), std::string::npos) << text;
    }
    EXPECT_EQ(text.find("FAIL"), std::string::npos) << text;
    fs::remove(out);
}

TEST_F(CliTest, TrainEvalPredictRoundTrip) {
    const auto out = temp_file("train.out");
    const auto ckpt = temp_file("model.ckpt");
    const auto csv = temp_file("log.csv");

    // quick synthetic run
    ASSERT_EQ(run("train --synthetic --n-per-class 24 --n-per-class-test 8 --epochs 2"
                  " --batch-size 16 --seed 3 --out " +
                      ckpt.string() + " --log " + csv.string(),
                  out),
              0)
        << read_file(out);
    const std::string train_text = read_file(out);
    EXPECT_NE(train_text.find("effective config"), std::string::npos);
    EXPECT_NE(train_text.find("final test metrics"), std::string::npos);
    ASSERT_TRUE(fs::exists(ckpt));

    // CSV has a header + 2 rows
    std::ifstream csv_in(csv);
    std::string line;
    std::getline(csv_in, line);
    EXPECT_EQ(line, "epoch,lr,train_loss,train_acc,test_loss,test_acc");

    // eval on the same synthetic test split reproduces the final CSV row
    std::string last_row;
    while (std::getline(csv_in, line)) {
        if (!line.empty()) last_row = line;
    }
    ASSERT_FALSE(last_row.empty());
    const double csv_test_acc = std::stod(last_row.substr(last_row.rfind(',') + 1));

    const auto eval_out = temp_file("eval.out");
    ASSERT_EQ(run("eval --checkpoint " + ckpt.string() +
                      " --synthetic --n-per-class-test 8 --seed 3",
                  eval_out),
              0)
        << read_file(eval_out);
    const std::string eval_text = read_file(eval_out);
    const auto acc_pos = eval_text.find("\"accuracy\":");
    ASSERT_NE(acc_pos, std::string::npos) << eval_text;
    const double eval_acc = std::stod(eval_text.substr(acc_pos + 11));
    // same code path, same dataset; CSV is rounded to 8 decimals
    EXPECT_NEAR(eval_acc, csv_test_acc, 5e-9);

    // predict on a synthetic PNG
    const auto png = temp_file("sample.png");
    write_synth_png(png, 1, 77);
    const auto pred_out = temp_file("predict.out");
    ASSERT_EQ(run("predict --checkpoint " + ckpt.string() + " " + png.string(), pred_out), 0)
        << read_file(pred_out);
    const std::string pred_text = read_file(pred_out);
    EXPECT_NE(pred_text.find("probability="), std::string::npos);
    const bool has_class = pred_text.find("class=fake") != std::string::npos ||
                           pred_text.find("class=real") != std::string::npos;
    EXPECT_TRUE(has_class) << pred_text;

    // identical prediction on a second invocation (eval-mode determinism)
    const auto pred_out2 = temp_file("predict2.out");
    ASSERT_EQ(run("predict --checkpoint " + ckpt.string() + " " + png.string(), pred_out2), 0);
    EXPECT_EQ(read_file(pred_out), read_file(pred_out2));

    for (const auto& p : {out, ckpt, csv, eval_out, png, pred_out, pred_out2}) fs::remove(p);
}

TEST_F(CliTest, InspectSpectrumWritesMatchingDimensions) {
    const auto png = temp_file("spectrum_in.png");
    write_synth_png(png, 1, 99);
    const auto pgm = temp_file("spectrum.pgm");
    const auto out = temp_file("inspect.out");
    ASSERT_EQ(run("inspect-spectrum " + png.string() + " --out " + pgm.string(), out), 0)
        << read_file(out);

    std::ifstream f(pgm, std::ios::binary);
    std::string magic;
    std::size_t w = 0, h = 0, maxval = 0;
    f >> magic >> w >> h >> maxval;
    EXPECT_EQ(magic, "P5");
    EXPECT_EQ(w, 32u);
    EXPECT_EQ(h, 32u);
    EXPECT_EQ(maxval, 255u);
    f.get(); // single whitespace after maxval
    std::vector<unsigned char> pixels(w * h);
    f.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    EXPECT_EQ(static_cast<std::size_t>(f.gcount()), pixels.size());

    // after fftshift the DC bin sits at the center and dominates
    std::size_t best = 0;
    for (std::size_t i = 1; i < pixels.size(); ++i) {
        if (pixels[i] > pixels[best]) best = i;
    }
    EXPECT_EQ(best, 16u * 32u + 16u);
    for (const auto& p : {png, pgm, out}) fs::remove(p);
}

TEST_F(CliTest, ConstantImageSpectrumIsSingleCenterDot) {
    const auto png = temp_file("flat.png");
    ImageU8 img;
    img.width = 16;
    img.height = 16;
    img.rgb.assign(16 * 16 * 3, 180);
    png_write_rgb8(png.string(), img);
    const auto pgm = temp_file("flat.pgm");
    const auto out = temp_file("flat.out");
    ASSERT_EQ(run("inspect-spectrum " + png.string() + " --out " + pgm.string(), out), 0)
        << read_file(out);

    std::ifstream f(pgm, std::ios::binary);
    std::string magic;
    std::size_t w, h, maxval;
    f >> magic >> w >> h >> maxval;
    f.get();
    std::vector<unsigned char> pixels(w * h);
    f.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    ASSERT_EQ(w, 16u);
    ASSERT_EQ(h, 16u);
    std::size_t bright = 0;
    for (const unsigned char px : pixels) {
        if (px > 128) ++bright;
    }
    EXPECT_EQ(bright, 1u);
    EXPECT_GT(pixels[8 * 16 + 8], 128);
    for (const auto& p : {png, pgm, out}) fs::remove(p);
}

TEST_F(CliTest, BadInputsExitNonzeroWithMessage) {
    const auto out = temp_file("bad.out");

    EXPECT_NE(run("train --synthetic --epochs 0", out), 0);
    EXPECT_NE(read_file(out).find("error:"), std::string::npos);

    EXPECT_NE(run("train --data-dir /nonexistent/path --epochs 1", out), 0);
    EXPECT_NE(read_file(out).find("error:"), std::string::npos);

    EXPECT_NE(run("eval --checkpoint /nonexistent.ckpt --synthetic", out), 0);
    EXPECT_NE(read_file(out).find("error:"), std::string::npos);

    EXPECT_NE(run("predict --checkpoint /nonexistent.ckpt /nonexistent.png", out), 0);

    // wrong-size image for predict
    const auto ckpt = temp_file("tiny.ckpt");
    const auto train_out = temp_file("tiny_train.out");
    ASSERT_EQ(run("train --synthetic --n-per-class 8 --n-per-class-test 4 --epochs 1"
                  " --batch-size 8 --out " +
                      ckpt.string() + " --log \"\"",
                  train_out),
              0)
        << read_file(train_out);
    const auto small_png = temp_file("small.png");
    ImageU8 small;
    small.width = 16;
    small.height = 16;
    small.rgb.assign(16 * 16 * 3, 10);
    png_write_rgb8(small_png.string(), small);
    EXPECT_NE(run("predict --checkpoint " + ckpt.string() + " " + small_png.string(), out), 0);
    EXPECT_NE(read_file(out).find("16x16"), std::string::npos);

    for (const auto& p : {out, ckpt, train_out, small_png}) fs::remove(p);
}
