#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dualfreq/common.hpp"
#include "dualfreq/image_io.hpp"
#include "dualfreq/rng.hpp"
#include "dualfreq/tensor.hpp"

namespace dualfreq {

/// One labeled image: class 0 = real, class 1 = AI-generated.
struct Sample {
    Tensor image; // [3,S,S], normalized
    int label = 0;
    std::string id;
};

struct Dataset {
    std::vector<Sample> samples;
    std::string split;
};

inline constexpr std::array<float, 3> kNormMean = {0.485f, 0.456f, 0.406f};
inline constexpr std::array<float, 3> kNormStd = {0.229f, 0.224f, 0.225f};

/// Per-channel (x - mean)/std on a [3,H,W] image of [0,1] pixels.
inline Tensor normalize(const Tensor& image, const std::array<float, 3>& mean = kNormMean,
                        const std::array<float, 3>& std = kNormStd) {
    if (image.rank() != 3 || image.dim(0) != 3) {
        throw ShapeError("normalize expects a [3,H,W] image");
    }
    Tensor out(image.shape());
    const std::size_t hw = image.dim(1) * image.dim(2);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < hw; ++i) {
            out[c * hw + i] = (image[c * hw + i] - mean[c]) / std[c];
        }
    }
    return out;
}

/// Inverse of normalize: x*std + mean.
inline Tensor denormalize(const Tensor& image, const std::array<float, 3>& mean = kNormMean,
                          const std::array<float, 3>& std = kNormStd) {
    Tensor out(image.shape());
    const std::size_t hw = image.dim(1) * image.dim(2);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < hw; ++i) {
            out[c * hw + i] = image[c * hw + i] * std[c] + mean[c];
        }
    }
    return out;
}

/// Mirror across the vertical axis. Flipping commutes with the per-pixel
/// normalization, so applying it to stored normalized images matches
/// flipping raw pixels first.
inline Tensor hflip(const Tensor& image) {
    if (image.rank() != 3) throw ShapeError("hflip expects a rank-3 image");
    const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
    Tensor out(image.shape());
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < H; ++i) {
            for (std::size_t j = 0; j < W; ++j) {
                out.at3(c, i, j) = image.at3(c, i, W - 1 - j);
            }
        }
    }
    return out;
}

/// Horizontal flip with probability 0.5; train-split augmentation only.
inline Tensor augment_hflip(const Tensor& image, Rng& rng) {
    return rng.bernoulli(0.5) ? hflip(image) : image;
}

/// Index batches: seeded Fisher-Yates shuffle when enabled, dataset order
/// otherwise; the final partial batch is kept.
inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                          Rng& rng, bool shuffle_order) {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    if (shuffle_order) shuffle(order, rng);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

namespace detail {

inline Sample sample_from_pixels01(Tensor pixels01, int label, std::string id) {
    Sample s;
    s.image = normalize(pixels01);
    s.label = label;
    s.id = std::move(id);
    return s;
}

inline void check_image_size(const ImageU8& img, std::size_t expected, const std::string& path) {
    if (img.width != expected || img.height != expected) {
        throw IoError("expected " + std::to_string(expected) + "x" + std::to_string(expected) +
                      " image, got " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                      " in " + path);
    }
}

} // namespace detail

/// Raw planar record stream: [label u8][S*S bytes R][S*S bytes G][S*S bytes B]
/// per record, row-major planes. Dependency-free alternative to PNG trees.
inline Dataset load_raw_records(const std::string& path, const std::string& split,
                                std::size_t limit_per_class = 0, std::size_t image_size = 32) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open raw dataset file: " + path);
    const std::size_t plane = image_size * image_size;
    const std::size_t record = 1 + 3 * plane;
    std::vector<unsigned char> buf(record);
    Dataset ds;
    ds.split = split;
    std::array<std::size_t, 2> per_class = {0, 0};
    std::size_t index = 0;
    while (in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(record))) {
        const int label = buf[0];
        if (label != 0 && label != 1) {
            throw IoError("invalid label byte " + std::to_string(label) + " in record " +
                          std::to_string(index) + " of " + path);
        }
        ++index;
        if (limit_per_class > 0 && per_class[static_cast<std::size_t>(label)] >= limit_per_class) {
            continue;
        }
        ++per_class[static_cast<std::size_t>(label)];
        Tensor pixels({3, image_size, image_size});
        for (std::size_t i = 0; i < 3 * plane; ++i) {
            pixels[i] = static_cast<float>(buf[1 + i]) / 255.0f;
        }
        ds.samples.push_back(detail::sample_from_pixels01(
            std::move(pixels), label, path + "#" + std::to_string(index - 1)));
    }
    if (in.gcount() != 0) {
        throw IoError("trailing partial record (" + std::to_string(in.gcount()) + " bytes) in " + path);
    }
    return ds;
}

/// CIFAKE-layout loader. Accepts either `<root>/<split>/REAL|FAKE/*.png`
/// (lexicographic file order per class, REAL block first) or a raw record
/// file `<root>/<split>.bin`. Pixels are scaled to [0,1] and normalized.
inline Dataset load_cifake(const std::string& root, const std::string& split,
                           std::size_t limit_per_class = 0, std::size_t image_size = 32) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(root) / split;
    if (fs::is_directory(dir)) {
        Dataset ds;
        ds.split = split;
        const std::array<std::pair<const char*, int>, 2> classes = {{{"REAL", 0}, {"FAKE", 1}}};
        for (const auto& [name, label] : classes) {
            const fs::path class_dir = dir / name;
            if (!fs::is_directory(class_dir)) {
                throw IoError("missing class directory: " + class_dir.string());
            }
            std::vector<std::string> files;
            for (const auto& entry : fs::directory_iterator(class_dir)) {
                if (entry.is_regular_file() && entry.path().extension() == ".png") {
                    files.push_back(entry.path().string());
                }
            }
            std::sort(files.begin(), files.end());
            if (limit_per_class > 0 && files.size() > limit_per_class) {
                files.resize(limit_per_class);
            }
            for (const auto& file : files) {
                const ImageU8 img = png_read_rgb8(file);
                detail::check_image_size(img, image_size, file);
                ds.samples.push_back(
                    detail::sample_from_pixels01(image_to_tensor01(img), label, file));
            }
        }
        return ds;
    }
    const fs::path raw = fs::path(root) / (split + ".bin");
    if (fs::is_regular_file(raw)) {
        return load_raw_records(raw.string(), split, limit_per_class, image_size);
    }
    throw IoError("dataset not found: neither directory " + dir.string() + " nor file " +
                  raw.string() + " exists");
}

/// Planted-artifact generator constants. Class 1 carries a faint grid at
/// the fixed frequency bin below (of a 32-wide spectrum); class 0 carries an
/// equal-amplitude decoy grid at one of the nearby bins, drawn per image.
/// Matching the energy profiles this way leaves the exact peak location as
/// the only class signal, which small spatial kernels resolve poorly but
/// the DFT separates exactly. Amplitude is a fraction of the [0,1] range.
inline constexpr std::size_t kSynthFreqBin = 10;
inline constexpr std::size_t kSynthDecoyBins[] = {6, 7, 8, 9};
inline constexpr float kSynthAmplitude = 0.02f;

namespace detail {

inline void box_blur_wrap(std::vector<float>& chan, std::size_t S) {
    std::vector<float> src = chan;
    for (std::size_t i = 0; i < S; ++i) {
        for (std::size_t j = 0; j < S; ++j) {
            float acc = 0.0f;
            for (int di = -1; di <= 1; ++di) {
                for (int dj = -1; dj <= 1; ++dj) {
                    const std::size_t ii = (i + S + static_cast<std::size_t>(di + 1) - 1) % S;
                    const std::size_t jj = (j + S + static_cast<std::size_t>(dj + 1) - 1) % S;
                    acc += src[ii * S + jj];
                }
            }
            chan[i * S + j] = acc / 9.0f;
        }
    }
}

inline void add_grid(Tensor& pixels, double freq, double phi1, double phi2) {
    const std::size_t S = pixels.dim(1);
    for (std::size_t l = 0; l < S; ++l) {
        for (std::size_t j = 0; j < S; ++j) {
            const double grid =
                kSynthAmplitude *
                (std::cos(2.0 * M_PI * freq * static_cast<double>(l) / static_cast<double>(S) + phi1) +
                 std::cos(2.0 * M_PI * freq * static_cast<double>(j) / static_cast<double>(S) + phi2));
            for (std::size_t c = 0; c < pixels.dim(0); ++c) {
                float& px = pixels.at3(c, l, j);
                px = std::min(1.0f, std::max(0.0f, px + static_cast<float>(grid)));
            }
        }
    }
}

} // namespace detail

/// The shared noise base: per-channel uniform noise in [0.25,0.75] smoothed
/// by two wrap-around 3x3 box blurs.
inline Tensor synth_noise01(Rng& rng, std::size_t image_size = 32) {
    const std::size_t S = image_size;
    Tensor pixels({3, S, S});
    std::vector<float> chan(S * S);
    for (std::size_t c = 0; c < 3; ++c) {
        for (auto& px : chan) px = 0.25f + 0.5f * static_cast<float>(rng.next_double());
        detail::box_blur_wrap(chan, S);
        detail::box_blur_wrap(chan, S);
        for (std::size_t i = 0; i < S * S; ++i) pixels[c * S * S + i] = chan[i];
    }
    return pixels;
}

/// Raw [0,1] pixels for one synthetic sample: smoothed noise plus a faint
/// grid a*[cos(2*pi*f*l/S + phi1) + cos(2*pi*f*j/S + phi2)] with per-image
/// random phases. Class 1 plants it at kSynthFreqBin, producing a strong
/// localized peak at spectrum bins (f,0)/(0,f) and mirrors; class 0 plants
/// the decoy at one of kSynthDecoyBins. Bin indices scale with image size.
inline Tensor synth_image01(Rng& rng, int label, std::size_t image_size = 32) {
    Tensor pixels = synth_noise01(rng, image_size);
    const double scale = static_cast<double>(image_size) / 32.0;
    double bin;
    if (label == 1) {
        bin = static_cast<double>(kSynthFreqBin);
    } else {
        bin = static_cast<double>(kSynthDecoyBins[rng.bounded(4)]);
    }
    const double phi1 = 2.0 * M_PI * rng.next_double();
    const double phi2 = 2.0 * M_PI * rng.next_double();
    detail::add_grid(pixels, bin * scale, phi1, phi2);
    return pixels;
}

/// Balanced synthetic dataset: n class-0 samples then n class-1 samples,
/// each generated from its own split of `rng` so the set is reproducible.
inline Dataset synth_spectral_dataset(std::size_t n_per_class, Rng rng,
                                      const std::string& split = "synth",
                                      std::size_t image_size = 32) {
    if (n_per_class < 1) throw ConfigError("synth_spectral_dataset requires n_per_class >= 1");
    Dataset ds;
    ds.split = split;
    for (int label : {0, 1}) {
        for (std::size_t i = 0; i < n_per_class; ++i) {
            const std::uint64_t ordinal = 2 * i + static_cast<std::uint64_t>(label);
            Rng srng = rng.split(ordinal);
            Tensor pixels = synth_image01(srng, label, image_size);
            ds.samples.push_back(detail::sample_from_pixels01(
                std::move(pixels), label,
                split + "/" + (label == 0 ? "real/" : "fake/") + std::to_string(i)));
        }
    }
    return ds;
}

} // namespace dualfreq
