#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dualfreq/common.hpp"
#include "dualfreq/model.hpp"

namespace dualfreq {

struct LoadError : IoError {
    explicit LoadError(const std::string& msg) : IoError(msg) {}
};
/// Wrong magic bytes or format version.
struct CheckpointMagicError : LoadError {
    explicit CheckpointMagicError(const std::string& msg) : LoadError(msg) {}
};
/// File shorter than the header and manifest promise.
struct CheckpointTruncatedError : LoadError {
    explicit CheckpointTruncatedError(const std::string& msg) : LoadError(msg) {}
};
/// Manifest disagrees with the parameter set implied by the config.
struct CheckpointManifestError : LoadError {
    explicit CheckpointManifestError(const std::string& msg) : LoadError(msg) {}
};
/// Loaded config differs from the expected one; names the first field.
struct CheckpointConfigError : LoadError {
    explicit CheckpointConfigError(const std::string& msg) : LoadError(msg) {}
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"image_size", c.image_size},
                       {"channels", c.channels},
                       {"pyramid_depth", c.pyramid_depth},
                       {"conv_out_channels", c.conv_out_channels},
                       {"kernel", c.kernel},
                       {"stride", c.stride},
                       {"padding", c.padding},
                       {"branch_fc_widths", c.branch_fc_widths},
                       {"merged_fc_widths", c.merged_fc_widths},
                       {"prelu_init", c.prelu_init},
                       {"dropout_rate", c.dropout_rate},
                       {"epsilon_log", c.epsilon_log},
                       {"dft_on_normalized", c.dft_on_normalized},
                       {"zero_frequency_input", c.zero_frequency_input},
                       {"norm_mean", c.norm_mean},
                       {"norm_std", c.norm_std}};
}

/// Missing keys keep their defaults, so partial config files are valid.
inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    c.image_size = j.value("image_size", c.image_size);
    c.channels = j.value("channels", c.channels);
    c.pyramid_depth = j.value("pyramid_depth", c.pyramid_depth);
    c.conv_out_channels = j.value("conv_out_channels", c.conv_out_channels);
    c.kernel = j.value("kernel", c.kernel);
    c.stride = j.value("stride", c.stride);
    c.padding = j.value("padding", c.padding);
    c.branch_fc_widths = j.value("branch_fc_widths", c.branch_fc_widths);
    c.merged_fc_widths = j.value("merged_fc_widths", c.merged_fc_widths);
    c.prelu_init = j.value("prelu_init", c.prelu_init);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.epsilon_log = j.value("epsilon_log", c.epsilon_log);
    c.dft_on_normalized = j.value("dft_on_normalized", c.dft_on_normalized);
    c.zero_frequency_input = j.value("zero_frequency_input", c.zero_frequency_input);
    c.norm_mean = j.value("norm_mean", c.norm_mean);
    c.norm_std = j.value("norm_std", c.norm_std);
}

namespace detail {

inline constexpr unsigned char kCheckpointMagic[8] = {'D', 'B', 'N', 'E', 'T', '\0', 'v', '1'};

inline void put_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_f32_le(std::string& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32_le(out, bits);
}

inline float get_f32_le(const unsigned char* p) {
    const std::uint32_t bits = get_u32_le(p);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

/// First field, in declaration order, where the two configs disagree.
inline std::string first_config_mismatch(const ModelConfig& expected, const ModelConfig& loaded) {
    nlohmann::json je, jl;
    to_json(je, expected);
    to_json(jl, loaded);
    for (const char* field :
         {"image_size", "channels", "pyramid_depth", "conv_out_channels", "kernel", "stride",
          "padding", "branch_fc_widths", "merged_fc_widths", "prelu_init", "dropout_rate",
          "epsilon_log", "dft_on_normalized", "zero_frequency_input", "norm_mean", "norm_std"}) {
        if (je.at(field) != jl.at(field)) {
            return std::string(field) + ": checkpoint has " + jl.at(field).dump() + ", expected " +
                   je.at(field).dump();
        }
    }
    return {};
}

} // namespace detail

/// File layout: 8-byte magic "DBNET\0v1", u32 LE header length, JSON header
/// {config, tensor manifest with name/shape/offset}, then raw little-endian
/// float32 data in manifest order. Round-trips are bit-exact.
template <class Net>
void save_checkpoint(Net& net, const std::string& path) {
    nlohmann::json manifest = nlohmann::json::array();
    std::string data;
    std::size_t offset = 0;
    visit_params(net, [&](const std::string& name, const auto& t) {
        manifest.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
        for (std::size_t i = 0; i < t.size(); ++i) {
            detail::put_f32_le(data, static_cast<float>(t[i]));
        }
        offset += 4 * t.size();
    });
    nlohmann::json header;
    header["config"] = net.config;
    header["tensors"] = manifest;
    const std::string header_text = header.dump();

    std::string out;
    out.append(reinterpret_cast<const char*>(detail::kCheckpointMagic), 8);
    detail::put_u32_le(out, static_cast<std::uint32_t>(header_text.size()));
    out += header_text;
    out += data;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("checkpoint write failed: " + path);
}

inline DualBranchNet load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());

    if (bytes.size() < 12) throw CheckpointTruncatedError("checkpoint shorter than its preamble: " + path);
    if (std::memcmp(bytes.data(), detail::kCheckpointMagic, 8) != 0) {
        throw CheckpointMagicError("bad checkpoint magic/version in " + path);
    }
    const std::uint32_t header_len = detail::get_u32_le(bytes.data() + 8);
    if (bytes.size() < 12 + static_cast<std::size_t>(header_len)) {
        throw CheckpointTruncatedError("checkpoint header truncated: " + path);
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointMagicError("unparseable checkpoint header in " + path + ": " + e.what());
    }

    ModelConfig cfg;
    try {
        cfg = header.at("config").get<ModelConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointManifestError("bad config block in " + path + ": " + e.what());
    }
    DualBranchNet net = DualBranchNet::build(cfg);

    struct Expected {
        std::string name;
        std::vector<std::size_t> shape;
        Tensor* tensor;
    };
    std::vector<Expected> expected;
    std::size_t offset = 0;
    visit_params(net, [&](const std::string& name, Tensor& t) {
        expected.push_back({name, t.shape(), &t});
    });

    if (!header.contains("tensors") || !header["tensors"].is_array() ||
        header["tensors"].size() != expected.size()) {
        throw CheckpointManifestError("manifest entry count mismatch in " + path + ": expected " +
                                      std::to_string(expected.size()));
    }
    const std::size_t data_start = 12 + header_len;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const auto& entry = header["tensors"][i];
        const auto name = entry.value("name", std::string());
        const auto shape = entry.value("shape", std::vector<std::size_t>{});
        const auto entry_offset = entry.value("offset", std::size_t(0));
        if (name != expected[i].name || shape != expected[i].shape || entry_offset != offset) {
            throw CheckpointManifestError("manifest mismatch at entry " + std::to_string(i) +
                                          " ('" + name + "') in " + path + ", expected '" +
                                          expected[i].name + "'");
        }
        offset += 4 * expected[i].tensor->size();
    }
    if (bytes.size() < data_start + offset) {
        throw CheckpointTruncatedError(
            "checkpoint data truncated: " + path + " is missing " +
            std::to_string(data_start + offset - bytes.size()) + " bytes");
    }
    if (bytes.size() > data_start + offset) {
        throw CheckpointManifestError("checkpoint has trailing bytes: " + path);
    }
    std::size_t pos = data_start;
    for (auto& e : expected) {
        for (std::size_t i = 0; i < e.tensor->size(); ++i) {
            (*e.tensor)[i] = detail::get_f32_le(bytes.data() + pos);
            pos += 4;
        }
    }
    return net;
}

/// Load and reject on any difference from the expected architecture.
inline DualBranchNet load_checkpoint(const std::string& path, const ModelConfig& expected) {
    DualBranchNet net = load_checkpoint(path);
    const std::string mismatch = detail::first_config_mismatch(expected, net.config);
    if (!mismatch.empty()) {
        throw CheckpointConfigError("config mismatch loading " + path + ": " + mismatch);
    }
    return net;
}

} // namespace dualfreq
