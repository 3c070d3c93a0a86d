#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "trmlab/errors.hpp"
#include "trmlab/mlp.hpp"

namespace trmlab {

// Checkpoint file layout, little-endian throughout:
//   bytes 0..3   magic "TRM1"
//   u32          version (currently 1)
//   u32          activation (0 = relu, 1 = tanh)
//   u32          number of layer sizes n
//   n x u32      layer sizes
//   k x f64      theta in layout order (k = param_count)
// The activation tag makes checkpoints self-describing for the diagnose
// command.

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f64(std::string& out, double v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
    if (pos + 4 > in.size()) throw ContractViolation("checkpoint: truncated header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

inline double get_f64(const std::string& in, std::size_t& pos) {
    if (pos + 8 > in.size()) throw ContractViolation("checkpoint: truncated payload");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += 8;
    return std::bit_cast<double>(bits);
}

}  // namespace detail

inline std::string encode_checkpoint(const ModelParams& m) {
    m.spec.validate();
    if (m.theta.size() != m.spec.param_count())
        throw ContractViolation("encode_checkpoint: theta length differs from spec");
    std::string out;
    out.reserve(16 + 4 * m.spec.layer_sizes.size() + 8 * m.theta.size());
    out.append("TRM1");
    detail::put_u32(out, 1);
    detail::put_u32(out, m.spec.activation == Activation::relu ? 0u : 1u);
    detail::put_u32(out, static_cast<std::uint32_t>(m.spec.layer_sizes.size()));
    for (std::size_t s : m.spec.layer_sizes) detail::put_u32(out, static_cast<std::uint32_t>(s));
    for (double v : m.theta) detail::put_f64(out, v);
    return out;
}

inline ModelParams decode_checkpoint(const std::string& bytes) {
    if (bytes.size() < 4 || bytes.compare(0, 4, "TRM1") != 0)
        throw ContractViolation("checkpoint: bad magic");
    std::size_t pos = 4;
    const std::uint32_t version = detail::get_u32(bytes, pos);
    if (version != 1) throw ContractViolation("checkpoint: unsupported version");
    const std::uint32_t act = detail::get_u32(bytes, pos);
    if (act > 1) throw ContractViolation("checkpoint: unknown activation tag");
    const std::uint32_t n = detail::get_u32(bytes, pos);
    MlpSpec spec;
    spec.activation = act == 0 ? Activation::relu : Activation::tanh;
    spec.layer_sizes.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) spec.layer_sizes[i] = detail::get_u32(bytes, pos);
    spec.validate();
    ParamVec theta(spec.param_count());
    for (double& v : theta) v = detail::get_f64(bytes, pos);
    if (pos != bytes.size()) throw ContractViolation("checkpoint: trailing bytes");
    return ModelParams{std::move(spec), std::move(theta)};
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelParams& m) {
    const std::string bytes = encode_checkpoint(m);
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ContractViolation("save_checkpoint: cannot open " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw ContractViolation("save_checkpoint: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ContractViolation("load_checkpoint: cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace trmlab
