#include <gtest/gtest.h>

#include <filesystem>

#include "trmlab/checkpoint.hpp"

using namespace trmlab;

namespace {

ModelParams sample_model() {
    const MlpSpec spec{{2, 4, 3}, Activation::tanh};
    RngState rng{55, 0};
    return init_params(spec, rng);
}

std::filesystem::path temp_path(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
    const ModelParams m = sample_model();
    const auto path = temp_path("trmlab_ckpt_roundtrip.trm");
    save_checkpoint(path, m);
    const ModelParams back = load_checkpoint(path);
    EXPECT_EQ(back.spec.layer_sizes, m.spec.layer_sizes);
    EXPECT_EQ(back.spec.activation, m.spec.activation);
    EXPECT_EQ(back.theta, m.theta);
    std::filesystem::remove(path);
}

TEST(Checkpoint, EncodeStartsWithMagicAndVersion) {
    const std::string bytes = encode_checkpoint(sample_model());
    ASSERT_GE(bytes.size(), 8u);
    EXPECT_EQ(bytes.substr(0, 4), "TRM1");
    EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);  // version, little-endian
    EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 0);
}

TEST(Checkpoint, RejectsBadMagic) {
    std::string bytes = encode_checkpoint(sample_model());
    bytes[0] = 'X';
    EXPECT_THROW(decode_checkpoint(bytes), ContractViolation);
}

TEST(Checkpoint, RejectsTruncatedPayload) {
    std::string bytes = encode_checkpoint(sample_model());
    bytes.resize(bytes.size() - 3);
    EXPECT_THROW(decode_checkpoint(bytes), ContractViolation);
}

TEST(Checkpoint, RejectsTrailingBytes) {
    std::string bytes = encode_checkpoint(sample_model());
    bytes.push_back('\0');
    EXPECT_THROW(decode_checkpoint(bytes), ContractViolation);
}
