#include <gtest/gtest.h>

#include <filesystem>

#include "dgflow/checkpoint.hpp"
#include "dgflow/errors.hpp"

using namespace dgflow;

namespace {

Checkpoint sample() {
  ArchSpec a;
  a.kind = ArchKind::conv;
  a.state_dim = 10;
  a.hidden = {4, 3};
  a.dx = 0.2;
  Checkpoint c;
  c.model = "dgnet";
  c.arch = a;
  c.precision = Precision::f32;
  c.params = EnergyModel(a, 11, Precision::f32).params();
  c.friction = Tensor::vector({0.125});
  c.config = R"({"lr":0.001})";
  return c;
}

}  // namespace

TEST(Checkpoint, RoundTrip) {
  const Checkpoint c = sample();
  const auto path = std::filesystem::temp_directory_path() / "dgflow_test.ckpt";
  save_checkpoint(path, c);
  const Checkpoint b = load_checkpoint(path);
  EXPECT_EQ(b.model, "dgnet");
  EXPECT_EQ(b.arch.to_json(), c.arch.to_json());
  EXPECT_EQ(b.precision, Precision::f32);
  EXPECT_TRUE(b.params.identical(c.params));
  ASSERT_TRUE(b.friction);
  EXPECT_EQ(b.friction->values(), c.friction->values());
  EXPECT_EQ(b.config, c.config);
  EXPECT_EQ(encode_checkpoint(b), encode_checkpoint(c));
  std::filesystem::remove(path);
}

TEST(Checkpoint, CorruptionDetected) {
  auto bytes = encode_checkpoint(sample());
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 1;
  EXPECT_THROW(decode_checkpoint(flipped), FormatError);
  auto cut = bytes;
  cut.resize(cut.size() - 1);
  EXPECT_THROW(decode_checkpoint(cut), FormatError);
  auto foreign = bytes;
  foreign[1] = 'Z';
  EXPECT_THROW(decode_checkpoint(foreign), FormatError);
}

TEST(Checkpoint, ParamsMustMatchArchitecture) {
  Checkpoint c = sample();
  c.arch.hidden = {5, 3};
  const Checkpoint b = decode_checkpoint(encode_checkpoint(c));
  EXPECT_THROW(EnergyModel(b.arch, b.params), FormatError);
}
