#include <gtest/gtest.h>

#include <filesystem>

#include "dgflow/errors.hpp"
#include "dgflow/generate.hpp"

using namespace dgflow;
namespace fs = std::filesystem;

namespace {

Trajectory traj(std::size_t t, std::size_t d, double dt, double offset, std::uint64_t seed) {
  Trajectory tr;
  std::vector<double> s;
  for (std::size_t i = 0; i < t; ++i) {
    tr.times.push_back(dt * static_cast<double>(i));
    for (std::size_t j = 0; j < d; ++j) s.push_back(offset + 0.1 * static_cast<double>(i) - 1.0 / (3.0 + j));
  }
  tr.states = Tensor::matrix(t, d, s);
  tr.seed = seed;
  return tr;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dgflow_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Dataset, SplitRoundTripIsBitIdentical) {
  const std::vector<Trajectory> split = {traj(5, 3, 0.1, 0.0, 7), traj(5, 3, 0.1, 1.0, 8)};
  const auto bytes = encode_split(split, Precision::f64);
  Precision p = Precision::f32;
  const auto back = decode_split(bytes, &p);
  EXPECT_EQ(p, Precision::f64);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].seed, split[i].seed);
    EXPECT_EQ(back[i].times, split[i].times);
    EXPECT_EQ(back[i].states.values(), split[i].states.values());
  }
  EXPECT_EQ(encode_split(back, Precision::f64), bytes);
}

TEST(Dataset, SinglePrecisionSplitIsStable) {
  const auto once = decode_split(encode_split({traj(5, 3, 0.1, 0.0, 7)}, Precision::f32));
  EXPECT_EQ(once[0].states.precision(), Precision::f32);
  EXPECT_EQ(encode_split(decode_split(encode_split(once, Precision::f32)), Precision::f32),
            encode_split(once, Precision::f32));
}

TEST(Dataset, TruncatedBlobIsChecksumError) {
  auto bytes = encode_split({traj(4, 2, 0.1, 0.0, 1)}, Precision::f64);
  bytes.resize(bytes.size() - 3);
  try {
    decode_split(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("checksum mismatch"), std::string::npos) << e.what();
  }
}

TEST(Dataset, FlippedByteIsChecksumError) {
  auto bytes = encode_split({traj(4, 2, 0.1, 0.0, 1)}, Precision::f64);
  bytes[40] ^= 0x10;
  EXPECT_THROW(decode_split(bytes), FormatError);
}

TEST(Dataset, ForeignMagicIsRejected) {
  auto bytes = encode_split({traj(4, 2, 0.1, 0.0, 1)}, Precision::f64);
  bytes[0] = 'X';
  try {
    decode_split(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown magic bytes"), std::string::npos) << e.what();
  }
  EXPECT_THROW(decode_split({}), FormatError);
}

TEST(Dataset, Crc32KnownValue) {
  const std::string s = "123456789";
  EXPECT_EQ(crc32_bytes(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()), 0xCBF43926u);
}

TEST(Dataset, DirectoryRoundTrip) {
  Dataset ds;
  ds.system = "mass_spring";
  ds.params = {{"k", 1.0}};
  ds.seed = 42;
  ds.dt = 0.1;
  ds.noise = 0.1;
  ds.train = {traj(6, 2, 0.1, 0.0, 1), traj(6, 2, 0.1, 2.0, 2)};
  ds.test = {traj(6, 2, 0.1, -1.0, 3)};
  ds.notes["generator"] = "hand made";
  const fs::path dir = scratch("roundtrip");
  save_dataset(dir, ds);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_FALSE(fs::exists(dir / "long_term.bin"));
  const Dataset back = load_dataset(dir);
  EXPECT_EQ(back.system, ds.system);
  EXPECT_EQ(back.params, ds.params);
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.dt, 0.1);
  EXPECT_EQ(back.notes, ds.notes);
  ASSERT_EQ(back.train.size(), 2u);
  EXPECT_EQ(back.train[1].states.values(), ds.train[1].states.values());
  EXPECT_TRUE(back.long_term.empty());
  fs::remove_all(dir);
}

TEST(Dataset, MissingDirectoryFails) {
  EXPECT_THROW(load_dataset(scratch("absent")), std::runtime_error);
}

TEST(Dataset, MakePairsCollectsEveryStep) {
  const PairSet p = make_pairs({traj(4, 2, 0.1, 0.0, 1), traj(3, 2, 0.1, 5.0, 2)}, 0.1);
  ASSERT_EQ(p.size(), 5u);
  EXPECT_EQ(p.dt, 0.1);
  EXPECT_DOUBLE_EQ(p.u1.at(0, 0) - p.u0.at(0, 0), 0.1);
  EXPECT_DOUBLE_EQ(p.u0.at(3, 0), 5.0 - 1.0 / 3.0);
  const PairSet g = p.gather({4, 0});
  EXPECT_EQ(g.size(), 2u);
  EXPECT_EQ(g.u0.at(1, 1), p.u0.at(0, 1));
}

TEST(Dataset, MakePairsRejectsOtherStep) {
  EXPECT_THROW(make_pairs({traj(4, 2, 0.2, 0.0, 1)}, 0.1), std::invalid_argument);
}

TEST(Dataset, TrajectoryValidation) {
  Trajectory tr = traj(4, 2, 0.1, 0.0, 1);
  EXPECT_NO_THROW(tr.validate());
  EXPECT_NEAR(tr.uniform_dt(), 0.1, 1e-15);
  tr.times[2] = tr.times[1];
  EXPECT_THROW(tr.validate(), std::invalid_argument);
}
