#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "dgflow/models.hpp"

namespace dgflow {

struct Checkpoint {
  std::string model;  // dgnet, hnn or node
  ArchSpec arch;
  Precision precision = Precision::f64;
  ParamStore params;
  std::optional<Tensor> friction;  // learned friction of G = S - R
  std::string config;              // JSON echo of the training configuration
};

// Layout, little-endian:
//   "DGFC" u32 version
//   str model, str arch_json, u8 precision
//   u64 n_params, then per parameter: str name, u64 rank, u64 dims[rank], f64 values
//   u8 has_friction [, u64 n, f64 values[n]]
//   str config
//   u32 crc32 of every preceding byte
// where str is u64 length followed by UTF-8 bytes.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dgflow
