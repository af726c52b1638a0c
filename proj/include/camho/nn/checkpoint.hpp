#pragma once

#include <filesystem>
#include <string>

#include "camho/nn/arch.hpp"
#include "json.hpp"

namespace camho::nn {

/// Binary layout, all integers little-endian:
///   "CAMHOQNN"  u32 version
///   u64 n, n bytes of JSON: {"arch": ..., "metadata": ...}
///   u32 block count, then per block:
///     u16 name length, name, u8 rank, rank x u32 dims, u64 count, count x f64
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  ArchSpec arch;
  Params params;
  nlohmann::json metadata = nlohmann::json::object();
};

std::string serialize_checkpoint(const Checkpoint& ck);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void write_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace camho::nn
