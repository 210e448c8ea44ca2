#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "hibehrt/params.hpp"

namespace hibehrt {

// Binary checkpoint: magic "HIEHRCK1", u32 version, u64 config byte length
// plus canonical config text (sorted key=value lines), u64 tensor count,
// then per tensor: u32 name length, name bytes, u32 rank, u64 dims,
// float32 little-endian row-major values. The RNG/optimizer state travels
// inside the config text as ordinary keys.
inline constexpr char kCheckpointMagic[9] = "HIEHRCK1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::map<std::string, std::string> config;
  ParameterStore<float> params;
};

// Sorted "key=value\n" lines (std::map iteration order).
std::string canonical_config_text(const std::map<std::string, std::string>& config);
std::map<std::string, std::string> parse_config_text(const std::string& text);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Copy checkpoint tensors into an existing store; every name must exist
// with an identical shape (ShapeMismatch / ConfigMismatch otherwise).
void load_params_into(const Checkpoint& ckpt, ParameterStore<float>& store);

}  // namespace hibehrt
