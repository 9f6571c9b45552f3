#pragma once

// Binary checkpoint, all integers little-endian:
//
//   magic "FKMADCKP" | u32 version | u64 step | u64 n, config text (n bytes)
//   u64 tensor count, then per tensor:
//     u32 name length, name | u32 rank | u64 extents[rank] | f64 values (IEEE bits)
//
// Tensors are written in name order, so equal contents give equal files.

#include <cstdint>
#include <string>

#include "fkmad/gradcheck.hpp"

namespace fkmad {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t step = 0;
  std::string config;  // resolved run configuration text
  ParamMap tensors;    // model parameters plus "norm.mean" / "norm.std"
};

std::string serialize_checkpoint(const Checkpoint& ck);
/// DataError for a bad magic, an unsupported version, or truncated content.
Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& source = "<memory>");

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fkmad
