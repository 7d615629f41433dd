#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "rfkg/encoder.hpp"
#include "rfkg/reasoner.hpp"

namespace rfkg {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary checkpoint, all integers and floats little-endian:
///
///   offset  size  field
///   0       8     magic "RFKGCKPT"
///   8       4     u32 format version (1)
///   12      4     u32 d
///   16      4     u32 m
///   20      4     u32 T
///   24      4     u32 flags (bit 0: use_mask, bit 1: clamp, bit 2: precomputed encoder)
///   28      8     f64 mask threshold
///   36      8     u64 relation vocabulary hash
///   44      8     u64 hash-encoder seed
///   52      8     u64 parameter count P
///   60      4*P   f32 parameters in ReasonerParams::for_each_block order
struct Checkpoint {
  ReasonerParams params;
  ReasonerConfig config;
  std::uint64_t relation_vocab_hash = 0;
  EncoderKind encoder = EncoderKind::kHash;
  std::uint64_t encoder_seed = 0;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rfkg
