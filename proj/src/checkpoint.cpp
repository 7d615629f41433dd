#include "rfkg/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "rfkg/error.hpp"

namespace rfkg {

namespace {

constexpr std::array<char, 8> kMagic = {'R', 'F', 'K', 'G', 'C', 'K', 'P', 'T'};

template <typename U>
void put_le(std::ostream& out, U value) {
  static_assert(std::is_unsigned_v<U>);
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw DataError("checkpoint truncated");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const auto& p = ckpt.params;
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.dim));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.num_relations));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.steps));
  std::uint32_t flags = (ckpt.config.use_mask ? 1u : 0u) | (ckpt.config.clamp ? 2u : 0u) |
                        (ckpt.encoder == EncoderKind::kPrecomputed ? 4u : 0u);
  put_le<std::uint32_t>(out, flags);
  put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(ckpt.config.mask_threshold));
  put_le<std::uint64_t>(out, ckpt.relation_vocab_hash);
  put_le<std::uint64_t>(out, ckpt.encoder_seed);
  put_le<std::uint64_t>(out, p.size());
  p.for_each_block([&](ParamGroup, std::span<const double> block) {
    for (double v : block) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  });
  if (!out) throw Error("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw DataError("not a checkpoint file (bad magic)");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto d = get_le<std::uint32_t>(in);
  const auto m = get_le<std::uint32_t>(in);
  const auto t = get_le<std::uint32_t>(in);
  const auto flags = get_le<std::uint32_t>(in);
  Checkpoint ckpt;
  ckpt.config.use_mask = (flags & 1u) != 0;
  ckpt.config.clamp = (flags & 2u) != 0;
  ckpt.config.mask_threshold = std::bit_cast<double>(get_le<std::uint64_t>(in));
  ckpt.encoder = (flags & 4u) != 0 ? EncoderKind::kPrecomputed : EncoderKind::kHash;
  ckpt.relation_vocab_hash = get_le<std::uint64_t>(in);
  ckpt.encoder_seed = get_le<std::uint64_t>(in);
  const auto count = get_le<std::uint64_t>(in);
  ckpt.params = ReasonerParams::zeros(d, m, t);
  if (count != ckpt.params.size())
    throw DataError("checkpoint parameter count does not match its header shape");
  ckpt.params.for_each_block([&](ParamGroup, std::span<double> block) {
    for (auto& v : block) v = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(in)));
  });
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes after checkpoint");
  if (!ckpt.params.all_finite()) throw DataError("checkpoint contains non-finite parameters");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  return read_checkpoint(in);
}

}  // namespace rfkg
