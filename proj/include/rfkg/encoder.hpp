#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rfkg/tensor.hpp"

namespace rfkg {

/// Pooled question vector plus one hidden state per token.
struct QuestionEncoding {
  Vector pooled;
  Matrix hidden;  // tokens.size() x dim
  std::vector<std::string> tokens;

  std::size_t dim() const noexcept { return pooled.size(); }
  std::size_t length() const noexcept { return tokens.size(); }
};

enum class EncoderKind { kHash, kPrecomputed };

struct EncoderConfig {
  std::size_t dim = 64;
  EncoderKind kind = EncoderKind::kHash;
  std::uint64_t seed = 0;
  std::filesystem::path precomputed_file;  // kPrecomputed only
};

/// Lowercases, removes ASCII punctuation, splits on whitespace.
/// Bytes >= 0x80 are kept so UTF-8 labels survive intact.
std::vector<std::string> tokenize(std::string_view text);

class QuestionEncoder {
 public:
  virtual ~QuestionEncoder() = default;
  virtual std::size_t dim() const noexcept = 0;
  virtual QuestionEncoding encode(std::string_view question_id, std::string_view question) const = 0;
};

/// Each token maps to a pseudo-random row in [-1, 1]^d derived from
/// (seed, token); the pooled vector is the mean of the rows.
class HashEncoder final : public QuestionEncoder {
 public:
  HashEncoder(std::size_t dim, std::uint64_t seed);

  std::size_t dim() const noexcept override { return dim_; }
  QuestionEncoding encode(std::string_view question_id, std::string_view question) const override;

  void token_row(std::string_view token, std::span<double> out) const;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Serves encodings stored in a JSON-lines file keyed by question id.
class PrecomputedEncoder final : public QuestionEncoder {
 public:
  PrecomputedEncoder(const std::filesystem::path& file, std::size_t expected_dim);

  std::size_t dim() const noexcept override { return dim_; }
  QuestionEncoding encode(std::string_view question_id, std::string_view question) const override;

 private:
  std::size_t dim_;
  std::unordered_map<std::string, QuestionEncoding> records_;
};

std::unique_ptr<QuestionEncoder> make_encoder(const EncoderConfig& cfg);

/// One JSON-lines record in the precomputed format.
std::string encoding_to_json_line(std::string_view question_id, const QuestionEncoding& enc);

}  // namespace rfkg
