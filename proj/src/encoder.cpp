#include "rfkg/encoder.hpp"

#include <cctype>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "rfkg/error.hpp"
#include "rfkg/hash.hpp"

namespace rfkg {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (c < 0x80 && std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else if (c < 0x80 && std::ispunct(c)) {
      continue;
    } else if (c < 0x80 && !std::isprint(c)) {
      continue;
    } else {
      current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

// --- HashEncoder -------------------------------------------------------------

HashEncoder::HashEncoder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 8) throw ConfigError("encoder dimension must be >= 8, got " + std::to_string(dim));
}

void HashEncoder::token_row(std::string_view token, std::span<double> out) const {
  std::uint64_t state = splitmix64(seed_) ^ fnv1a(token);
  for (auto& v : out) {
    state = splitmix64(state);
    v = 2.0 * (static_cast<double>(state >> 11) * 0x1.0p-53) - 1.0;
  }
}

QuestionEncoding HashEncoder::encode(std::string_view /*question_id*/,
                                     std::string_view question) const {
  QuestionEncoding enc;
  enc.tokens = tokenize(question);
  if (enc.tokens.empty()) throw DataError("cannot encode an empty question");
  enc.hidden = Matrix(enc.tokens.size(), dim_);
  enc.pooled.assign(dim_, 0.0);
  for (std::size_t i = 0; i < enc.tokens.size(); ++i) {
    auto row = enc.hidden.row(i);
    token_row(enc.tokens[i], row);
    for (std::size_t k = 0; k < dim_; ++k) enc.pooled[k] += row[k];
  }
  const double inv = 1.0 / static_cast<double>(enc.tokens.size());
  for (auto& v : enc.pooled) v *= inv;
  return enc;
}

// --- PrecomputedEncoder --------------------------------------------------------

namespace {

double as_float32(const nlohmann::json& v) {
  return static_cast<double>(static_cast<float>(v.get<double>()));
}

}  // namespace

PrecomputedEncoder::PrecomputedEncoder(const std::filesystem::path& file, std::size_t expected_dim)
    : dim_(expected_dim) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open encoding file: " + file.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      const auto id = j.at("id").get<std::string>();
      const auto d = j.at("d").get<std::size_t>();
      if (d != dim_)
        throw ParseError(file.string(), line_no,
                         "dimension " + std::to_string(d) + " != " + std::to_string(dim_));
      QuestionEncoding enc;
      enc.tokens = j.at("tokens").get<std::vector<std::string>>();
      const auto& hidden = j.at("hidden");
      if (enc.tokens.empty() || hidden.size() != enc.tokens.size() * d)
        throw ParseError(file.string(), line_no, "hidden must hold tokens x d values");
      enc.hidden = Matrix(enc.tokens.size(), d);
      for (std::size_t i = 0; i < hidden.size(); ++i) enc.hidden.data[i] = as_float32(hidden[i]);
      if (j.contains("pooled")) {
        const auto& pooled = j.at("pooled");
        if (pooled.size() != d) throw ParseError(file.string(), line_no, "pooled must hold d values");
        for (const auto& v : pooled) enc.pooled.push_back(as_float32(v));
      } else {
        enc.pooled.assign(d, 0.0);
        for (std::size_t i = 0; i < enc.tokens.size(); ++i)
          for (std::size_t k = 0; k < d; ++k) enc.pooled[k] += enc.hidden(i, k);
        for (auto& v : enc.pooled) v /= static_cast<double>(enc.tokens.size());
      }
      for (double v : enc.hidden.data)
        if (!std::isfinite(v)) throw ParseError(file.string(), line_no, "non-finite value");
      if (!records_.emplace(id, std::move(enc)).second)
        throw ParseError(file.string(), line_no, "duplicate id '" + id + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(file.string(), line_no, e.what());
    }
  }
}

QuestionEncoding PrecomputedEncoder::encode(std::string_view question_id,
                                            std::string_view /*question*/) const {
  auto it = records_.find(std::string(question_id));
  if (it == records_.end())
    throw DataError("no precomputed encoding for question '" + std::string(question_id) + "'");
  return it->second;
}

std::unique_ptr<QuestionEncoder> make_encoder(const EncoderConfig& cfg) {
  if (cfg.dim < 8) throw ConfigError("encoder dimension must be >= 8");
  switch (cfg.kind) {
    case EncoderKind::kHash:
      return std::make_unique<HashEncoder>(cfg.dim, cfg.seed);
    case EncoderKind::kPrecomputed:
      return std::make_unique<PrecomputedEncoder>(cfg.precomputed_file, cfg.dim);
  }
  throw ConfigError("unknown encoder kind");
}

std::string encoding_to_json_line(std::string_view question_id, const QuestionEncoding& enc) {
  nlohmann::json j;
  j["id"] = question_id;
  j["d"] = enc.dim();
  j["tokens"] = enc.tokens;
  auto& hidden = j["hidden"] = nlohmann::json::array();
  for (double v : enc.hidden.data) hidden.push_back(static_cast<float>(v));
  auto& pooled = j["pooled"] = nlohmann::json::array();
  for (double v : enc.pooled) pooled.push_back(static_cast<float>(v));
  return j.dump();
}

}  // namespace rfkg
