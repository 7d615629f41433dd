#include "rfkg/train.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "rfkg/error.hpp"
#include "rfkg/hash.hpp"
#include "rfkg/random.hpp"

namespace rfkg {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& text, const std::string& source, std::size_t line,
               const std::string& key) {
  T value{};
  if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      value = static_cast<T>(std::stod(text, &used));
      if (used != text.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      throw ParseError(source, line, "bad number for '" + key + "': " + text);
    }
  } else {
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
      throw ParseError(source, line, "bad integer for '" + key + "': " + text);
  }
  return value;
}

bool parse_bool(const std::string& text, const std::string& source, std::size_t line,
                const std::string& key) {
  if (text == "true" || text == "1" || text == "on" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "off" || text == "no") return false;
  throw ParseError(source, line, "bad boolean for '" + key + "': " + text);
}

}  // namespace

TrainConfig parse_train_config(std::istream& in, const std::string& source) {
  TrainConfig cfg;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const auto text = trim(raw);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError(source, line, "expected key = value");
    const auto key = trim(std::string_view(text).substr(0, eq));
    const auto value = trim(std::string_view(text).substr(eq + 1));
    if (key == "T") cfg.steps = parse_number<std::size_t>(value, source, line, key);
    else if (key == "d") cfg.dim = parse_number<std::size_t>(value, source, line, key);
    else if (key == "epochs") cfg.epochs = parse_number<std::size_t>(value, source, line, key);
    else if (key == "lr") cfg.lr = parse_number<double>(value, source, line, key);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(value, source, line, key);
    else if (key == "encoder_seed") cfg.encoder_seed = parse_number<std::uint64_t>(value, source, line, key);
    else if (key == "clamp") cfg.clamp = parse_bool(value, source, line, key);
    else if (key == "mask_threshold") cfg.mask_threshold = parse_number<double>(value, source, line, key);
    else if (key == "use_mask") cfg.use_mask = parse_bool(value, source, line, key);
    else if (key == "batch_size") cfg.batch_size = parse_number<std::size_t>(value, source, line, key);
    else if (key == "beta1") cfg.beta1 = parse_number<double>(value, source, line, key);
    else if (key == "beta2") cfg.beta2 = parse_number<double>(value, source, line, key);
    else if (key == "epsilon") cfg.epsilon = parse_number<double>(value, source, line, key);
    else if (key == "optimizer") {
      if (value == "adam") cfg.optimizer = OptimizerKind::kAdam;
      else if (value == "radam") cfg.optimizer = OptimizerKind::kRAdam;
      else throw ParseError(source, line, "optimizer must be adam or radam");
    } else {
      throw ParseError(source, line, "unknown key '" + key + "'");
    }
  }
  if (cfg.steps < 1) throw ConfigError(source + ": T must be >= 1");
  if (cfg.dim < 8) throw ConfigError(source + ": d must be >= 8");
  if (cfg.lr < 0.0) throw ConfigError(source + ": lr must be >= 0");
  if (cfg.batch_size < 1) throw ConfigError(source + ": batch_size must be >= 1");
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open training config: " + path.string());
  return parse_train_config(in, path.string());
}

void write_train_config(std::ostream& out, const TrainConfig& cfg) {
  std::ostringstream lr, thr;
  lr.precision(17);
  thr.precision(17);
  lr << cfg.lr;
  thr << cfg.mask_threshold;
  out << "T = " << cfg.steps << '\n'
      << "d = " << cfg.dim << '\n'
      << "epochs = " << cfg.epochs << '\n'
      << "lr = " << lr.str() << '\n'
      << "seed = " << cfg.seed << '\n'
      << "encoder_seed = " << cfg.encoder_seed << '\n'
      << "clamp = " << (cfg.clamp ? "true" : "false") << '\n'
      << "mask_threshold = " << thr.str() << '\n'
      << "use_mask = " << (cfg.use_mask ? "true" : "false") << '\n'
      << "batch_size = " << cfg.batch_size << '\n'
      << "optimizer = " << (cfg.optimizer == OptimizerKind::kAdam ? "adam" : "radam") << '\n';
}

// --- optimizer ---------------------------------------------------------------

Optimizer::Optimizer(const ReasonerParams& shape, const TrainConfig& cfg)
    : kind_(cfg.optimizer), lr_(cfg.lr), beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.epsilon) {
  m_.assign(shape.size(), 0.0);
  v_.assign(shape.size(), 0.0);
}

void Optimizer::step(ReasonerParams& params, const ReasonerParams& grads) {
  ++t_;
  const double t = static_cast<double>(t_);
  const double bias1 = 1.0 - std::pow(beta1_, t);
  const double bias2 = 1.0 - std::pow(beta2_, t);

  // RAdam rectification term; rho <= 5 falls back to un-normalized momentum.
  const double rho_inf = 2.0 / (1.0 - beta2_) - 1.0;
  const double rho_t = rho_inf - 2.0 * t * std::pow(beta2_, t) / bias2;
  bool adaptive = true;
  double rect = 1.0;
  if (kind_ == OptimizerKind::kRAdam) {
    adaptive = rho_t > 5.0;
    if (adaptive)
      rect = std::sqrt((rho_t - 4.0) * (rho_t - 2.0) * rho_inf /
                       ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
  }

  std::vector<std::span<const double>> grad_blocks;
  grads.for_each_block([&](ParamGroup, std::span<const double> b) { grad_blocks.push_back(b); });
  std::size_t block = 0, offset = 0;
  params.for_each_block([&](ParamGroup, std::span<double> p) {
    auto g = grad_blocks[block++];
    for (std::size_t i = 0; i < p.size(); ++i, ++offset) {
      auto& m = m_[offset];
      auto& v = v_[offset];
      m = beta1_ * m + (1.0 - beta1_) * g[i];
      v = beta2_ * v + (1.0 - beta2_) * g[i] * g[i];
      const double m_hat = m / bias1;
      if (adaptive) {
        const double v_hat = std::sqrt(v / bias2);
        p[i] -= lr_ * rect * m_hat / (v_hat + eps_);
      } else {
        p[i] -= lr_ * m_hat;
      }
    }
  });
}

// --- training loop -------------------------------------------------------------

namespace {

void zero(ReasonerParams& p) {
  p.for_each_block([](ParamGroup, std::span<double> b) { std::fill(b.begin(), b.end(), 0.0); });
}

void scale(ReasonerParams& p, double factor) {
  p.for_each_block([&](ParamGroup, std::span<double> b) {
    for (auto& v : b) v *= factor;
  });
}

}  // namespace

double batch_gradient(std::span<const TrainingSample* const> batch, const KnowledgeGraph& kg,
                      const ReasonerParams& params, const ReasonerConfig& cfg,
                      ReasonerParams& grads) {
  zero(grads);
  double total = 0.0;
  for (const auto* sample : batch) {
    const auto& graph = sample->graph ? *sample->graph : kg;
    double l = 0.0;
    try {
      auto trace = forward(sample->encoding, sample->topics, graph, params, cfg);
      l = backward(trace, sample->encoding, graph, params, sample->answer, cfg, grads);
    } catch (const DataError&) {
      throw;
    } catch (const Error& e) {
      throw Error("training sample '" + sample->id + "': " + e.what());
    }
    if (!std::isfinite(l)) throw Error("non-finite loss on training sample '" + sample->id + "'");
    total += l;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  scale(grads, inv);
  return total * inv;
}

TrainResult train(const std::vector<TrainingSample>& dataset, const KnowledgeGraph& kg,
                  const TrainConfig& cfg) {
  return train(dataset, kg, cfg,
               ReasonerParams::random(cfg.dim, kg.num_relations(), cfg.steps, cfg.seed));
}

TrainResult train(const std::vector<TrainingSample>& dataset, const KnowledgeGraph& kg,
                  const TrainConfig& cfg, ReasonerParams initial) {
  if (dataset.empty()) throw DataError("training set is empty");
  initial.check_shape(cfg.dim, kg.num_relations(), cfg.steps);
  TrainResult result{std::move(initial), {}};
  auto& params = result.params;
  const auto rcfg = cfg.reasoner();
  Optimizer opt(params, cfg);
  auto grads = ReasonerParams::zeros(params.dim, params.num_relations, params.steps);
  Rng rng(splitmix64(cfg.seed ^ 0x5eedULL));

  std::vector<const TrainingSample*> order;
  for (const auto& s : dataset) order.push_back(&s);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::span<const TrainingSample* const> batch(order.data() + begin, end - begin);
      const double mean = batch_gradient(batch, kg, params, rcfg, grads);
      epoch_loss += mean * static_cast<double>(batch.size());
      opt.step(params, grads);
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(order.size()));
    if (!params.all_finite())
      throw Error("parameters became non-finite in epoch " + std::to_string(epoch + 1));
  }
  return result;
}

}  // namespace rfkg
