#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "rfkg/encoder.hpp"
#include "rfkg/entity_state.hpp"
#include "rfkg/graph.hpp"
#include "rfkg/reasoner.hpp"

namespace rfkg {

enum class OptimizerKind { kAdam, kRAdam };

/// Key-value training configuration. The file form is one `key = value` per
/// line; `#` starts a comment.
struct TrainConfig {
  std::size_t steps = 2;          // T
  std::size_t dim = 64;           // d
  std::size_t epochs = 60;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::uint64_t encoder_seed = 0;
  bool clamp = true;
  double mask_threshold = 1e-6;
  bool use_mask = true;
  std::size_t batch_size = 16;
  OptimizerKind optimizer = OptimizerKind::kRAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  ReasonerConfig reasoner() const { return {mask_threshold, clamp, use_mask}; }
};

TrainConfig parse_train_config(std::istream& in, const std::string& source_name);
TrainConfig load_train_config(const std::filesystem::path& path);
void write_train_config(std::ostream& out, const TrainConfig& cfg);

struct TrainingSample {
  std::string id;
  QuestionEncoding encoding;
  std::vector<EntityId> topics;
  AnswerVector answer;
  /// Per-question subgraph; null means the graph passed to train().
  std::shared_ptr<const KnowledgeGraph> graph;
};

/// Per-parameter adaptive first-order optimizer (Adam or RAdam).
class Optimizer {
 public:
  Optimizer(const ReasonerParams& shape, const TrainConfig& cfg);

  void step(ReasonerParams& params, const ReasonerParams& grads);
  std::size_t iterations() const noexcept { return t_; }

 private:
  OptimizerKind kind_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

struct TrainResult {
  ReasonerParams params;
  std::vector<double> loss_history;  // mean sample loss per epoch
};

/// Mean loss and its gradient over a set of samples, summed in sample order.
double batch_gradient(std::span<const TrainingSample* const> batch, const KnowledgeGraph& kg,
                      const ReasonerParams& params, const ReasonerConfig& cfg,
                      ReasonerParams& grads);

TrainResult train(const std::vector<TrainingSample>& dataset, const KnowledgeGraph& kg,
                  const TrainConfig& cfg);

/// Continues from existing parameters.
TrainResult train(const std::vector<TrainingSample>& dataset, const KnowledgeGraph& kg,
                  const TrainConfig& cfg, ReasonerParams initial);

}  // namespace rfkg
