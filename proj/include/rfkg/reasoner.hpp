#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rfkg/encoder.hpp"
#include "rfkg/entity_state.hpp"
#include "rfkg/graph.hpp"
#include "rfkg/tensor.hpp"

namespace rfkg {

/// y = W x + b
struct Dense {
  Matrix weight;
  Vector bias;

  Dense() = default;
  Dense(std::size_t out, std::size_t in) : weight(out, in), bias(out, 0.0) {}

  friend bool operator==(const Dense&, const Dense&) = default;
};

enum class ParamGroup { kAttention, kRelationMlp, kRelationEmbedding, kHopHead };

std::string_view to_string(ParamGroup group);

/// Trainable weights of the stepwise reasoner.
///
///   attn_proj[t] : [q ; rel_ctx] (2d) -> attention query (d), one per step
///   kg_hidden    : q_t (d) -> d, tanh
///   kg_out       : d -> m, sigmoid gives relation scores
///   rel_embed    : m x d relation embeddings pooled into rel_ctx
///   hop_head     : [q ; mask] (d + m) -> T hop logits
struct ReasonerParams {
  std::size_t dim = 0;
  std::size_t num_relations = 0;
  std::size_t steps = 0;

  std::vector<Dense> attn_proj;
  Dense kg_hidden;
  Dense kg_out;
  Matrix rel_embed;
  Dense hop_head;

  static ReasonerParams zeros(std::size_t dim, std::size_t num_relations, std::size_t steps);
  static ReasonerParams random(std::size_t dim, std::size_t num_relations, std::size_t steps,
                               std::uint64_t seed);

  /// Visits every parameter block in checkpoint order.
  void for_each_block(const std::function<void(ParamGroup, std::span<double>)>& fn);
  void for_each_block(const std::function<void(ParamGroup, std::span<const double>)>& fn) const;

  std::size_t size() const;
  bool all_finite() const;
  void check_shape(std::size_t dim, std::size_t num_relations, std::size_t steps) const;

  friend bool operator==(const ReasonerParams&, const ReasonerParams&) = default;
};

/// Rounds every parameter to the nearest float32, matching a checkpoint round trip.
void round_to_float32(ReasonerParams& params);

struct ReasonerConfig {
  double mask_threshold = 1e-6;
  bool clamp = true;
  /// false realizes the mask ablation: raw scores are used in place of filtered
  /// ones and the hop head sees an all-zero mask.
  bool use_mask = true;
};

struct AttentionResult {
  Vector query;   // Q^t
  Vector attn;    // softmax weights over tokens
  Vector q_step;  // attention-weighted token states
};

struct RelationScoring {
  Vector hidden;  // tanh layer output
  Vector scores;  // sigmoid outputs, one per relation
};

/// Probability triple for one stored triple whose subject carried mass.
struct TripleActivation {
  std::uint32_t triple = 0;
  double sub_p = 0.0;
  double rel_p = 0.0;
  double obj_p = 0.0;
};

struct MaskedStep {
  std::vector<std::uint8_t> step_mask;
  Vector filtered_scores;
  /// Triples with sub_p > 0, in (subject, triple index) order. Any triple not
  /// listed has sub_p = obj_p = 0 and rel_p = raw_scores[relation].
  std::vector<TripleActivation> active;
};

struct Propagation {
  EntityStateVector state;
  /// Unclamped sums for every entity reached by an active triple.
  std::vector<std::pair<EntityId, double>> pre_clamp;
};

struct StepTrace {
  Vector rel_ctx_in;
  AttentionResult attention;
  RelationScoring scoring;
  MaskedStep masked;
  EntityStateVector entity_state;
  std::vector<std::pair<EntityId, double>> pre_clamp;
  Vector rel_ctx_out;

  const Vector& raw_scores() const noexcept { return scoring.scores; }
  const Vector& filtered_scores() const noexcept { return masked.filtered_scores; }
  const std::vector<std::uint8_t>& step_mask() const noexcept { return masked.step_mask; }
};

struct RelationMask {
  std::vector<std::uint8_t> bits;

  bool test(RelationId k) const { return bits.at(k) != 0; }
  std::size_t count() const;
  friend bool operator==(const RelationMask&, const RelationMask&) = default;
};

struct HopDistribution {
  Vector logits;
  Vector c;
  int hops = 1;  // 1-based argmax of c, lowest index on ties
};

struct ReasoningTrace {
  std::vector<StepTrace> steps;
  RelationMask mask;
  HopDistribution hop;
  EntityStateVector final_state;
  EntityStateVector initial_state;
};

// --- forward pieces ----------------------------------------------------------

/// `step` is 1-based.
AttentionResult step_attention(const QuestionEncoding& enc, std::span<const double> rel_ctx,
                               std::size_t step, const ReasonerParams& params);

RelationScoring relation_scores(std::span<const double> q_step, const ReasonerParams& params);

MaskedStep masked_step(const EntityStateVector& prev, std::span<const double> raw_scores,
                       const KnowledgeGraph& kg, const ReasonerConfig& cfg = {});

Propagation propagate_detailed(const EntityStateVector& prev, std::span<const double> scores,
                               const KnowledgeGraph& kg, bool clamp = true);

inline EntityStateVector propagate(const EntityStateVector& prev, std::span<const double> scores,
                                   const KnowledgeGraph& kg, bool clamp = true) {
  return propagate_detailed(prev, scores, kg, clamp).state;
}

/// Score-weighted mean of relation embeddings; zero vector when all scores are 0.
Vector relation_context(std::span<const double> filtered_scores, const ReasonerParams& params);

inline constexpr double kRelationContextEpsilon = 1e-12;

HopDistribution select_hops(std::span<const double> pooled_q, const RelationMask& mask,
                            const ReasonerParams& params);

ReasoningTrace forward(const QuestionEncoding& enc, std::span<const EntityId> topics,
                       const KnowledgeGraph& kg, const ReasonerParams& params,
                       const ReasonerConfig& cfg = {});

/// Squared L2 distance between the final scores and the multi-hot answer.
double loss(const EntityStateVector& final_state, const AnswerVector& answer);

/// Adds dLoss/dParams for one sample into `grads` (same shapes as params) and
/// returns the loss. Mask bits are constants; clamped coordinates pass no gradient.
double backward(const ReasoningTrace& trace, const QuestionEncoding& enc, const KnowledgeGraph& kg,
                const ReasonerParams& params, const AnswerVector& answer,
                const ReasonerConfig& cfg, ReasonerParams& grads);

}  // namespace rfkg
