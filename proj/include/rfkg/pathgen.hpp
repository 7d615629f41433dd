#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "rfkg/entity_state.hpp"
#include "rfkg/graph.hpp"
#include "rfkg/reasoner.hpp"

namespace rfkg {

/// Alternating entity/relation walk from a topic entity. `step_scores[i]` is the
/// filtered relation score used on hop i+1; `score` is their mean.
struct ReasoningPath {
  std::vector<EntityId> entities;
  std::vector<RelationId> relations;
  std::vector<double> step_scores;
  double score = 0.0;

  std::size_t hops() const noexcept { return relations.size(); }
  EntityId source() const { return entities.front(); }
  EntityId target() const { return entities.back(); }

  bool same_walk(const ReasoningPath& other) const {
    return entities == other.entities && relations == other.relations;
  }
};

struct PathConfig {
  static constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

  std::size_t top_k = 10;        // K
  std::size_t per_entity = 1;    // N
  std::size_t beam = 1000;       // B
  double threshold = 1e-6;       // minimum step-filtered relation score for a hop

  void validate() const;
};

using RankedEntity = std::pair<EntityId, double>;

/// Highest-scoring entities, ties broken by ascending id; zero scores never appear.
std::vector<RankedEntity> top_k_entities(const EntityStateVector& scores, std::size_t k);

/// Walks the per-step filtered scores of `trace` for t = 1..H and returns every
/// distinct path (up to the beam bound) whose terminal entity is in the top-K set.
std::vector<ReasoningPath> enumerate_paths(const ReasoningTrace& trace,
                                           std::span<const EntityId> topics,
                                           const KnowledgeGraph& kg, const PathConfig& cfg);

/// At most N paths per top-K entity, best first, grouped in entity rank order.
std::vector<ReasoningPath> select_paths(const std::vector<ReasoningPath>& candidates,
                                        std::span<const RankedEntity> topk, std::size_t n);

/// Top-K entities that no candidate path reaches.
std::vector<EntityId> entities_without_paths(const std::vector<ReasoningPath>& candidates,
                                             std::span<const RankedEntity> topk);

/// Orders paths by score desc, then fewer hops, then relation ids, then entity ids.
bool path_precedes(const ReasoningPath& a, const ReasoningPath& b);

}  // namespace rfkg
