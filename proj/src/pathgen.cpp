#include "rfkg/pathgen.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "rfkg/error.hpp"

namespace rfkg {

void PathConfig::validate() const {
  if (top_k < 1) throw ConfigError("K must be >= 1");
  if (per_entity < 1) throw ConfigError("N must be >= 1");
  if (beam < top_k) throw ConfigError("beam must be >= K");
}

std::vector<RankedEntity> top_k_entities(const EntityStateVector& scores, std::size_t k) {
  if (k < 1) throw ConfigError("K must be >= 1");
  std::vector<RankedEntity> ranked(scores.entries().begin(), scores.entries().end());
  auto better = [](const RankedEntity& a, const RankedEntity& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  };
  if (ranked.size() > k) {
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end(),
                      better);
    ranked.resize(k);
  } else {
    std::sort(ranked.begin(), ranked.end(), better);
  }
  return ranked;
}

bool path_precedes(const ReasoningPath& a, const ReasoningPath& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.hops() != b.hops()) return a.hops() < b.hops();
  if (a.relations != b.relations) return a.relations < b.relations;
  return a.entities < b.entities;
}

std::vector<ReasoningPath> enumerate_paths(const ReasoningTrace& trace,
                                           std::span<const EntityId> topics,
                                           const KnowledgeGraph& kg, const PathConfig& cfg) {
  cfg.validate();
  const auto topk = top_k_entities(trace.final_state, cfg.top_k);
  std::unordered_set<EntityId> targets;
  for (const auto& [id, score] : topk) targets.insert(id);

  std::vector<EntityId> sources(topics.begin(), topics.end());
  std::sort(sources.begin(), sources.end());
  sources.erase(std::unique(sources.begin(), sources.end()), sources.end());

  std::vector<ReasoningPath> frontier;  // L_m, in rank-lexicographic order
  for (auto e : sources) {
    if (e >= kg.num_entities()) throw DataError("topic entity out of range");
    frontier.push_back({{e}, {}, {}, 0.0});
  }

  std::vector<ReasoningPath> candidates;  // L_c
  std::set<std::pair<std::vector<EntityId>, std::vector<RelationId>>> seen;
  const auto hops = std::min<std::size_t>(static_cast<std::size_t>(trace.hop.hops), trace.steps.size());

  for (std::size_t t = 1; t <= hops && !frontier.empty(); ++t) {
    const auto& step = trace.steps[t - 1];
    const auto& prev_state = t == 1 ? trace.initial_state : trace.steps[t - 2].entity_state;
    const auto& filtered = step.masked.filtered_scores;

    std::vector<ReasoningPath> extended;
    std::vector<ReasoningPath> children;
    for (const auto& parent : frontier) {
      const EntityId tail = parent.target();
      if (prev_state[tail] <= 0.0) continue;
      children.clear();
      for (auto j : kg.outgoing(tail)) {
        const auto& tr = kg.triple(j);
        const double f = filtered[tr.relation];
        if (!(f > cfg.threshold)) continue;
        ReasoningPath child = parent;
        child.entities.push_back(tr.object);
        child.relations.push_back(tr.relation);
        child.step_scores.push_back(f);
        double sum = 0.0;
        for (double s : child.step_scores) sum += s;
        child.score = sum / static_cast<double>(child.step_scores.size());
        children.push_back(std::move(child));
      }
      std::stable_sort(children.begin(), children.end(), path_precedes);
      for (auto& c : children) extended.push_back(std::move(c));
    }

    for (const auto& p : extended) {
      if (!targets.contains(p.target())) continue;
      if (seen.emplace(p.entities, p.relations).second) candidates.push_back(p);
    }
    if (extended.size() > cfg.beam) extended.resize(cfg.beam);
    frontier = std::move(extended);
  }
  return candidates;
}

std::vector<ReasoningPath> select_paths(const std::vector<ReasoningPath>& candidates,
                                        std::span<const RankedEntity> topk, std::size_t n) {
  std::vector<ReasoningPath> out;
  std::vector<const ReasoningPath*> group;
  for (const auto& [entity, score] : topk) {
    group.clear();
    for (const auto& p : candidates)
      if (p.target() == entity) group.push_back(&p);
    std::sort(group.begin(), group.end(),
              [](const ReasoningPath* a, const ReasoningPath* b) { return path_precedes(*a, *b); });
    for (std::size_t i = 0; i < group.size() && i < n; ++i) out.push_back(*group[i]);
  }
  return out;
}

std::vector<EntityId> entities_without_paths(const std::vector<ReasoningPath>& candidates,
                                             std::span<const RankedEntity> topk) {
  std::unordered_set<EntityId> reached;
  for (const auto& p : candidates) reached.insert(p.target());
  std::vector<EntityId> missing;
  for (const auto& [entity, score] : topk)
    if (!reached.contains(entity)) missing.push_back(entity);
  return missing;
}

}  // namespace rfkg
