#pragma once

#include <cstdint>
#include <vector>

#include "rfkg/dataset.hpp"
#include "rfkg/graph.hpp"

namespace rfkg {

/// Family-style knowledge graphs where "who is X's brother?" is answerable
/// either through a direct `brother` triple (gold_hops = 1) or only through
/// the `father`/`mother` then `son` chain (gold_hops = 2).
///
/// Each pair is a family of four: father, mother and two sons. Every family
/// has the parent/child/spouse chain; direct families also carry the
/// symmetric `brother` triples. Every person additionally points to shared
/// attribute entities through distractor relations (lives_in, occupation, ...).
struct SynthConfig {
  std::size_t train_pairs = 500;
  std::size_t test_pairs = 100;
  double direct_fraction = 0.5;
  /// Total entity budget; 0 derives 4 * pairs + attribute_values.
  std::size_t num_entities = 0;
  std::size_t attribute_values = 40;
  std::size_t distractor_relations = 3;
};

struct SynthData {
  KnowledgeGraph graph;
  std::vector<QaExample> train;
  std::vector<QaExample> test;
};

inline constexpr std::size_t kSynthFamilySize = 4;
inline constexpr std::size_t kMaxDistractorRelations = 6;

SynthData synth_generate(const SynthConfig& cfg, std::uint64_t seed);

}  // namespace rfkg
