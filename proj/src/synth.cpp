#include "rfkg/synth.hpp"

#include <array>
#include <cstdio>
#include <span>
#include <cmath>
#include <set>
#include <string>

#include "rfkg/error.hpp"
#include "rfkg/random.hpp"

namespace rfkg {

namespace {

constexpr std::array<const char*, kMaxDistractorRelations> kDistractors = {
    "lives_in", "occupation", "born_in", "nationality", "religion", "school"};

constexpr std::array<const char*, 4> kTemplates = {
    "who is {}'s brother?", "who is the brother of {}?", "name the brother of {}",
    "{}'s brother is who?"};

class NameMaker {
 public:
  explicit NameMaker(Rng& rng) : rng_(rng) {}

  std::string word(std::size_t min_syllables, std::size_t max_syllables) {
    static constexpr std::array<const char*, 16> onset = {"b", "d", "f", "g", "k", "l", "m", "n",
                                                          "p", "r", "s", "t", "v", "z", "sh", "th"};
    static constexpr std::array<const char*, 6> vowel = {"a", "e", "i", "o", "u", "ae"};
    static constexpr std::array<const char*, 6> coda = {"", "", "n", "r", "l", "s"};
    std::string w;
    const auto count = min_syllables + rng_.below(max_syllables - min_syllables + 1);
    for (std::size_t i = 0; i < count; ++i) {
      w += onset[rng_.below(onset.size())];
      w += vowel[rng_.below(vowel.size())];
    }
    w += coda[rng_.below(coda.size())];
    w[0] = static_cast<char>(w[0] - 'a' + 'A');
    return w;
  }

  std::string unique(std::size_t min_syllables, std::size_t max_syllables) {
    while (true) {
      auto w = word(min_syllables, max_syllables);
      if (used_.insert(w).second) return w;
    }
  }

 private:
  Rng& rng_;
  std::set<std::string> used_;
};

std::string fill(const char* tmpl, const std::string& name) {
  std::string out(tmpl);
  out.replace(out.find("{}"), 2, name);
  return out;
}

}  // namespace

SynthData synth_generate(const SynthConfig& cfg, std::uint64_t seed) {
  const std::size_t pairs = cfg.train_pairs + cfg.test_pairs;
  if (pairs == 0) throw ConfigError("synth: need at least one pair");
  if (cfg.direct_fraction < 0.0 || cfg.direct_fraction > 1.0)
    throw ConfigError("synth: direct_fraction must lie in [0, 1]");
  if (cfg.distractor_relations > kMaxDistractorRelations)
    throw ConfigError("synth: at most " + std::to_string(kMaxDistractorRelations) +
                      " distractor relations");
  const std::size_t family_entities = kSynthFamilySize * pairs;
  std::size_t attributes = cfg.attribute_values;
  if (cfg.num_entities != 0) {
    if (cfg.num_entities < family_entities)
      throw ConfigError("synth: " + std::to_string(pairs) + " pairs need at least " +
                        std::to_string(family_entities) + " entities, budget is " +
                        std::to_string(cfg.num_entities));
    attributes = cfg.num_entities - family_entities;
  }
  if (cfg.distractor_relations > 0 && attributes == 0)
    throw ConfigError("synth: distractor relations need at least one attribute entity");

  Rng rng(seed);
  NameMaker names(rng);
  KnowledgeGraph::Builder builder;
  for (const char* r : {"father", "mother", "son", "spouse", "brother"}) builder.add_relation(r);
  for (std::size_t k = 0; k < cfg.distractor_relations; ++k) builder.add_relation(kDistractors[k]);

  std::vector<std::string> attribute_names;
  for (std::size_t a = 0; a < attributes; ++a) attribute_names.push_back(names.unique(3, 3));
  for (const auto& a : attribute_names) builder.add_entity(a);

  // Exact direct/chain counts per split.
  auto split_flags = [&](std::size_t n) {
    const auto direct = static_cast<std::size_t>(std::llround(cfg.direct_fraction * static_cast<double>(n)));
    std::vector<char> flags(n, 0);
    for (std::size_t i = 0; i < direct; ++i) flags[i] = 1;
    rng.shuffle(std::span(flags));
    return flags;
  };
  auto train_flags = split_flags(cfg.train_pairs);
  auto test_flags = split_flags(cfg.test_pairs);

  SynthData data;
  auto make_family = [&](std::size_t index, bool direct) {
    const std::string surname = names.unique(2, 2);
    const std::string father = names.unique(1, 2) + " " + surname;
    const std::string mother = names.unique(1, 2) + " " + surname;
    const std::string topic = names.unique(1, 2) + " " + surname;
    const std::string brother = names.unique(1, 2) + " " + surname;
    for (const auto* child : {&topic, &brother}) {
      builder.add_triple(*child, "father", father);
      builder.add_triple(*child, "mother", mother);
      builder.add_triple(father, "son", *child);
      builder.add_triple(mother, "son", *child);
    }
    builder.add_triple(father, "spouse", mother);
    builder.add_triple(mother, "spouse", father);
    if (direct) {
      builder.add_triple(topic, "brother", brother);
      builder.add_triple(brother, "brother", topic);
    }
    for (const auto* person : {&father, &mother, &topic, &brother})
      for (std::size_t k = 0; k < cfg.distractor_relations; ++k)
        builder.add_triple(*person, kDistractors[k], attribute_names[rng.below(attributes)]);

    QaExample ex;
    char id[32];
    std::snprintf(id, sizeof id, "q%05zu", index);
    ex.id = id;
    ex.question = fill(kTemplates[rng.below(kTemplates.size())], topic);
    ex.topic_entities = {topic};
    ex.answers = {brother};
    ex.gold_hops = direct ? 1 : 2;
    return ex;
  };

  std::size_t index = 0;
  for (char direct : train_flags) data.train.push_back(make_family(index++, direct != 0));
  for (char direct : test_flags) data.test.push_back(make_family(index++, direct != 0));
  data.graph = std::move(builder).build();
  return data;
}

}  // namespace rfkg
