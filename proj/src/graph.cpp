#include "rfkg/graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <istream>
#include <ostream>

#include "rfkg/error.hpp"
#include "rfkg/hash.hpp"

namespace rfkg {

namespace {

void build_csr(std::size_t n, const std::vector<Triple>& triples, bool by_subject,
               std::vector<std::uint32_t>& offsets, std::vector<std::uint32_t>& items) {
  offsets.assign(n + 1, 0);
  for (const auto& t : triples) ++offsets[(by_subject ? t.subject : t.object) + 1];
  for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
  items.assign(triples.size(), 0);
  std::vector<std::uint32_t> cursor(offsets.begin(), offsets.end() - 1);
  // Triples are visited in index order, so each bucket stays sorted.
  for (const auto& t : triples) items[cursor[by_subject ? t.subject : t.object]++] = t.index;
}

}  // namespace

std::optional<EntityId> KnowledgeGraph::find_entity(std::string_view name) const {
  auto it = entity_index_.find(std::string(name));
  if (it == entity_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> KnowledgeGraph::find_relation(std::string_view name) const {
  auto it = relation_index_.find(std::string(name));
  if (it == relation_index_.end()) return std::nullopt;
  return it->second;
}

EntityId KnowledgeGraph::entity(std::string_view name) const {
  auto id = find_entity(name);
  if (!id) throw DataError("entity not in graph: '" + std::string(name) + "'");
  return *id;
}

std::span<const std::uint32_t> KnowledgeGraph::outgoing(EntityId id) const {
  if (id >= num_entities()) throw DataError("entity id out of range: " + std::to_string(id));
  return {out_triples_.data() + out_offsets_[id], out_offsets_[id + 1] - out_offsets_[id]};
}

std::span<const std::uint32_t> KnowledgeGraph::incoming(EntityId id) const {
  if (id >= num_entities()) throw DataError("entity id out of range: " + std::to_string(id));
  return {in_triples_.data() + in_offsets_[id], in_offsets_[id + 1] - in_offsets_[id]};
}

bool KnowledgeGraph::contains(EntityId s, RelationId r, EntityId o) const {
  if (s >= num_entities()) return false;
  for (auto j : outgoing(s)) {
    const auto& t = triples_[j];
    if (t.relation == r && t.object == o) return true;
  }
  return false;
}

std::uint64_t KnowledgeGraph::relation_vocab_hash() const {
  Fnv1a h;
  for (const auto& name : relation_names_) {
    h.update(name);
    h.update("\n");
  }
  return h.digest();
}

// --- Builder ---------------------------------------------------------------

std::size_t KnowledgeGraph::Builder::KeyHash::operator()(
    const std::tuple<EntityId, RelationId, EntityId>& k) const noexcept {
  std::uint64_t x = std::get<0>(k);
  x = x * 0x9E3779B97F4A7C15ull ^ std::get<1>(k);
  x = x * 0x9E3779B97F4A7C15ull ^ std::get<2>(k);
  return static_cast<std::size_t>(splitmix64(x));
}

KnowledgeGraph::Builder::Builder(std::vector<std::string> fixed_relations) : fixed_relations_(true) {
  for (auto& name : fixed_relations) {
    auto id = static_cast<RelationId>(relation_names_.size());
    if (!relation_index_.emplace(name, id).second)
      throw ConfigError("duplicate relation in fixed vocabulary: " + name);
    relation_names_.push_back(std::move(name));
  }
}

EntityId KnowledgeGraph::Builder::add_entity(std::string_view name) {
  auto [it, inserted] =
      entity_index_.emplace(std::string(name), static_cast<EntityId>(entity_names_.size()));
  if (inserted) entity_names_.emplace_back(name);
  return it->second;
}

RelationId KnowledgeGraph::Builder::add_relation(std::string_view name) {
  if (auto it = relation_index_.find(std::string(name)); it != relation_index_.end())
    return it->second;
  if (fixed_relations_)
    throw DataError("relation not in the model vocabulary: '" + std::string(name) + "'");
  auto id = static_cast<RelationId>(relation_names_.size());
  relation_index_.emplace(std::string(name), id);
  relation_names_.emplace_back(name);
  return id;
}

bool KnowledgeGraph::Builder::add_triple(std::string_view subject, std::string_view relation,
                                         std::string_view object) {
  auto s = add_entity(subject);
  auto r = add_relation(relation);
  auto o = add_entity(object);
  return add_triple(s, r, o);
}

bool KnowledgeGraph::Builder::add_triple(EntityId s, RelationId r, EntityId o) {
  if (s >= entity_names_.size() || o >= entity_names_.size() || r >= relation_names_.size())
    throw DataError("triple references an unknown id");
  auto key = std::make_tuple(s, r, o);
  auto [it, inserted] = seen_.emplace(key, static_cast<std::uint32_t>(triples_.size()));
  if (inserted) triples_.push_back(key);
  return inserted;
}

void KnowledgeGraph::Builder::add_reverse_relations() {
  std::unordered_map<RelationId, RelationId> inverse;
  const auto forward = triples_;
  for (const auto& [s, r, o] : forward) {
    auto it = inverse.find(r);
    if (it == inverse.end()) {
      const std::string name = relation_names_[r] + std::string(kInverseSuffix);
      it = inverse.emplace(r, add_relation(name)).first;
    }
    add_triple(o, it->second, s);
  }
}

KnowledgeGraph KnowledgeGraph::Builder::build() && {
  KnowledgeGraph kg;
  kg.entity_names_ = std::move(entity_names_);
  kg.relation_names_ = std::move(relation_names_);
  kg.entity_index_ = std::move(entity_index_);
  kg.relation_index_ = std::move(relation_index_);
  kg.triples_.reserve(triples_.size());
  for (std::size_t i = 0; i < triples_.size(); ++i) {
    const auto& [s, r, o] = triples_[i];
    kg.triples_.push_back({s, r, o, static_cast<std::uint32_t>(i)});
  }
  build_csr(kg.num_entities(), kg.triples_, true, kg.out_offsets_, kg.out_triples_);
  build_csr(kg.num_entities(), kg.triples_, false, kg.in_offsets_, kg.in_triples_);
  return kg;
}

// --- file I/O --------------------------------------------------------------

KnowledgeGraph read_graph(std::istream& in, const std::string& source_name,
                          const GraphLoadOptions& options) {
  KnowledgeGraph::Builder builder = options.relation_vocab
                                        ? KnowledgeGraph::Builder(*options.relation_vocab)
                                        : KnowledgeGraph::Builder();
  std::string line;
  std::size_t line_no = 0, records = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string_view rest = line;
    std::string_view fields[3];
    std::size_t count = 0;
    while (true) {
      auto tab = rest.find('\t');
      if (count < 3) fields[count] = rest.substr(0, tab);
      ++count;
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (count != 3)
      throw ParseError(source_name, line_no,
                       "expected 3 tab-separated fields, found " + std::to_string(count));
    for (auto f : fields)
      if (f.empty()) throw ParseError(source_name, line_no, "empty field");
    try {
      builder.add_triple(fields[0], fields[1], fields[2]);
    } catch (const DataError& e) {
      throw ParseError(source_name, line_no, e.what());
    }
    ++records;
  }
  if (records == 0) throw DataError(source_name + ": graph file contains no triples");
  if (options.add_reverse) builder.add_reverse_relations();
  return std::move(builder).build();
}

KnowledgeGraph load_graph(const std::filesystem::path& path, const GraphLoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open graph file: " + path.string());
  return read_graph(in, path.string(), options);
}

void write_graph(std::ostream& out, const KnowledgeGraph& kg) {
  for (const auto& t : kg.triples())
    out << kg.entity_name(t.subject) << '\t' << kg.relation_name(t.relation) << '\t'
        << kg.entity_name(t.object) << '\n';
}

void save_graph(const std::filesystem::path& path, const KnowledgeGraph& kg) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write graph file: " + path.string());
  write_graph(out, kg);
}

// --- k-hop retrieval -------------------------------------------------------

Subgraph khop_subgraph(const KnowledgeGraph& kg, std::span<const EntityId> topics, int hops,
                       bool bidirectional) {
  if (hops < 1) throw ConfigError("khop_subgraph: hop count must be >= 1");
  if (topics.empty()) throw DataError("khop_subgraph: no topic entities");
  constexpr int kUnseen = -1;
  std::vector<int> dist(kg.num_entities(), kUnseen);
  std::deque<EntityId> frontier;
  for (auto t : topics) {
    if (t >= kg.num_entities()) throw DataError("topic entity not in graph: " + std::to_string(t));
    if (dist[t] == kUnseen) {
      dist[t] = 0;
      frontier.push_back(t);
    }
  }
  std::vector<char> keep(kg.num_triples(), 0);
  while (!frontier.empty()) {
    EntityId e = frontier.front();
    frontier.pop_front();
    if (dist[e] >= hops) continue;
    auto visit = [&](std::uint32_t j, EntityId next) {
      keep[j] = 1;
      if (dist[next] == kUnseen) {
        dist[next] = dist[e] + 1;
        frontier.push_back(next);
      }
    };
    for (auto j : kg.outgoing(e)) visit(j, kg.triple(j).object);
    if (bidirectional)
      for (auto j : kg.incoming(e)) visit(j, kg.triple(j).subject);
  }

  Subgraph sub;
  std::vector<std::string> rel_names;
  std::vector<RelationId> rel_local(kg.num_relations(), static_cast<RelationId>(-1));
  for (const auto& t : kg.triples()) {
    if (!keep[t.index]) continue;
    if (rel_local[t.relation] == static_cast<RelationId>(-1)) {
      rel_local[t.relation] = static_cast<RelationId>(sub.relation_origin.size());
      sub.relation_origin.push_back(t.relation);
    }
  }
  // Relations keep their parent order so that r and r_inv stay adjacent when present.
  std::sort(sub.relation_origin.begin(), sub.relation_origin.end());
  for (std::size_t i = 0; i < sub.relation_origin.size(); ++i) {
    rel_local[sub.relation_origin[i]] = static_cast<RelationId>(i);
    rel_names.push_back(kg.relation_name(sub.relation_origin[i]));
  }

  KnowledgeGraph::Builder builder(rel_names);
  std::vector<EntityId> ent_local(kg.num_entities(), static_cast<EntityId>(-1));
  auto local_entity = [&](EntityId e) {
    if (ent_local[e] == static_cast<EntityId>(-1)) {
      ent_local[e] = builder.add_entity(kg.entity_name(e));
      sub.entity_origin.push_back(e);
    }
    return ent_local[e];
  };
  for (auto t : topics) local_entity(t);
  for (const auto& t : kg.triples()) {
    if (!keep[t.index]) continue;
    auto s = local_entity(t.subject);
    auto o = local_entity(t.object);
    builder.add_triple(s, rel_local[t.relation], o);
    sub.triple_origin.push_back(t.index);
  }
  sub.graph = std::move(builder).build();
  return sub;
}

}  // namespace rfkg
