#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rfkg {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId subject = 0;
  RelationId relation = 0;
  EntityId object = 0;
  std::uint32_t index = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
};

inline constexpr std::string_view kInverseSuffix = "_inv";

/// Entity/relation vocabularies plus an indexed triple list.
///
/// Immutable once built. Triples are addressed by their position in
/// `triples()`; `outgoing(e)` / `incoming(e)` return triple indices in
/// ascending order.
class KnowledgeGraph {
 public:
  class Builder;

  KnowledgeGraph() = default;

  std::size_t num_entities() const noexcept { return entity_names_.size(); }
  std::size_t num_relations() const noexcept { return relation_names_.size(); }
  std::size_t num_triples() const noexcept { return triples_.size(); }

  const std::vector<std::string>& entity_names() const noexcept { return entity_names_; }
  const std::vector<std::string>& relation_names() const noexcept { return relation_names_; }
  const std::vector<Triple>& triples() const noexcept { return triples_; }
  const Triple& triple(std::uint32_t index) const { return triples_.at(index); }

  const std::string& entity_name(EntityId id) const { return entity_names_.at(id); }
  const std::string& relation_name(RelationId id) const { return relation_names_.at(id); }

  std::optional<EntityId> find_entity(std::string_view name) const;
  std::optional<RelationId> find_relation(std::string_view name) const;
  EntityId entity(std::string_view name) const;  // throws DataError if absent

  std::span<const std::uint32_t> outgoing(EntityId id) const;
  std::span<const std::uint32_t> incoming(EntityId id) const;

  bool contains(EntityId s, RelationId r, EntityId o) const;

  /// FNV-1a over the relation names joined by '\n'. Pins checkpoints to a vocabulary.
  std::uint64_t relation_vocab_hash() const;

 private:
  std::vector<std::string> entity_names_;
  std::vector<std::string> relation_names_;
  std::unordered_map<std::string, EntityId> entity_index_;
  std::unordered_map<std::string, RelationId> relation_index_;
  std::vector<Triple> triples_;
  // CSR adjacency: offsets has n+1 entries.
  std::vector<std::uint32_t> out_offsets_, out_triples_;
  std::vector<std::uint32_t> in_offsets_, in_triples_;

  friend class Builder;
};

/// Accumulates labelled triples, deduplicating on (subject, relation, object).
class KnowledgeGraph::Builder {
 public:
  Builder() = default;

  /// Pins the relation vocabulary; unknown relation labels become errors.
  explicit Builder(std::vector<std::string> fixed_relations);

  EntityId add_entity(std::string_view name);
  RelationId add_relation(std::string_view name);
  /// Returns false when the triple was already present.
  bool add_triple(std::string_view subject, std::string_view relation, std::string_view object);
  bool add_triple(EntityId s, RelationId r, EntityId o);

  /// Creates `r_inv` for each relation and the inverse of every triple.
  void add_reverse_relations();

  KnowledgeGraph build() &&;

 private:
  struct KeyHash {
    std::size_t operator()(const std::tuple<EntityId, RelationId, EntityId>& k) const noexcept;
  };

  bool fixed_relations_ = false;
  std::vector<std::string> entity_names_;
  std::vector<std::string> relation_names_;
  std::unordered_map<std::string, EntityId> entity_index_;
  std::unordered_map<std::string, RelationId> relation_index_;
  std::vector<std::tuple<EntityId, RelationId, EntityId>> triples_;
  std::unordered_map<std::tuple<EntityId, RelationId, EntityId>, std::uint32_t, KeyHash> seen_;
};

struct GraphLoadOptions {
  bool add_reverse = false;
  /// When set, relation ids follow this vocabulary instead of first appearance.
  std::optional<std::vector<std::string>> relation_vocab;
};

/// Reads a tab-separated `subject\trelation\tobject` file.
KnowledgeGraph load_graph(const std::filesystem::path& path, const GraphLoadOptions& options = {});
KnowledgeGraph read_graph(std::istream& in, const std::string& source_name,
                          const GraphLoadOptions& options = {});

/// Writes every stored triple (including generated inverses) in index order.
void write_graph(std::ostream& out, const KnowledgeGraph& kg);
void save_graph(const std::filesystem::path& path, const KnowledgeGraph& kg);

/// Per-question subgraph with dense re-indexing and maps back to the parent graph.
struct Subgraph {
  KnowledgeGraph graph;
  std::vector<EntityId> entity_origin;      // local id -> parent id
  std::vector<RelationId> relation_origin;  // local id -> parent id
  std::vector<std::uint32_t> triple_origin; // local triple -> parent triple
};

/// Triples reachable from `topics` within `hops` edge traversals. With
/// `bidirectional`, edges may also be walked object -> subject.
Subgraph khop_subgraph(const KnowledgeGraph& kg, std::span<const EntityId> topics, int hops,
                       bool bidirectional);

}  // namespace rfkg
