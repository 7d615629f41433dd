#pragma once

#include <span>
#include <utility>
#include <vector>

#include "rfkg/graph.hpp"

namespace rfkg {

/// Sparse nonnegative scores over entities. Absent ids score exactly 0;
/// stored entries are strictly positive and sorted by id.
class EntityStateVector {
 public:
  using Entry = std::pair<EntityId, double>;

  EntityStateVector() = default;

  /// Sorts by id; drops zeros. Duplicate ids or negative/non-finite scores throw.
  static EntityStateVector from_entries(std::vector<Entry> entries);

  double operator[](EntityId id) const noexcept;
  std::span<const Entry> entries() const noexcept { return entries_; }
  std::size_t support_size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  /// Dense copy of length n.
  std::vector<double> to_dense(std::size_t n) const;

  friend bool operator==(const EntityStateVector&, const EntityStateVector&) = default;

 private:
  std::vector<Entry> entries_;
};

/// Score 1 on each listed entity. Throws on an empty set or an id >= n.
EntityStateVector one_hot(std::span<const EntityId> entities, std::size_t n);

/// Multi-hot gold answer set.
class AnswerVector {
 public:
  AnswerVector(std::vector<EntityId> gold, std::size_t n);

  std::span<const EntityId> gold() const noexcept { return gold_; }
  bool contains(EntityId id) const noexcept;
  EntityStateVector as_vector() const;

 private:
  std::vector<EntityId> gold_;  // sorted, unique
  std::size_t n_;
};

}  // namespace rfkg
