#include "rfkg/entity_state.hpp"

#include <algorithm>
#include <cmath>

#include "rfkg/error.hpp"

namespace rfkg {

EntityStateVector EntityStateVector::from_entries(std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.first < b.first; });
  EntityStateVector out;
  out.entries_.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& [id, score] = entries[i];
    if (i > 0 && entries[i - 1].first == id)
      throw Error("duplicate entity id in state vector: " + std::to_string(id));
    if (!std::isfinite(score) || score < 0.0)
      throw Error("invalid entity score for id " + std::to_string(id));
    if (score > 0.0) out.entries_.push_back(entries[i]);
  }
  return out;
}

double EntityStateVector::operator[](EntityId id) const noexcept {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                             [](const Entry& e, EntityId key) { return e.first < key; });
  return (it != entries_.end() && it->first == id) ? it->second : 0.0;
}

std::vector<double> EntityStateVector::to_dense(std::size_t n) const {
  std::vector<double> dense(n, 0.0);
  for (const auto& [id, score] : entries_)
    if (id < n) dense[id] = score;
  return dense;
}

EntityStateVector one_hot(std::span<const EntityId> entities, std::size_t n) {
  if (entities.empty()) throw DataError("a question needs at least one topic entity");
  std::vector<EntityStateVector::Entry> entries;
  for (auto id : entities) {
    if (id >= n)
      throw DataError("topic entity id " + std::to_string(id) + " out of range (n=" +
                      std::to_string(n) + ")");
    entries.emplace_back(id, 1.0);
  }
  std::sort(entries.begin(), entries.end());
  entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
  return EntityStateVector::from_entries(std::move(entries));
}

AnswerVector::AnswerVector(std::vector<EntityId> gold, std::size_t n) : gold_(std::move(gold)), n_(n) {
  if (gold_.empty()) throw DataError("answer set must be nonempty");
  std::sort(gold_.begin(), gold_.end());
  gold_.erase(std::unique(gold_.begin(), gold_.end()), gold_.end());
  if (gold_.back() >= n_) throw DataError("answer entity id out of range");
}

bool AnswerVector::contains(EntityId id) const noexcept {
  return std::binary_search(gold_.begin(), gold_.end(), id);
}

EntityStateVector AnswerVector::as_vector() const { return one_hot(gold_, n_); }

}  // namespace rfkg
