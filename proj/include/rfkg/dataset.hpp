#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rfkg {

struct QaExample {
  std::string id;
  std::string question;
  std::vector<std::string> topic_entities;
  std::vector<std::string> answers;
  std::optional<int> gold_hops;
  std::optional<std::string> subgraph_ref;
};

/// JSON lines, one object per question:
/// {"id", "question", "topic_entities": [...], "answers": [...], "gold_hops"?, "subgraph_ref"?}
std::vector<QaExample> read_dataset(std::istream& in, const std::string& source_name);
std::vector<QaExample> load_dataset(const std::filesystem::path& path);

void write_dataset(std::ostream& out, const std::vector<QaExample>& examples);
void save_dataset(const std::filesystem::path& path, const std::vector<QaExample>& examples);

const QaExample& find_example(const std::vector<QaExample>& examples, const std::string& id);

}  // namespace rfkg
