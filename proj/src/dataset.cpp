#include "rfkg/dataset.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

#include "rfkg/error.hpp"

namespace rfkg {

std::vector<QaExample> read_dataset(std::istream& in, const std::string& source) {
  std::vector<QaExample> out;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    QaExample ex;
    try {
      const auto j = nlohmann::json::parse(line);
      auto require = [&](const char* key) -> const nlohmann::json& {
        if (!j.contains(key)) throw ParseError(source, line_no, std::string("missing field '") + key + "'");
        return j.at(key);
      };
      ex.id = require("id").get<std::string>();
      ex.question = require("question").get<std::string>();
      ex.topic_entities = require("topic_entities").get<std::vector<std::string>>();
      ex.answers = require("answers").get<std::vector<std::string>>();
      if (j.contains("gold_hops") && !j.at("gold_hops").is_null()) ex.gold_hops = j.at("gold_hops").get<int>();
      if (j.contains("subgraph_ref") && !j.at("subgraph_ref").is_null())
        ex.subgraph_ref = j.at("subgraph_ref").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, line_no, e.what());
    }
    if (ex.id.empty()) throw ParseError(source, line_no, "empty id");
    if (ex.topic_entities.empty()) throw ParseError(source, line_no, "topic_entities is empty");
    if (ex.answers.empty()) throw ParseError(source, line_no, "answers is empty");
    if (ex.gold_hops && *ex.gold_hops < 1) throw ParseError(source, line_no, "gold_hops must be >= 1");
    if (!ids.insert(ex.id).second) throw ParseError(source, line_no, "duplicate id '" + ex.id + "'");
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<QaExample> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset: " + path.string());
  return read_dataset(in, path.string());
}

void write_dataset(std::ostream& out, const std::vector<QaExample>& examples) {
  for (const auto& ex : examples) {
    nlohmann::json j = {{"id", ex.id},
                        {"question", ex.question},
                        {"topic_entities", ex.topic_entities},
                        {"answers", ex.answers}};
    if (ex.gold_hops) j["gold_hops"] = *ex.gold_hops;
    if (ex.subgraph_ref) j["subgraph_ref"] = *ex.subgraph_ref;
    out << j.dump() << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, const std::vector<QaExample>& examples) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset: " + path.string());
  write_dataset(out, examples);
}

const QaExample& find_example(const std::vector<QaExample>& examples, const std::string& id) {
  for (const auto& ex : examples)
    if (ex.id == id) return ex;
  throw DataError("no question with id '" + id + "'");
}

}  // namespace rfkg
