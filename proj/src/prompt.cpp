#include "rfkg/prompt.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rfkg/error.hpp"

namespace rfkg {

namespace {

constexpr std::string_view kPreamble =
    "Answer the question using the reasoning paths retrieved from a knowledge graph.\n"
    "Each path alternates entities and relations joined by \" -> \" and is read left to right.\n";

constexpr std::string_view kAnswerInstruction =
    "Answer format: think through the paths step by step, then write one final line that starts "
    "with \"Answer:\" followed by the answer entity names separated by commas.\n";

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    auto nl = text.find('\n');
    lines.push_back(text.substr(0, nl));
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return lines;
}

void check_single_line(std::string_view field, std::string_view what) {
  if (field.find('\n') != std::string_view::npos)
    throw DataError(std::string(what) + " must not contain a newline");
}

}  // namespace

std::string serialize_path(const ReasoningPath& path, const KnowledgeGraph& kg) {
  if (path.hops() < 1 || path.entities.size() != path.hops() + 1)
    throw DataError("cannot serialize a path with fewer than one hop");
  std::string out = kg.entity_name(path.entities.at(0));
  for (std::size_t i = 0; i < path.hops(); ++i) {
    out += kArrow;
    out += kg.relation_name(path.relations[i]);
    out += kArrow;
    out += kg.entity_name(path.entities.at(i + 1));
  }
  return out;
}

std::vector<std::string> split_path(std::string_view text) {
  const std::string_view original = text;
  std::vector<std::string> parts;
  while (true) {
    auto pos = text.find(kArrow);
    parts.emplace_back(text.substr(0, pos));
    if (pos == std::string_view::npos) break;
    text.remove_prefix(pos + kArrow.size());
  }
  if (parts.size() < 3 || parts.size() % 2 == 0)
    throw DataError("malformed path (need E -> r -> E [-> r -> E ...]): '" + std::string(original) + "'");
  for (const auto& p : parts)
    if (p.empty() || p.find('\n') != std::string::npos)
      throw DataError("malformed path: empty or multi-line element");
  return parts;
}

bool is_serialized_path(std::string_view text) {
  try {
    split_path(text);
    return true;
  } catch (const DataError&) {
    return false;
  }
}

RenderedPrompt build_prompt(std::string_view question, const std::vector<std::string>& paths,
                            const std::vector<FewShotExample>& exemplars, std::size_t fewshot) {
  if (fewshot > exemplars.size())
    throw ConfigError("requested " + std::to_string(fewshot) + " exemplars but only " +
                      std::to_string(exemplars.size()) + " are available");
  check_single_line(question, "question");
  for (const auto& p : paths) split_path(p);

  std::string text(kPreamble);
  for (std::size_t i = 0; i < fewshot; ++i) {
    const auto& ex = exemplars[i];
    text += '\n';
    text += kQuestionHeader;
    text += ex.question;
    text += '\n';
    text += kPathsHeader;
    text += '\n';
    for (const auto& p : ex.paths) {
      text += p;
      text += '\n';
    }
    text += kThinkHeader;
    text += ' ';
    text += ex.think;
    text += '\n';
    text += kAnswerHeader;
    text += ' ';
    text += ex.answer;
    text += '\n';
  }

  text += '\n';
  text += kQuestionHeader;
  text += question;
  text += '\n';
  text += kPathsHeader;
  text += '\n';
  if (paths.empty()) {
    text += kNoPaths;
    text += '\n';
  }
  for (const auto& p : paths) {
    text += p;
    text += '\n';
  }
  text += kAnswerInstruction;
  text += kThinkHeader;
  text += '\n';
  return {std::move(text), fewshot, paths.size()};
}

LiveBlock parse_live_block(std::string_view prompt) {
  const auto lines = lines_of(prompt);
  std::size_t start = lines.size();
  for (std::size_t i = lines.size(); i-- > 0;)
    if (lines[i].starts_with(kQuestionHeader)) {
      start = i;
      break;
    }
  if (start == lines.size()) throw DataError("prompt has no question block");
  LiveBlock block;
  block.question = std::string(lines[start].substr(kQuestionHeader.size()));
  if (start + 1 >= lines.size() || lines[start + 1] != kPathsHeader)
    throw DataError("live question is not followed by a paths block");
  for (std::size_t i = start + 2; i < lines.size(); ++i) {
    const auto line = lines[i];
    if (line.starts_with(kAnswerFormatHeader) || line.starts_with(kThinkHeader) ||
        line.starts_with(kAnswerHeader))
      break;
    if (line == kNoPaths) continue;
    split_path(line);
    block.paths.emplace_back(line);
  }
  return block;
}

std::size_t count_exemplar_blocks(std::string_view prompt) {
  const auto lines = lines_of(prompt);
  std::size_t questions = 0, thinks_with_text = 0;
  for (auto line : lines) {
    if (line.starts_with(kQuestionHeader)) ++questions;
    if (line.starts_with(kThinkHeader) && line.size() > kThinkHeader.size()) ++thinks_with_text;
  }
  // Every exemplar carries a filled Think line; the live block does not.
  return questions == 0 ? 0 : std::min(questions - 1, thinks_with_text);
}

// --- exemplars ----------------------------------------------------------------

const std::vector<FewShotExample>& default_exemplars() {
  static const std::vector<FewShotExample> exemplars = {
      {"Who is Marie Curie's spouse?",
       {"Marie Curie -> spouse -> Pierre Curie", "Marie Curie -> field -> Physics"},
       "The question asks for a spouse. The first path leaves Marie Curie through the relation "
       "spouse and ends at Pierre Curie. The second path uses field, which does not name a "
       "person, so it is ignored.",
       "Pierre Curie"},
      {"Who is the brother of Mia Holt?",
       {"Mia Holt -> father -> Owen Holt -> son -> Leo Holt"},
       "No path links Mia Holt to a brother directly. Following father reaches Owen Holt, and "
       "his son Leo Holt is therefore Mia Holt's brother.",
       "Leo Holt"},
      {"Which languages are spoken in Switzerland?",
       {"Switzerland -> official_language -> German", "Switzerland -> official_language -> French",
        "Switzerland -> official_language -> Italian",
        "Switzerland -> official_language -> Romansh"},
       "Every path starts at Switzerland and uses official_language, so each end entity is an "
       "answer. The question allows several answers.",
       "German, French, Italian, Romansh"},
  };
  return exemplars;
}

std::vector<FewShotExample> parse_exemplars(std::string_view json_text, const std::string& source) {
  std::vector<FewShotExample> out;
  try {
    const auto doc = nlohmann::json::parse(json_text);
    if (!doc.is_array()) throw DataError(source + ": exemplar file must hold a JSON array");
    for (const auto& item : doc) {
      FewShotExample ex;
      ex.question = item.at("question").get<std::string>();
      ex.paths = item.at("paths").get<std::vector<std::string>>();
      ex.think = item.at("think").get<std::string>();
      ex.answer = item.at("answer").get<std::string>();
      if (ex.question.empty() || ex.paths.empty() || ex.think.empty() || ex.answer.empty())
        throw DataError(source + ": exemplar " + std::to_string(out.size() + 1) +
                        " has an empty field");
      check_single_line(ex.question, "exemplar question");
      check_single_line(ex.think, "exemplar think");
      check_single_line(ex.answer, "exemplar answer");
      for (const auto& p : ex.paths) split_path(p);
      out.push_back(std::move(ex));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(source + ": " + e.what());
  }
  return out;
}

std::vector<FewShotExample> load_exemplars(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open exemplar file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_exemplars(buffer.str(), path.string());
}

std::string exemplars_to_json(const std::vector<FewShotExample>& exemplars) {
  auto doc = nlohmann::json::array();
  for (const auto& ex : exemplars)
    doc.push_back({{"question", ex.question},
                   {"paths", ex.paths},
                   {"think", ex.think},
                   {"answer", ex.answer}});
  return doc.dump(2) + "\n";
}

}  // namespace rfkg
