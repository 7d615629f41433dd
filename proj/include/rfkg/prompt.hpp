#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rfkg/graph.hpp"
#include "rfkg/pathgen.hpp"

namespace rfkg {

// Frozen prompt vocabulary. Answer parsing and the mock client depend on these.
inline constexpr std::string_view kArrow = " -> ";
inline constexpr std::string_view kQuestionHeader = "Question: ";
inline constexpr std::string_view kPathsHeader = "Paths:";
inline constexpr std::string_view kThinkHeader = "Think:";
inline constexpr std::string_view kAnswerHeader = "Answer:";
inline constexpr std::string_view kAnswerFormatHeader = "Answer format:";
inline constexpr std::string_view kNoPaths = "(none)";

struct FewShotExample {
  std::string question;
  std::vector<std::string> paths;
  std::string think;
  std::string answer;
};

struct RenderedPrompt {
  std::string text;
  std::size_t exemplar_count = 0;
  std::size_t path_count = 0;
};

/// "E0 -> r1 -> E1 -> ... -> Eh" using entity and relation labels.
std::string serialize_path(const ReasoningPath& path, const KnowledgeGraph& kg);

/// Splits a serialized path on the arrow token. Throws DataError unless the
/// result alternates entity/relation with at least one hop.
std::vector<std::string> split_path(std::string_view text);
bool is_serialized_path(std::string_view text);

/// Instruction preamble, the first `fewshot` exemplars, then the live question.
RenderedPrompt build_prompt(std::string_view question, const std::vector<std::string>& paths,
                            const std::vector<FewShotExample>& exemplars, std::size_t fewshot);

/// Question and path lines of the final (live) block of a rendered prompt.
struct LiveBlock {
  std::string question;
  std::vector<std::string> paths;
};
LiveBlock parse_live_block(std::string_view prompt);

/// Number of exemplar blocks rendered before the live question.
std::size_t count_exemplar_blocks(std::string_view prompt);

/// The three exemplars shipped in data/exemplars.json.
const std::vector<FewShotExample>& default_exemplars();

/// JSON array of {"question", "paths", "think", "answer"} objects.
std::vector<FewShotExample> parse_exemplars(std::string_view json_text, const std::string& source);
std::vector<FewShotExample> load_exemplars(const std::filesystem::path& path);
std::string exemplars_to_json(const std::vector<FewShotExample>& exemplars);

}  // namespace rfkg
