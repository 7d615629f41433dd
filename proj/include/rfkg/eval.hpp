#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rfkg/dataset.hpp"
#include "rfkg/encoder.hpp"
#include "rfkg/graph.hpp"
#include "rfkg/llm_client.hpp"
#include "rfkg/pathgen.hpp"
#include "rfkg/prompt.hpp"
#include "rfkg/reasoner.hpp"
#include "rfkg/train.hpp"

namespace rfkg {

/// Resolves the graph a question runs against: the shared graph, or a
/// per-question file named by `subgraph_ref` (relative to `subgraph_dir`)
/// loaded with the shared graph's relation vocabulary.
class GraphSource {
 public:
  explicit GraphSource(std::shared_ptr<const KnowledgeGraph> shared,
                       std::filesystem::path subgraph_dir = {}, bool add_reverse = false);

  std::shared_ptr<const KnowledgeGraph> graph_for(const QaExample& ex) const;
  const KnowledgeGraph& shared() const noexcept { return *shared_; }

 private:
  std::shared_ptr<const KnowledgeGraph> shared_;
  std::filesystem::path subgraph_dir_;
  bool add_reverse_;
};

struct PipelineConfig {
  PathConfig paths;
  std::size_t fewshot = 3;
  std::vector<FewShotExample> exemplars = default_exemplars();
  ReasonerConfig reasoner;
};

struct QuestionResult {
  std::string id;
  int hops = 0;
  std::optional<int> gold_hops;
  Vector hop_distribution;
  std::vector<std::pair<std::string, double>> top_entities;
  std::vector<std::string> paths;  // serialized, selection order
  std::vector<double> path_scores;
  std::size_t entities_without_paths = 0;
  std::string prompt;
  std::string completion;
  AnswerSet parsed;
  bool correct = false;       // some gold answer appears in the parsed answers
  bool hit_at_1 = false;      // the first parsed answer is gold
  bool path_hit = false;      // some selected path ends at a gold answer
  bool top_path_hit = false;  // the first selected path ends at a gold answer
  std::string error;
};

struct EvalReport {
  std::size_t questions = 0;
  double accuracy = 0.0;
  double hits_at_1 = 0.0;
  double path_hit_rate = 0.0;
  double top_path_hit_rate = 0.0;
  /// Over questions that carry gold_hops; empty when none do.
  std::optional<double> hop_accuracy;
  std::size_t errors = 0;
  std::vector<QuestionResult> rows;
  std::map<std::string, std::string> config;
};

/// Samples for train(): encodes each question and resolves labels to ids.
std::vector<TrainingSample> make_training_samples(const std::vector<QaExample>& examples,
                                                  const GraphSource& graphs,
                                                  const QuestionEncoder& encoder);

/// encode -> forward -> paths -> prompt -> complete -> parse for one question.
/// Client failures land in `error`; data errors propagate.
QuestionResult run_question(const QaExample& ex, const KnowledgeGraph& kg,
                            const QuestionEncoder& encoder, const ReasonerParams& params,
                            const PipelineConfig& cfg, LlmClient& client);

EvalReport evaluate(const std::vector<QaExample>& dataset, const GraphSource& graphs,
                    const QuestionEncoder& encoder, const ReasonerParams& params,
                    const PipelineConfig& cfg, LlmClient& client);

/// Recomputes the aggregate fields from `rows`.
void summarize(EvalReport& report);

std::map<std::string, std::string> describe(const PipelineConfig& cfg);

/// Per-question table, tab-separated with a header line.
void write_report_rows(std::ostream& out, const EvalReport& report);
/// Human-readable aggregate summary.
void write_report_summary(std::ostream& out, const EvalReport& report);

// --- experiment grids ------------------------------------------------------------

struct GridRow {
  std::string label;
  std::size_t top_k = 0;
  std::size_t per_entity = 0;
  std::size_t fewshot = 0;
  bool use_mask = true;
  EvalReport report;
};

struct ModelVariant {
  const ReasonerParams* params = nullptr;
  ReasonerConfig reasoner;
};

std::vector<GridRow> sweep_k_n(const std::vector<QaExample>& dataset, const GraphSource& graphs,
                               const QuestionEncoder& encoder, const ModelVariant& model,
                               const PipelineConfig& base, const std::vector<std::size_t>& ks,
                               const std::vector<std::size_t>& ns, LlmClient& client);

std::vector<GridRow> sweep_fewshot(const std::vector<QaExample>& dataset, const GraphSource& graphs,
                                   const QuestionEncoder& encoder, const ModelVariant& model,
                                   const PipelineConfig& base, const std::vector<std::size_t>& es,
                                   LlmClient& client);

/// Four rows: baseline (no mask, E=0), mask only, few-shot only, both.
std::vector<GridRow> ablation_grid(const std::vector<QaExample>& dataset, const GraphSource& graphs,
                                   const QuestionEncoder& encoder, const ModelVariant& with_mask,
                                   const ModelVariant& without_mask, const PipelineConfig& base,
                                   std::size_t fewshot, LlmClient& client);

void write_grid(std::ostream& out, const std::vector<GridRow>& rows);

}  // namespace rfkg
