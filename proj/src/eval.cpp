#include "rfkg/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "rfkg/error.hpp"

namespace rfkg {

// --- graph source --------------------------------------------------------------

GraphSource::GraphSource(std::shared_ptr<const KnowledgeGraph> shared,
                         std::filesystem::path subgraph_dir, bool add_reverse)
    : shared_(std::move(shared)), subgraph_dir_(std::move(subgraph_dir)), add_reverse_(add_reverse) {
  if (!shared_) throw ConfigError("a shared graph is required");
}

std::shared_ptr<const KnowledgeGraph> GraphSource::graph_for(const QaExample& ex) const {
  if (!ex.subgraph_ref) return shared_;
  GraphLoadOptions options;
  options.add_reverse = add_reverse_;
  options.relation_vocab = shared_->relation_names();
  return std::make_shared<const KnowledgeGraph>(load_graph(subgraph_dir_ / *ex.subgraph_ref, options));
}

// --- samples ---------------------------------------------------------------------

namespace {

std::vector<EntityId> resolve(const KnowledgeGraph& kg, const std::vector<std::string>& labels,
                              const std::string& id, const char* what) {
  std::vector<EntityId> out;
  for (const auto& label : labels) {
    auto e = kg.find_entity(label);
    if (!e) throw DataError("question '" + id + "': " + what + " '" + label + "' not in graph");
    out.push_back(*e);
  }
  return out;
}

std::vector<EntityId> resolve_present(const KnowledgeGraph& kg, const std::vector<std::string>& labels) {
  std::vector<EntityId> out;
  for (const auto& label : labels)
    if (auto e = kg.find_entity(label)) out.push_back(*e);
  return out;
}

std::string format_double(double v, int precision = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace

std::vector<TrainingSample> make_training_samples(const std::vector<QaExample>& examples,
                                                  const GraphSource& graphs,
                                                  const QuestionEncoder& encoder) {
  std::vector<TrainingSample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    auto graph = graphs.graph_for(ex);
    auto topics = resolve(*graph, ex.topic_entities, ex.id, "topic entity");
    auto gold = resolve_present(*graph, ex.answers);
    if (gold.empty()) continue;  // answer outside the retrieved subgraph: nothing to learn
    TrainingSample s{ex.id, encoder.encode(ex.id, ex.question), std::move(topics),
                     AnswerVector(std::move(gold), graph->num_entities()),
                     ex.subgraph_ref ? graph : nullptr};
    out.push_back(std::move(s));
  }
  return out;
}

// --- single question -------------------------------------------------------------

QuestionResult run_question(const QaExample& ex, const KnowledgeGraph& kg,
                            const QuestionEncoder& encoder, const ReasonerParams& params,
                            const PipelineConfig& cfg, LlmClient& client) {
  QuestionResult r;
  r.id = ex.id;
  r.gold_hops = ex.gold_hops;

  const auto enc = encoder.encode(ex.id, ex.question);
  const auto topics = resolve(kg, ex.topic_entities, ex.id, "topic entity");
  const auto trace = forward(enc, topics, kg, params, cfg.reasoner);
  r.hops = trace.hop.hops;
  r.hop_distribution = trace.hop.c;

  const auto topk = top_k_entities(trace.final_state, cfg.paths.top_k);
  for (const auto& [id, score] : topk) r.top_entities.emplace_back(kg.entity_name(id), score);
  const auto candidates = enumerate_paths(trace, topics, kg, cfg.paths);
  const auto selected = select_paths(candidates, topk, cfg.paths.per_entity);
  r.entities_without_paths = entities_without_paths(candidates, topk).size();

  std::unordered_set<EntityId> gold_ids;
  for (auto id : resolve_present(kg, ex.answers)) gold_ids.insert(id);
  for (const auto& p : selected) {
    r.paths.push_back(serialize_path(p, kg));
    r.path_scores.push_back(p.score);
    if (gold_ids.contains(p.target())) r.path_hit = true;
  }
  r.top_path_hit = !selected.empty() && gold_ids.contains(selected.front().target());

  const auto prompt = build_prompt(ex.question, r.paths, cfg.exemplars, cfg.fewshot);
  r.prompt = prompt.text;
  try {
    r.completion = client.complete(prompt);
  } catch (const TransportError& e) {
    r.error = e.what();
    return r;
  }
  r.parsed = parse_answer(r.completion);

  std::unordered_set<std::string> gold_labels;
  for (const auto& a : ex.answers) gold_labels.insert(normalize_answer(a));
  for (const auto& a : r.parsed.answers)
    if (gold_labels.contains(a)) r.correct = true;
  r.hit_at_1 = !r.parsed.answers.empty() && gold_labels.contains(r.parsed.answers.front());
  return r;
}

// --- aggregation -----------------------------------------------------------------

void summarize(EvalReport& report) {
  report.questions = report.rows.size();
  std::size_t correct = 0, hit1 = 0, path_hit = 0, top_hit = 0, hop_total = 0, hop_ok = 0, errors = 0;
  for (const auto& r : report.rows) {
    correct += r.correct;
    hit1 += r.hit_at_1;
    path_hit += r.path_hit;
    top_hit += r.top_path_hit;
    errors += !r.error.empty();
    if (r.gold_hops) {
      ++hop_total;
      hop_ok += (r.hops == *r.gold_hops);
    }
  }
  const double n = report.questions == 0 ? 1.0 : static_cast<double>(report.questions);
  report.accuracy = static_cast<double>(correct) / n;
  report.hits_at_1 = static_cast<double>(hit1) / n;
  report.path_hit_rate = static_cast<double>(path_hit) / n;
  report.top_path_hit_rate = static_cast<double>(top_hit) / n;
  report.errors = errors;
  report.hop_accuracy.reset();
  if (hop_total > 0) report.hop_accuracy = static_cast<double>(hop_ok) / static_cast<double>(hop_total);
}

std::map<std::string, std::string> describe(const PipelineConfig& cfg) {
  return {
      {"K", std::to_string(cfg.paths.top_k)},
      {"N", std::to_string(cfg.paths.per_entity)},
      {"beam", cfg.paths.beam == PathConfig::kUnbounded ? "inf" : std::to_string(cfg.paths.beam)},
      {"E", std::to_string(cfg.fewshot)},
      {"use_mask", cfg.reasoner.use_mask ? "true" : "false"},
      {"clamp", cfg.reasoner.clamp ? "true" : "false"},
      {"mask_threshold", format_double(cfg.reasoner.mask_threshold, 9)},
  };
}

EvalReport evaluate(const std::vector<QaExample>& dataset, const GraphSource& graphs,
                    const QuestionEncoder& encoder, const ReasonerParams& params,
                    const PipelineConfig& cfg, LlmClient& client) {
  cfg.paths.validate();
  EvalReport report;
  report.config = describe(cfg);
  report.config["client"] = std::string(to_string(client.config().mode));
  std::vector<const QaExample*> order;
  for (const auto& ex : dataset) order.push_back(&ex);
  std::sort(order.begin(), order.end(),
            [](const QaExample* a, const QaExample* b) { return a->id < b->id; });
  for (const auto* ex : order) {
    auto graph = graphs.graph_for(*ex);
    report.rows.push_back(run_question(*ex, *graph, encoder, params, cfg, client));
  }
  summarize(report);
  return report;
}

namespace {

std::string escape_cell(std::string_view s) {
  std::string out;
  for (char c : s) out += (c == '\t' || c == '\n' || c == '\r') ? ' ' : c;
  return out;
}

}  // namespace

void write_report_rows(std::ostream& out, const EvalReport& report) {
  out << "id\thops\tgold_hops\tcorrect\thit_at_1\tpath_hit\ttop_path_hit\tpaths\tanswers\terror\n";
  for (const auto& r : report.rows) {
    std::string answers;
    for (const auto& a : r.parsed.answers) answers += (answers.empty() ? "" : "|") + a;
    out << r.id << '\t' << r.hops << '\t' << (r.gold_hops ? std::to_string(*r.gold_hops) : "-") << '\t'
        << r.correct << '\t' << r.hit_at_1 << '\t' << r.path_hit << '\t' << r.top_path_hit << '\t'
        << r.paths.size() << '\t' << escape_cell(answers) << '\t' << escape_cell(r.error) << '\n';
  }
}

void write_report_summary(std::ostream& out, const EvalReport& report) {
  out << "questions          " << report.questions << '\n'
      << "accuracy           " << format_double(report.accuracy) << '\n'
      << "hits_at_1          " << format_double(report.hits_at_1) << '\n'
      << "path_hit_rate      " << format_double(report.path_hit_rate) << '\n'
      << "top_path_hit_rate  " << format_double(report.top_path_hit_rate) << '\n'
      << "hop_accuracy       "
      << (report.hop_accuracy ? format_double(*report.hop_accuracy) : std::string("n/a")) << '\n'
      << "errors             " << report.errors << '\n';
  for (const auto& [key, value] : report.config) out << "config." << key << " = " << value << '\n';
}

// --- grids -----------------------------------------------------------------------

namespace {

GridRow run_row(std::string label, const std::vector<QaExample>& dataset, const GraphSource& graphs,
                const QuestionEncoder& encoder, const ModelVariant& model, PipelineConfig cfg,
                LlmClient& client) {
  if (model.params == nullptr) throw ConfigError("grid row '" + label + "' has no model");
  cfg.reasoner = model.reasoner;
  GridRow row{std::move(label), cfg.paths.top_k, cfg.paths.per_entity, cfg.fewshot,
              model.reasoner.use_mask, {}};
  row.report = evaluate(dataset, graphs, encoder, *model.params, cfg, client);
  return row;
}

}  // namespace

std::vector<GridRow> sweep_k_n(const std::vector<QaExample>& dataset, const GraphSource& graphs,
                               const QuestionEncoder& encoder, const ModelVariant& model,
                               const PipelineConfig& base, const std::vector<std::size_t>& ks,
                               const std::vector<std::size_t>& ns, LlmClient& client) {
  std::vector<GridRow> rows;
  for (auto k : ks)
    for (auto n : ns) {
      auto cfg = base;
      cfg.paths.top_k = k;
      cfg.paths.per_entity = n;
      cfg.paths.beam = std::max(cfg.paths.beam, k);
      rows.push_back(run_row("K=" + std::to_string(k) + ",N=" + std::to_string(n), dataset, graphs,
                             encoder, model, cfg, client));
    }
  return rows;
}

std::vector<GridRow> sweep_fewshot(const std::vector<QaExample>& dataset, const GraphSource& graphs,
                                   const QuestionEncoder& encoder, const ModelVariant& model,
                                   const PipelineConfig& base, const std::vector<std::size_t>& es,
                                   LlmClient& client) {
  std::vector<GridRow> rows;
  for (auto e : es) {
    auto cfg = base;
    cfg.fewshot = e;
    rows.push_back(run_row("E=" + std::to_string(e), dataset, graphs, encoder, model, cfg, client));
  }
  return rows;
}

std::vector<GridRow> ablation_grid(const std::vector<QaExample>& dataset, const GraphSource& graphs,
                                   const QuestionEncoder& encoder, const ModelVariant& with_mask,
                                   const ModelVariant& without_mask, const PipelineConfig& base,
                                   std::size_t fewshot, LlmClient& client) {
  std::vector<GridRow> rows;
  auto zero_shot = base;
  zero_shot.fewshot = 0;
  auto few_shot = base;
  few_shot.fewshot = fewshot;
  rows.push_back(run_row("baseline", dataset, graphs, encoder, without_mask, zero_shot, client));
  rows.push_back(run_row("+mask", dataset, graphs, encoder, with_mask, zero_shot, client));
  rows.push_back(run_row("+fewshot", dataset, graphs, encoder, without_mask, few_shot, client));
  rows.push_back(run_row("+mask+fewshot", dataset, graphs, encoder, with_mask, few_shot, client));
  return rows;
}

void write_grid(std::ostream& out, const std::vector<GridRow>& rows) {
  out << "label\tK\tN\tE\tuse_mask\tquestions\taccuracy\thits_at_1\tpath_hit_rate\t"
         "top_path_hit_rate\thop_accuracy\terrors\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    out << row.label << '\t' << row.top_k << '\t' << row.per_entity << '\t' << row.fewshot << '\t'
        << (row.use_mask ? "true" : "false") << '\t' << r.questions << '\t'
        << format_double(r.accuracy) << '\t' << format_double(r.hits_at_1) << '\t'
        << format_double(r.path_hit_rate) << '\t' << format_double(r.top_path_hit_rate) << '\t'
        << (r.hop_accuracy ? format_double(*r.hop_accuracy) : std::string("-")) << '\t' << r.errors
        << '\n';
  }
}

}  // namespace rfkg
