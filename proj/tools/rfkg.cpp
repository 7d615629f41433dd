// rfkg: train the graph reasoner, inspect reasoning paths, and run the
// path-guided prompting pipeline against a mock, live or replayed LLM.
//
// Exit codes: 0 success, 1 usage/config, 2 data, 3 runtime.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rfkg/checkpoint.hpp"
#include "rfkg/dataset.hpp"
#include "rfkg/error.hpp"
#include "rfkg/eval.hpp"
#include "rfkg/graph.hpp"
#include "rfkg/hash.hpp"
#include "rfkg/llm_client.hpp"
#include "rfkg/pathgen.hpp"
#include "rfkg/prompt.hpp"
#include "rfkg/synth.hpp"
#include "rfkg/train.hpp"

namespace fs = std::filesystem;
using namespace rfkg;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

struct Options {
  std::string graph, dataset, checkpoint, out, config;
  std::string exemplars, encodings, subgraph_dir;
  std::string question_id, question;
  std::vector<std::string> topics;
  std::size_t k = 10, n = 1, beam = 1000, fewshot = 3;
  std::string mode = "mock";
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model, token_env = "OPENAI_API_KEY", replay_file;
  double temperature = 0.0;
  int max_retries = 3;
  double timeout = 60.0;
  std::optional<std::uint64_t> seed;
  bool reverse = false;
  bool verbose = false;
  // synth
  std::size_t train_pairs = 500, test_pairs = 100, attributes = 40, distractors = 3;
  double direct_fraction = 0.5;
  // sweep
  std::string grid = "kn";
  std::vector<std::size_t> ks = {5, 10, 15}, ns = {1, 5, 10}, es = {0, 1, 2, 3, 4, 5};
  std::string eval_dataset;
};

// --- option groups -------------------------------------------------------------

void add_graph(CLI::App* app, Options& o, bool required = true) {
  auto* opt = app->add_option("--graph", o.graph, "Tab-separated triple file");
  if (required) opt->required();
  app->add_flag("--reverse", o.reverse, "Add r_inv relations and inverse triples");
  app->add_option("--subgraph-dir", o.subgraph_dir,
                  "Directory holding per-question subgraphs named by subgraph_ref");
}

void add_paths(CLI::App* app, Options& o) {
  app->add_option("--k", o.k, "Top-K candidate entities")->check(CLI::PositiveNumber);
  app->add_option("--n", o.n, "Paths kept per candidate entity")->check(CLI::PositiveNumber);
  app->add_option("--beam", o.beam, "Intermediate paths kept per step (0 = unbounded)");
}

void add_prompt(CLI::App* app, Options& o) {
  app->add_option("--fewshot", o.fewshot, "Number of exemplars placed in the prompt");
  app->add_option("--exemplars", o.exemplars, "Exemplar JSON file (default: built-in three)");
}

void add_client(CLI::App* app, Options& o) {
  app->add_option("--mode", o.mode, "LLM client: live, mock or replay")
      ->check(CLI::IsMember({"live", "mock", "replay"}));
  app->add_option("--endpoint", o.endpoint, "Chat-completions URL for live mode");
  app->add_option("--model", o.model, "Model name for live mode");
  app->add_option("--token-env", o.token_env, "Environment variable holding the API token");
  app->add_option("--replay-file", o.replay_file,
                  "Replay log: read in replay mode, appended to otherwise");
  app->add_option("--temperature", o.temperature, "Sampling temperature");
  app->add_option("--max-retries", o.max_retries, "Retries on transient failures");
  app->add_option("--timeout", o.timeout, "Request timeout in seconds");
}

void add_model(CLI::App* app, Options& o) {
  app->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required();
  app->add_option("--encodings", o.encodings, "Precomputed question encodings (JSON lines)");
}

// --- loading helpers -----------------------------------------------------------

std::shared_ptr<const KnowledgeGraph> open_graph(const Options& o) {
  GraphLoadOptions options;
  options.add_reverse = o.reverse;
  return std::make_shared<const KnowledgeGraph>(load_graph(o.graph, options));
}

GraphSource open_graph_source(const Options& o, std::shared_ptr<const KnowledgeGraph> kg) {
  fs::path dir = o.subgraph_dir;
  if (dir.empty() && !o.dataset.empty()) dir = fs::path(o.dataset).parent_path();
  return GraphSource(std::move(kg), dir, o.reverse);
}

struct LoadedModel {
  Checkpoint ckpt;
  std::unique_ptr<QuestionEncoder> encoder;
};

LoadedModel open_model(const Options& o, const KnowledgeGraph& kg) {
  LoadedModel m;
  m.ckpt = load_checkpoint(o.checkpoint);
  if (m.ckpt.relation_vocab_hash != kg.relation_vocab_hash())
    throw DataError("checkpoint was trained on a different relation vocabulary than " + o.graph);
  m.ckpt.params.check_shape(m.ckpt.params.dim, kg.num_relations(), m.ckpt.params.steps);
  EncoderConfig ec;
  ec.dim = m.ckpt.params.dim;
  ec.kind = m.ckpt.encoder;
  ec.seed = m.ckpt.encoder_seed;
  ec.precomputed_file = o.encodings;
  if (ec.kind == EncoderKind::kPrecomputed && o.encodings.empty())
    throw ConfigError("checkpoint uses precomputed encodings; pass --encodings");
  m.encoder = make_encoder(ec);
  return m;
}

PipelineConfig pipeline_config(const Options& o, const Checkpoint& ckpt) {
  PipelineConfig cfg;
  cfg.paths.top_k = o.k;
  cfg.paths.per_entity = o.n;
  cfg.paths.beam = o.beam == 0 ? PathConfig::kUnbounded : o.beam;
  cfg.paths.threshold = ckpt.config.mask_threshold;
  cfg.paths.validate();
  cfg.fewshot = o.fewshot;
  if (!o.exemplars.empty()) cfg.exemplars = load_exemplars(o.exemplars);
  if (cfg.fewshot > cfg.exemplars.size())
    throw ConfigError("--fewshot " + std::to_string(cfg.fewshot) + " exceeds the " +
                      std::to_string(cfg.exemplars.size()) + " available exemplars");
  cfg.reasoner = ckpt.config;
  return cfg;
}

ClientConfig client_config(const Options& o) {
  ClientConfig c;
  c.mode = parse_client_mode(o.mode);
  c.endpoint = o.endpoint;
  c.model = o.model;
  c.token_env = o.token_env;
  c.replay_file = o.replay_file;
  c.temperature = o.temperature;
  c.max_retries = o.max_retries;
  c.timeout_seconds = o.timeout;
  return c;
}

TrainConfig train_config(const Options& o) {
  TrainConfig cfg = o.config.empty() ? TrainConfig{} : load_train_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

void ensure_dir(const fs::path& dir) {
  if (dir.empty()) throw ConfigError("--out is required");
  fs::create_directories(dir);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void write_snapshot(const fs::path& path, const Options& o, const std::string& command) {
  auto out = open_out(path);
  out << "command = " << command << '\n'
      << "graph = " << o.graph << '\n'
      << "reverse = " << (o.reverse ? "true" : "false") << '\n'
      << "dataset = " << o.dataset << '\n'
      << "checkpoint = " << o.checkpoint << '\n'
      << "k = " << o.k << '\n'
      << "n = " << o.n << '\n'
      << "beam = " << o.beam << '\n'
      << "fewshot = " << o.fewshot << '\n'
      << "exemplars = " << (o.exemplars.empty() ? "(built-in)" : o.exemplars) << '\n'
      << "mode = " << o.mode << '\n'
      << "model = " << o.model << '\n'
      << "temperature = " << o.temperature << '\n';
}

Checkpoint train_checkpoint(const TrainConfig& tc, const KnowledgeGraph& kg,
                            const std::vector<QaExample>& examples, const GraphSource& graphs,
                            std::vector<double>* history) {
  HashEncoder encoder(tc.dim, tc.encoder_seed);
  const auto samples = make_training_samples(examples, graphs, encoder);
  auto result = train(samples, kg, tc);
  if (history) *history = result.loss_history;
  Checkpoint ckpt;
  ckpt.params = std::move(result.params);
  ckpt.config = tc.reasoner();
  ckpt.relation_vocab_hash = kg.relation_vocab_hash();
  ckpt.encoder = EncoderKind::kHash;
  ckpt.encoder_seed = tc.encoder_seed;
  round_to_float32(ckpt.params);
  return ckpt;
}

// --- subcommands ---------------------------------------------------------------

int cmd_synth(const Options& o) {
  SynthConfig sc;
  sc.train_pairs = o.train_pairs;
  sc.test_pairs = o.test_pairs;
  sc.direct_fraction = o.direct_fraction;
  sc.attribute_values = o.attributes;
  sc.distractor_relations = o.distractors;
  auto data = synth_generate(sc, o.seed.value_or(0));
  ensure_dir(o.out);
  save_graph(fs::path(o.out) / "graph.tsv", data.graph);
  save_dataset(fs::path(o.out) / "train.jsonl", data.train);
  save_dataset(fs::path(o.out) / "test.jsonl", data.test);
  std::cout << "entities " << data.graph.num_entities() << ", relations " << data.graph.num_relations()
            << ", triples " << data.graph.num_triples() << ", train " << data.train.size()
            << ", test " << data.test.size() << "\nwrote " << o.out << "/{graph.tsv,train.jsonl,test.jsonl}\n";
  return kOk;
}

int cmd_train(const Options& o) {
  const auto tc = train_config(o);
  auto kg = open_graph(o);
  const auto examples = load_dataset(o.dataset);
  const auto graphs = open_graph_source(o, kg);
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> history;
  const auto ckpt = train_checkpoint(tc, *kg, examples, graphs, &history);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path path = o.checkpoint;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_checkpoint(path, ckpt);
  {
    auto out = open_out(path.string() + ".loss.tsv");
    out << "epoch\tloss\n" << std::setprecision(17);
    for (std::size_t i = 0; i < history.size(); ++i) out << (i + 1) << '\t' << history[i] << '\n';
  }
  {
    auto out = open_out(path.string() + ".config");
    write_train_config(out, tc);
  }
  std::cout << "trained " << tc.epochs << " epochs on " << examples.size() << " questions in "
            << std::fixed << std::setprecision(1) << seconds << " s; final loss "
            << std::setprecision(6) << (history.empty() ? 0.0 : history.back()) << "\nwrote " << path.string()
            << "\n";
  return kOk;
}

void print_path_dump(std::ostream& out, const std::string& question_id,
                     const std::vector<std::string>& paths, const std::vector<double>& scores) {
  for (std::size_t i = 0; i < paths.size(); ++i) {
    char score[32];
    std::snprintf(score, sizeof score, "%.9f", scores[i]);
    out << question_id << '\t' << (i + 1) << '\t' << score << '\t' << paths[i] << '\n';
  }
}

int cmd_paths(const Options& o) {
  auto kg = open_graph(o);
  const auto examples = load_dataset(o.dataset);
  const auto& ex = find_example(examples, o.question_id);
  const auto graphs = open_graph_source(o, kg);
  auto model = open_model(o, *kg);
  const auto cfg = pipeline_config(o, model.ckpt);
  const auto graph = graphs.graph_for(ex);

  const auto enc = model.encoder->encode(ex.id, ex.question);
  std::vector<EntityId> topics;
  for (const auto& t : ex.topic_entities) topics.push_back(graph->entity(t));
  const auto trace = forward(enc, topics, *graph, model.ckpt.params, cfg.reasoner);
  const auto topk = top_k_entities(trace.final_state, cfg.paths.top_k);
  const auto candidates = enumerate_paths(trace, topics, *graph, cfg.paths);
  const auto selected = select_paths(candidates, topk, cfg.paths.per_entity);

  std::cout << "# H=" << trace.hop.hops << " c=[";
  for (std::size_t t = 0; t < trace.hop.c.size(); ++t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9f", trace.hop.c[t]);
    std::cout << (t ? ", " : "") << buf;
  }
  std::cout << "]\n";
  if (const auto missing = entities_without_paths(candidates, topk); !missing.empty()) {
    std::cout << "# top-K entities without paths:";
    for (auto e : missing) std::cout << ' ' << graph->entity_name(e);
    std::cout << '\n';
  }
  if (selected.empty()) {
    std::cout << "no paths\n";
    return kOk;
  }
  std::vector<std::string> texts;
  std::vector<double> scores;
  for (const auto& p : selected) {
    texts.push_back(serialize_path(p, *graph));
    scores.push_back(p.score);
  }
  print_path_dump(std::cout, ex.id, texts, scores);
  if (!o.out.empty()) {
    auto out = open_out(o.out);
    print_path_dump(out, ex.id, texts, scores);
  }
  return kOk;
}

int cmd_ask(const Options& o) {
  auto kg = open_graph(o);
  QaExample ex;
  if (!o.question_id.empty()) {
    if (o.dataset.empty()) throw ConfigError("--question-id needs --dataset");
    ex = find_example(load_dataset(o.dataset), o.question_id);
  } else {
    if (o.question.empty() || o.topics.empty())
      throw ConfigError("give --question-id, or --question with at least one --topic");
    ex.id = "adhoc";
    ex.question = o.question;
    ex.topic_entities = o.topics;
    ex.answers = {"?"};
  }
  const auto graphs = open_graph_source(o, kg);
  auto model = open_model(o, *kg);
  const auto cfg = pipeline_config(o, model.ckpt);
  LlmClient client(client_config(o));
  const auto graph = graphs.graph_for(ex);
  const auto result = run_question(ex, *graph, *model.encoder, model.ckpt.params, cfg, client);
  if (o.verbose) std::cout << "----- prompt -----\n" << result.prompt << "------------------\n";
  if (!result.error.empty()) {
    std::cerr << "rfkg: LLM request failed: " << result.error << '\n';
    return kRuntime;
  }
  std::cout << "completion: " << result.completion << '\n' << "answers: ";
  for (std::size_t i = 0; i < result.parsed.answers.size(); ++i)
    std::cout << (i ? ", " : "") << result.parsed.answers[i];
  std::cout << '\n';
  return kOk;
}

int cmd_eval(const Options& o) {
  auto kg = open_graph(o);
  const auto examples = load_dataset(o.dataset);
  const auto graphs = open_graph_source(o, kg);
  auto model = open_model(o, *kg);
  const auto cfg = pipeline_config(o, model.ckpt);
  LlmClient client(client_config(o));
  const auto report = evaluate(examples, graphs, *model.encoder, model.ckpt.params, cfg, client);
  ensure_dir(o.out);
  {
    auto out = open_out(fs::path(o.out) / "report.tsv");
    write_report_rows(out, report);
  }
  {
    auto out = open_out(fs::path(o.out) / "summary.txt");
    write_report_summary(out, report);
  }
  write_snapshot(fs::path(o.out) / "run.config", o, "eval");
  write_report_summary(std::cout, report);
  return kOk;
}

int cmd_sweep(const Options& o) {
  auto kg = open_graph(o);
  const auto examples = load_dataset(o.dataset);
  const auto graphs = open_graph_source(o, kg);
  auto model = open_model(o, *kg);
  auto base = pipeline_config(o, model.ckpt);
  LlmClient client(client_config(o));
  const ModelVariant variant{&model.ckpt.params, model.ckpt.config};
  std::vector<GridRow> rows;
  if (o.grid == "kn") rows = sweep_k_n(examples, graphs, *model.encoder, variant, base, o.ks, o.ns, client);
  else if (o.grid == "k") rows = sweep_k_n(examples, graphs, *model.encoder, variant, base, o.ks, {o.n}, client);
  else if (o.grid == "n") rows = sweep_k_n(examples, graphs, *model.encoder, variant, base, {o.k}, o.ns, client);
  else if (o.grid == "e") {
    for (auto e : o.es)
      if (e > base.exemplars.size())
        throw ConfigError("E=" + std::to_string(e) + " exceeds the available exemplars");
    rows = sweep_fewshot(examples, graphs, *model.encoder, variant, base, o.es, client);
  }
  ensure_dir(o.out);
  {
    auto out = open_out(fs::path(o.out) / ("sweep_" + o.grid + ".tsv"));
    write_grid(out, rows);
  }
  write_snapshot(fs::path(o.out) / ("sweep_" + o.grid + ".config"), o, "sweep " + o.grid);
  write_grid(std::cout, rows);
  return kOk;
}

int cmd_ablate(const Options& o) {
  auto kg = open_graph(o);
  const auto train_set = load_dataset(o.dataset);
  const auto eval_set = load_dataset(o.eval_dataset);
  const auto graphs = open_graph_source(o, kg);
  auto with_cfg = train_config(o);
  with_cfg.use_mask = true;
  auto without_cfg = with_cfg;
  without_cfg.use_mask = false;
  ensure_dir(o.out);
  const auto with_mask = train_checkpoint(with_cfg, *kg, train_set, graphs, nullptr);
  const auto without_mask = train_checkpoint(without_cfg, *kg, train_set, graphs, nullptr);
  save_checkpoint(fs::path(o.out) / "model_mask.ckpt", with_mask);
  save_checkpoint(fs::path(o.out) / "model_nomask.ckpt", without_mask);

  HashEncoder encoder(with_cfg.dim, with_cfg.encoder_seed);
  auto base = pipeline_config(o, with_mask);
  LlmClient client(client_config(o));
  const auto rows = ablation_grid(eval_set, graphs, encoder, {&with_mask.params, with_mask.config},
                                  {&without_mask.params, without_mask.config}, base, o.fewshot, client);
  {
    auto out = open_out(fs::path(o.out) / "ablation.tsv");
    write_grid(out, rows);
  }
  write_snapshot(fs::path(o.out) / "ablation.config", o, "ablate");
  write_grid(std::cout, rows);
  return kOk;
}

int cmd_encode(const Options& o, std::size_t dim) {
  const auto examples = load_dataset(o.dataset);
  HashEncoder encoder(dim, o.seed.value_or(0));
  if (o.out.empty()) throw ConfigError("--out is required");
  auto out = open_out(o.out);
  for (const auto& ex : examples) out << encoding_to_json_line(ex.id, encoder.encode(ex.id, ex.question)) << '\n';
  std::cout << "wrote " << examples.size() << " encodings to " << o.out << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-graph reasoning paths for LLM question answering"};
  app.require_subcommand(1);
  Options o;
  std::size_t encode_dim = 64;

  auto* synth = app.add_subcommand("synth", "Generate the synthetic family-KG benchmark");
  synth->add_option("--out", o.out, "Output directory")->required();
  synth->add_option("--train-pairs", o.train_pairs, "Training questions");
  synth->add_option("--test-pairs", o.test_pairs, "Held-out questions");
  synth->add_option("--direct-fraction", o.direct_fraction, "Share answerable by a direct relation");
  synth->add_option("--attributes", o.attributes, "Shared attribute entities");
  synth->add_option("--distractors", o.distractors, "Distractor relation types");
  synth->add_option("--seed", o.seed, "Generator seed");

  auto* train_cmd = app.add_subcommand("train", "Train the graph reasoner and write a checkpoint");
  add_graph(train_cmd, o);
  train_cmd->add_option("--dataset", o.dataset, "Training questions (JSON lines)")->required();
  train_cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint to write")->required();
  train_cmd->add_option("--config", o.config, "Training config (key = value)");
  train_cmd->add_option("--seed", o.seed, "Override the config seed");

  auto* paths = app.add_subcommand("paths", "Print reasoning paths for one question");
  add_graph(paths, o);
  add_model(paths, o);
  add_paths(paths, o);
  paths->add_option("--dataset", o.dataset, "Questions (JSON lines)")->required();
  paths->add_option("--question-id", o.question_id, "Question id")->required();
  paths->add_option("--out", o.out, "Also write the path dump to this file");

  auto* ask = app.add_subcommand("ask", "Answer one question through the full pipeline");
  add_graph(ask, o);
  add_model(ask, o);
  add_paths(ask, o);
  add_prompt(ask, o);
  add_client(ask, o);
  ask->add_option("--dataset", o.dataset, "Questions (JSON lines)");
  ask->add_option("--question-id", o.question_id, "Question id from --dataset");
  ask->add_option("--question", o.question, "Ad-hoc question text");
  ask->add_option("--topic", o.topics, "Topic entity label for --question (repeatable)");
  ask->add_flag("--verbose", o.verbose, "Print the rendered prompt");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a dataset and write report files");
  add_graph(eval_cmd, o);
  add_model(eval_cmd, o);
  add_paths(eval_cmd, o);
  add_prompt(eval_cmd, o);
  add_client(eval_cmd, o);
  eval_cmd->add_option("--dataset", o.dataset, "Questions (JSON lines)")->required();
  eval_cmd->add_option("--out", o.out, "Output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Evaluate a K/N or few-shot grid");
  add_graph(sweep, o);
  add_model(sweep, o);
  add_paths(sweep, o);
  add_prompt(sweep, o);
  add_client(sweep, o);
  sweep->add_option("--dataset", o.dataset, "Questions (JSON lines)")->required();
  sweep->add_option("--out", o.out, "Output directory")->required();
  sweep->add_option("--grid", o.grid, "kn, k, n or e")->check(CLI::IsMember({"kn", "k", "n", "e"}));
  sweep->add_option("--ks", o.ks, "K values")->delimiter(',');
  sweep->add_option("--ns", o.ns, "N values")->delimiter(',');
  sweep->add_option("--es", o.es, "E values")->delimiter(',');

  auto* ablate = app.add_subcommand("ablate", "Train with and without the mask; evaluate the 2x2 grid");
  add_graph(ablate, o);
  add_paths(ablate, o);
  add_prompt(ablate, o);
  add_client(ablate, o);
  ablate->add_option("--dataset", o.dataset, "Training questions")->required();
  ablate->add_option("--eval-dataset", o.eval_dataset, "Evaluation questions")->required();
  ablate->add_option("--config", o.config, "Training config (key = value)");
  ablate->add_option("--seed", o.seed, "Override the config seed");
  ablate->add_option("--out", o.out, "Output directory")->required();

  auto* encode = app.add_subcommand("encode", "Write hash-encoder outputs in the precomputed format");
  encode->add_option("--dataset", o.dataset, "Questions (JSON lines)")->required();
  encode->add_option("--out", o.out, "Output JSON-lines file")->required();
  encode->add_option("--dim", encode_dim, "Encoding dimension");
  encode->add_option("--seed", o.seed, "Encoder seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*train_cmd) return cmd_train(o);
    if (*paths) return cmd_paths(o);
    if (*ask) return cmd_ask(o);
    if (*eval_cmd) return cmd_eval(o);
    if (*sweep) return cmd_sweep(o);
    if (*ablate) return cmd_ablate(o);
    if (*encode) return cmd_encode(o, encode_dim);
  } catch (const ConfigError& e) {
    std::cerr << "rfkg: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "rfkg: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "rfkg: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
