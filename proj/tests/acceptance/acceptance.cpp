// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rfkg/checkpoint.hpp"
#include "rfkg/dataset.hpp"
#include "rfkg/eval.hpp"
#include "rfkg/llm_client.hpp"
#include "rfkg/pathgen.hpp"
#include "rfkg/prompt.hpp"
#include "rfkg/synth.hpp"
#include "rfkg/train.hpp"

using namespace rfkg;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, double limit_s, const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = fn();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_s > 0 && secs >= limit_s) {
    out.pass = false;
    out.detail += "; over the " + std::to_string(static_cast<int>(limit_s)) + " s limit";
  }
  if (!out.pass) ++failures;
  std::printf("[%s] %2d %-28s %s (%.2f s)\n", out.pass ? "PASS" : "FAIL", id, name, out.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// --- 1 and 2: random reasoner instances -------------------------------------------

std::vector<oracle::Instance> small_instances() {
  std::vector<oracle::Instance> out;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) out.push_back(oracle::random_instance(seed, 50, 10, 3, 16, 2.0));
  return out;
}

Outcome propagation_oracle(const std::vector<oracle::Instance>& insts) {
  double worst = 0.0;
  std::size_t coords = 0;
  for (const auto& inst : insts) {
    const auto trace = forward(inst.enc, inst.topics, inst.kg, inst.params);
    const auto dense = oracle::forward(inst.enc, inst.topics, inst.kg, inst.params);
    const auto n = inst.kg.num_entities();
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
      const auto e = trace.steps[t].entity_state.to_dense(n);
      for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, std::abs(e[j] - dense.steps[t].state[j]));
      coords += n;
    }
    const auto fin = trace.final_state.to_dense(n);
    for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, std::abs(fin[j] - dense.final_state[j]));
    coords += n;
  }
  return {worst <= 1e-9, std::to_string(insts.size()) + " graphs, " + std::to_string(coords) +
                             " coordinates, max |sparse - dense| = " + fmt("%.3g", worst)};
}

Outcome mask_oracle(const std::vector<oracle::Instance>& insts) {
  std::size_t equal = 0, partial = 0;
  for (const auto& inst : insts) {
    const auto trace = forward(inst.enc, inst.topics, inst.kg, inst.params);
    // Recompute Algorithm 1 from the dense trace: per step mask over all triples,
    // filter, then OR in every relation whose filtered score clears the threshold.
    const auto dense = oracle::forward(inst.enc, inst.topics, inst.kg, inst.params);
    const auto n = inst.kg.num_entities(), m = inst.kg.num_relations();
    oracle::Dense prev(n, 0.0);
    for (auto e : inst.topics) prev[e] = 1.0;
    std::vector<std::uint8_t> bits(m, 0);
    bool steps_equal = true;
    for (std::size_t t = 0; t < dense.steps.size(); ++t) {
      const auto step = oracle::step_mask(inst.kg, prev, dense.steps[t].raw);
      steps_equal = steps_equal && step == trace.steps[t].step_mask();
      for (std::size_t k = 0; k < m; ++k)
        if (dense.steps[t].raw[k] * step[k] > 1e-6) bits[k] = 1;
      prev = dense.steps[t].state;
    }
    if (steps_equal && bits == trace.mask.bits) ++equal;
    if (std::count(bits.begin(), bits.end(), 1) < static_cast<long>(m)) ++partial;
  }
  return {equal == insts.size(), std::to_string(equal) + "/" + std::to_string(insts.size()) +
                                     " masks bit-identical (" + std::to_string(partial) + " with some bit off)"};
}

// --- 3: paths ---------------------------------------------------------------------

Outcome path_oracle() {
  std::size_t equal = 0, total_paths = 0;
  std::map<int, int> hops;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto inst = oracle::random_instance(seed * 7 + 1000, 200, 10, 3, 16, 2.0);
    const auto trace = forward(inst.enc, inst.topics, inst.kg, inst.params);
    PathConfig cfg;
    cfg.beam = PathConfig::kUnbounded;
    const auto got = enumerate_paths(trace, inst.topics, inst.kg, cfg);
    const auto n = inst.kg.num_entities();
    std::vector<oracle::Dense> states{trace.initial_state.to_dense(n)}, filtered;
    for (const auto& s : trace.steps) {
      states.push_back(s.entity_state.to_dense(n));
      filtered.push_back(s.filtered_scores());
    }
    std::set<EntityId> targets;
    for (const auto& [id, v] : oracle::top_k(trace.final_state.to_dense(n), cfg.top_k)) targets.insert(id);
    const auto want = oracle::dfs_paths(inst.kg, inst.topics, states, filtered, trace.hop.hops, targets, cfg.threshold);
    std::set<oracle::PathKey> have;
    for (const auto& p : got) have.emplace(p.entities, p.relations);
    if (have == want && have.size() == got.size()) ++equal;
    total_paths += want.size();
    ++hops[trace.hop.hops];
  }
  std::string h;
  for (const auto& [k, v] : hops) h += " H=" + std::to_string(k) + ":" + std::to_string(v);
  return {equal == 100, std::to_string(equal) + "/100 path sets equal, " + std::to_string(total_paths) +
                            " oracle paths," + h};
}

// --- 4: gradients -----------------------------------------------------------------

Outcome gradient_check() {
  std::map<std::string, double> worst;
  std::map<std::string, int> live;
  int instances = 0;
  for (std::uint64_t seed = 1; instances < 20 && seed < 1000; ++seed) {
    oracle::Instance inst;
    if (!oracle::gradient_instance(seed, inst)) continue;
    ++instances;
    for (const auto& [group, err] : oracle::gradient_check(inst, {}, 1e-4)) {
      worst[group] = std::max(worst[group], err.relative());
      if (err.numeric_norm > 1e-8) ++live[group];
    }
  }
  bool pass = instances == 20;
  std::string detail = std::to_string(instances) + " instances;";
  for (const auto& [group, e] : worst) {
    pass = pass && e < 1e-4 && live[group] > 0;
    detail += " " + group + " " + fmt("%.2e", e) + " (" + std::to_string(live[group]) + " nonzero)";
  }
  return {pass, detail};
}

// --- 5 through 9: the synthetic pipeline ---------------------------------------------

constexpr std::uint64_t kSynthSeed = 2024;

struct PipelineRun {
  SynthData data;
  std::shared_ptr<const KnowledgeGraph> kg;
  std::string checkpoint_bytes;
  Checkpoint ckpt;
  EvalReport report;
  std::string report_bytes;
  double train_seconds = 0.0;
};

PipelineRun run_pipeline(bool use_mask) {
  PipelineRun run;
  SynthConfig sc;  // 500 train / 100 test, half of each answerable by a direct relation
  run.data = synth_generate(sc, kSynthSeed);
  run.kg = std::make_shared<const KnowledgeGraph>(run.data.graph);
  GraphSource graphs(run.kg);

  TrainConfig tc;  // T=2, d=64, 60 epochs, lr 1e-3, RAdam
  tc.use_mask = use_mask;
  HashEncoder encoder(tc.dim, tc.encoder_seed);
  const auto samples = make_training_samples(run.data.train, graphs, encoder);
  const auto t0 = std::chrono::steady_clock::now();
  auto trained = train(samples, *run.kg, tc);
  run.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  Checkpoint ckpt;
  ckpt.params = std::move(trained.params);
  ckpt.config = tc.reasoner();
  ckpt.relation_vocab_hash = run.kg->relation_vocab_hash();
  ckpt.encoder_seed = tc.encoder_seed;
  std::stringstream bytes;
  write_checkpoint(bytes, ckpt);
  run.checkpoint_bytes = bytes.str();
  run.ckpt = read_checkpoint(bytes);

  PipelineConfig pc;
  pc.reasoner = run.ckpt.config;
  LlmClient client(ClientConfig{});
  run.report = evaluate(run.data.test, graphs, encoder, run.ckpt.params, pc, client);
  std::ostringstream rep;
  write_report_rows(rep, run.report);
  write_report_summary(rep, run.report);
  run.report_bytes = rep.str();
  return run;
}

Outcome synthetic_learning(const PipelineRun& run) {
  const double phr = run.report.path_hit_rate;
  const double hop = run.report.hop_accuracy.value_or(0.0);
  return {phr >= 0.95 && hop >= 0.90, "path_hit_rate@10 = " + fmt("%.3f", phr) + ", hop_accuracy = " +
                                          fmt("%.3f", hop) + ", training " + fmt("%.1f", run.train_seconds) + " s"};
}

Outcome ablation_direction(const PipelineRun& with_mask, const PipelineRun& without_mask) {
  const double a = with_mask.report.hop_accuracy.value_or(0.0);
  const double b = without_mask.report.hop_accuracy.value_or(0.0);
  return {a > b, "hop_accuracy with mask " + fmt("%.3f", a) + " vs zero mask " + fmt("%.3f", b)};
}

Outcome mock_consistency(const PipelineRun& run) {
  std::size_t top_hits = 0;
  for (const auto& row : run.report.rows) {
    if (row.paths.empty()) continue;
    const auto terminal = normalize_answer(split_path(row.paths.front()).back());
    const auto& ex = find_example(run.data.test, row.id);
    for (const auto& gold : ex.answers)
      if (normalize_answer(gold) == terminal) {
        ++top_hits;
        break;
      }
  }
  const double fraction = static_cast<double>(top_hits) / static_cast<double>(run.report.rows.size());
  return {run.report.accuracy == fraction && run.report.errors == 0,
          "accuracy = " + fmt("%.3f", run.report.accuracy) + ", top-path hit fraction = " + fmt("%.3f", fraction)};
}

Outcome determinism(const PipelineRun& a, const PipelineRun& b) {
  const bool ck = a.checkpoint_bytes == b.checkpoint_bytes;
  const bool rp = a.report_bytes == b.report_bytes;
  return {ck && rp, std::string("checkpoint ") + (ck ? "identical" : "DIFFERS") + " (" +
                        std::to_string(a.checkpoint_bytes.size()) + " bytes), report " + (rp ? "identical" : "DIFFERS") +
                        " (" + std::to_string(a.report_bytes.size()) + " bytes)"};
}

Outcome sweep_shape(const PipelineRun& run) {
  GraphSource graphs(run.kg);
  HashEncoder encoder(run.ckpt.params.dim, run.ckpt.encoder_seed);
  LlmClient client(ClientConfig{});
  PipelineConfig base;
  base.reasoner = run.ckpt.config;
  const ModelVariant model{&run.ckpt.params, run.ckpt.config};
  const auto ks = sweep_k_n(run.data.test, graphs, encoder, model, base, {5, 10, 15}, {1}, client);
  bool monotone = ks.size() == 3;
  std::string detail = "path_hit_rate K=5/10/15:";
  for (std::size_t i = 0; i < ks.size(); ++i) {
    detail += " " + fmt("%.3f", ks[i].report.path_hit_rate);
    if (i > 0 && ks[i].report.path_hit_rate < ks[i - 1].report.path_hit_rate) monotone = false;
  }
  base.exemplars = load_exemplars(RFKG_DATA_DIR "/exemplars_5.json");
  const auto es = sweep_fewshot(run.data.test, graphs, encoder, model, base, {0, 1, 2, 3, 4, 5}, client);
  std::ostringstream grid;
  write_grid(grid, es);
  std::size_t lines = 0;
  for (char c : grid.str()) lines += c == '\n';
  detail += "; E sweep rows = " + std::to_string(es.size()) + " (" + std::to_string(lines - 1) + " written)";
  return {monotone && es.size() == 6 && lines == 7, detail};
}

// --- 10: format ---------------------------------------------------------------------

Outcome format_fidelity(const PipelineRun& run) {
  static const std::regex grammar(R"(^[^\n]+( -> [^\n]+ -> [^\n]+)+$)");
  HashEncoder encoder(run.ckpt.params.dim, run.ckpt.encoder_seed);
  std::size_t checked = 0, bad = 0;
  for (const auto& ex : run.data.test) {
    const auto enc = encoder.encode(ex.id, ex.question);
    std::vector<EntityId> topics;
    for (const auto& t : ex.topic_entities) topics.push_back(run.kg->entity(t));
    const auto trace = forward(enc, topics, *run.kg, run.ckpt.params, run.ckpt.config);
    for (const auto& p : enumerate_paths(trace, topics, *run.kg, PathConfig{})) {
      const auto text = serialize_path(p, *run.kg);
      std::vector<std::string> labels;
      for (std::size_t i = 0; i < p.entities.size(); ++i) {
        labels.push_back(run.kg->entity_name(p.entities[i]));
        if (i < p.relations.size()) labels.push_back(run.kg->relation_name(p.relations[i]));
      }
      ++checked;
      if (!std::regex_match(text, grammar) || split_path(text) != labels) ++bad;
    }
  }
  const auto prompt = build_prompt("Who is the brother of Justin Bieber?",
                                   {"Justin Bieber -> brother -> Jaxon Bieber"}, default_exemplars(), 3);
  std::size_t questions = 0, answers = 0, thinks = 0;
  std::istringstream in(prompt.text);
  for (std::string line; std::getline(in, line);) {
    questions += line.starts_with("Question: ");
    answers += line.starts_with("Answer: ");
    thinks += line.starts_with("Think: ");
  }
  const bool blocks = questions == 4 && answers == 3 && thinks == 3 && count_exemplar_blocks(prompt.text) == 3;
  return {checked > 0 && bad == 0 && blocks,
          std::to_string(checked - bad) + "/" + std::to_string(checked) + " paths round-trip; E=3 prompt has " +
              std::to_string(answers) + " exemplar blocks"};
}

}  // namespace

int main() {
  const auto insts = small_instances();
  report(1, "propagation oracle", 30, [&] { return propagation_oracle(insts); });
  report(2, "mask oracle", 0, [&] { return mask_oracle(insts); });
  report(3, "path oracle", 60, path_oracle);
  report(4, "gradient check", 60, gradient_check);

  PipelineRun first, second, no_mask;
  report(5, "synthetic learning", 300, [&] {
    first = run_pipeline(true);
    return synthetic_learning(first);
  });
  report(6, "mask ablation direction", 0, [&] {
    no_mask = run_pipeline(false);
    return ablation_direction(first, no_mask);
  });
  report(7, "mock end-to-end consistency", 0, [&] { return mock_consistency(first); });
  report(8, "determinism", 0, [&] {
    second = run_pipeline(true);
    return determinism(first, second);
  });
  report(9, "sweep shape", 0, [&] { return sweep_shape(first); });
  report(10, "format fidelity", 0, [&] { return format_fidelity(first); });

  std::printf("%s: %d of 10 criteria failed\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
