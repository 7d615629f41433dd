#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "rfkg/checkpoint.hpp"
#include "rfkg/encoder.hpp"
#include "rfkg/error.hpp"
#include "rfkg/train.hpp"

using namespace rfkg;

namespace {

struct Toy {
  std::shared_ptr<const KnowledgeGraph> kg;
  std::vector<TrainingSample> samples;
};

Toy single_triple() {
  KnowledgeGraph::Builder b;
  b.add_triple("A", "r", "B");
  Toy toy;
  toy.kg = std::make_shared<const KnowledgeGraph>(std::move(b).build());
  HashEncoder enc(8, 0);
  toy.samples.push_back({"s1", enc.encode("s1", "who follows a"), {0}, AnswerVector({1}, 2), nullptr});
  return toy;
}

Toy small_random(std::uint64_t seed, std::size_t count) {
  Rng rng(seed);
  Toy toy;
  toy.kg = std::make_shared<const KnowledgeGraph>(oracle::random_graph(rng, 20, 4, 50));
  HashEncoder enc(8, seed);
  for (std::size_t i = 0; i < count; ++i) {
    const auto id = "s" + std::to_string(i);
    const EntityId topic = static_cast<EntityId>(rng.below(20));
    const EntityId gold = static_cast<EntityId>(rng.below(20));
    toy.samples.push_back({id, enc.encode(id, "question number " + std::to_string(i % 5)), {topic},
                           AnswerVector({gold}, 20), nullptr});
  }
  return toy;
}

}  // namespace

TEST_CASE("single triple, one step: training drives the loss to zero") {
  const auto toy = single_triple();
  TrainConfig cfg;
  cfg.steps = 1;
  cfg.dim = 8;
  cfg.epochs = 200;
  cfg.lr = 5e-2;
  cfg.batch_size = 1;
  const auto result = train(toy.samples, *toy.kg, cfg);
  REQUIRE(result.loss_history.size() == 200);
  CHECK(result.loss_history.back() < 1e-3);
  CHECK(result.loss_history.back() < result.loss_history.front());
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const auto toy = small_random(3, 12);
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 3;
  cfg.lr = 0.0;
  for (auto kind : {OptimizerKind::kAdam, OptimizerKind::kRAdam}) {
    cfg.optimizer = kind;
    const auto initial = ReasonerParams::random(8, toy.kg->num_relations(), cfg.steps, cfg.seed);
    const auto result = train(toy.samples, *toy.kg, cfg);
    CHECK(result.params == initial);
  }
}

TEST_CASE("training is deterministic under a fixed seed") {
  const auto toy = small_random(4, 20);
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 4;
  cfg.batch_size = 3;
  const auto a = train(toy.samples, *toy.kg, cfg);
  const auto b = train(toy.samples, *toy.kg, cfg);
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.params == b.params);
  cfg.seed = 1;
  CHECK(train(toy.samples, *toy.kg, cfg).params != a.params);
}

TEST_CASE("training errors") {
  const auto toy = single_triple();
  TrainConfig cfg;
  cfg.dim = 8;
  CHECK_THROWS_AS(train({}, *toy.kg, cfg), DataError);
  auto bad = ReasonerParams::random(8, 1, cfg.steps, 0);
  bad.hop_head.bias[0] = std::nan("");
  try {
    train(toy.samples, *toy.kg, cfg, bad);
    FAIL("expected a non-finite loss error");
  } catch (const Error& e) {
    INFO(std::string(e.what()));
    CHECK(std::string(e.what()).find("s1") != std::string::npos);
  }
}

TEST_CASE("batch gradient is the mean of per-sample gradients") {
  const auto toy = small_random(9, 4);
  const auto params = ReasonerParams::random(8, toy.kg->num_relations(), 2, 5);
  std::vector<const TrainingSample*> all;
  for (const auto& s : toy.samples) all.push_back(&s);
  auto batch = ReasonerParams::zeros(8, toy.kg->num_relations(), 2);
  const double mean = batch_gradient(all, *toy.kg, params, {}, batch);
  double total = 0.0;
  auto sum = ReasonerParams::zeros(8, toy.kg->num_relations(), 2);
  for (const auto* s : all) {
    auto g = ReasonerParams::zeros(8, toy.kg->num_relations(), 2);
    const std::vector<const TrainingSample*> one{s};
    total += batch_gradient(one, *toy.kg, params, {}, g);
    std::vector<std::span<const double>> gb;
    g.for_each_block([&](ParamGroup, std::span<const double> b) { gb.push_back(b); });
    std::size_t i = 0;
    sum.for_each_block([&](ParamGroup, std::span<double> b) {
      for (std::size_t k = 0; k < b.size(); ++k) b[k] += gb[i][k] / 4.0;
      ++i;
    });
  }
  CHECK(mean == doctest::Approx(total / 4.0));
  std::vector<double> x, y;
  batch.for_each_block([&](ParamGroup, std::span<const double> b) { x.insert(x.end(), b.begin(), b.end()); });
  sum.for_each_block([&](ParamGroup, std::span<const double> b) { y.insert(y.end(), b.begin(), b.end()); });
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i] == doctest::Approx(y[i]).epsilon(1e-12));
}

TEST_CASE("training config round trip and errors") {
  std::istringstream in("# comment\nT = 3\nd=16\nepochs = 5 # trailing\nlr = 0.01\nseed = 9\nclamp = false\n"
                        "mask_threshold = 1e-5\noptimizer = adam\nencoder_seed = 4\n");
  const auto cfg = parse_train_config(in, "cfg");
  CHECK(cfg.steps == 3);
  CHECK(cfg.dim == 16);
  CHECK(cfg.epochs == 5);
  CHECK(cfg.lr == 0.01);
  CHECK(cfg.seed == 9);
  CHECK(!cfg.clamp);
  CHECK(cfg.mask_threshold == 1e-5);
  CHECK(cfg.optimizer == OptimizerKind::kAdam);
  CHECK(cfg.encoder_seed == 4);

  std::ostringstream out;
  write_train_config(out, cfg);
  std::istringstream again(out.str());
  const auto back = parse_train_config(again, "again");
  CHECK(back.steps == cfg.steps);
  CHECK(back.lr == cfg.lr);
  CHECK(back.mask_threshold == cfg.mask_threshold);
  CHECK(back.clamp == cfg.clamp);

  std::istringstream unknown("bogus = 1\n");
  CHECK_THROWS_AS(parse_train_config(unknown, "cfg"), ParseError);
  std::istringstream bad_number("lr = fast\n");
  CHECK_THROWS_AS(parse_train_config(bad_number, "cfg"), ParseError);
  std::istringstream small_dim("d = 4\n");
  CHECK_THROWS_AS(parse_train_config(small_dim, "cfg"), ConfigError);
}

TEST_CASE("checkpoint round trip is exact after float32 rounding") {
  Checkpoint ckpt;
  ckpt.params = ReasonerParams::random(8, 3, 2, 12);
  round_to_float32(ckpt.params);
  ckpt.config.use_mask = false;
  ckpt.config.mask_threshold = 2e-6;
  ckpt.relation_vocab_hash = 0x1234567890abcdefULL;
  ckpt.encoder_seed = 42;
  std::stringstream buf;
  write_checkpoint(buf, ckpt);
  const auto bytes = buf.str();
  CHECK(bytes.substr(0, 8) == "RFKGCKPT");
  CHECK(bytes.size() == 8 + 4 * 5 + 8 * 4 + 4 * ckpt.params.size());
  const auto back = read_checkpoint(buf);
  CHECK(back.params == ckpt.params);
  CHECK(back.config.use_mask == false);
  CHECK(back.config.clamp == true);
  CHECK(back.config.mask_threshold == 2e-6);
  CHECK(back.relation_vocab_hash == ckpt.relation_vocab_hash);
  CHECK(back.encoder_seed == 42);

  std::stringstream again;
  write_checkpoint(again, back);
  CHECK(again.str() == bytes);
}

TEST_CASE("corrupt checkpoints are rejected") {
  Checkpoint ckpt;
  ckpt.params = ReasonerParams::random(8, 2, 1, 1);
  std::stringstream buf;
  write_checkpoint(buf, ckpt);
  const auto bytes = buf.str();

  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_checkpoint(truncated), DataError);
  std::istringstream trailing(bytes + "x");
  CHECK_THROWS_AS(read_checkpoint(trailing), DataError);
  auto wrong_magic = bytes;
  wrong_magic[0] = 'X';
  std::istringstream magic(wrong_magic);
  CHECK_THROWS_AS(read_checkpoint(magic), DataError);
  auto wrong_version = bytes;
  wrong_version[8] = 9;
  std::istringstream version(wrong_version);
  CHECK_THROWS_AS(read_checkpoint(version), DataError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent.ckpt"), DataError);
}
