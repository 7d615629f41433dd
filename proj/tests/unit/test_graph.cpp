#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "rfkg/entity_state.hpp"
#include "rfkg/error.hpp"
#include "rfkg/graph.hpp"

using namespace rfkg;

namespace {

KnowledgeGraph parse(const std::string& text, bool reverse = false) {
  std::istringstream in(text);
  GraphLoadOptions opt;
  opt.add_reverse = reverse;
  return read_graph(in, "inline", opt);
}

std::set<std::tuple<std::string, std::string, std::string>> labelled(const KnowledgeGraph& kg) {
  std::set<std::tuple<std::string, std::string, std::string>> out;
  for (const auto& t : kg.triples())
    out.emplace(kg.entity_name(t.subject), kg.relation_name(t.relation), kg.entity_name(t.object));
  return out;
}

}  // namespace

TEST_CASE("single triple without reverse relations") {
  const auto kg = parse("A\tr\tB\n");
  CHECK(kg.num_entities() == 2);
  CHECK(kg.num_relations() == 1);
  CHECK(kg.num_triples() == 1);
}

TEST_CASE("single triple with reverse relations") {
  const auto kg = parse("A\tr\tB\n", true);
  CHECK(kg.num_entities() == 2);
  CHECK(kg.num_relations() == 2);
  CHECK(kg.num_triples() == 2);
  CHECK(kg.find_relation("r").has_value());
  CHECK(kg.find_relation("r_inv").has_value());
  CHECK(kg.contains(kg.entity("B"), *kg.find_relation("r_inv"), kg.entity("A")));
}

TEST_CASE("three-line chain with reverse relations indexes B twice") {
  const auto kg = parse("A\tr\tB\nB\tr\tC\nA\ts\tC\n", true);
  CHECK(kg.num_triples() == 6);
  const auto b = kg.entity("B");
  CHECK(kg.outgoing(b).size() == 2);
  CHECK(kg.incoming(b).size() == 2);
  for (auto j : kg.outgoing(b)) CHECK(kg.triple(j).subject == b);
}

TEST_CASE("duplicate lines collapse") {
  const auto kg = parse("A\tr\tB\nA\tr\tB\n");
  CHECK(kg.num_triples() == 1);
}

TEST_CASE("loader errors") {
  CHECK_THROWS_AS(parse(""), DataError);
  try {
    parse("A\tr\tB\nA\tr\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse("A\t\tB\n"), ParseError);
  CHECK_THROWS_AS(load_graph("/nonexistent/graph.tsv"), DataError);
}

TEST_CASE("fixed relation vocabulary rejects unknown relations") {
  std::istringstream in("A\tq\tB\n");
  GraphLoadOptions opt;
  opt.relation_vocab = std::vector<std::string>{"r", "s"};
  CHECK_THROWS_AS(read_graph(in, "inline", opt), DataError);

  std::istringstream ok("A\ts\tB\n");
  const auto kg = read_graph(ok, "inline", opt);
  CHECK(kg.num_relations() == 2);
  CHECK(*kg.find_relation("s") == 1);
}

TEST_CASE("round trip preserves vocabularies and triples") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const auto generated = oracle::random_graph(rng, 2 + rng.below(30), 1 + rng.below(6), 1 + rng.below(80));
    std::ostringstream first;
    write_graph(first, generated);
    const auto kg = parse(first.str());
    std::ostringstream out;
    write_graph(out, kg);
    CHECK(out.str() == first.str());
    const auto back = parse(out.str());
    CHECK(back.entity_names() == kg.entity_names());
    CHECK(back.relation_names() == kg.relation_names());
    CHECK(back.triples() == kg.triples());
  }
}

TEST_CASE("reverse closure doubles the deduplicated triple count") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed * 31);
    std::ostringstream text;
    std::set<std::tuple<std::string, std::string, std::string>> lines;
    const auto n = 2 + rng.below(15);
    for (std::size_t i = 0, count = 1 + rng.below(40); i < count; ++i) {
      const auto s = "e" + std::to_string(rng.below(n));
      const auto r = "r" + std::to_string(rng.below(4));
      const auto o = "e" + std::to_string(rng.below(n));
      lines.emplace(s, r, o);
      text << s << '\t' << r << '\t' << o << '\n';
    }
    const auto kg = parse(text.str(), true);
    CHECK(kg.num_triples() == 2 * lines.size());
    for (const auto& t : kg.triples()) {
      const auto& name = kg.relation_name(t.relation);
      const bool inverse = name.ends_with("_inv");
      const auto partner = inverse ? name.substr(0, name.size() - 4) : name + "_inv";
      const auto pid = kg.find_relation(partner);
      REQUIRE(pid.has_value());
      CHECK(kg.contains(t.object, *pid, t.subject));
    }
  }
}

TEST_CASE("subject and object indices are exact") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed * 7);
    const auto kg = oracle::random_graph(rng, 2 + rng.below(30), 1 + rng.below(5), rng.below(90));
    std::size_t out_total = 0, in_total = 0;
    for (EntityId e = 0; e < kg.num_entities(); ++e) {
      for (auto j : kg.outgoing(e)) CHECK(kg.triple(j).subject == e);
      for (auto j : kg.incoming(e)) CHECK(kg.triple(j).object == e);
      out_total += kg.outgoing(e).size();
      in_total += kg.incoming(e).size();
    }
    CHECK(out_total == kg.num_triples());
    CHECK(in_total == kg.num_triples());
    for (std::uint32_t j = 0; j < kg.num_triples(); ++j) CHECK(kg.triple(j).index == j);
  }
}

TEST_CASE("khop on a chain") {
  const auto kg = parse("A\tr\tB\nB\tr\tC\n");
  const std::vector<EntityId> topics{kg.entity("A")};
  const auto one = khop_subgraph(kg, topics, 1, false);
  CHECK(labelled(one.graph) == decltype(labelled(one.graph)){{"A", "r", "B"}});
  const auto two = khop_subgraph(kg, topics, 2, false);
  CHECK(two.graph.num_triples() == 2);
  CHECK(two.graph.entity_name(0) == "A");
}

TEST_CASE("khop on a star pointing inward needs the backward direction") {
  const auto kg = parse("L1\tp\tH\nL2\tp\tH\nL3\tp\tH\nL4\tp\tH\n");
  const std::vector<EntityId> hub{kg.entity("H")};
  CHECK(khop_subgraph(kg, hub, 1, true).graph.num_triples() == 4);
  CHECK(khop_subgraph(kg, hub, 1, false).graph.num_triples() == 0);
}

TEST_CASE("khop matches a reachability oracle and grows with k") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    Rng rng(seed * 13);
    const auto kg = oracle::random_graph(rng, 3 + rng.below(25), 1 + rng.below(4), 1 + rng.below(50));
    const std::vector<EntityId> topics{static_cast<EntityId>(rng.below(kg.num_entities()))};
    const bool bidi = seed % 2 == 0;
    std::set<std::uint32_t> prev;
    for (int k = 1; k <= 3; ++k) {
      const auto sub = khop_subgraph(kg, topics, k, bidi);
      std::set<std::uint32_t> got(sub.triple_origin.begin(), sub.triple_origin.end());
      // Oracle: a triple is within k hops when its near endpoint is at distance <= k-1.
      std::vector<int> dist(kg.num_entities(), -1);
      dist[topics[0]] = 0;
      for (int round = 0; round < k; ++round)
        for (const auto& t : kg.triples()) {
          if (dist[t.subject] == round && dist[t.object] < 0) dist[t.object] = round + 1;
          if (bidi && dist[t.object] == round && dist[t.subject] < 0) dist[t.subject] = round + 1;
        }
      std::set<std::uint32_t> want;
      for (const auto& t : kg.triples()) {
        const bool fwd = dist[t.subject] >= 0 && dist[t.subject] <= k - 1;
        const bool bwd = bidi && dist[t.object] >= 0 && dist[t.object] <= k - 1;
        if (fwd || bwd) want.insert(t.index);
      }
      CHECK(got == want);
      CHECK(std::includes(got.begin(), got.end(), prev.begin(), prev.end()));
      for (std::uint32_t j = 0; j < sub.graph.num_triples(); ++j) {
        const auto& local = sub.graph.triple(j);
        const auto& parent = kg.triple(sub.triple_origin[j]);
        CHECK(sub.entity_origin[local.subject] == parent.subject);
        CHECK(sub.entity_origin[local.object] == parent.object);
        CHECK(sub.relation_origin[local.relation] == parent.relation);
      }
      prev = got;
    }
  }
}

TEST_CASE("khop errors") {
  const auto kg = parse("A\tr\tB\n");
  const std::vector<EntityId> bad{7};
  CHECK_THROWS_AS(khop_subgraph(kg, bad, 1, false), DataError);
  const std::vector<EntityId> a{0};
  CHECK_THROWS_AS(khop_subgraph(kg, a, 0, false), ConfigError);
}

TEST_CASE("one-hot initial state") {
  const std::vector<EntityId> a{0};
  CHECK(one_hot(a, 3).to_dense(3) == std::vector<double>{1, 0, 0});
  const std::vector<EntityId> ac{0, 2};
  CHECK(one_hot(ac, 3).to_dense(3) == std::vector<double>{1, 0, 1});
  const std::vector<EntityId> out{5};
  CHECK_THROWS_AS(one_hot(out, 3), DataError);
  CHECK_THROWS_AS(one_hot(std::span<const EntityId>{}, 3), DataError);
}

TEST_CASE("answer vector is multi-hot") {
  AnswerVector a({2, 0, 2}, 4);
  CHECK(a.gold().size() == 2);
  CHECK(a.contains(0));
  CHECK(!a.contains(1));
  CHECK(a.as_vector().to_dense(4) == std::vector<double>{1, 0, 1, 0});
  CHECK_THROWS_AS(AnswerVector({}, 3), DataError);
  CHECK_THROWS_AS(AnswerVector({3}, 3), DataError);
}
