#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "kgc/error.hpp"
#include "kgc/kg.hpp"
#include "support.hpp"

using namespace kgc;

TEST_CASE("toy graph stats") {
  const auto g = testing::toy_graph();
  CHECK(graph_stats(g) == GraphStats{4, 2, 4});
  CHECK(g.entities().labels() == std::vector<std::string>{"A", "B", "C", "D"});
  CHECK(g.relations().labels() == std::vector<std::string>{"r1", "r2"});
}

TEST_CASE("parser rejects a two-field line") {
  try {
    parse_triple_text("A\tr1\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()) == "line 1: expected 3 fields, got 2");
    CHECK(e.line() == 1);
  }
}

TEST_CASE("parser error names the line") {
  try {
    parse_triple_text("A\tr1\tB\n\nA\tr1\tB\textra\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()) == "line 3: expected 3 fields, got 4");
  }
}

TEST_CASE("parser edge cases") {
  SUBCASE("blank lines and CRLF") {
    const auto raw = parse_triple_text("\nA\tr1\tB\r\n  \nB\tr1\tC\n");
    REQUIRE(raw.size() == 2);
    CHECK(raw[0] == RawTriple{"A", "r1", "B"});
    CHECK(raw[1] == RawTriple{"B", "r1", "C"});
  }
  SUBCASE("empty field") { CHECK_THROWS_AS(parse_triple_text("A\t\tB\n"), ParseError); }
  SUBCASE("invalid utf-8") { CHECK_THROWS_AS(parse_triple_text("A\tr\xff\tB\n"), ParseError); }
  SUBCASE("truncated utf-8 sequence") { CHECK_THROWS_AS(parse_triple_text("A\tr1\tB\xc3"), ParseError); }
  SUBCASE("multibyte labels survive") {
    const auto raw = parse_triple_text("caf\xc3\xa9\tr1\t\xe6\x9d\xb1\n");
    CHECK(raw[0].head == "caf\xc3\xa9");
  }
  SUBCASE("empty input builds nothing") { CHECK_THROWS_AS(build_graph({}), Error); }
}

TEST_CASE("missing file error names the path") {
  try {
    load_triple_file("/nonexistent/dir/train.tsv");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("/nonexistent/dir/train.tsv") != std::string::npos);
  }
}

TEST_CASE("file errors carry path and line") {
  const auto dir = testing::scratch_dir("kg_file");
  const auto path = dir / "bad.tsv";
  std::ofstream(path) << "A\tr1\tB\nA r1 B\n";
  try {
    load_triple_file(path);
    FAIL("expected an error");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(path.string()) != std::string::npos);
    CHECK(msg.find("line 2") != std::string::npos);
  }
}

TEST_CASE("duplicates are kept in file order") {
  const auto g = build_graph(parse_triple_text("A\tr\tB\nA\tr\tB\n"));
  CHECK(g.triples().size() == 2);
  CHECK(g.find(g.triple(1)) == std::optional<std::size_t>(0));
}

TEST_CASE("write then parse round-trips the triple multiset") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = synthetic_graph({30, 4, 120, 0.2, seed});
    std::ostringstream out;
    write_triples_tsv(out, g);
    const auto back = build_graph(parse_triple_text(out.str()));
    CHECK(back == g);
    CHECK(back.fingerprint() == g.fingerprint());
  }
}

TEST_CASE("indexes agree with a linear scan") {
  const auto g = synthetic_graph({40, 6, 300, 0.1, 3});
  for (std::uint32_t e = 0; e < g.entity_count(); ++e) {
    std::vector<std::uint32_t> heads, tails;
    for (std::uint32_t i = 0; i < g.triples().size(); ++i) {
      if (g.triple(i).head.value == e) heads.push_back(i);
      if (g.triple(i).tail.value == e) tails.push_back(i);
    }
    const auto bh = g.by_head(EntityId{e});
    const auto bt = g.by_tail(EntityId{e});
    CHECK(std::vector<std::uint32_t>(bh.begin(), bh.end()) == heads);
    CHECK(std::vector<std::uint32_t>(bt.begin(), bt.end()) == tails);
  }
  for (std::uint32_t r = 0; r < g.relation_count(); ++r) {
    std::vector<std::uint32_t> rows;
    for (std::uint32_t i = 0; i < g.triples().size(); ++i) {
      if (g.triple(i).relation.value == r) rows.push_back(i);
    }
    const auto br = g.by_relation(RelationId{r});
    CHECK(std::vector<std::uint32_t>(br.begin(), br.end()) == rows);
  }
  CHECK_THROWS_AS(g.by_head(EntityId{999}), Error);
}

TEST_CASE("fingerprint sees labels and order") {
  const auto a = build_graph(parse_triple_text("A\tr\tB\nB\tr\tC\n"));
  const auto b = build_graph(parse_triple_text("B\tr\tC\nA\tr\tB\n"));
  const auto c = build_graph(parse_triple_text("A\tr\tB\nB\tr\tX\n"));
  CHECK(a.fingerprint() != b.fingerprint());
  CHECK(a.fingerprint() != c.fingerprint());
}

TEST_CASE("dataset interns train, then valid, then test") {
  const auto tr = parse_triple_text(testing::kToyTsv);
  const auto va = parse_triple_text("A\tr3\tE\n");
  const auto te = parse_triple_text("F\tr1\tA\n");
  const auto d = build_dataset(tr, va, te);
  CHECK(d.stats() == GraphStats{6, 3, 4});
  CHECK(d.train.entities().label(4) == "E");
  CHECK(d.train.entities().label(5) == "F");
  REQUIRE(d.valid.size() == 1);
  CHECK(d.valid[0].tail == EntityId{4});
  CHECK(d.context_graph(false) == d.train);
  CHECK(d.context_graph(true).triples().size() == 5);
  CHECK_THROWS_AS(build_dataset({}, va, te), Error);
}

TEST_CASE("synthetic generator properties") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SyntheticKgConfig cfg{50, 5, 200, 0.1, seed};
    const auto t = generate_synthetic_kg(cfg);
    REQUIRE(t.size() == 200);
    CHECK(generate_synthetic_kg(cfg) == t);
    std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> unique;
    std::set<std::pair<std::uint32_t, std::uint32_t>> hr;
    std::set<std::uint32_t> heads;
    for (const auto& x : t) {
      CHECK(x.head != x.tail);
      CHECK(x.head.value < 50);
      CHECK(x.tail.value < 50);
      CHECK(x.relation.value < 5);
      unique.insert({x.head.value, x.relation.value, x.tail.value});
      hr.insert({x.head.value, x.relation.value});
      heads.insert(x.head.value);
    }
    CHECK(unique.size() == t.size());
    CHECK(hr.size() == t.size());
    CHECK(heads.size() == 50);
  }
  CHECK(generate_synthetic_kg({50, 5, 200, 0.1, 1}) != generate_synthetic_kg({50, 5, 200, 0.1, 2}));
  CHECK_THROWS_AS(generate_synthetic_kg({3, 1, 7, 0.0, 0}), Error);
  CHECK_NOTHROW(generate_synthetic_kg({3, 1, 6, 0.0, 0}));
  CHECK_THROWS_AS(generate_synthetic_kg({1, 1, 1, 0.0, 0}), Error);
}

TEST_CASE("hubs attract tails") {
  const auto t = generate_synthetic_kg({1000, 10, 5000, 0.05, 9});
  std::size_t hub_tails = 0;
  std::vector<std::size_t> indegree(1000);
  for (const auto& x : t) ++indegree[x.tail.value];
  std::sort(indegree.rbegin(), indegree.rend());
  for (std::size_t i = 0; i < 50; ++i) hub_tails += indegree[i];
  CHECK(hub_tails > 2000);
}
