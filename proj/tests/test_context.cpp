#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>

#include "kgc/binary_io.hpp"
#include "kgc/context.hpp"
#include "kgc/error.hpp"
#include "support.hpp"

using namespace kgc;
using testing::ent;
using testing::labels;
using testing::rel;
using V = std::vector<std::string>;

TEST_CASE("toy head context") {
  const auto g = testing::toy_graph();
  ContextConfig cfg;
  const auto a = head_context(g, ent(g, "A"), cfg);
  CHECK(labels(g, a.relations) == V{"r1", "r2"});
  CHECK(labels(g, a.entities) == V{"B", "C"});
  CHECK(labels(g, relation_neighborhood(g, ent(g, "A"), cfg)) == V{"r1", "r2"});
  CHECK(labels(g, entity_neighborhood(g, ent(g, "A"), cfg)) == V{"B", "C"});

  const auto d = head_context(g, ent(g, "D"), cfg);
  CHECK(labels(g, d.relations) == V{"r2"});
  CHECK(labels(g, d.entities) == V{"A"});

  // C only appears as a tail.
  CHECK(head_context(g, ent(g, "C"), cfg).empty());
}

TEST_CASE("incoming edges join the head context") {
  const auto g = testing::toy_graph();
  ContextConfig cfg;
  cfg.include_incoming = true;
  const auto a = head_context(g, ent(g, "A"), cfg);
  CHECK(labels(g, a.relations) == V{"r1", "r2"});
  CHECK(labels(g, a.entities) == V{"B", "C", "D"});
  const auto c = head_context(g, ent(g, "C"), cfg);
  CHECK(labels(g, c.relations) == V{"r2", "r1"});
  CHECK(labels(g, c.entities) == V{"A", "B"});
}

TEST_CASE("budget keeps relations before entities") {
  const auto g = testing::toy_graph();
  ContextConfig cfg;
  cfg.head_context_budget = 2;
  const auto a = head_context(g, ent(g, "A"), cfg);
  CHECK(labels(g, a.relations) == V{"r1", "r2"});
  CHECK(a.entities.empty());
  cfg.head_context_budget = 3;
  CHECK(labels(g, head_context(g, ent(g, "A"), cfg).entities) == V{"B"});
  cfg.head_context_budget = 1;
  CHECK(labels(g, head_context(g, ent(g, "A"), cfg).relations) == V{"r1"});
  cfg.head_context_budget = 0;
  CHECK(head_context(g, ent(g, "A"), cfg).empty());
}

TEST_CASE("toy relation context") {
  const auto g = testing::toy_graph();
  ContextConfig cfg;
  CHECK(labels(g, relation_context(g, rel(g, "r1"), cfg).entities) == V{"A", "B", "C"});
  CHECK(labels(g, relation_context(g, rel(g, "r2"), cfg).entities) == V{"A", "C", "D"});
  cfg.relation_context_budget = 2;
  CHECK(labels(g, relation_context(g, rel(g, "r1"), cfg).entities) == V{"A", "B"});
}

TEST_CASE("leave-one-out drops the query triple") {
  const auto g = testing::toy_graph();
  const auto table = precompute_all_contexts(g, {});
  ContextConfig cfg;
  cfg.leave_one_out = true;
  const auto [hc, rc] = query_context(table, g, ent(g, "A"), rel(g, "r1"), cfg,
                                      Triple{ent(g, "A"), rel(g, "r1"), ent(g, "B")});
  CHECK(labels(g, hc.relations) == V{"r2"});
  CHECK(labels(g, hc.entities) == V{"C"});
  CHECK(labels(g, rc.entities) == V{"B", "C"});

  // Without the flag the exclusion is ignored.
  cfg.leave_one_out = false;
  const auto [hc2, rc2] = query_context(table, g, ent(g, "A"), rel(g, "r1"), cfg,
                                        Triple{ent(g, "A"), rel(g, "r1"), ent(g, "B")});
  CHECK(hc2 == table.head(ent(g, "A")));
  CHECK(rc2 == table.relation(rel(g, "r1")));
}

TEST_CASE("invalid ids are rejected") {
  const auto g = testing::toy_graph();
  CHECK_THROWS_AS(head_context(g, EntityId{4}, {}), Error);
  CHECK_THROWS_AS(relation_context(g, RelationId{2}, {}), Error);
}

TEST_CASE("query_context refuses a table built differently") {
  const auto g = testing::toy_graph();
  const auto table = precompute_all_contexts(g, {});
  ContextConfig other;
  other.head_context_budget = 3;
  CHECK_THROWS_AS(query_context(table, g, ent(g, "A"), rel(g, "r1"), other), Error);
  const auto g2 = build_graph(parse_triple_text("A\tr1\tB\n"));
  CHECK_THROWS_AS(query_context(table, g2, ent(g2, "A"), rel(g2, "r1"), {}), Error);
}

TEST_CASE("precomputed table matches the brute-force scan") {
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto g = synthetic_graph({60, 7, 400, 0.15, seed});
    for (bool incoming : {false, true}) {
      for (std::size_t budget : {0, 1, 3, 8, 64}) {
        ContextConfig cfg;
        cfg.include_incoming = incoming;
        cfg.head_context_budget = budget;
        cfg.relation_context_budget = budget + 2;
        const auto table = precompute_all_contexts(g, cfg);
        for (std::uint32_t e = 0; e < g.entity_count(); ++e) {
          REQUIRE(table.head(EntityId{e}) == testing::oracle_head(g.triples(), EntityId{e}, cfg));
        }
        for (std::uint32_t r = 0; r < g.relation_count(); ++r) {
          REQUIRE(table.relation(RelationId{r}) == testing::oracle_relation(g.triples(), RelationId{r}, cfg));
        }
        cfg.leave_one_out = true;
        for (int q = 0; q < 50; ++q) {
          const std::size_t i = rng() % g.triples().size();
          const auto& t = g.triple(i);
          const auto [hc, rc] = query_context_excluding(table, g, t.head, t.relation, cfg, i);
          REQUIRE(hc == testing::oracle_head(g.triples(), t.head, cfg, i));
          REQUIRE(rc == testing::oracle_relation(g.triples(), t.relation, cfg, i));
        }
      }
    }
  }
}

TEST_CASE("a smaller budget yields a prefix") {
  const auto g = synthetic_graph({40, 5, 300, 0.2, 11});
  for (bool incoming : {false, true}) {
    for (std::uint32_t e = 0; e < g.entity_count(); ++e) {
      ContextConfig big;
      big.include_incoming = incoming;
      big.head_context_budget = 20;
      const auto full = head_context(g, EntityId{e}, big);
      for (std::size_t b = 0; b < 20; ++b) {
        ContextConfig small = big;
        small.head_context_budget = b;
        const auto part = head_context(g, EntityId{e}, small);
        CHECK(part.size() <= b);
        REQUIRE(std::equal(part.relations.begin(), part.relations.end(), full.relations.begin()));
        REQUIRE(std::equal(part.entities.begin(), part.entities.end(), full.entities.begin()));
      }
    }
  }
}

TEST_CASE("context cache round trip and invalidation") {
  const auto dir = testing::scratch_dir("ctx_cache");
  const auto path = dir / "contexts.mctx";
  const auto g = synthetic_graph({30, 4, 100, 0.1, 2});
  ContextConfig cfg;
  cfg.include_incoming = true;
  cfg.head_context_budget = 10;
  const auto table = precompute_all_contexts(g, cfg);
  save_context_cache(table, path);
  CHECK(load_context_cache(path) == table);

  auto hit = load_context_cache_if_valid(path, g.fingerprint(), cfg);
  REQUIRE(hit);
  CHECK(*hit == table);

  CHECK_FALSE(load_context_cache_if_valid(path, g.fingerprint() + 1, cfg));
  ContextConfig other = cfg;
  other.include_incoming = false;
  CHECK_FALSE(load_context_cache_if_valid(path, g.fingerprint(), other));
  other = cfg;
  other.relation_context_budget = 5;
  CHECK_FALSE(load_context_cache_if_valid(path, g.fingerprint(), other));
  other = cfg;
  other.leave_one_out = true;
  CHECK(load_context_cache_if_valid(path, g.fingerprint(), other));
  CHECK_FALSE(load_context_cache_if_valid(dir / "absent.mctx", g.fingerprint(), cfg));

  SUBCASE("bad magic") {
    auto bytes = io::read_file(path);
    bytes[0] = 'X';
    io::write_file_atomic(path, bytes);
    CHECK_THROWS_AS(load_context_cache(path), Error);
  }
  SUBCASE("truncated") {
    auto bytes = io::read_file(path);
    io::write_file_atomic(path, bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS(load_context_cache(path));
  }
}
