#pragma once
// Shared fixtures: the 4-triple toy graph and a brute-force context oracle
// that scans the triple list directly (no indexes, no hash sets).

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <string>
#include <unordered_set>
#include <vector>

#include "kgc/context.hpp"
#include "kgc/kg.hpp"

namespace testing {

inline const char* kToyTsv = "A\tr1\tB\nA\tr2\tC\nB\tr1\tC\nD\tr2\tA\n";

inline kgc::KnowledgeGraph toy_graph() { return kgc::build_graph(kgc::parse_triple_text(kToyTsv)); }

inline kgc::EntityId ent(const kgc::KnowledgeGraph& g, const std::string& label) {
  return kgc::EntityId{g.entities().find(label).value()};
}

inline kgc::RelationId rel(const kgc::KnowledgeGraph& g, const std::string& label) {
  return kgc::RelationId{g.relations().find(label).value()};
}

inline std::vector<std::string> labels(const kgc::KnowledgeGraph& g, const std::vector<kgc::EntityId>& ids) {
  std::vector<std::string> out;
  for (auto e : ids) out.push_back(g.entities().label(e.value));
  return out;
}

inline std::vector<std::string> labels(const kgc::KnowledgeGraph& g, const std::vector<kgc::RelationId>& ids) {
  std::vector<std::string> out;
  for (auto r : ids) out.push_back(g.relations().label(r.value));
  return out;
}

// Order-preserving dedup.
template <class T>
struct UniqueList {
  std::vector<T> items;
  std::unordered_set<std::uint32_t> seen;
  void push(T x) {
    if (seen.insert(x.value).second) items.push_back(x);
  }
};

constexpr std::size_t kNoSkip = std::numeric_limits<std::size_t>::max();

// Every triple in order; `skip` is a position to ignore.
inline kgc::HeadContext oracle_head(std::span<const kgc::Triple> triples, kgc::EntityId h,
                                     const kgc::ContextConfig& cfg, std::size_t skip = kNoSkip) {
  UniqueList<kgc::RelationId> rl;
  UniqueList<kgc::EntityId> el;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    if (i == skip) continue;
    const auto& t = triples[i];
    if (t.head == h) {
      rl.push(t.relation);
      el.push(t.tail);
    } else if (cfg.include_incoming && t.tail == h) {
      rl.push(t.relation);
      el.push(t.head);
    }
  }
  auto& rels = rl.items;
  auto& ents = el.items;
  const std::size_t b = cfg.head_context_budget;
  if (rels.size() > b) rels.resize(b);
  const std::size_t eb = b - rels.size();
  if (ents.size() > eb) ents.resize(eb);
  return {std::move(rels), std::move(ents)};
}

inline kgc::RelationContext oracle_relation(std::span<const kgc::Triple> triples, kgc::RelationId r,
                                             const kgc::ContextConfig& cfg, std::size_t skip = kNoSkip) {
  UniqueList<kgc::EntityId> el;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    if (i == skip || triples[i].relation != r) continue;
    el.push(triples[i].head);
    el.push(triples[i].tail);
  }
  auto& ents = el.items;
  if (ents.size() > cfg.relation_context_budget) ents.resize(cfg.relation_context_budget);
  return {std::move(ents)};
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("kgc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
