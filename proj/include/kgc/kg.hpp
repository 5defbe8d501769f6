#pragma once
// Interned triple store.
//
// Entities and relations are interned to dense ids by first appearance
// (head before tail within a triple). Triples keep file order, duplicates
// included. Three CSR indexes map an id to the ascending list of triple
// positions that mention it: by head, by relation, by tail.

#include <compare>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kgc {

struct EntityId {
  std::uint32_t value = 0;
  auto operator<=>(const EntityId&) const = default;
};

struct RelationId {
  std::uint32_t value = 0;
  auto operator<=>(const RelationId&) const = default;
};

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;
  bool operator==(const Triple&) const = default;
};

struct RawTriple {
  std::string head;
  std::string relation;
  std::string tail;
  bool operator==(const RawTriple&) const = default;
};

// Bidirectional id <-> label map with stable, dense ids.
class LabelCatalog {
 public:
  std::uint32_t intern(std::string_view label);
  std::optional<std::uint32_t> find(std::string_view label) const;
  const std::string& label(std::uint32_t id) const;
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

  static LabelCatalog from_labels(std::vector<std::string> labels);

  bool operator==(const LabelCatalog& other) const { return labels_ == other.labels_; }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::uint32_t, Hash, std::equal_to<>> ids_;
};

struct GraphStats {
  std::size_t entity_count = 0;
  std::size_t relation_count = 0;
  std::size_t triple_count = 0;
  bool operator==(const GraphStats&) const = default;
};

class KnowledgeGraph {
 public:
  // Validates every id against the catalogs and builds the indexes.
  KnowledgeGraph(LabelCatalog entities, LabelCatalog relations, std::vector<Triple> triples);

  std::span<const Triple> triples() const { return triples_; }
  const Triple& triple(std::size_t index) const { return triples_.at(index); }

  std::span<const std::uint32_t> by_head(EntityId h) const;
  std::span<const std::uint32_t> by_relation(RelationId r) const;
  std::span<const std::uint32_t> by_tail(EntityId t) const;

  std::size_t entity_count() const { return entities_.size(); }
  std::size_t relation_count() const { return relations_.size(); }
  const LabelCatalog& entities() const { return entities_; }
  const LabelCatalog& relations() const { return relations_; }

  bool valid(EntityId e) const { return e.value < entities_.size(); }
  bool valid(RelationId r) const { return r.value < relations_.size(); }

  // Position of the first triple equal to `t`, if any.
  std::optional<std::size_t> find(const Triple& t) const;

  // FNV-1a over catalog labels (id order) and triple ids (file order).
  std::uint64_t fingerprint() const { return fingerprint_; }

  bool operator==(const KnowledgeGraph& other) const;

 private:
  struct Csr {
    std::vector<std::uint32_t> offsets;
    std::vector<std::uint32_t> items;
    std::span<const std::uint32_t> row(std::size_t i) const {
      return {items.data() + offsets[i], items.data() + offsets[i + 1]};
    }
  };
  template <class KeyFn>
  static Csr build_index(std::size_t keys, const std::vector<Triple>& triples, KeyFn key);

  LabelCatalog entities_;
  LabelCatalog relations_;
  std::vector<Triple> triples_;
  Csr by_head_;
  Csr by_relation_;
  Csr by_tail_;
  std::uint64_t fingerprint_ = 0;
};

// Parses `head<TAB>relation<TAB>tail` lines. Fields are whitespace-trimmed,
// blank lines skipped. Throws ParseError naming the 1-based line.
std::vector<RawTriple> parse_triple_file(std::istream& in);
std::vector<RawTriple> parse_triple_text(std::string_view text);
// Same, reading from disk; errors are prefixed with the path.
std::vector<RawTriple> load_triple_file(const std::filesystem::path& path);

KnowledgeGraph build_graph(std::span<const RawTriple> raw);

GraphStats graph_stats(const KnowledgeGraph& graph);

void write_triples_tsv(std::ostream& out, const KnowledgeGraph& graph);

// Train/valid/test splits over one shared catalog. Ids are interned over
// train, then valid, then test. `train` is the context-source graph.
struct Dataset {
  KnowledgeGraph train;
  std::vector<Triple> valid;
  std::vector<Triple> test;

  // Catalog sizes and training triple count.
  GraphStats stats() const;
  // Train triples, plus validation triples when requested, over the shared catalog.
  KnowledgeGraph context_graph(bool include_validation) const;
  // Fingerprint of the catalog plus the training triples.
  std::uint64_t fingerprint() const { return train.fingerprint(); }
};

Dataset build_dataset(std::span<const RawTriple> train, std::span<const RawTriple> valid,
                      std::span<const RawTriple> test);

// Loads split files; empty paths yield empty splits (train is required).
Dataset load_dataset(const std::filesystem::path& train, const std::filesystem::path& valid,
                     const std::filesystem::path& test);

struct SyntheticKgConfig {
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t triples = 0;
  // Fraction of entities acting as popular tails; hubs draw half of all tails.
  double hub_fraction = 0.0;
  std::uint64_t seed = 0;
};

// Deterministic random KG over ids 0..entities-1 and 0..relations-1.
//  - no self-loops, no duplicate triples
//  - when triples >= entities every entity is the head of some triple
//  - (head, relation) pairs are not reused until all of them are taken,
//    so the tail is a function of (h, r) whenever triples <= entities * relations
std::vector<Triple> generate_synthetic_kg(const SyntheticKgConfig& config);

// The generated triples labelled "e<i>" / "r<j>" and interned via build_graph.
KnowledgeGraph synthetic_graph(const SyntheticKgConfig& config);
std::vector<RawTriple> label_triples(std::span<const Triple> triples);

}  // namespace kgc
