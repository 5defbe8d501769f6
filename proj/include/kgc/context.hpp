#pragma once
// Head context (relations and neighbour entities of h) and relation context
// (entities linked by r), deduplicated in triple-file order and truncated to
// a token budget.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "kgc/kg.hpp"

namespace kgc {

struct ContextConfig {
  // Also follow triples where h is the tail.
  bool include_incoming = false;
  // Recompute a training example's contexts without its own triple.
  bool leave_one_out = false;
  // Total tokens for H_c; relations are kept before entities.
  std::size_t head_context_budget = 64;
  std::size_t relation_context_budget = 64;
};

struct HeadContext {
  std::vector<RelationId> relations;
  std::vector<EntityId> entities;
  bool empty() const { return relations.empty() && entities.empty(); }
  std::size_t size() const { return relations.size() + entities.size(); }
  bool operator==(const HeadContext&) const = default;
};

struct RelationContext {
  std::vector<EntityId> entities;
  bool empty() const { return entities.empty(); }
  bool operator==(const RelationContext&) const = default;
};

std::vector<RelationId> relation_neighborhood(const KnowledgeGraph& graph, EntityId h, const ContextConfig& cfg);
std::vector<EntityId> entity_neighborhood(const KnowledgeGraph& graph, EntityId h, const ContextConfig& cfg);
HeadContext head_context(const KnowledgeGraph& graph, EntityId h, const ContextConfig& cfg);
RelationContext relation_context(const KnowledgeGraph& graph, RelationId r, const ContextConfig& cfg);

class ContextTable {
 public:
  ContextTable() = default;
  ContextTable(ContextConfig config, std::uint64_t source_fingerprint, std::vector<HeadContext> heads,
               std::vector<RelationContext> relations);

  const HeadContext& head(EntityId h) const;
  const RelationContext& relation(RelationId r) const;
  std::size_t entity_count() const { return heads_.size(); }
  std::size_t relation_count() const { return relations_.size(); }

  const ContextConfig& config() const { return config_; }
  std::uint64_t source_fingerprint() const { return fingerprint_; }

  bool operator==(const ContextTable& other) const;

 private:
  ContextConfig config_;
  std::uint64_t fingerprint_ = 0;
  std::vector<HeadContext> heads_;
  std::vector<RelationContext> relations_;
};

// One pass over the triples per context family.
ContextTable precompute_all_contexts(const KnowledgeGraph& graph, const ContextConfig& cfg);

// Table entries, or with leave_one_out and a present `exclude`, contexts
// recomputed as if that single triple were absent from the source graph.
std::pair<HeadContext, RelationContext> query_context(const ContextTable& table, const KnowledgeGraph& graph,
                                                      EntityId h, RelationId r, const ContextConfig& cfg,
                                                      std::optional<Triple> exclude = std::nullopt);

// Same, excluding the triple at a known position.
std::pair<HeadContext, RelationContext> query_context_excluding(const ContextTable& table,
                                                                const KnowledgeGraph& graph, EntityId h,
                                                                RelationId r, const ContextConfig& cfg,
                                                                std::size_t excluded_index);

// Binary cache: "MCTX", u32 version, u64 fingerprint, config, then
// length-prefixed id lists per entity and per relation.
inline constexpr std::uint32_t kContextCacheVersion = 1;

void save_context_cache(const ContextTable& table, const std::filesystem::path& path);
// Throws on a malformed file.
ContextTable load_context_cache(const std::filesystem::path& path);
// Loaded table if it matches the fingerprint and config; nullopt when stale or absent.
std::optional<ContextTable> load_context_cache_if_valid(const std::filesystem::path& path,
                                                        std::uint64_t expected_fingerprint,
                                                        const ContextConfig& cfg);

}  // namespace kgc
