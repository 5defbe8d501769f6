#include "kgc/context.hpp"

#include <algorithm>
#include <limits>
#include <unordered_set>

#include "kgc/error.hpp"

namespace kgc {

namespace {

constexpr std::size_t kNoSkip = std::numeric_limits<std::size_t>::max();

void check_entity(const KnowledgeGraph& g, EntityId h) {
  if (!g.valid(h)) throw Error("invalid entity id " + std::to_string(h.value));
}

void check_relation(const KnowledgeGraph& g, RelationId r) {
  if (!g.valid(r)) throw Error("invalid relation id " + std::to_string(r.value));
}

// Visits the triples incident to h in ascending position, each once.
template <class F>
void for_each_incident(const KnowledgeGraph& g, EntityId h, bool incoming, std::size_t skip, F&& f) {
  const auto out = g.by_head(h);
  const auto in = incoming ? g.by_tail(h) : std::span<const std::uint32_t>{};
  std::size_t a = 0, b = 0;
  while (a < out.size() || b < in.size()) {
    std::uint32_t idx;
    if (b >= in.size() || (a < out.size() && out[a] < in[b])) {
      idx = out[a++];
    } else if (a >= out.size() || in[b] < out[a]) {
      idx = in[b++];
    } else {
      idx = out[a++];
      ++b;
    }
    if (idx == skip) continue;
    const Triple& t = g.triple(idx);
    const EntityId neighbour = t.head == h ? t.tail : t.head;
    if (!f(t.relation, neighbour)) return;
  }
}

std::vector<RelationId> collect_relations(const KnowledgeGraph& g, EntityId h, const ContextConfig& cfg,
                                          std::size_t skip) {
  std::vector<RelationId> out;
  const std::size_t budget = cfg.head_context_budget;
  if (budget == 0) return out;
  std::unordered_set<std::uint32_t> seen;
  for_each_incident(g, h, cfg.include_incoming, skip, [&](RelationId r, EntityId) {
    if (seen.insert(r.value).second) out.push_back(r);
    return out.size() < budget;
  });
  return out;
}

std::vector<EntityId> collect_entities(const KnowledgeGraph& g, EntityId h, const ContextConfig& cfg,
                                       std::size_t skip, std::size_t budget) {
  std::vector<EntityId> out;
  if (budget == 0) return out;
  std::unordered_set<std::uint32_t> seen;
  for_each_incident(g, h, cfg.include_incoming, skip, [&](RelationId, EntityId e) {
    if (seen.insert(e.value).second) out.push_back(e);
    return out.size() < budget;
  });
  return out;
}

HeadContext collect_head(const KnowledgeGraph& g, EntityId h, const ContextConfig& cfg, std::size_t skip) {
  HeadContext hc;
  hc.relations = collect_relations(g, h, cfg, skip);
  hc.entities = collect_entities(g, h, cfg, skip, cfg.head_context_budget - hc.relations.size());
  return hc;
}

RelationContext collect_relation(const KnowledgeGraph& g, RelationId r, const ContextConfig& cfg,
                                 std::size_t skip) {
  RelationContext rc;
  const std::size_t budget = cfg.relation_context_budget;
  if (budget == 0) return rc;
  std::unordered_set<std::uint32_t> seen;
  for (auto idx : g.by_relation(r)) {
    if (idx == skip) continue;
    const Triple& t = g.triple(idx);
    for (EntityId e : {t.head, t.tail}) {
      if (seen.insert(e.value).second) {
        rc.entities.push_back(e);
        if (rc.entities.size() == budget) return rc;
      }
    }
  }
  return rc;
}

bool same_table_config(const ContextConfig& a, const ContextConfig& b) {
  return a.include_incoming == b.include_incoming && a.head_context_budget == b.head_context_budget &&
         a.relation_context_budget == b.relation_context_budget;
}

}  // namespace

std::vector<RelationId> relation_neighborhood(const KnowledgeGraph& graph, EntityId h, const ContextConfig& cfg) {
  check_entity(graph, h);
  return collect_relations(graph, h, cfg, kNoSkip);
}

std::vector<EntityId> entity_neighborhood(const KnowledgeGraph& graph, EntityId h, const ContextConfig& cfg) {
  check_entity(graph, h);
  return collect_entities(graph, h, cfg, kNoSkip, cfg.head_context_budget);
}

HeadContext head_context(const KnowledgeGraph& graph, EntityId h, const ContextConfig& cfg) {
  check_entity(graph, h);
  return collect_head(graph, h, cfg, kNoSkip);
}

RelationContext relation_context(const KnowledgeGraph& graph, RelationId r, const ContextConfig& cfg) {
  check_relation(graph, r);
  return collect_relation(graph, r, cfg, kNoSkip);
}

ContextTable::ContextTable(ContextConfig config, std::uint64_t source_fingerprint, std::vector<HeadContext> heads,
                           std::vector<RelationContext> relations)
    : config_(config), fingerprint_(source_fingerprint), heads_(std::move(heads)), relations_(std::move(relations)) {}

const HeadContext& ContextTable::head(EntityId h) const {
  if (h.value >= heads_.size()) throw Error("invalid entity id " + std::to_string(h.value));
  return heads_[h.value];
}

const RelationContext& ContextTable::relation(RelationId r) const {
  if (r.value >= relations_.size()) throw Error("invalid relation id " + std::to_string(r.value));
  return relations_[r.value];
}

bool ContextTable::operator==(const ContextTable& other) const {
  return same_table_config(config_, other.config_) && fingerprint_ == other.fingerprint_ &&
         heads_ == other.heads_ && relations_ == other.relations_;
}

ContextTable precompute_all_contexts(const KnowledgeGraph& graph, const ContextConfig& cfg) {
  const std::size_t head_budget = cfg.head_context_budget;
  const std::size_t rel_budget = cfg.relation_context_budget;
  const auto triples = graph.triples();
  const auto n_ent = static_cast<std::uint32_t>(graph.entity_count());
  const auto n_rel = static_cast<std::uint32_t>(graph.relation_count());

  // stamp[x] == owner + 1 marks x as already taken for the current owner, so
  // every id list is deduplicated without clearing anything between owners.
  std::vector<std::uint32_t> rel_stamp(n_rel, 0), ent_stamp(n_ent, 0);

  std::vector<HeadContext> heads(n_ent);
  for (std::uint32_t h = 0; h < n_ent && head_budget > 0; ++h) {
    auto& hc = heads[h];
    const std::uint32_t mark = h + 1;
    // Positions of outgoing and incoming triples, merged back into file order.
    const auto out = graph.by_head(EntityId{h});
    const auto in = cfg.include_incoming ? graph.by_tail(EntityId{h}) : std::span<const std::uint32_t>{};
    std::size_t a = 0, b = 0;
    while ((a < out.size() || b < in.size()) &&
           (hc.relations.size() < head_budget || hc.entities.size() < head_budget)) {
      std::uint32_t idx;
      if (b >= in.size() || (a < out.size() && out[a] < in[b])) {
        idx = out[a++];
      } else if (a >= out.size() || in[b] < out[a]) {
        idx = in[b++];
      } else {  // self-loop: listed in both
        idx = out[a++];
        ++b;
      }
      const Triple& t = triples[idx];
      const std::uint32_t e = t.head.value == h ? t.tail.value : t.head.value;
      if (hc.relations.size() < head_budget && rel_stamp[t.relation.value] != mark) {
        rel_stamp[t.relation.value] = mark;
        hc.relations.push_back(t.relation);
      }
      if (hc.entities.size() < head_budget && ent_stamp[e] != mark) {
        ent_stamp[e] = mark;
        hc.entities.push_back(EntityId{e});
      }
    }
    const std::size_t room = head_budget - hc.relations.size();
    if (hc.entities.size() > room) hc.entities.resize(room);
  }

  std::fill(ent_stamp.begin(), ent_stamp.end(), 0);
  std::vector<RelationContext> relations(n_rel);
  for (std::uint32_t r = 0; r < n_rel && rel_budget > 0; ++r) {
    auto& rc = relations[r];
    const std::uint32_t mark = r + 1;
    for (auto idx : graph.by_relation(RelationId{r})) {
      const Triple& t = triples[idx];
      for (EntityId e : {t.head, t.tail}) {
        if (ent_stamp[e.value] != mark) {
          ent_stamp[e.value] = mark;
          rc.entities.push_back(e);
        }
      }
      if (rc.entities.size() >= rel_budget) break;
    }
    if (rc.entities.size() > rel_budget) rc.entities.resize(rel_budget);
  }

  return ContextTable(cfg, graph.fingerprint(), std::move(heads), std::move(relations));
}

std::pair<HeadContext, RelationContext> query_context_excluding(const ContextTable& table,
                                                                const KnowledgeGraph& graph, EntityId h,
                                                                RelationId r, const ContextConfig& cfg,
                                                                std::size_t excluded_index) {
  check_entity(graph, h);
  check_relation(graph, r);
  if (!same_table_config(table.config(), cfg)) throw Error("context table was built with a different config");
  if (table.source_fingerprint() != graph.fingerprint()) throw Error("context table does not match the graph");
  if (!cfg.leave_one_out || excluded_index >= graph.triples().size()) {
    return {table.head(h), table.relation(r)};
  }
  const Triple& x = graph.triple(excluded_index);
  const bool touches_head = x.head == h || (cfg.include_incoming && x.tail == h);
  return {touches_head ? collect_head(graph, h, cfg, excluded_index) : table.head(h),
          x.relation == r ? collect_relation(graph, r, cfg, excluded_index) : table.relation(r)};
}

std::pair<HeadContext, RelationContext> query_context(const ContextTable& table, const KnowledgeGraph& graph,
                                                      EntityId h, RelationId r, const ContextConfig& cfg,
                                                      std::optional<Triple> exclude) {
  std::size_t idx = kNoSkip;
  if (cfg.leave_one_out && exclude) {
    if (auto found = graph.find(*exclude)) idx = *found;
  }
  return query_context_excluding(table, graph, h, r, cfg, idx);
}

}  // namespace kgc
