#include "kgc/sequence.hpp"

#include <algorithm>
#include <array>

#include "kgc/error.hpp"

namespace kgc {

namespace {

const std::array<std::string, tokens::kSpecialCount> kSpecialLabels = {"[PAD]", "[CLS]", "[SEP]", "[UNK]"};

}  // namespace

TokenVocabulary::TokenVocabulary(std::vector<std::string> relation_labels, std::vector<std::string> entity_labels)
    : relations_(std::move(relation_labels)), entities_(std::move(entity_labels)) {}

TokenId TokenVocabulary::token(EntityId e) const {
  if (e.value >= entities_.size()) throw Error("entity id " + std::to_string(e.value) + " not in vocabulary");
  return tokens::kSpecialCount + static_cast<TokenId>(relations_.size()) + e.value;
}

TokenId TokenVocabulary::token(RelationId r) const {
  if (r.value >= relations_.size()) throw Error("relation id " + std::to_string(r.value) + " not in vocabulary");
  return tokens::kSpecialCount + r.value;
}

const std::string& TokenVocabulary::label(TokenId t) const {
  if (t < tokens::kSpecialCount) return kSpecialLabels[t];
  t -= tokens::kSpecialCount;
  if (t < relations_.size()) return relations_[t];
  t -= static_cast<TokenId>(relations_.size());
  if (t < entities_.size()) return entities_[t];
  throw Error("token id out of range");
}

TokenVocabulary build_vocabulary(const KnowledgeGraph& graph) {
  return TokenVocabulary(graph.relations().labels(), graph.entities().labels());
}

void SequenceConfig::validate() const {
  if (max_seq_len < 4) throw Error("max_seq_len must be at least 4");
}

std::string_view to_string(ContextMode mode) {
  switch (mode) {
    case ContextMode::full: return "full";
    case ContextMode::head_only: return "head_only";
    case ContextMode::relation_only: return "relation_only";
  }
  return "full";
}

ContextMode parse_context_mode(std::string_view s) {
  if (s == "full") return ContextMode::full;
  if (s == "head_only") return ContextMode::head_only;
  if (s == "relation_only") return ContextMode::relation_only;
  throw Error("unknown context mode '" + std::string(s) + "'");
}

InputSequence encode_query_tokens(TokenId head, TokenId relation, const HeadContext& hc, const RelationContext& rc,
                                  const TokenVocabulary& vocab, const SequenceConfig& cfg, ContextMode mode) {
  cfg.validate();
  if (head >= vocab.size() || relation >= vocab.size()) throw Error("query token out of range");
  const bool use_head = mode != ContextMode::relation_only;
  const bool use_rel = mode != ContextMode::head_only;

  // Resolve first so an unknown id fails regardless of truncation.
  std::vector<TokenId> hc_rel, hc_ent, rc_ent;
  if (use_head) {
    for (auto r : hc.relations) hc_rel.push_back(vocab.token(r));
    for (auto e : hc.entities) hc_ent.push_back(vocab.token(e));
  }
  if (use_rel) {
    for (auto e : rc.entities) rc_ent.push_back(vocab.token(e));
  }

  const std::size_t room = cfg.max_seq_len - 4;
  const std::size_t keep_rel = std::min(hc_rel.size(), room);
  const std::size_t keep_ent = std::min(hc_ent.size(), room - keep_rel);
  const std::size_t keep_rc = std::min(rc_ent.size(), room - keep_rel - keep_ent);

  InputSequence seq;
  seq.token_ids.reserve(cfg.max_seq_len);
  seq.token_ids.push_back(tokens::kCls);
  seq.token_ids.push_back(head);
  seq.token_ids.insert(seq.token_ids.end(), hc_rel.begin(), hc_rel.begin() + keep_rel);
  seq.token_ids.insert(seq.token_ids.end(), hc_ent.begin(), hc_ent.begin() + keep_ent);
  seq.token_ids.push_back(tokens::kSep);
  seq.token_ids.push_back(relation);
  seq.token_ids.insert(seq.token_ids.end(), rc_ent.begin(), rc_ent.begin() + keep_rc);
  seq.true_length = seq.token_ids.size();
  seq.token_ids.resize(cfg.max_seq_len, tokens::kPad);
  seq.attention_mask.assign(cfg.max_seq_len, 0);
  std::fill_n(seq.attention_mask.begin(), seq.true_length, 1);
  return seq;
}

InputSequence encode_query(EntityId h, RelationId r, const HeadContext& hc, const RelationContext& rc,
                           const TokenVocabulary& vocab, const SequenceConfig& cfg, ContextMode mode) {
  return encode_query_tokens(vocab.token(h), vocab.token(r), hc, rc, vocab, cfg, mode);
}

std::vector<std::string> decode_tokens(std::span<const TokenId> ids, const TokenVocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto id : ids) {
    if (id >= vocab.size()) throw Error("token id " + std::to_string(id) + " out of range");
    out.push_back(vocab.label(id));
  }
  return out;
}

}  // namespace kgc
