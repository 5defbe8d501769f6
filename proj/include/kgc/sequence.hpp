#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgc/context.hpp"
#include "kgc/kg.hpp"

namespace kgc {

using TokenId = std::uint32_t;

namespace tokens {
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kCls = 1;
inline constexpr TokenId kSep = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kSpecialCount = 4;
}  // namespace tokens

// One token per relation label, then one per entity label, after the specials.
class TokenVocabulary {
 public:
  TokenVocabulary() = default;
  TokenVocabulary(std::vector<std::string> relation_labels, std::vector<std::string> entity_labels);

  TokenId token(EntityId e) const;
  TokenId token(RelationId r) const;
  // "[PAD]", "[CLS]", "[SEP]", "[UNK]" for specials.
  const std::string& label(TokenId t) const;

  std::size_t size() const { return tokens::kSpecialCount + relations_.size() + entities_.size(); }
  std::size_t relation_count() const { return relations_.size(); }
  std::size_t entity_count() const { return entities_.size(); }
  const std::vector<std::string>& relation_labels() const { return relations_; }
  const std::vector<std::string>& entity_labels() const { return entities_; }

  bool operator==(const TokenVocabulary&) const = default;

 private:
  std::vector<std::string> relations_;
  std::vector<std::string> entities_;
};

TokenVocabulary build_vocabulary(const KnowledgeGraph& graph);

struct SequenceConfig {
  std::size_t max_seq_len = 256;
  void validate() const;
};

struct InputSequence {
  std::vector<TokenId> token_ids;
  std::vector<std::uint8_t> attention_mask;
  std::size_t true_length = 0;
  bool operator==(const InputSequence&) const = default;
};

// Which context channels reach the sequence.
enum class ContextMode { full, head_only, relation_only };

std::string_view to_string(ContextMode mode);
ContextMode parse_context_mode(std::string_view s);

// [CLS] h H_c.relations H_c.entities [SEP] r R_c, padded to max_seq_len.
// Overflow drops R_c entities, then H_c entities, then H_c relations.
InputSequence encode_query(EntityId h, RelationId r, const HeadContext& hc, const RelationContext& rc,
                           const TokenVocabulary& vocab, const SequenceConfig& cfg,
                           ContextMode mode = ContextMode::full);

// Token-level variant; pass tokens::kUnk for a head or relation outside the vocabulary.
InputSequence encode_query_tokens(TokenId head, TokenId relation, const HeadContext& hc, const RelationContext& rc,
                                  const TokenVocabulary& vocab, const SequenceConfig& cfg,
                                  ContextMode mode = ContextMode::full);

std::vector<std::string> decode_tokens(std::span<const TokenId> ids, const TokenVocabulary& vocab);

}  // namespace kgc
