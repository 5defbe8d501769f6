#pragma once
// Tail-ranking evaluation: MRR and Hits@k under raw or filtered protocols.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "kgc/context.hpp"
#include "kgc/error.hpp"
#include "kgc/kg.hpp"
#include "kgc/model.hpp"
#include "kgc/sequence.hpp"
#include "kgc/train.hpp"

namespace kgc {

enum class RankPolicy { optimistic, pessimistic, mean };

std::string_view to_string(RankPolicy p);
RankPolicy parse_rank_policy(std::string_view s);

struct EvalConfig {
  bool filtered = true;
  RankPolicy rank_policy = RankPolicy::mean;
  std::vector<std::size_t> hits_ks{1, 3, 10};
  ContextMode context_mode = ContextMode::full;
  bool include_validation_in_context = false;
  void validate() const;
};

struct MetricSummary {
  std::size_t n = 0;
  double mrr = 0.0;
  std::map<std::size_t, double> hits;
};

struct EvalReport {
  EvalConfig config;
  std::string split;
  MetricSummary overall;
  // Queries whose head, relation, or gold tail never occurs in the context graph.
  MetricSummary unseen;
  std::vector<double> ranks;
};

// Rank of `gold` among all entities not in `filter_out`:
//   optimistic  = 1 + #{e : s_e > s_gold}
//   pessimistic = optimistic + #{e != gold : s_e == s_gold}
//   mean        = average of the two
template <class T>
double rank_of(std::span<const T> scores, EntityId gold, std::span<const EntityId> filter_out, RankPolicy policy) {
  if (gold.value >= scores.size()) throw Error("gold entity out of range");
  const T g = scores[gold.value];
  if (!std::isfinite(static_cast<double>(g))) throw Error("non-finite gold score");
  std::size_t greater = 0, equal = 0;
  for (std::size_t e = 0; e < scores.size(); ++e) {
    const T s = scores[e];
    if (!std::isfinite(static_cast<double>(s))) throw Error("non-finite score for entity " + std::to_string(e));
    if (s > g) {
      ++greater;
    } else if (s == g) {
      ++equal;
    }
  }
  --equal;  // gold itself
  std::vector<EntityId> filt(filter_out.begin(), filter_out.end());
  std::sort(filt.begin(), filt.end());
  filt.erase(std::unique(filt.begin(), filt.end()), filt.end());
  for (auto f : filt) {
    if (f == gold) throw Error("gold entity is in the filter set");
    if (f.value >= scores.size()) throw Error("filtered entity out of range");
    if (scores[f.value] > g) --greater;
    else if (scores[f.value] == g) --equal;
  }
  const double optimistic = 1.0 + static_cast<double>(greater);
  const double pessimistic = optimistic + static_cast<double>(equal);
  switch (policy) {
    case RankPolicy::optimistic: return optimistic;
    case RankPolicy::pessimistic: return pessimistic;
    case RankPolicy::mean: return 0.5 * (optimistic + pessimistic);
  }
  return optimistic;
}

MetricSummary summarize_ranks(std::span<const double> ranks, std::span<const std::size_t> ks);

// All known tails per (head, relation), used as the filter set.
class KnownTails {
 public:
  void add(std::span<const Triple> triples);
  std::span<const EntityId> tails(EntityId h, RelationId r) const;

 private:
  std::unordered_map<std::uint64_t, std::vector<EntityId>> tails_;
};

// Which ids occur in a graph's triples.
struct Coverage {
  std::vector<bool> entity;
  std::vector<bool> relation;
  static Coverage of(const KnowledgeGraph& graph);
  bool seen(const Triple& t) const {
    return entity[t.head.value] && entity[t.tail.value] && relation[t.relation.value];
  }
};

// Scores every entity as the tail of each (h, r) query; rows follow queries.
class TailScorer {
 public:
  virtual ~TailScorer() = default;
  virtual std::size_t entity_count() const = 0;
  virtual void score(std::span<const Triple> queries, Matrix<float>& out) const = 0;
};

// The trained model. Heads or relations absent from the context graph are
// encoded as [UNK] with empty contexts.
class ModelScorer : public TailScorer {
 public:
  ModelScorer(const ModelParameters<float>& params, const KnowledgeGraph& context_graph, const ContextTable& contexts,
              const TokenVocabulary& vocab, SequenceConfig seq, ContextMode mode);
  std::size_t entity_count() const override { return params_.entity_count; }
  void score(std::span<const Triple> queries, Matrix<float>& out) const override;
  InputSequence sequence_for(EntityId h, RelationId r) const;

 private:
  const ModelParameters<float>& params_;
  const KnowledgeGraph& graph_;
  const ContextTable& contexts_;
  const TokenVocabulary& vocab_;
  SequenceConfig seq_;
  ContextMode mode_;
  Coverage coverage_;
};

// score(e | h, r) = number of training triples (., r, e).
class FrequencyScorer : public TailScorer {
 public:
  explicit FrequencyScorer(const KnowledgeGraph& train);
  std::size_t entity_count() const override { return entities_; }
  void score(std::span<const Triple> queries, Matrix<float>& out) const override;
  std::vector<float> scores(RelationId r) const;

 private:
  std::size_t entities_;
  std::vector<std::vector<float>> counts_;  // relation -> entity
};

FrequencyScorer frequency_baseline(const KnowledgeGraph& train);

// Ranks the gold tail of every query. `coverage` marks ids in the
// context-source graph; queries outside it land in the unseen bucket too.
EvalReport evaluate(const TailScorer& scorer, std::span<const Triple> queries, const KnownTails& known,
                    const Coverage& coverage, const EvalConfig& cfg, std::string split = "test",
                    std::size_t batch_size = 64);

enum class Split { train, valid, test };
std::string_view to_string(Split s);
std::span<const Triple> split_triples(const Dataset& data, Split s);
KnownTails known_tails(const Dataset& data);

// Evaluates a model on one split; contexts must be built from
// data.context_graph(cfg.include_validation_in_context).
EvalReport evaluate_model(const ModelParameters<float>& params, const Dataset& data, const ContextTable& contexts,
                          const TokenVocabulary& vocab, const SequenceConfig& seq, const EvalConfig& cfg,
                          Split split = Split::test);

// Metrics rounded to 6 decimal places, plus a config echo.
nlohmann::json to_json(const EvalReport& report);
std::string tsv_header();
std::string tsv_row(const std::string& label, const EvalReport& report);

struct AblationEntry {
  ContextMode mode = ContextMode::full;
  TrainLog log;
  EvalReport train_report;  // training triples as queries
  std::optional<EvalReport> test_report;
};

struct AblationResult {
  std::vector<AblationEntry> entries;  // full, head_only, relation_only
  std::uint64_t seed = 0;
};

// Trains and evaluates one model per context mode with identical seeds and
// configs. The test report is produced when the dataset has a test split.
AblationResult ablation_run(const Dataset& data, const ContextConfig& ctx, const EncoderConfig& enc,
                            const TrainConfig& tc, const EvalConfig& cfg);

void write_ablation_tsv(std::ostream& out, const AblationResult& result);

}  // namespace kgc
