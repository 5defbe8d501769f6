#include "kgc/eval.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace kgc {

std::string_view to_string(RankPolicy p) {
  switch (p) {
    case RankPolicy::optimistic: return "optimistic";
    case RankPolicy::pessimistic: return "pessimistic";
    case RankPolicy::mean: return "mean";
  }
  return "mean";
}

RankPolicy parse_rank_policy(std::string_view s) {
  if (s == "optimistic") return RankPolicy::optimistic;
  if (s == "pessimistic") return RankPolicy::pessimistic;
  if (s == "mean") return RankPolicy::mean;
  throw Error("unknown rank policy '" + std::string(s) + "'");
}

void EvalConfig::validate() const {
  if (hits_ks.empty()) throw Error("hits_ks must not be empty");
  for (auto k : hits_ks) {
    if (k < 1) throw Error("hits_ks entries must be at least 1");
  }
}

MetricSummary summarize_ranks(std::span<const double> ranks, std::span<const std::size_t> ks) {
  MetricSummary m;
  m.n = ranks.size();
  for (auto k : ks) m.hits[k] = 0.0;
  if (ranks.empty()) return m;
  // Sequential sums in double: independent of how queries were batched.
  double rr = 0.0;
  for (double r : ranks) rr += 1.0 / r;
  m.mrr = rr / static_cast<double>(ranks.size());
  for (auto k : ks) {
    std::size_t hit = 0;
    for (double r : ranks) hit += r <= static_cast<double>(k) ? 1 : 0;
    m.hits[k] = static_cast<double>(hit) / static_cast<double>(ranks.size());
  }
  return m;
}

namespace {

std::uint64_t pair_key(EntityId h, RelationId r) { return (std::uint64_t{h.value} << 32) | r.value; }

}  // namespace

void KnownTails::add(std::span<const Triple> triples) {
  for (const auto& t : triples) {
    auto& v = tails_[pair_key(t.head, t.relation)];
    auto it = std::lower_bound(v.begin(), v.end(), t.tail);
    if (it == v.end() || *it != t.tail) v.insert(it, t.tail);
  }
}

std::span<const EntityId> KnownTails::tails(EntityId h, RelationId r) const {
  auto it = tails_.find(pair_key(h, r));
  if (it == tails_.end()) return {};
  return it->second;
}

Coverage Coverage::of(const KnowledgeGraph& graph) {
  Coverage c;
  c.entity.assign(graph.entity_count(), false);
  c.relation.assign(graph.relation_count(), false);
  for (const auto& t : graph.triples()) {
    c.entity[t.head.value] = true;
    c.entity[t.tail.value] = true;
    c.relation[t.relation.value] = true;
  }
  return c;
}

ModelScorer::ModelScorer(const ModelParameters<float>& params, const KnowledgeGraph& context_graph,
                         const ContextTable& contexts, const TokenVocabulary& vocab, SequenceConfig seq,
                         ContextMode mode)
    : params_(params),
      graph_(context_graph),
      contexts_(contexts),
      vocab_(vocab),
      seq_(seq),
      mode_(mode),
      coverage_(Coverage::of(context_graph)) {
  if (contexts.source_fingerprint() != context_graph.fingerprint()) {
    throw Error("context table was not built from the context graph");
  }
  if (params.entity_count != context_graph.entity_count() || params.vocab_size != vocab.size()) {
    throw Error("model does not match the graph vocabulary");
  }
}

InputSequence ModelScorer::sequence_for(EntityId h, RelationId r) const {
  static const HeadContext kNoHead;
  static const RelationContext kNoRelation;
  const bool head_known = graph_.valid(h) && coverage_.entity[h.value];
  const bool rel_known = graph_.valid(r) && coverage_.relation[r.value];
  return encode_query_tokens(head_known ? vocab_.token(h) : tokens::kUnk,
                             rel_known ? vocab_.token(r) : tokens::kUnk,
                             head_known ? contexts_.head(h) : kNoHead,
                             rel_known ? contexts_.relation(r) : kNoRelation, vocab_, seq_, mode_);
}

void ModelScorer::score(std::span<const Triple> queries, Matrix<float>& out) const {
  std::vector<InputSequence> batch;
  batch.reserve(queries.size());
  for (const auto& q : queries) batch.push_back(sequence_for(q.head, q.relation));
  out = forward(params_, batch);
}

FrequencyScorer::FrequencyScorer(const KnowledgeGraph& train)
    : entities_(train.entity_count()), counts_(train.relation_count(), std::vector<float>(train.entity_count(), 0)) {
  for (const auto& t : train.triples()) counts_[t.relation.value][t.tail.value] += 1.0f;
}

std::vector<float> FrequencyScorer::scores(RelationId r) const {
  if (r.value >= counts_.size()) return std::vector<float>(entities_, 0.0f);
  return counts_[r.value];
}

void FrequencyScorer::score(std::span<const Triple> queries, Matrix<float>& out) const {
  out.setZero(static_cast<Eigen::Index>(queries.size()), static_cast<Eigen::Index>(entities_));
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto r = queries[i].relation.value;
    if (r >= counts_.size()) continue;
    for (std::size_t e = 0; e < entities_; ++e) out(static_cast<Eigen::Index>(i), e) = counts_[r][e];
  }
}

FrequencyScorer frequency_baseline(const KnowledgeGraph& train) { return FrequencyScorer(train); }

EvalReport evaluate(const TailScorer& scorer, std::span<const Triple> queries, const KnownTails& known,
                    const Coverage& coverage, const EvalConfig& cfg, std::string split, std::size_t batch_size) {
  cfg.validate();
  if (batch_size < 1) batch_size = 1;
  EvalReport report;
  report.config = cfg;
  report.split = std::move(split);
  report.ranks.reserve(queries.size());
  std::vector<double> unseen_ranks;
  std::vector<EntityId> filter;
  Matrix<float> scores;
  for (std::size_t start = 0; start < queries.size(); start += batch_size) {
    const auto chunk = queries.subspan(start, std::min(batch_size, queries.size() - start));
    scorer.score(chunk, scores);
    if (static_cast<std::size_t>(scores.rows()) != chunk.size() ||
        static_cast<std::size_t>(scores.cols()) != scorer.entity_count()) {
      throw Error("scorer returned a matrix of the wrong shape");
    }
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const Triple& q = chunk[i];
      filter.clear();
      if (cfg.filtered) {
        for (auto e : known.tails(q.head, q.relation)) {
          if (e != q.tail) filter.push_back(e);
        }
      }
      const std::span<const float> row(scores.row(static_cast<Eigen::Index>(i)).data(),
                                       static_cast<std::size_t>(scores.cols()));
      const double rank = rank_of(row, q.tail, filter, cfg.rank_policy);
      report.ranks.push_back(rank);
      const bool in_range = q.head.value < coverage.entity.size() && q.tail.value < coverage.entity.size() &&
                            q.relation.value < coverage.relation.size();
      if (!in_range || !coverage.seen(q)) unseen_ranks.push_back(rank);
    }
  }
  report.overall = summarize_ranks(report.ranks, cfg.hits_ks);
  report.unseen = summarize_ranks(unseen_ranks, cfg.hits_ks);
  return report;
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "test";
}

std::span<const Triple> split_triples(const Dataset& data, Split s) {
  switch (s) {
    case Split::train: return data.train.triples();
    case Split::valid: return data.valid;
    case Split::test: return data.test;
  }
  return data.test;
}

KnownTails known_tails(const Dataset& data) {
  KnownTails k;
  k.add(data.train.triples());
  k.add(data.valid);
  k.add(data.test);
  return k;
}

EvalReport evaluate_model(const ModelParameters<float>& params, const Dataset& data, const ContextTable& contexts,
                          const TokenVocabulary& vocab, const SequenceConfig& seq, const EvalConfig& cfg,
                          Split split) {
  const auto graph = data.context_graph(cfg.include_validation_in_context);
  const ModelScorer scorer(params, graph, contexts, vocab, seq, cfg.context_mode);
  return evaluate(scorer, split_triples(data, split), known_tails(data), Coverage::of(graph), cfg,
                  std::string(to_string(split)));
}

namespace {

double round6(double v) { return std::round(v * 1e6) / 1e6; }

nlohmann::json summary_json(const MetricSummary& m) {
  nlohmann::json hits = nlohmann::json::object();
  for (const auto& [k, v] : m.hits) hits[std::to_string(k)] = round6(v);
  return {{"n_examples", m.n}, {"mrr", round6(m.mrr)}, {"hits", hits}};
}

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j = summary_json(report.overall);
  j["split"] = report.split;
  j["protocol"] = report.config.filtered ? "filtered" : "raw";
  j["unseen"] = summary_json(report.unseen);
  j["config"] = {{"filtered", report.config.filtered},
                 {"rank_policy", std::string(to_string(report.config.rank_policy))},
                 {"hits_ks", report.config.hits_ks},
                 {"context_mode", std::string(to_string(report.config.context_mode))},
                 {"include_validation_in_context", report.config.include_validation_in_context}};
  return j;
}

std::string tsv_header() {
  return "label\tsplit\tprotocol\tcontext_mode\tn_examples\tmrr\thits@1\thits@3\thits@10\tn_unseen";
}

std::string tsv_row(const std::string& label, const EvalReport& r) {
  std::ostringstream out;
  auto hit = [&](std::size_t k) {
    auto it = r.overall.hits.find(k);
    return it == r.overall.hits.end() ? std::string("") : fmt6(it->second);
  };
  out << label << '\t' << r.split << '\t' << (r.config.filtered ? "filtered" : "raw") << '\t'
      << to_string(r.config.context_mode) << '\t' << r.overall.n << '\t' << fmt6(r.overall.mrr) << '\t' << hit(1)
      << '\t' << hit(3) << '\t' << hit(10) << '\t' << r.unseen.n;
  return out.str();
}

}  // namespace kgc
