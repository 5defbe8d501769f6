#include "kgc/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "kgc/error.hpp"

namespace kgc {

void TrainConfig::validate() const {
  if (batch_size < 1) throw Error("batch_size must be at least 1");
  if (!(learning_rate > 0.0)) throw Error("learning_rate must be positive");
  if (max_epochs < 1) throw Error("nothing to train: max_epochs is 0");
  if (!(clip_norm >= 0.0)) throw Error("clip_norm must be non-negative");
}

InputSequence training_sequence(const KnowledgeGraph& graph, const ContextTable& contexts,
                                const TokenVocabulary& vocab, const ContextConfig& ctx, const SequenceConfig& seq,
                                ContextMode mode, std::size_t index) {
  const Triple& t = graph.triple(index);
  const auto [hc, rc] = query_context_excluding(contexts, graph, t.head, t.relation, ctx, index);
  return encode_query(t.head, t.relation, hc, rc, vocab, seq, mode);
}

namespace {

class Adam {
 public:
  Adam(const ModelParameters<float>& like, const TrainConfig& tc)
      : m_(like.zeros_like()), v_(like.zeros_like()), tc_(tc) {}

  void step(ModelParameters<float>& params, const ModelParameters<float>& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(tc_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(tc_.beta2, static_cast<double>(t_));
    const auto b1 = static_cast<float>(tc_.beta1), b2 = static_cast<float>(tc_.beta2);
    const auto step_size = static_cast<float>(tc_.learning_rate / c1);
    const auto inv_sqrt_c2 = static_cast<float>(1.0 / std::sqrt(c2));
    const auto eps = static_cast<float>(tc_.epsilon);
    auto p = params.tensors();
    const auto g = grad.tensors();
    auto m = m_.tensors();
    auto v = v_.tensors();
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto ga = g[i].value->array();
      m[i].value->array() = b1 * m[i].value->array() + (1.0f - b1) * ga;
      v[i].value->array() = b2 * v[i].value->array() + (1.0f - b2) * ga.square();
      p[i].value->array() -=
          step_size * m[i].value->array() / (v[i].value->array().sqrt() * inv_sqrt_c2 + eps);
    }
  }

 private:
  ModelParameters<float> m_, v_;
  TrainConfig tc_;
  std::uint64_t t_ = 0;
};

double global_norm(const ModelParameters<float>& grad) {
  double sq = 0.0;
  for (const auto& t : grad.tensors()) sq += t.value->template cast<double>().squaredNorm();
  return std::sqrt(sq);
}

}  // namespace

TrainResult train(const KnowledgeGraph& graph, const ContextTable& contexts, const TokenVocabulary& vocab,
                  const EncoderConfig& enc, const TrainConfig& tc, const EpochCallback& on_epoch) {
  tc.validate();
  enc.validate();
  if (graph.triples().empty()) throw Error("no training triples");
  if (contexts.source_fingerprint() != graph.fingerprint()) {
    throw Error("context table was not built from the training graph");
  }
  const auto wall_start = std::chrono::steady_clock::now();

  ContextConfig ctx = contexts.config();
  ctx.leave_one_out = tc.leave_one_out;
  const SequenceConfig seq_cfg{enc.max_seq_len};
  seq_cfg.validate();

  TrainResult result{init_model(enc, vocab, graph.entity_count(), tc.seed), {}};
  auto& params = result.params;
  auto& log = result.log;
  if (tc.learning_rate != kDefaultLearningRate) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "learning_rate override %g (default %g)", tc.learning_rate,
                  kDefaultLearningRate);
    log.notes.emplace_back(buf);
  }

  Adam adam(params, tc);
  ModelParameters<float> grad = params.zeros_like();
  std::mt19937_64 shuffle_rng(tc.seed ^ 0x5eed5eed5eed5eedULL);
  std::mt19937_64 dropout_rng(tc.seed + 0x9e3779b97f4a7c15ULL);

  std::vector<std::size_t> order(graph.triples().size());
  std::vector<InputSequence> batch;
  std::vector<EntityId> gold;

  for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    std::size_t step = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t end = std::min(order.size(), start + tc.batch_size);
      batch.clear();
      gold.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(training_sequence(graph, contexts, vocab, ctx, seq_cfg, tc.context_mode, order[i]));
        gold.push_back(graph.triple(order[i]).tail);
      }
      ++step;
      for (auto& t : grad.tensors()) t.value->setZero();
      const double loss = loss_and_gradient(params, batch, gold, grad, {enc.dropout, &dropout_rng});
      if (!std::isfinite(loss)) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + " step " +
                              std::to_string(step) + ": loss is not finite");
      }
      if (tc.clip_norm > 0.0) {
        const double norm = global_norm(grad);
        if (norm > tc.clip_norm) {
          const auto s = static_cast<float>(tc.clip_norm / norm);
          for (auto& t : grad.tensors()) *t.value *= s;
        }
      }
      adam.step(params, grad);
      ++log.optimizer_steps;
      if (!params.all_finite()) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + " step " +
                              std::to_string(step) + ": non-finite parameters");
      }
      loss_sum += loss * static_cast<double>(batch.size());
      seen += batch.size();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / static_cast<double>(seen);
    rec.examples = seen;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    bool stop = on_epoch ? on_epoch(rec, params) : false;
    log.epochs.push_back(rec);
    if (tc.target_loss && rec.mean_loss < *tc.target_loss) stop = true;
    if (stop) break;
  }
  log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return result;
}

void write_train_log(std::ostream& out, const TrainLog& log) {
  for (const auto& n : log.notes) out << "# " << n << '\n';
  out << "epoch\tmean_loss\texamples\ttrain_hits1\tvalid_mrr\n";
  char buf[64];
  for (const auto& e : log.epochs) {
    std::snprintf(buf, sizeof buf, "%.17g", e.mean_loss);
    out << e.epoch << '\t' << buf << '\t' << e.examples << '\t';
    if (e.train_hits1) {
      std::snprintf(buf, sizeof buf, "%.6f", *e.train_hits1);
      out << buf;
    }
    out << '\t';
    if (e.valid_mrr) {
      std::snprintf(buf, sizeof buf, "%.6f", *e.valid_mrr);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace kgc
