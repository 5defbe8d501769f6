#pragma once
// Negative-sample-free training: every training triple (h, r, t) is one
// classification example with target t over all entities.

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "kgc/context.hpp"
#include "kgc/model.hpp"
#include "kgc/sequence.hpp"

namespace kgc {

struct TrainConfig {
  std::size_t batch_size = 16;
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t max_epochs = 30;
  std::uint64_t seed = 0;
  bool leave_one_out = false;
  // Global L2 norm; 0 disables clipping.
  double clip_norm = 1.0;
  ContextMode context_mode = ContextMode::full;
  // Stop once an epoch's mean loss falls below this.
  std::optional<double> target_loss;
  void validate() const;
};

inline constexpr double kDefaultLearningRate = 5e-5;

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  std::size_t examples = 0;
  std::optional<double> train_hits1;
  std::optional<double> valid_mrr;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::vector<std::string> notes;
  std::size_t optimizer_steps = 0;
  double wall_seconds = 0.0;
};

// Called after each epoch; may fill record fields. Return true to stop.
using EpochCallback = std::function<bool(EpochRecord&, const ModelParameters<float>&)>;

struct TrainResult {
  ModelParameters<float> params;
  TrainLog log;
};

// Contexts come from `contexts` (built from `graph`); leave_one_out is taken
// from `tc`. Throws DivergenceError naming epoch and step on a non-finite
// loss or parameter.
TrainResult train(const KnowledgeGraph& graph, const ContextTable& contexts, const TokenVocabulary& vocab,
                  const EncoderConfig& enc, const TrainConfig& tc, const EpochCallback& on_epoch = {});

// Sequence for training example `index` of `graph` under the given configs.
InputSequence training_sequence(const KnowledgeGraph& graph, const ContextTable& contexts,
                                const TokenVocabulary& vocab, const ContextConfig& ctx, const SequenceConfig& seq,
                                ContextMode mode, std::size_t index);

// Timing-free TSV: deterministic for a fixed seed and config.
void write_train_log(std::ostream& out, const TrainLog& log);

}  // namespace kgc
