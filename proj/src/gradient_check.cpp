#include "kgc/gradient_check.hpp"

#include <cmath>
#include <random>

#include "kgc/context.hpp"
#include "kgc/error.hpp"
#include "kgc/train.hpp"

namespace kgc {

namespace {
// Tensors whose true gradient vanishes (e.g. key biases, which softmax
// ignores) are compared against this absolute floor.
constexpr double kNormFloor = 1e-6;
}  // namespace

GradientCheckReport compare_gradients(const ModelParameters<double>& params, std::span<const InputSequence> batch,
                                      std::span<const EntityId> gold, double step) {
  ModelParameters<double> analytic = params.zeros_like();
  loss_and_gradient(params, batch, gold, analytic);

  ModelParameters<double> probe = params;
  GradientCheckReport report;
  auto probe_tensors = probe.tensors();
  const auto grad_tensors = analytic.tensors();
  for (std::size_t ti = 0; ti < probe_tensors.size(); ++ti) {
    auto& value = *probe_tensors[ti].value;
    const auto& a = *grad_tensors[ti].value;
    Matrix<double> numeric(value.rows(), value.cols());
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const double saved = value.data()[i];
      value.data()[i] = saved + step;
      const double up = batch_loss(probe, batch, gold);
      value.data()[i] = saved - step;
      const double down = batch_loss(probe, batch, gold);
      value.data()[i] = saved;
      numeric.data()[i] = (up - down) / (2.0 * step);
    }
    TensorGradientError err;
    err.name = probe_tensors[ti].name;
    const double diff = (a - numeric).norm();
    const double denom = a.norm() + numeric.norm();
    err.relative_error = diff / std::max(denom, kNormFloor);
    err.max_abs_error = value.size() > 0 ? (a - numeric).cwiseAbs().maxCoeff() : 0.0;
    report.parameters_checked += static_cast<std::size_t>(value.size());
    report.max_abs_error = std::max(report.max_abs_error, err.max_abs_error);
    if (err.relative_error >= report.max_relative_error) {
      report.max_relative_error = err.relative_error;
      report.worst_tensor = err.name;
    }
    report.tensors.push_back(std::move(err));
  }
  return report;
}

GradientCheckReport gradient_check(const EncoderConfig& enc_in, std::uint64_t seed, double step) {
  EncoderConfig enc = enc_in;
  enc.dropout = 0.0;
  enc.validate();
  if (enc.model_dim > 16 || enc.layers > 2) throw Error("gradient_check expects a tiny config (d <= 16, layers <= 2)");
  if (enc.max_seq_len < 8) throw Error("gradient_check needs max_seq_len >= 8");

  const auto graph = synthetic_graph({8, 2, 14, 0.25, seed});
  ContextConfig ctx;
  ctx.head_context_budget = 4;
  ctx.relation_context_budget = 6;
  ctx.include_incoming = true;
  const auto table = precompute_all_contexts(graph, ctx);
  const auto vocab = build_vocabulary(graph);
  const SequenceConfig seq{enc.max_seq_len};

  auto params = init_model<double>(enc, vocab.size(), graph.entity_count(), seed);
  // Move off the symmetric init point (zero biases, unit gains).
  std::mt19937_64 rng(seed ^ 0xabcdefULL);
  std::normal_distribution<double> noise(0.0, 0.1);
  for (auto& t : params.tensors()) {
    for (Eigen::Index i = 0; i < t.value->size(); ++i) t.value->data()[i] += noise(rng);
  }

  std::vector<InputSequence> batch;
  std::vector<EntityId> gold;
  for (std::size_t i = 0; i < 3; ++i) {
    batch.push_back(training_sequence(graph, table, vocab, ctx, seq, ContextMode::full, i));
    gold.push_back(graph.triple(i).tail);
  }
  return compare_gradients(params, batch, gold, step);
}

}  // namespace kgc
