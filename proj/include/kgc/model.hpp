#pragma once
// Transformer encoder over InputSequence with a softmax classifier over all
// entities, pooled at the [CLS] position.
//
// Pre-norm blocks:  x += Attn(LN(x));  x += FFN(LN(x));  pooled = LN_f(x[0]).
// FFN uses exact (erf) GELU. Padding is masked out of attention, so only the
// first true_length positions of each sequence are ever computed.
//
// Scalar is float for training and inference, double for gradient checks.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kgc/kg.hpp"
#include "kgc/sequence.hpp"

namespace kgc {

template <class S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t model_dim = 128;
  std::size_t ff_dim = 512;
  double dropout = 0.1;
  std::size_t max_seq_len = 256;
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

template <class S>
struct LayerWeights {
  Matrix<S> attn_norm_gain, attn_norm_bias;
  Matrix<S> query_weight, query_bias;
  Matrix<S> key_weight, key_bias;
  Matrix<S> value_weight, value_bias;
  Matrix<S> output_weight, output_bias;
  Matrix<S> ff_norm_gain, ff_norm_bias;
  Matrix<S> ff_in_weight, ff_in_bias;
  Matrix<S> ff_out_weight, ff_out_bias;
};

template <class S>
struct NamedTensor {
  std::string name;
  Matrix<S>* value;
};

template <class S>
struct ConstNamedTensor {
  std::string name;
  const Matrix<S>* value;
};

// Row vectors (biases, norm gains) are stored as 1 x n matrices.
template <class S>
struct ModelParameters {
  EncoderConfig encoder;
  std::size_t vocab_size = 0;
  std::size_t entity_count = 0;

  Matrix<S> token_embedding;     // vocab_size x d
  Matrix<S> position_embedding;  // max_seq_len x d
  std::vector<LayerWeights<S>> layers;
  Matrix<S> final_norm_gain, final_norm_bias;
  Matrix<S> classifier_weight;  // entity_count x d
  Matrix<S> classifier_bias;    // 1 x entity_count

  // Fixed order; names are stable across versions of the checkpoint format.
  std::vector<NamedTensor<S>> tensors();
  std::vector<ConstNamedTensor<S>> tensors() const;

  // Same shapes, all zero.
  ModelParameters zeros_like() const;
  template <class T>
  ModelParameters<T> cast() const;

  std::size_t parameter_count() const;
  bool all_finite() const;
};

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); embeddings ~ N(0, 1/sqrt(d));
// norm gains 1; biases 0.
template <class S>
ModelParameters<S> init_model(const EncoderConfig& enc, std::size_t vocab_size, std::size_t entity_count,
                              std::uint64_t seed);

// Checks the vocabulary agrees with entity_count.
ModelParameters<float> init_model(const EncoderConfig& enc, const TokenVocabulary& vocab,
                                  std::size_t entity_count, std::uint64_t seed);

// Inference forward pass (no dropout): batch x entity_count logits.
template <class S>
Matrix<S> forward(const ModelParameters<S>& params, std::span<const InputSequence> batch);

// Dropout masks drawn from `rng`; rate 0 or null rng disables dropout.
struct DropoutSource {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;
};

// Mean cross-entropy over the batch; `grad` must match `params` in shape and
// is accumulated into (call zeros_like() first for a fresh gradient).
template <class S>
double loss_and_gradient(const ModelParameters<S>& params, std::span<const InputSequence> batch,
                         std::span<const EntityId> gold, ModelParameters<S>& grad, DropoutSource dropout = {});

// Mean cross-entropy computed by the forward pass alone (dropout off).
template <class S>
double batch_loss(const ModelParameters<S>& params, std::span<const InputSequence> batch,
                  std::span<const EntityId> gold);

struct PredictionDistribution {
  std::vector<double> probs;
};

PredictionDistribution softmax(std::span<const double> logits);
template <class S>
PredictionDistribution predict(const ModelParameters<S>& params, const InputSequence& seq);

// -log softmax(logits)[gold], with log-sum-exp.
double cross_entropy(std::span<const double> logits, EntityId gold);
// Mean over rows.
template <class S>
double cross_entropy(const Matrix<S>& logits, std::span<const EntityId> gold);

}  // namespace kgc
