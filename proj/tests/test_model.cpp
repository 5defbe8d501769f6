#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "kgc/context.hpp"
#include "kgc/error.hpp"
#include "kgc/gradient_check.hpp"
#include "kgc/model.hpp"
#include "support.hpp"

using namespace kgc;

namespace {

EncoderConfig small_encoder(std::size_t max_len = 64) {
  EncoderConfig e;
  e.layers = 2;
  e.heads = 4;
  e.model_dim = 32;
  e.ff_dim = 64;
  e.max_seq_len = max_len;
  return e;
}

struct Batch {
  KnowledgeGraph g = synthetic_graph({20, 3, 60, 0.1, 8});
  TokenVocabulary vocab = build_vocabulary(g);
  ContextTable table = precompute_all_contexts(g, ContextConfig{true, false, 12, 12});

  std::vector<InputSequence> sequences(std::size_t max_len, std::size_t n = 8) const {
    std::vector<InputSequence> out;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& t = g.triple(i);
      out.push_back(encode_query(t.head, t.relation, table.head(t.head), table.relation(t.relation), vocab,
                                 SequenceConfig{max_len}));
    }
    return out;
  }
};

}  // namespace

TEST_CASE("softmax is a distribution") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 30.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> logits(1 + trial % 50);
    for (auto& l : logits) l = n(rng);
    const auto p = softmax(logits);
    CHECK(std::accumulate(p.probs.begin(), p.probs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-5));
    for (double x : p.probs) CHECK(x >= 0.0);

    auto shifted = logits;
    for (auto& l : shifted) l += 1234.5;
    const auto q = softmax(shifted);
    for (std::size_t i = 0; i < p.probs.size(); ++i) CHECK(std::abs(p.probs[i] - q.probs[i]) < 1e-9);
  }
}

TEST_CASE("cross-entropy reference values") {
  const std::vector<double> uniform(4, 0.7);
  CHECK(cross_entropy(uniform, EntityId{2}) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(cross_entropy(uniform, EntityId{2}) == doctest::Approx(1.3863).epsilon(1e-4));

  std::vector<double> peaked(4, 0.0);
  peaked[1] = 20.0;
  CHECK(cross_entropy(peaked, EntityId{1}) < 1e-6);
  CHECK_THROWS_AS(cross_entropy(peaked, EntityId{4}), Error);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 5.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> logits(10);
    for (auto& l : logits) l = n(rng);
    CHECK(cross_entropy(logits, EntityId{static_cast<std::uint32_t>(trial % 10)}) >= 0.0);
  }

  Matrix<double> m(2, 4);
  m.setZero();
  m(1, 3) = 20.0;
  const std::vector<EntityId> gold{EntityId{0}, EntityId{3}};
  CHECK(cross_entropy(m, gold) == doctest::Approx(std::log(4.0) / 2).epsilon(1e-6));
}

TEST_CASE("init is deterministic and shaped") {
  const auto enc = small_encoder();
  const auto a = init_model<float>(enc, 40, 20, 7);
  const auto b = init_model<float>(enc, 40, 20, 7);
  const auto c = init_model<float>(enc, 40, 20, 8);
  CHECK(a.token_embedding == b.token_embedding);
  CHECK(a.classifier_weight == b.classifier_weight);
  CHECK(a.token_embedding != c.token_embedding);
  CHECK(a.token_embedding.rows() == 40);
  CHECK(a.token_embedding.cols() == 32);
  CHECK(a.position_embedding.rows() == 64);
  CHECK(a.classifier_weight.rows() == 20);
  CHECK(a.classifier_bias.cols() == 20);
  CHECK(a.layers.size() == 2);
  CHECK(a.layers[0].ff_in_weight.size() == 32 * 64);
  CHECK(a.all_finite());

  std::size_t count = 0;
  for (const auto& t : a.tensors()) count += static_cast<std::size_t>(t.value->size());
  CHECK(count == a.parameter_count());

  CHECK_THROWS_AS(init_model<float>(enc, 10, 20, 1), Error);
  EncoderConfig bad = enc;
  bad.heads = 5;
  CHECK_THROWS_AS(init_model<float>(bad, 40, 20, 1), Error);
  bad = enc;
  bad.dropout = 1.0;
  CHECK_THROWS_AS(init_model<float>(bad, 40, 20, 1), Error);
}

TEST_CASE("logits do not depend on batch company or order") {
  const Batch b;
  const auto params = init_model(small_encoder(), b.vocab, b.g.entity_count(), 3);
  const auto seqs = b.sequences(64);
  const auto all = forward(params, seqs);
  REQUIRE(all.rows() == 8);
  REQUIRE(all.cols() == 20);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const auto one = forward(params, std::span(seqs).subspan(i, 1));
    CHECK((one.row(0) - all.row(static_cast<Eigen::Index>(i))).cwiseAbs().maxCoeff() < 1e-5);
  }
  std::vector<InputSequence> reversed(seqs.rbegin(), seqs.rend());
  const auto rev = forward(params, reversed);
  for (Eigen::Index i = 0; i < 8; ++i) CHECK((rev.row(7 - i) - all.row(i)).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("extra padding never changes logits") {
  const Batch b;
  const auto params = init_model(small_encoder(64), b.vocab, b.g.entity_count(), 4);
  const auto short_seqs = b.sequences(24);
  auto long_seqs = short_seqs;
  for (auto& s : long_seqs) {
    s.token_ids.resize(64, tokens::kPad);
    s.attention_mask.resize(64, 0);
  }
  const auto a = forward(params, short_seqs);
  const auto c = forward(params, long_seqs);
  CHECK((a - c).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("malformed sequences are rejected") {
  const Batch b;
  const auto params = init_model(small_encoder(16), b.vocab, b.g.entity_count(), 4);
  auto seqs = b.sequences(16, 1);
  seqs[0].token_ids.resize(32, tokens::kPad);
  seqs[0].attention_mask.resize(32, 0);
  CHECK_THROWS_AS(forward(params, seqs), Error);
  seqs = b.sequences(16, 1);
  seqs[0].token_ids[0] = 999;
  CHECK_THROWS_AS(forward(params, seqs), Error);
}

TEST_CASE("predict matches the softmax of forward") {
  const Batch b;
  const auto params = init_model(small_encoder(), b.vocab, b.g.entity_count(), 5);
  const auto seqs = b.sequences(64, 1);
  const auto logits = forward(params, seqs);
  std::vector<double> l(logits.cols());
  for (Eigen::Index i = 0; i < logits.cols(); ++i) l[i] = logits(0, i);
  const auto p = predict(params, seqs[0]);
  const auto q = softmax(l);
  for (std::size_t i = 0; i < l.size(); ++i) CHECK(p.probs[i] == doctest::Approx(q.probs[i]).epsilon(1e-6));
}

TEST_CASE("analytic gradients match finite differences") {
  EncoderConfig enc;
  enc.layers = 2;
  enc.heads = 2;
  enc.model_dim = 16;
  enc.ff_dim = 32;
  enc.max_seq_len = 16;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto report = gradient_check(enc, seed);
    INFO("worst tensor ", report.worst_tensor);
    CHECK(report.max_relative_error < 1e-4);
    CHECK(report.parameters_checked > 1000);
  }
  enc.model_dim = 32;
  CHECK_THROWS_AS(gradient_check(enc, 1), Error);
}

TEST_CASE("central differences converge at second order") {
  EncoderConfig enc;
  enc.layers = 1;
  enc.heads = 2;
  enc.model_dim = 8;
  enc.ff_dim = 16;
  enc.max_seq_len = 12;
  const auto coarse = gradient_check(enc, 4, 2e-3);
  const auto fine = gradient_check(enc, 4, 1e-3);
  const double ratio = coarse.max_abs_error / fine.max_abs_error;
  CHECK(ratio > 3.0);
  CHECK(ratio < 5.0);
}

TEST_CASE("gradient vanishes at a saturated gold logit") {
  const Batch b;
  auto enc = small_encoder(64);
  enc.dropout = 0.0;
  auto params = init_model<double>(enc, b.vocab.size(), b.g.entity_count(), 6);
  const auto seqs = b.sequences(64, 1);
  const std::vector<EntityId> gold{EntityId{5}};
  params.classifier_bias(0, 5) = 60.0;
  auto grad = params.zeros_like();
  const double loss = loss_and_gradient(params, seqs, gold, grad);
  CHECK(loss < 1e-12);
  double sq = 0.0;
  for (const auto& t : grad.tensors()) sq += t.value->squaredNorm();
  CHECK(std::sqrt(sq) < 1e-6);
}

TEST_CASE("loss_and_gradient agrees with batch_loss without dropout") {
  const Batch b;
  const auto params = init_model(small_encoder(), b.vocab, b.g.entity_count(), 9);
  const auto seqs = b.sequences(64);
  std::vector<EntityId> gold;
  for (std::size_t i = 0; i < seqs.size(); ++i) gold.push_back(b.g.triple(i).tail);
  auto grad = params.zeros_like();
  const double a = loss_and_gradient(params, seqs, gold, grad);
  CHECK(a == doctest::Approx(batch_loss(params, seqs, gold)).epsilon(1e-5));
  CHECK(a == doctest::Approx(std::log(20.0)).epsilon(0.2));
}
