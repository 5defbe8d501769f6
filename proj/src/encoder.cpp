#include <cmath>
#include <numbers>

#include "kgc/error.hpp"
#include "kgc/model.hpp"

namespace kgc {

void EncoderConfig::validate() const {
  if (layers < 1 || heads < 1 || model_dim < 1 || ff_dim < 1 || max_seq_len < 1) {
    throw Error("encoder dimensions must all be at least 1");
  }
  if (model_dim % heads != 0) throw Error("model_dim must be divisible by heads");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("dropout must lie in [0, 1)");
}

// ---------------------------------------------------------------------------
// Parameter bookkeeping

template <class S>
std::vector<NamedTensor<S>> ModelParameters<S>::tensors() {
  std::vector<NamedTensor<S>> out;
  out.push_back({"token_embedding", &token_embedding});
  out.push_back({"position_embedding", &position_embedding});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& w = layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    out.push_back({p + "attn_norm_gain", &w.attn_norm_gain});
    out.push_back({p + "attn_norm_bias", &w.attn_norm_bias});
    out.push_back({p + "query_weight", &w.query_weight});
    out.push_back({p + "query_bias", &w.query_bias});
    out.push_back({p + "key_weight", &w.key_weight});
    out.push_back({p + "key_bias", &w.key_bias});
    out.push_back({p + "value_weight", &w.value_weight});
    out.push_back({p + "value_bias", &w.value_bias});
    out.push_back({p + "output_weight", &w.output_weight});
    out.push_back({p + "output_bias", &w.output_bias});
    out.push_back({p + "ff_norm_gain", &w.ff_norm_gain});
    out.push_back({p + "ff_norm_bias", &w.ff_norm_bias});
    out.push_back({p + "ff_in_weight", &w.ff_in_weight});
    out.push_back({p + "ff_in_bias", &w.ff_in_bias});
    out.push_back({p + "ff_out_weight", &w.ff_out_weight});
    out.push_back({p + "ff_out_bias", &w.ff_out_bias});
  }
  out.push_back({"final_norm_gain", &final_norm_gain});
  out.push_back({"final_norm_bias", &final_norm_bias});
  out.push_back({"classifier_weight", &classifier_weight});
  out.push_back({"classifier_bias", &classifier_bias});
  return out;
}

template <class S>
std::vector<ConstNamedTensor<S>> ModelParameters<S>::tensors() const {
  auto mut = const_cast<ModelParameters<S>*>(this)->tensors();
  std::vector<ConstNamedTensor<S>> out;
  out.reserve(mut.size());
  for (auto& t : mut) out.push_back({std::move(t.name), t.value});
  return out;
}

template <class S>
ModelParameters<S> ModelParameters<S>::zeros_like() const {
  ModelParameters<S> z = *this;
  for (auto& t : z.tensors()) t.value->setZero();
  return z;
}

template <class S>
template <class T>
ModelParameters<T> ModelParameters<S>::cast() const {
  ModelParameters<T> out;
  out.encoder = encoder;
  out.vocab_size = vocab_size;
  out.entity_count = entity_count;
  out.layers.resize(layers.size());
  auto src = tensors();
  auto dst = out.tensors();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].value = src[i].value->template cast<T>();
  return out;
}

template <class S>
std::size_t ModelParameters<S>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += static_cast<std::size_t>(t.value->size());
  return n;
}

template <class S>
bool ModelParameters<S>::all_finite() const {
  for (const auto& t : tensors()) {
    if (!t.value->allFinite()) return false;
  }
  return true;
}

template <class S>
ModelParameters<S> init_model(const EncoderConfig& enc, std::size_t vocab_size, std::size_t entity_count,
                              std::uint64_t seed) {
  enc.validate();
  if (entity_count < 1) throw Error("entity_count must be at least 1");
  if (vocab_size < tokens::kSpecialCount + entity_count + 1) {
    throw Error("vocab_size " + std::to_string(vocab_size) + " cannot hold " + std::to_string(entity_count) +
                " entity tokens plus specials and relations");
  }
  const auto d = static_cast<Eigen::Index>(enc.model_dim);
  const auto ff = static_cast<Eigen::Index>(enc.ff_dim);
  std::mt19937_64 rng(seed);

  auto normal = [&](Eigen::Index rows, Eigen::Index cols, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix<S> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(dist(rng));
    return m;
  };
  auto uniform = [&](Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in) {
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-a, a);
    Matrix<S> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(dist(rng));
    return m;
  };
  auto ones = [](Eigen::Index n) { return Matrix<S>::Ones(1, n).eval(); };
  auto zeros = [](Eigen::Index n) { return Matrix<S>::Zero(1, n).eval(); };

  ModelParameters<S> p;
  p.encoder = enc;
  p.vocab_size = vocab_size;
  p.entity_count = entity_count;
  const double emb_std = 1.0 / std::sqrt(static_cast<double>(d));
  p.token_embedding = normal(static_cast<Eigen::Index>(vocab_size), d, emb_std);
  p.position_embedding = normal(static_cast<Eigen::Index>(enc.max_seq_len), d, emb_std);
  p.layers.resize(enc.layers);
  for (auto& w : p.layers) {
    w.attn_norm_gain = ones(d);
    w.attn_norm_bias = zeros(d);
    w.query_weight = uniform(d, d, d);
    w.query_bias = zeros(d);
    w.key_weight = uniform(d, d, d);
    w.key_bias = zeros(d);
    w.value_weight = uniform(d, d, d);
    w.value_bias = zeros(d);
    w.output_weight = uniform(d, d, d);
    w.output_bias = zeros(d);
    w.ff_norm_gain = ones(d);
    w.ff_norm_bias = zeros(d);
    w.ff_in_weight = uniform(d, ff, d);
    w.ff_in_bias = zeros(ff);
    w.ff_out_weight = uniform(ff, d, ff);
    w.ff_out_bias = zeros(d);
  }
  p.final_norm_gain = ones(d);
  p.final_norm_bias = zeros(d);
  p.classifier_weight = uniform(static_cast<Eigen::Index>(entity_count), d, d);
  p.classifier_bias = zeros(static_cast<Eigen::Index>(entity_count));
  return p;
}

ModelParameters<float> init_model(const EncoderConfig& enc, const TokenVocabulary& vocab, std::size_t entity_count,
                                  std::uint64_t seed) {
  if (vocab.entity_count() != entity_count) {
    throw Error("entity_count " + std::to_string(entity_count) + " does not match the vocabulary's " +
                std::to_string(vocab.entity_count()) + " entities");
  }
  return init_model<float>(enc, vocab.size(), entity_count, seed);
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

constexpr double kNormEps = 1e-5;

template <class S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

struct BatchLayout {
  std::vector<Eigen::Index> offset;
  std::vector<Eigen::Index> length;
  Eigen::Index total = 0;
  std::vector<TokenId> tokens;
  std::vector<Eigen::Index> positions;
};

template <class S>
BatchLayout layout_batch(const ModelParameters<S>& p, std::span<const InputSequence> batch) {
  if (batch.empty()) throw Error("empty batch");
  BatchLayout lay;
  for (const auto& seq : batch) {
    if (seq.token_ids.size() > p.encoder.max_seq_len || seq.attention_mask.size() != seq.token_ids.size()) {
      throw Error("sequence shape does not match the encoder (max_seq_len " +
                  std::to_string(p.encoder.max_seq_len) + ")");
    }
    if (seq.true_length < 1 || seq.true_length > seq.token_ids.size()) throw Error("invalid sequence length");
    for (std::size_t i = 0; i < seq.attention_mask.size(); ++i) {
      if ((seq.attention_mask[i] != 0) != (i < seq.true_length)) throw Error("attention mask is not a prefix mask");
    }
    lay.offset.push_back(lay.total);
    lay.length.push_back(static_cast<Eigen::Index>(seq.true_length));
    for (std::size_t i = 0; i < seq.true_length; ++i) {
      if (seq.token_ids[i] >= p.vocab_size) throw Error("token id outside the model vocabulary");
      lay.tokens.push_back(seq.token_ids[i]);
      lay.positions.push_back(static_cast<Eigen::Index>(i));
    }
    lay.total += static_cast<Eigen::Index>(seq.true_length);
  }
  return lay;
}

template <class S>
struct NormCache {
  Matrix<S> xhat;
  Vector<S> rstd;
};

template <class S>
void layer_norm(const Matrix<S>& x, const Matrix<S>& gain, const Matrix<S>& bias, Matrix<S>& y,
                NormCache<S>& cache) {
  const auto rows = x.rows(), cols = x.cols();
  cache.xhat.resize(rows, cols);
  cache.rstd.resize(rows);
  y.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto row = x.row(i);
    const S mean = row.mean();
    const S var = (row.array() - mean).square().mean();
    const S rstd = S(1) / std::sqrt(var + static_cast<S>(kNormEps));
    cache.rstd(i) = rstd;
    cache.xhat.row(i) = (row.array() - mean) * rstd;
    y.row(i) = cache.xhat.row(i).cwiseProduct(gain) + bias;
  }
}

// dx for y = gain * xhat + bias; accumulates dgain and dbias.
template <class S>
Matrix<S> layer_norm_backward(const Matrix<S>& dy, const Matrix<S>& gain, const NormCache<S>& cache,
                              Matrix<S>& dgain, Matrix<S>& dbias) {
  dgain += dy.cwiseProduct(cache.xhat).colwise().sum();
  dbias += dy.colwise().sum();
  Matrix<S> dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const auto dxhat = dy.row(i).cwiseProduct(gain).eval();
    const S m1 = dxhat.mean();
    const S m2 = dxhat.cwiseProduct(cache.xhat.row(i)).mean();
    dx.row(i) = ((dxhat.array() - m1) - cache.xhat.row(i).array() * m2) * cache.rstd(i);
  }
  return dx;
}

template <class S>
Matrix<S> dropout_mask(Eigen::Index rows, Eigen::Index cols, const DropoutSource& d) {
  Matrix<S> m(rows, cols);
  const S keep_scale = static_cast<S>(1.0 / (1.0 - d.rate));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(*d.rng) < d.rate ? S(0) : keep_scale;
  return m;
}

template <class S>
S gelu(S x) {
  return S(0.5) * x * (S(1) + std::erf(x / static_cast<S>(std::numbers::sqrt2)));
}

template <class S>
S gelu_grad(S x) {
  const S cdf = S(0.5) * (S(1) + std::erf(x / static_cast<S>(std::numbers::sqrt2)));
  const S pdf = std::exp(S(-0.5) * x * x) / static_cast<S>(std::sqrt(2.0 * std::numbers::pi));
  return cdf + x * pdf;
}

template <class S>
struct LayerCache {
  bool pooled_only = false;
  NormCache<S> attn_norm_cache;
  Matrix<S> attn_in;  // LN output, all rows
  Matrix<S> q, k, v;  // q covers query rows only
  std::vector<Matrix<S>> probs;
  Matrix<S> context;
  Matrix<S> drop_attn;
  NormCache<S> ff_norm_cache;
  Matrix<S> ff_in;
  Matrix<S> hidden_pre;
  Matrix<S> hidden;
  Matrix<S> drop_ff;
};

template <class S>
class Pass {
 public:
  Pass(const ModelParameters<S>& p, std::span<const InputSequence> batch, DropoutSource dropout)
      : p_(p), lay_(layout_batch(p, batch)), dropout_(dropout) {
    use_dropout_ = dropout.rng != nullptr && dropout.rate > 0.0;
  }

  Matrix<S> forward() {
    const auto d = static_cast<Eigen::Index>(p_.encoder.model_dim);
    const Eigen::Index n = lay_.total;
    Matrix<S> x(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      x.row(i) = p_.token_embedding.row(lay_.tokens[i]) + p_.position_embedding.row(lay_.positions[i]);
    }
    if (use_dropout_) {
      drop_embed_ = dropout_mask<S>(n, d, dropout_);
      x.array() *= drop_embed_.array();
    }
    caches_.resize(p_.layers.size());
    for (std::size_t l = 0; l < p_.layers.size(); ++l) {
      x = layer_forward(p_.layers[l], caches_[l], x, l + 1 == p_.layers.size());
    }
    layer_norm(x, p_.final_norm_gain, p_.final_norm_bias, pooled_, final_cache_);
    Matrix<S> logits = pooled_ * p_.classifier_weight.transpose();
    logits.rowwise() += p_.classifier_bias.row(0);
    return logits;
  }

  void backward(const Matrix<S>& dlogits, ModelParameters<S>& g) {
    g.classifier_weight.noalias() += dlogits.transpose() * pooled_;
    g.classifier_bias += dlogits.colwise().sum();
    Matrix<S> dpooled = dlogits * p_.classifier_weight;
    Matrix<S> dx = layer_norm_backward(dpooled, p_.final_norm_gain, final_cache_, g.final_norm_gain,
                                       g.final_norm_bias);
    for (std::size_t l = p_.layers.size(); l-- > 0;) {
      dx = layer_backward(p_.layers[l], g.layers[l], caches_[l], dx);
    }
    if (use_dropout_) dx.array() *= drop_embed_.array();
    for (Eigen::Index i = 0; i < lay_.total; ++i) {
      g.token_embedding.row(lay_.tokens[i]) += dx.row(i);
      g.position_embedding.row(lay_.positions[i]) += dx.row(i);
    }
  }

 private:
  // Row of the query set for sequence b, and its row count.
  Eigen::Index query_offset(const LayerCache<S>& c, std::size_t b) const {
    return c.pooled_only ? static_cast<Eigen::Index>(b) : lay_.offset[b];
  }
  Eigen::Index query_length(const LayerCache<S>& c, std::size_t b) const {
    return c.pooled_only ? 1 : lay_.length[b];
  }

  Matrix<S> layer_forward(const LayerWeights<S>& w, LayerCache<S>& c, const Matrix<S>& x, bool pooled_only) {
    const auto d = static_cast<Eigen::Index>(p_.encoder.model_dim);
    const auto heads = static_cast<Eigen::Index>(p_.encoder.heads);
    const Eigen::Index dh = d / heads;
    const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
    const std::size_t batch = lay_.offset.size();
    c.pooled_only = pooled_only;

    layer_norm(x, w.attn_norm_gain, w.attn_norm_bias, c.attn_in, c.attn_norm_cache);
    c.k.noalias() = c.attn_in * w.key_weight;
    c.k.rowwise() += w.key_bias.row(0);
    c.v.noalias() = c.attn_in * w.value_weight;
    c.v.rowwise() += w.value_bias.row(0);

    Matrix<S> residual;
    if (pooled_only) {
      Matrix<S> aq(static_cast<Eigen::Index>(batch), d);
      residual.resize(static_cast<Eigen::Index>(batch), d);
      for (std::size_t b = 0; b < batch; ++b) {
        aq.row(b) = c.attn_in.row(lay_.offset[b]);
        residual.row(b) = x.row(lay_.offset[b]);
      }
      c.q.noalias() = aq * w.query_weight;
    } else {
      c.q.noalias() = c.attn_in * w.query_weight;
      residual = x;
    }
    c.q.rowwise() += w.query_bias.row(0);

    const Eigen::Index rows = c.q.rows();
    c.context.resize(rows, d);
    c.probs.assign(batch * static_cast<std::size_t>(heads), {});
    for (std::size_t b = 0; b < batch; ++b) {
      const Eigen::Index ko = lay_.offset[b], len = lay_.length[b];
      const Eigen::Index qo = query_offset(c, b), qlen = query_length(c, b);
      for (Eigen::Index h = 0; h < heads; ++h) {
        auto& prob = c.probs[b * static_cast<std::size_t>(heads) + static_cast<std::size_t>(h)];
        prob.noalias() = c.q.block(qo, h * dh, qlen, dh) * c.k.block(ko, h * dh, len, dh).transpose();
        prob *= scale;
        for (Eigen::Index i = 0; i < qlen; ++i) {
          auto row = prob.row(i);
          const S m = row.maxCoeff();
          row = (row.array() - m).exp();
          row /= row.sum();
        }
        c.context.block(qo, h * dh, qlen, dh).noalias() = prob * c.v.block(ko, h * dh, len, dh);
      }
    }

    Matrix<S> attn_out = c.context * w.output_weight;
    attn_out.rowwise() += w.output_bias.row(0);
    if (use_dropout_) {
      c.drop_attn = dropout_mask<S>(rows, d, dropout_);
      attn_out.array() *= c.drop_attn.array();
    }
    Matrix<S> x1 = residual + attn_out;

    layer_norm(x1, w.ff_norm_gain, w.ff_norm_bias, c.ff_in, c.ff_norm_cache);
    c.hidden_pre.noalias() = c.ff_in * w.ff_in_weight;
    c.hidden_pre.rowwise() += w.ff_in_bias.row(0);
    c.hidden = c.hidden_pre.unaryExpr([](S v) { return gelu(v); });
    Matrix<S> ff_out = c.hidden * w.ff_out_weight;
    ff_out.rowwise() += w.ff_out_bias.row(0);
    if (use_dropout_) {
      c.drop_ff = dropout_mask<S>(rows, d, dropout_);
      ff_out.array() *= c.drop_ff.array();
    }
    return x1 + ff_out;
  }

  Matrix<S> layer_backward(const LayerWeights<S>& w, LayerWeights<S>& g, const LayerCache<S>& c,
                           const Matrix<S>& dout) {
    const auto d = static_cast<Eigen::Index>(p_.encoder.model_dim);
    const auto heads = static_cast<Eigen::Index>(p_.encoder.heads);
    const Eigen::Index dh = d / heads;
    const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
    const std::size_t batch = lay_.offset.size();

    // Feed-forward branch.
    Matrix<S> dff = dout;
    if (use_dropout_) dff.array() *= c.drop_ff.array();
    g.ff_out_weight.noalias() += c.hidden.transpose() * dff;
    g.ff_out_bias += dff.colwise().sum();
    Matrix<S> dhidden = dff * w.ff_out_weight.transpose();
    dhidden.array() *= c.hidden_pre.unaryExpr([](S v) { return gelu_grad(v); }).array();
    g.ff_in_weight.noalias() += c.ff_in.transpose() * dhidden;
    g.ff_in_bias += dhidden.colwise().sum();
    Matrix<S> dffin = dhidden * w.ff_in_weight.transpose();
    Matrix<S> dx1 = dout + layer_norm_backward(dffin, w.ff_norm_gain, c.ff_norm_cache, g.ff_norm_gain,
                                               g.ff_norm_bias);

    // Attention branch.
    Matrix<S> dattn = dx1;
    if (use_dropout_) dattn.array() *= c.drop_attn.array();
    g.output_weight.noalias() += c.context.transpose() * dattn;
    g.output_bias += dattn.colwise().sum();
    Matrix<S> dcontext = dattn * w.output_weight.transpose();

    Matrix<S> dq = Matrix<S>::Zero(c.q.rows(), d);
    Matrix<S> dk = Matrix<S>::Zero(c.k.rows(), d);
    Matrix<S> dv = Matrix<S>::Zero(c.v.rows(), d);
    for (std::size_t b = 0; b < batch; ++b) {
      const Eigen::Index ko = lay_.offset[b], len = lay_.length[b];
      const Eigen::Index qo = query_offset(c, b), qlen = query_length(c, b);
      for (Eigen::Index h = 0; h < heads; ++h) {
        const auto& prob = c.probs[b * static_cast<std::size_t>(heads) + static_cast<std::size_t>(h)];
        const auto dctx = dcontext.block(qo, h * dh, qlen, dh);
        dv.block(ko, h * dh, len, dh).noalias() += prob.transpose() * dctx;
        Matrix<S> dprob = dctx * c.v.block(ko, h * dh, len, dh).transpose();
        for (Eigen::Index i = 0; i < qlen; ++i) {
          const S dot = dprob.row(i).dot(prob.row(i));
          dprob.row(i) = prob.row(i).cwiseProduct((dprob.row(i).array() - dot).matrix());
        }
        dprob *= scale;
        dq.block(qo, h * dh, qlen, dh).noalias() += dprob * c.k.block(ko, h * dh, len, dh);
        dk.block(ko, h * dh, len, dh).noalias() += dprob.transpose() * c.q.block(qo, h * dh, qlen, dh);
      }
    }

    g.key_weight.noalias() += c.attn_in.transpose() * dk;
    g.key_bias += dk.colwise().sum();
    g.value_weight.noalias() += c.attn_in.transpose() * dv;
    g.value_bias += dv.colwise().sum();
    g.query_bias += dq.colwise().sum();
    Matrix<S> dattn_in = dk * w.key_weight.transpose();
    dattn_in.noalias() += dv * w.value_weight.transpose();

    Matrix<S> dx;
    if (c.pooled_only) {
      Matrix<S> aq(static_cast<Eigen::Index>(batch), d);
      for (std::size_t b = 0; b < batch; ++b) aq.row(b) = c.attn_in.row(lay_.offset[b]);
      g.query_weight.noalias() += aq.transpose() * dq;
      const Matrix<S> daq = dq * w.query_weight.transpose();
      for (std::size_t b = 0; b < batch; ++b) dattn_in.row(lay_.offset[b]) += daq.row(b);
      dx = layer_norm_backward(dattn_in, w.attn_norm_gain, c.attn_norm_cache, g.attn_norm_gain, g.attn_norm_bias);
      for (std::size_t b = 0; b < batch; ++b) dx.row(lay_.offset[b]) += dx1.row(b);
    } else {
      g.query_weight.noalias() += c.attn_in.transpose() * dq;
      dattn_in.noalias() += dq * w.query_weight.transpose();
      dx = layer_norm_backward(dattn_in, w.attn_norm_gain, c.attn_norm_cache, g.attn_norm_gain, g.attn_norm_bias);
      dx += dx1;
    }
    return dx;
  }

  const ModelParameters<S>& p_;
  BatchLayout lay_;
  DropoutSource dropout_;
  bool use_dropout_ = false;
  Matrix<S> drop_embed_;
  std::vector<LayerCache<S>> caches_;
  NormCache<S> final_cache_;
  Matrix<S> pooled_;
};

template <class S>
void check_gold(const ModelParameters<S>& p, std::span<const EntityId> gold, std::size_t batch) {
  if (gold.size() != batch) throw Error("gold label count does not match the batch");
  for (auto g : gold) {
    if (g.value >= p.entity_count) throw Error("gold entity " + std::to_string(g.value) + " out of range");
  }
}

}  // namespace

template <class S>
Matrix<S> forward(const ModelParameters<S>& params, std::span<const InputSequence> batch) {
  Pass<S> pass(params, batch, {});
  return pass.forward();
}

double cross_entropy(std::span<const double> logits, EntityId gold) {
  if (gold.value >= logits.size()) throw Error("gold entity " + std::to_string(gold.value) + " out of range");
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - m);
  return std::max(0.0, m + std::log(sum) - logits[gold.value]);
}

template <class S>
double cross_entropy(const Matrix<S>& logits, std::span<const EntityId> gold) {
  if (static_cast<std::size_t>(logits.rows()) != gold.size()) throw Error("gold label count does not match logits");
  double total = 0.0;
  std::vector<double> row(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    for (Eigen::Index j = 0; j < logits.cols(); ++j) row[j] = static_cast<double>(logits(i, j));
    total += cross_entropy(row, gold[i]);
  }
  return total / static_cast<double>(gold.size());
}

template <class S>
double loss_and_gradient(const ModelParameters<S>& params, std::span<const InputSequence> batch,
                         std::span<const EntityId> gold, ModelParameters<S>& grad, DropoutSource dropout) {
  check_gold(params, gold, batch.size());
  Pass<S> pass(params, batch, dropout);
  const Matrix<S> logits = pass.forward();
  const double loss = cross_entropy(logits, gold);

  // d(mean CE)/dlogits = (softmax - onehot) / batch
  Matrix<S> dlogits(logits.rows(), logits.cols());
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = static_cast<double>(logits.row(i).maxCoeff());
    double sum = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) sum += std::exp(static_cast<double>(logits(i, j)) - m);
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      double pj = std::exp(static_cast<double>(logits(i, j)) - m) / sum;
      if (j == static_cast<Eigen::Index>(gold[i].value)) pj -= 1.0;
      dlogits(i, j) = static_cast<S>(pj * inv_batch);
    }
  }
  pass.backward(dlogits, grad);
  return loss;
}

template <class S>
double batch_loss(const ModelParameters<S>& params, std::span<const InputSequence> batch,
                  std::span<const EntityId> gold) {
  check_gold(params, gold, batch.size());
  return cross_entropy(forward(params, batch), gold);
}

PredictionDistribution softmax(std::span<const double> logits) {
  PredictionDistribution out;
  if (logits.empty()) return out;
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  out.probs.resize(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.probs[i] = std::exp(logits[i] - m);
    sum += out.probs[i];
  }
  for (auto& p : out.probs) p /= sum;
  return out;
}

template <class S>
PredictionDistribution predict(const ModelParameters<S>& params, const InputSequence& seq) {
  const Matrix<S> logits = forward(params, std::span<const InputSequence>(&seq, 1));
  std::vector<double> row(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index j = 0; j < logits.cols(); ++j) row[j] = static_cast<double>(logits(0, j));
  return softmax(row);
}

template struct ModelParameters<float>;
template struct ModelParameters<double>;
template ModelParameters<double> ModelParameters<float>::cast<double>() const;
template ModelParameters<float> ModelParameters<double>::cast<float>() const;
template ModelParameters<float> ModelParameters<float>::cast<float>() const;
template ModelParameters<double> ModelParameters<double>::cast<double>() const;

#define KGC_INSTANTIATE(S)                                                                                     \
  template ModelParameters<S> init_model<S>(const EncoderConfig&, std::size_t, std::size_t, std::uint64_t);    \
  template Matrix<S> forward<S>(const ModelParameters<S>&, std::span<const InputSequence>);                    \
  template double loss_and_gradient<S>(const ModelParameters<S>&, std::span<const InputSequence>,              \
                                       std::span<const EntityId>, ModelParameters<S>&, DropoutSource);         \
  template double batch_loss<S>(const ModelParameters<S>&, std::span<const InputSequence>,                     \
                                std::span<const EntityId>);                                                    \
  template PredictionDistribution predict<S>(const ModelParameters<S>&, const InputSequence&);                 \
  template double cross_entropy<S>(const Matrix<S>&, std::span<const EntityId>);

KGC_INSTANTIATE(float)
KGC_INSTANTIATE(double)

#undef KGC_INSTANTIATE

}  // namespace kgc
