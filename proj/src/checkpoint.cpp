#include "kgc/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "kgc/binary_io.hpp"

namespace kgc {

namespace {

constexpr char kMagic[4] = {'M', 'U', 'C', 'O'};
constexpr std::uint8_t kDtypeF32 = 1;

using Kind = CheckpointError::Kind;

}  // namespace

nlohmann::json to_json(const EncoderConfig& c) {
  return {{"layers", c.layers},       {"heads", c.heads},     {"model_dim", c.model_dim},
          {"ff_dim", c.ff_dim},       {"dropout", c.dropout}, {"max_seq_len", c.max_seq_len}};
}

nlohmann::json to_json(const ContextConfig& c) {
  return {{"include_incoming", c.include_incoming},
          {"leave_one_out", c.leave_one_out},
          {"head_context_budget", c.head_context_budget},
          {"relation_context_budget", c.relation_context_budget}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.layers = j.at("layers").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.model_dim = j.at("model_dim").get<std::size_t>();
  c.ff_dim = j.at("ff_dim").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
  return c;
}

ContextConfig context_config_from_json(const nlohmann::json& j) {
  ContextConfig c;
  c.include_incoming = j.at("include_incoming").get<bool>();
  c.leave_one_out = j.at("leave_one_out").get<bool>();
  c.head_context_budget = j.at("head_context_budget").get<std::size_t>();
  c.relation_context_budget = j.at("relation_context_budget").get<std::size_t>();
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParameters<float>& params,
                     const TokenVocabulary& vocab, const CheckpointMetadata& meta) {
  if (params.entity_count != meta.entity_count || vocab.entity_count() != meta.entity_count) {
    throw Error("checkpoint metadata does not match the model");
  }
  const auto tensors = params.tensors();
  nlohmann::json j;
  j["encoder"] = to_json(meta.encoder);
  j["sequence"] = {{"max_seq_len", meta.sequence.max_seq_len}};
  j["context"] = to_json(meta.context);
  j["graph_fingerprint"] = io::hex64(meta.graph_fingerprint);
  j["entity_count"] = meta.entity_count;
  j["vocab_size"] = params.vocab_size;
  j["relation_labels"] = vocab.relation_labels();
  j["entity_labels"] = vocab.entity_labels();
  j["tensor_count"] = tensors.size();
  j["extra"] = meta.extra;
  const std::string text = j.dump();

  std::ostringstream out(std::ios::binary);
  io::write_bytes(out, {kMagic, 4});
  io::write_u32(out, kCheckpointVersion);
  io::write_u32(out, static_cast<std::uint32_t>(text.size()));
  io::write_bytes(out, text);
  for (const auto& t : tensors) {
    io::write_u32(out, static_cast<std::uint32_t>(t.name.size()));
    io::write_bytes(out, t.name);
    io::write_u8(out, kDtypeF32);
    io::write_u32(out, 2);
    io::write_u32(out, static_cast<std::uint32_t>(t.value->rows()));
    io::write_u32(out, static_cast<std::uint32_t>(t.value->cols()));
    for (Eigen::Index i = 0; i < t.value->size(); ++i) io::write_f32(out, t.value->data()[i]);
  }
  io::write_file_atomic(path, out.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<std::uint64_t> expected_fingerprint) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(path.string() + ": cannot open checkpoint");
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string_view(magic, 4) != std::string_view(kMagic, 4)) {
    throw CheckpointError(Kind::not_a_checkpoint, path.string() + ": not a checkpoint");
  }
  try {
    const auto version = io::read_u32(in);
    if (version != kCheckpointVersion) {
      throw CheckpointError(Kind::unsupported_version,
                            path.string() + ": unsupported version " + std::to_string(version));
    }
    const auto meta_len = io::read_u32(in);
    const std::string text = io::read_bytes(in, meta_len);
    nlohmann::json j;
    Checkpoint ck;
    try {
      j = nlohmann::json::parse(text);
      ck.meta.encoder = encoder_config_from_json(j.at("encoder"));
      ck.meta.sequence.max_seq_len = j.at("sequence").at("max_seq_len").get<std::size_t>();
      ck.meta.context = context_config_from_json(j.at("context"));
      ck.meta.graph_fingerprint = std::stoull(j.at("graph_fingerprint").get<std::string>(), nullptr, 16);
      ck.meta.entity_count = j.at("entity_count").get<std::size_t>();
      ck.meta.extra = j.value("extra", nlohmann::json::object());
      ck.vocab = TokenVocabulary(j.at("relation_labels").get<std::vector<std::string>>(),
                                 j.at("entity_labels").get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
      throw CheckpointError(Kind::malformed, path.string() + ": bad metadata: " + e.what());
    }
    if (expected_fingerprint && *expected_fingerprint != ck.meta.graph_fingerprint) {
      throw CheckpointError(Kind::fingerprint_mismatch,
                            path.string() + ": graph fingerprint mismatch (checkpoint " +
                                io::hex64(ck.meta.graph_fingerprint) + ", dataset " +
                                io::hex64(*expected_fingerprint) + ")");
    }
    const auto vocab_size = j.at("vocab_size").get<std::size_t>();
    if (vocab_size != ck.vocab.size() || ck.vocab.entity_count() != ck.meta.entity_count) {
      throw CheckpointError(Kind::malformed, path.string() + ": vocabulary does not match metadata");
    }
    ck.params = init_model<float>(ck.meta.encoder, vocab_size, ck.meta.entity_count, 0);
    auto tensors = ck.params.tensors();
    if (j.at("tensor_count").get<std::size_t>() != tensors.size()) {
      throw CheckpointError(Kind::malformed, path.string() + ": unexpected tensor count");
    }
    for (auto& t : tensors) {
      const auto name = io::read_bytes(in, io::read_u32(in));
      const auto dtype = io::read_u8(in);
      const auto rank = io::read_u32(in);
      if (name != t.name || dtype != kDtypeF32 || rank != 2) {
        throw CheckpointError(Kind::malformed, path.string() + ": unexpected tensor record '" + name + "'");
      }
      const auto rows = io::read_u32(in);
      const auto cols = io::read_u32(in);
      if (rows != t.value->rows() || cols != t.value->cols()) {
        throw CheckpointError(Kind::malformed, path.string() + ": shape mismatch for " + name);
      }
      for (Eigen::Index i = 0; i < t.value->size(); ++i) t.value->data()[i] = io::read_f32(in);
    }
    if (in.peek() != std::char_traits<char>::eof()) {
      throw CheckpointError(Kind::malformed, path.string() + ": trailing bytes");
    }
    return ck;
  } catch (const io::Truncated&) {
    throw CheckpointError(Kind::truncated, path.string() + ": truncated checkpoint");
  }
}

}  // namespace kgc
