#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "kgc/binary_io.hpp"
#include "kgc/checkpoint.hpp"
#include "support.hpp"

using namespace kgc;
using Kind = CheckpointError::Kind;

namespace {

struct Saved {
  KnowledgeGraph g = synthetic_graph({25, 3, 70, 0.1, 5});
  TokenVocabulary vocab = build_vocabulary(g);
  EncoderConfig enc = [] {
    EncoderConfig e;
    e.model_dim = 16;
    e.ff_dim = 24;
    e.heads = 2;
    e.max_seq_len = 40;
    e.dropout = 0.25;
    return e;
  }();
  ModelParameters<float> params = init_model(enc, vocab, g.entity_count(), 3);
  CheckpointMetadata meta;
  std::filesystem::path path = testing::scratch_dir("checkpoint") / "model.ckpt";

  Saved() {
    meta.encoder = enc;
    meta.sequence = SequenceConfig{40};
    meta.context.include_incoming = true;
    meta.context.head_context_budget = 9;
    meta.graph_fingerprint = g.fingerprint();
    meta.entity_count = g.entity_count();
    meta.extra = {{"note", "x"}};
    save_checkpoint(path, params, vocab, meta);
  }
};

Kind kind_of(const std::filesystem::path& path, std::optional<std::uint64_t> fp = std::nullopt) {
  try {
    load_checkpoint(path, fp);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  FAIL("expected a checkpoint error");
  return Kind::malformed;
}

}  // namespace

TEST_CASE("round trip is bit-exact") {
  const Saved s;
  const auto back = load_checkpoint(s.path, s.g.fingerprint());
  CHECK(back.vocab == s.vocab);
  CHECK(back.meta.encoder == s.enc);
  CHECK(back.meta.sequence.max_seq_len == 40);
  CHECK(back.meta.context.include_incoming);
  CHECK(back.meta.context.head_context_budget == 9);
  CHECK(back.meta.entity_count == 25);
  CHECK(back.meta.extra["note"] == "x");

  const auto a = s.params.tensors();
  const auto b = back.params.tensors();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    REQUIRE(a[i].value->size() == b[i].value->size());
    CHECK(std::memcmp(a[i].value->data(), b[i].value->data(), sizeof(float) * a[i].value->size()) == 0);
  }

  const auto table = precompute_all_contexts(s.g, {});
  std::vector<InputSequence> batch;
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& t = s.g.triple(i);
    batch.push_back(encode_query(t.head, t.relation, table.head(t.head), table.relation(t.relation), s.vocab,
                                 SequenceConfig{40}));
  }
  const auto x = forward(s.params, batch);
  const auto y = forward(back.params, batch);
  CHECK(std::memcmp(x.data(), y.data(), sizeof(float) * x.size()) == 0);
}

TEST_CASE("file starts with the magic and version") {
  const Saved s;
  const auto bytes = io::read_file(s.path);
  CHECK(bytes.substr(0, 4) == "MUCO");
  CHECK(static_cast<unsigned char>(bytes[4]) == kCheckpointVersion);
  CHECK(bytes[5] == 0);
}

TEST_CASE("distinct errors") {
  const Saved s;
  const auto bytes = io::read_file(s.path);
  const auto dir = s.path.parent_path();

  auto bad = bytes;
  bad[0] = 'X';
  io::write_file_atomic(dir / "magic.ckpt", bad);
  CHECK(kind_of(dir / "magic.ckpt") == Kind::not_a_checkpoint);
  try {
    load_checkpoint(dir / "magic.ckpt");
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).find("not a checkpoint") != std::string::npos);
  }

  bad = bytes;
  bad[4] = static_cast<char>(kCheckpointVersion + 1);
  io::write_file_atomic(dir / "version.ckpt", bad);
  CHECK(kind_of(dir / "version.ckpt") == Kind::unsupported_version);
  try {
    load_checkpoint(dir / "version.ckpt");
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).find("unsupported version") != std::string::npos);
  }

  for (std::size_t cut : {std::size_t{2}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    io::write_file_atomic(dir / "short.ckpt", bytes.substr(0, cut));
    CHECK(kind_of(dir / "short.ckpt") == (cut < 4 ? Kind::not_a_checkpoint : Kind::truncated));
  }

  CHECK(kind_of(s.path, s.g.fingerprint() ^ 1) == Kind::fingerprint_mismatch);

  io::write_file_atomic(dir / "long.ckpt", bytes + "z");
  CHECK(kind_of(dir / "long.ckpt") == Kind::malformed);
}

TEST_CASE("missing checkpoint file") { CHECK_THROWS(load_checkpoint("/nonexistent/model.ckpt")); }

TEST_CASE("config json round trip") {
  EncoderConfig e;
  e.layers = 3;
  e.dropout = 0.05;
  CHECK(encoder_config_from_json(to_json(e)) == e);
  ContextConfig c;
  c.relation_context_budget = 7;
  c.include_incoming = true;
  const auto back = context_config_from_json(to_json(c));
  CHECK(back.relation_context_budget == 7);
  CHECK(back.include_incoming);
}
