#pragma once
// Checkpoint file:
//   "MUCO" | u32 version | u32 metadata length | metadata JSON (UTF-8)
//   | tensor records: u32 name length, name, u8 dtype (1 = f32), u32 rank,
//     u32 dims[rank], little-endian f32 payload (row-major)
// All integers little-endian.

#include <cstdint>
#include <filesystem>
#include <optional>

#include <json.hpp>

#include "kgc/context.hpp"
#include "kgc/error.hpp"
#include "kgc/model.hpp"
#include "kgc/sequence.hpp"

namespace kgc {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public Error {
 public:
  enum class Kind { not_a_checkpoint, unsupported_version, truncated, fingerprint_mismatch, malformed };
  CheckpointError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct CheckpointMetadata {
  EncoderConfig encoder;
  SequenceConfig sequence;
  ContextConfig context;
  std::uint64_t graph_fingerprint = 0;
  std::size_t entity_count = 0;
  // Free-form config echo (train/eval settings).
  nlohmann::json extra = nlohmann::json::object();
};

struct Checkpoint {
  ModelParameters<float> params;
  TokenVocabulary vocab;
  CheckpointMetadata meta;
};

void save_checkpoint(const std::filesystem::path& path, const ModelParameters<float>& params,
                     const TokenVocabulary& vocab, const CheckpointMetadata& meta);

// With `expected_fingerprint`, a mismatch raises Kind::fingerprint_mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::uint64_t> expected_fingerprint = std::nullopt);

nlohmann::json to_json(const EncoderConfig& c);
nlohmann::json to_json(const ContextConfig& c);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);
ContextConfig context_config_from_json(const nlohmann::json& j);

}  // namespace kgc
