#pragma once
// Run configuration: an INI-style file whose sections mirror the module
// configs, overridden by command-line flags.
//
//   [data]     train, valid, test        (relative to the config file)
//   [run]      seed, out
//   [context]  include_incoming, leave_one_out, head_context_budget, relation_context_budget
//   [sequence] max_seq_len
//   [encoder]  layers, heads, model_dim, ff_dim, dropout
//   [train]    batch_size, learning_rate, max_epochs, clip_norm, target_loss,
//              early_stopping, context_mode
//   [eval]     filtered (true|false|both), rank_policy, hits (e.g. 1,3,10),
//              context_mode, include_validation_in_context, split

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "kgc/context.hpp"
#include "kgc/eval.hpp"
#include "kgc/model.hpp"
#include "kgc/sequence.hpp"
#include "kgc/train.hpp"

namespace kgc {

enum class ProtocolSelection { filtered, raw, both };

struct RunConfig {
  std::filesystem::path train_path, valid_path, test_path;
  std::filesystem::path out_dir = "kgc_out";
  std::optional<std::uint64_t> seed;

  ContextConfig context;
  SequenceConfig sequence;
  EncoderConfig encoder;
  TrainConfig train;
  EvalConfig eval;
  ProtocolSelection protocols = ProtocolSelection::filtered;
  Split eval_split = Split::test;
  // Stop when validation MRR spans < 1e-3 over the last 3 epochs.
  bool early_stopping = true;

  // Every given dataset path must exist. Commands that use randomness
  // require the seed.
  void validate(bool require_seed = true) const;
  // Copies the seed and max_seq_len into the module configs.
  void sync();
  nlohmann::json to_json() const;
};

// Parses the INI file; unknown sections or keys are errors.
RunConfig load_run_config(const std::filesystem::path& path);
void apply_ini_text(RunConfig& cfg, const std::string& text, const std::filesystem::path& base_dir);

bool parse_bool(const std::string& s);
ProtocolSelection parse_protocols(const std::string& s);
Split parse_split(const std::string& s);

}  // namespace kgc
