#pragma once
// The operator commands behind the kgc executable. Each returns a
// process exit code; data goes to `out`, diagnostics to `err`. Errors in
// inputs are reported by throwing.

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgc/run_config.hpp"

namespace kgc {

struct CommandStreams {
  std::ostream& out;
  std::ostream& err;
};

// Dataset plus the context table for the chosen context-source graph,
// read from the MCTX cache in the output directory when it is still valid.
struct PreparedData {
  Dataset data;
  KnowledgeGraph context_graph;
  ContextTable contexts;
  std::filesystem::path cache_path;
  bool cache_hit = false;
};

PreparedData prepare_data(const RunConfig& cfg, const ContextConfig& ctx, bool include_validation);

struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t graph_fingerprint = 0;
  std::string started_at;  // UTC, ISO 8601
  double seconds = 0.0;
  std::vector<std::filesystem::path> produced_files;
  nlohmann::json extra = nlohmann::json::object();
  nlohmann::json to_json() const;
};

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);

int cmd_prepare(const RunConfig& cfg, CommandStreams io);
int cmd_train(const RunConfig& cfg, CommandStreams io);
int cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint, CommandStreams io);
int cmd_predict(const RunConfig& cfg, const std::filesystem::path& checkpoint, const std::string& head,
                const std::string& relation, long long top_k, CommandStreams io);
int cmd_ablate(const RunConfig& cfg, CommandStreams io);

}  // namespace kgc
