#include "kgc/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <limits>
#include <numeric>
#include <sstream>

#include "kgc/binary_io.hpp"
#include "kgc/checkpoint.hpp"
#include "kgc/error.hpp"
#include "kgc/version.hpp"

namespace kgc {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path cache_file(const RunConfig& cfg, bool include_validation) {
  return cfg.out_dir / (include_validation ? "contexts_train_valid.mctx" : "contexts_train.mctx");
}

void write_text(const fs::path& path, const std::string& text, std::vector<fs::path>& produced) {
  io::write_file_atomic(path, text);
  produced.push_back(path);
}

RunManifest start_manifest(const std::string& command, const RunConfig& cfg) {
  RunManifest m;
  m.command = command;
  m.config = cfg.to_json();
  m.started_at = utc_now();
  return m;
}

std::string vocabulary_tsv(const TokenVocabulary& vocab) {
  std::ostringstream out;
  out << "token_id\tlabel\n";
  for (TokenId t = 0; t < vocab.size(); ++t) out << t << '\t' << vocab.label(t) << '\n';
  return out.str();
}

std::string stats_line(const GraphStats& s) {
  return "entities=" + std::to_string(s.entity_count) + " relations=" + std::to_string(s.relation_count) +
         " triples=" + std::to_string(s.triple_count);
}

std::vector<bool> protocol_list(ProtocolSelection p) {
  switch (p) {
    case ProtocolSelection::filtered: return {true};
    case ProtocolSelection::raw: return {false};
    case ProtocolSelection::both: return {true, false};
  }
  return {true};
}

CheckpointMetadata metadata_for(const RunConfig& cfg, const Dataset& data) {
  CheckpointMetadata meta;
  meta.encoder = cfg.encoder;
  meta.sequence = cfg.sequence;
  meta.context = cfg.context;
  meta.graph_fingerprint = data.fingerprint();
  meta.entity_count = data.train.entity_count();
  meta.extra = {{"train", cfg.to_json()["train"]},
                {"context_mode", std::string(to_string(cfg.train.context_mode))},
                {"toolkit_version", kToolkitVersion}};
  return meta;
}

Checkpoint load_matching_checkpoint(const fs::path& path, const Dataset& data) {
  if (path.empty()) throw Error("no checkpoint given (--checkpoint PATH)");
  if (!fs::is_regular_file(path)) throw Error("file not found: " + path.string());
  auto ckpt = load_checkpoint(path, data.fingerprint());
  if (ckpt.meta.entity_count != data.train.entity_count()) {
    throw CheckpointError(CheckpointError::Kind::fingerprint_mismatch,
                          "checkpoint entity count does not match the dataset");
  }
  return ckpt;
}

// Validation MRR has spread below 1e-3 over the last three epochs.
bool stabilized(const std::vector<double>& mrr) {
  if (mrr.size() < 3) return false;
  const auto [lo, hi] = std::minmax_element(mrr.end() - 3, mrr.end());
  return *hi - *lo < 1e-3;
}

}  // namespace

PreparedData prepare_data(const RunConfig& cfg, const ContextConfig& ctx, bool include_validation) {
  auto data = load_dataset(cfg.train_path, cfg.valid_path, cfg.test_path);
  auto graph = data.context_graph(include_validation);
  const auto path = cache_file(cfg, include_validation);
  ContextTable table;
  bool hit = false;
  if (auto cached = load_context_cache_if_valid(path, graph.fingerprint(), ctx)) {
    table = std::move(*cached);
    hit = true;
  } else {
    table = precompute_all_contexts(graph, ctx);
    save_context_cache(table, path);
  }
  return PreparedData{std::move(data), std::move(graph), std::move(table), path, hit};
}

nlohmann::json RunManifest::to_json() const {
  std::vector<std::string> files;
  for (const auto& f : produced_files) files.push_back(f.string());
  return {{"command", command},
          {"toolkit_version", kToolkitVersion},
          {"graph_fingerprint", io::hex64(graph_fingerprint)},
          {"config", config},
          {"started_at", started_at},
          {"seconds", seconds},
          {"produced_files", files},
          {"extra", extra}};
}

void write_manifest(const fs::path& path, const RunManifest& manifest) {
  io::write_file_atomic(path, manifest.to_json().dump(2) + "\n");
}

int cmd_prepare(const RunConfig& cfg, CommandStreams io) {
  const auto start = Clock::now();
  auto m = start_manifest("prepare", cfg);
  cfg.validate();
  auto prep = prepare_data(cfg, cfg.context, false);
  const auto& data = prep.data;
  const auto stats = data.stats();
  io.out << stats_line(stats) << '\n';
  io.out << (prep.cache_hit ? "cache hit: " : "cache written: ") << prep.cache_path.string() << '\n';
  m.produced_files.push_back(prep.cache_path);
  if (cfg.eval.include_validation_in_context) {
    auto with_valid = prepare_data(cfg, cfg.context, true);
    io.out << (with_valid.cache_hit ? "cache hit: " : "cache written: ") << with_valid.cache_path.string() << '\n';
    m.produced_files.push_back(with_valid.cache_path);
  }

  write_text(cfg.out_dir / "vocab.tsv", vocabulary_tsv(build_vocabulary(data.train)), m.produced_files);
  const nlohmann::json stats_json = {{"entities", stats.entity_count},
                                     {"relations", stats.relation_count},
                                     {"train_triples", stats.triple_count},
                                     {"valid_triples", data.valid.size()},
                                     {"test_triples", data.test.size()}};
  write_text(cfg.out_dir / "stats.json", stats_json.dump(2) + "\n", m.produced_files);

  m.graph_fingerprint = data.fingerprint();
  m.extra = {{"cache_hit", prep.cache_hit}};
  m.seconds = since(start);
  write_manifest(cfg.out_dir / "manifest_prepare.json", m);
  return 0;
}

int cmd_train(const RunConfig& cfg, CommandStreams io) {
  const auto start = Clock::now();
  auto m = start_manifest("train", cfg);
  cfg.validate();
  cfg.train.validate();
  auto prep = prepare_data(cfg, cfg.context, false);
  const auto& data = prep.data;
  const auto vocab = build_vocabulary(data.train);
  io.err << stats_line(data.stats()) << (prep.cache_hit ? " (cache hit)" : "") << '\n';

  const bool use_valid = cfg.early_stopping && !data.valid.empty();
  const auto known = known_tails(data);
  const auto coverage = Coverage::of(data.train);
  EvalConfig valid_cfg = cfg.eval;
  valid_cfg.filtered = true;
  valid_cfg.context_mode = cfg.train.context_mode;
  std::vector<double> valid_mrr;
  std::optional<std::size_t> stopped_at;

  auto on_epoch = [&](EpochRecord& rec, const ModelParameters<float>& params) {
    if (use_valid) {
      const ModelScorer scorer(params, data.train, prep.contexts, vocab, cfg.sequence, cfg.train.context_mode);
      rec.valid_mrr = evaluate(scorer, data.valid, known, coverage, valid_cfg, "valid").overall.mrr;
      valid_mrr.push_back(*rec.valid_mrr);
    }
    io.err << "epoch " << rec.epoch << " loss " << fmt("%.6f", rec.mean_loss);
    if (rec.valid_mrr) io.err << " valid_mrr " << fmt("%.6f", *rec.valid_mrr);
    io.err << '\n';
    if (use_valid && stabilized(valid_mrr)) {
      stopped_at = rec.epoch;
      return true;
    }
    return false;
  };

  auto result = train(data.train, prep.contexts, vocab, cfg.encoder, cfg.train, on_epoch);
  if (stopped_at) {
    result.log.notes.push_back("early stop at epoch " + std::to_string(*stopped_at) +
                               ": validation MRR changed < 1e-3 over 3 epochs");
  }

  m.produced_files.push_back(prep.cache_path);
  const auto ckpt_path = cfg.out_dir / "model.ckpt";
  save_checkpoint(ckpt_path, result.params, vocab, metadata_for(cfg, data));
  m.produced_files.push_back(ckpt_path);
  std::ostringstream log;
  write_train_log(log, result.log);
  write_text(cfg.out_dir / "train_log.tsv", log.str(), m.produced_files);

  const auto& last = result.log.epochs.back();
  io.out << "epochs=" << last.epoch << " final_loss=" << fmt("%.6f", last.mean_loss) << " checkpoint=" << ckpt_path.string()
         << '\n';
  m.graph_fingerprint = data.fingerprint();
  m.extra = {{"epochs", last.epoch},
             {"final_loss", last.mean_loss},
             {"optimizer_steps", result.log.optimizer_steps},
             {"early_stopped", stopped_at.has_value()}};
  m.seconds = since(start);
  write_manifest(cfg.out_dir / "manifest_train.json", m);
  return 0;
}

int cmd_eval(const RunConfig& cfg, const fs::path& checkpoint, CommandStreams io) {
  const auto start = Clock::now();
  auto m = start_manifest("eval", cfg);
  cfg.validate(false);
  // Contexts must be built the way the model was trained.
  auto data = load_dataset(cfg.train_path, cfg.valid_path, cfg.test_path);
  auto ckpt = load_matching_checkpoint(checkpoint, data);
  if (ckpt.meta.extra.contains("context_mode") &&
      ckpt.meta.extra["context_mode"].get<std::string>() != to_string(cfg.eval.context_mode)) {
    io.err << "warning: model was trained with context mode " << ckpt.meta.extra["context_mode"].get<std::string>()
           << ", evaluating with " << to_string(cfg.eval.context_mode) << '\n';
  }
  auto prep = prepare_data(cfg, ckpt.meta.context, cfg.eval.include_validation_in_context);
  m.produced_files.push_back(prep.cache_path);
  if (split_triples(prep.data, cfg.eval_split).empty()) {
    throw Error("the " + std::string(to_string(cfg.eval_split)) + " split is empty");
  }

  std::string tsv = tsv_header() + "\n";
  for (bool filtered : protocol_list(cfg.protocols)) {
    EvalConfig ec = cfg.eval;
    ec.filtered = filtered;
    const auto report = evaluate_model(ckpt.params, prep.data, prep.contexts, ckpt.vocab, ckpt.meta.sequence, ec,
                                       cfg.eval_split);
    const auto json = to_json(report);
    const std::string protocol = filtered ? "filtered" : "raw";
    io.out << json.dump() << '\n';
    write_text(cfg.out_dir / ("eval_" + report.split + "_" + protocol + ".json"), json.dump(2) + "\n",
               m.produced_files);
    tsv += tsv_row("model", report) + "\n";
  }
  write_text(cfg.out_dir / ("eval_" + std::string(to_string(cfg.eval_split)) + ".tsv"), tsv, m.produced_files);

  m.graph_fingerprint = prep.data.fingerprint();
  m.extra = {{"checkpoint", checkpoint.string()}};
  m.seconds = since(start);
  write_manifest(cfg.out_dir / "manifest_eval.json", m);
  return 0;
}

int cmd_predict(const RunConfig& cfg, const fs::path& checkpoint, const std::string& head,
                const std::string& relation, long long top_k, CommandStreams io) {
  if (top_k < 1) throw Error("top_k must be at least 1");
  cfg.validate(false);
  auto data = load_dataset(cfg.train_path, cfg.valid_path, cfg.test_path);
  auto ckpt = load_matching_checkpoint(checkpoint, data);
  auto prep = prepare_data(cfg, ckpt.meta.context, cfg.eval.include_validation_in_context);
  const auto& graph = prep.context_graph;

  const auto coverage = Coverage::of(graph);
  const auto h = graph.entities().find(head);
  const auto r = graph.relations().find(relation);
  if (!h || !coverage.entity[*h]) io.err << "warning: unknown head '" << head << "', querying with [UNK]\n";
  if (!r || !coverage.relation[*r]) {
    io.err << "warning: unknown relation '" << relation << "', querying with [UNK]\n";
  }
  const EntityId hid{h ? *h : std::numeric_limits<std::uint32_t>::max()};
  const RelationId rid{r ? *r : std::numeric_limits<std::uint32_t>::max()};

  const ModelScorer scorer(ckpt.params, graph, prep.contexts, ckpt.vocab, ckpt.meta.sequence, cfg.eval.context_mode);
  const auto dist = predict(ckpt.params, scorer.sequence_for(hid, rid));

  const std::size_t n = dist.probs.size();
  std::size_t k = static_cast<std::size_t>(top_k);
  if (k > n) {
    io.err << "warning: top_k " << top_k << " exceeds the " << n << " entities; showing all\n";
    k = n;
  }
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return dist.probs[a] > dist.probs[b]; });
  for (std::size_t i = 0; i < k; ++i) {
    io.out << (i + 1) << '\t' << graph.entities().label(order[i]) << '\t' << fmt("%.6f", dist.probs[order[i]])
           << '\n';
  }
  return 0;
}

int cmd_ablate(const RunConfig& cfg, CommandStreams io) {
  const auto start = Clock::now();
  auto m = start_manifest("ablate", cfg);
  cfg.validate();
  cfg.train.validate();
  const auto data = load_dataset(cfg.train_path, cfg.valid_path, cfg.test_path);
  EvalConfig ec = cfg.eval;
  ec.filtered = cfg.protocols != ProtocolSelection::raw;
  const auto result = ablation_run(data, cfg.context, cfg.encoder, cfg.train, ec);

  const auto dir = cfg.out_dir / "ablation";
  for (const auto& e : result.entries) {
    const std::string mode(to_string(e.mode));
    const auto mode_dir = dir / mode;
    RunManifest mm = start_manifest("ablate", cfg);
    mm.config["train"]["context_mode"] = mode;
    mm.config["eval"]["context_mode"] = mode;
    std::ostringstream log;
    write_train_log(log, e.log);
    write_text(mode_dir / "train_log.tsv", log.str(), mm.produced_files);
    write_text(mode_dir / "report_train.json", to_json(e.train_report).dump(2) + "\n", mm.produced_files);
    if (e.test_report) {
      write_text(mode_dir / "report_test.json", to_json(*e.test_report).dump(2) + "\n", mm.produced_files);
    }
    mm.graph_fingerprint = data.fingerprint();
    mm.extra = {{"seed", result.seed}, {"context_mode", mode}, {"epochs", e.log.epochs.size()}};
    mm.seconds = e.log.wall_seconds;
    const auto manifest_path = mode_dir / "manifest.json";
    write_manifest(manifest_path, mm);
    m.produced_files.insert(m.produced_files.end(), mm.produced_files.begin(), mm.produced_files.end());
    m.produced_files.push_back(manifest_path);
  }

  std::ostringstream table;
  write_ablation_tsv(table, result);
  write_text(dir / "comparison.tsv", table.str(), m.produced_files);
  io.out << table.str();

  m.graph_fingerprint = data.fingerprint();
  m.extra = {{"seed", result.seed}};
  m.seconds = since(start);
  write_manifest(cfg.out_dir / "manifest_ablate.json", m);
  return 0;
}

}  // namespace kgc
