#include "kgc/eval.hpp"

namespace kgc {

AblationResult ablation_run(const Dataset& data, const ContextConfig& ctx, const EncoderConfig& enc,
                            const TrainConfig& tc, const EvalConfig& cfg) {
  const auto& train_graph = data.train;
  const auto train_table = precompute_all_contexts(train_graph, ctx);
  const auto vocab = build_vocabulary(train_graph);
  const SequenceConfig seq{enc.max_seq_len};

  std::optional<ContextTable> eval_table;
  if (cfg.include_validation_in_context) {
    eval_table = precompute_all_contexts(data.context_graph(true), ctx);
  }
  const ContextTable& eval_contexts = eval_table ? *eval_table : train_table;

  AblationResult result;
  result.seed = tc.seed;
  for (auto mode : {ContextMode::full, ContextMode::head_only, ContextMode::relation_only}) {
    TrainConfig mode_tc = tc;
    mode_tc.context_mode = mode;
    auto trained = train(train_graph, train_table, vocab, enc, mode_tc);

    EvalConfig mode_cfg = cfg;
    mode_cfg.context_mode = mode;
    AblationEntry entry;
    entry.mode = mode;
    entry.log = std::move(trained.log);
    entry.train_report = evaluate_model(trained.params, data, eval_contexts, vocab, seq, mode_cfg, Split::train);
    if (!data.test.empty()) {
      entry.test_report = evaluate_model(trained.params, data, eval_contexts, vocab, seq, mode_cfg, Split::test);
    }
    result.entries.push_back(std::move(entry));
  }
  return result;
}

void write_ablation_tsv(std::ostream& out, const AblationResult& result) {
  out << tsv_header() << '\n';
  for (const auto& e : result.entries) {
    const std::string label(to_string(e.mode));
    out << tsv_row(label, e.train_report) << '\n';
    if (e.test_report) out << tsv_row(label, *e.test_report) << '\n';
  }
}

}  // namespace kgc
