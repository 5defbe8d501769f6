// kgc: prepare, train, eval, predict and ablate from a config file plus flags.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kgc/commands.hpp"
#include "kgc/error.hpp"
#include "kgc/version.hpp"

namespace {

struct Flags {
  std::string config, out, train, valid, test, filtered, context_mode, split, checkpoint;
  std::string head, relation;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<double> lr, target_loss;
  long long top_k = 10;
};

kgc::RunConfig effective_config(const Flags& f) {
  kgc::RunConfig cfg = f.config.empty() ? kgc::RunConfig{} : kgc::load_run_config(f.config);
  if (!f.train.empty()) cfg.train_path = f.train;
  if (!f.valid.empty()) cfg.valid_path = f.valid;
  if (!f.test.empty()) cfg.test_path = f.test;
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (f.seed) cfg.seed = f.seed;
  if (!f.filtered.empty()) cfg.protocols = kgc::parse_protocols(f.filtered);
  if (!f.context_mode.empty()) {
    cfg.train.context_mode = cfg.eval.context_mode = kgc::parse_context_mode(f.context_mode);
  }
  if (!f.split.empty()) cfg.eval_split = kgc::parse_split(f.split);
  if (f.epochs) cfg.train.max_epochs = *f.epochs;
  if (f.batch_size) cfg.train.batch_size = *f.batch_size;
  if (f.lr) cfg.train.learning_rate = *f.lr;
  if (f.target_loss) cfg.train.target_loss = f.target_loss;
  cfg.sync();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-graph completion with head and relation context"};
  app.set_version_flag("--version", kgc::kToolkitVersion);
  app.require_subcommand(1);
  app.fallthrough();

  Flags f;
  app.add_option("--config", f.config, "INI config file");
  app.add_option("--seed", f.seed, "random seed");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--train", f.train, "training triples (TSV)");
  app.add_option("--valid", f.valid, "validation triples (TSV)");
  app.add_option("--test", f.test, "test triples (TSV)");
  app.add_option("--filtered", f.filtered, "true, false or both")->check(CLI::IsMember({"true", "false", "both"}));
  app.add_option("--context-mode", f.context_mode, "full, head_only or relation_only")
      ->check(CLI::IsMember({"full", "head_only", "relation_only"}));
  app.add_option("--epochs", f.epochs, "maximum training epochs");
  app.add_option("--batch-size", f.batch_size, "training batch size");
  app.add_option("--lr", f.lr, "learning rate");
  app.add_option("--target-loss", f.target_loss, "stop once the epoch loss is below this");

  auto* prepare = app.add_subcommand("prepare", "build the context cache, vocabulary and stats");
  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  auto* eval = app.add_subcommand("eval", "rank the tails of a split");
  auto* predict = app.add_subcommand("predict", "top-k tails for one (head, relation) query");
  auto* ablate = app.add_subcommand("ablate", "train and compare full, head_only and relation_only");

  for (auto* sub : {eval, predict}) {
    sub->add_option("--checkpoint", f.checkpoint, "model checkpoint (default OUT/model.ckpt)");
  }
  eval->add_option("--split", f.split, "train, valid or test")->check(CLI::IsMember({"train", "valid", "test"}));
  predict->add_option("--head", f.head, "head entity label")->required();
  predict->add_option("--relation", f.relation, "relation label")->required();
  predict->add_option("--top-k", f.top_k, "number of tails to print");

  CLI11_PARSE(app, argc, argv);

  const kgc::CommandStreams io{std::cout, std::cerr};
  try {
    const auto cfg = effective_config(f);
    const auto checkpoint = f.checkpoint.empty() ? cfg.out_dir / "model.ckpt" : std::filesystem::path(f.checkpoint);
    if (prepare->parsed()) return kgc::cmd_prepare(cfg, io);
    if (train->parsed()) return kgc::cmd_train(cfg, io);
    if (eval->parsed()) return kgc::cmd_eval(cfg, checkpoint, io);
    if (predict->parsed()) return kgc::cmd_predict(cfg, checkpoint, f.head, f.relation, f.top_k, io);
    if (ablate->parsed()) return kgc::cmd_ablate(cfg, io);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
