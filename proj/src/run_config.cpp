#include "kgc/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "kgc/checkpoint.hpp"
#include "kgc/error.hpp"

namespace kgc {

namespace fs = std::filesystem;

bool parse_bool(const std::string& s) {
  std::string v = s;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error("expected a boolean, got '" + s + "'");
}

ProtocolSelection parse_protocols(const std::string& s) {
  if (s == "both") return ProtocolSelection::both;
  return parse_bool(s) ? ProtocolSelection::filtered : ProtocolSelection::raw;
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "valid") return Split::valid;
  if (s == "test") return Split::test;
  throw Error("unknown split '" + s + "'");
}

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& s) {
  T v{};
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || p != end) throw Error("bad value for " + key + ": '" + s + "'");
  return v;
}

std::vector<std::size_t> parse_ks(const std::string& key, const std::string& s) {
  std::vector<std::size_t> ks;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) ks.push_back(parse_number<std::size_t>(key, item));
  }
  return ks;
}

fs::path resolve(const fs::path& base, const std::string& v) {
  fs::path p(v);
  return p.is_relative() && !base.empty() ? base / p : p;
}

void set_key(RunConfig& c, const std::string& section, const std::string& key, const std::string& v,
             const fs::path& base) {
  const std::string full = section + "." + key;
  auto num = [&]<class T>(T& dst) { dst = parse_number<T>(full, v); };
  if (section == "data") {
    if (key == "train") return void(c.train_path = resolve(base, v));
    if (key == "valid") return void(c.valid_path = resolve(base, v));
    if (key == "test") return void(c.test_path = resolve(base, v));
  } else if (section == "run") {
    if (key == "seed") return void(c.seed = parse_number<std::uint64_t>(full, v));
    if (key == "out") return void(c.out_dir = resolve(base, v));
  } else if (section == "context") {
    if (key == "include_incoming") return void(c.context.include_incoming = parse_bool(v));
    if (key == "leave_one_out") return void(c.context.leave_one_out = parse_bool(v));
    if (key == "head_context_budget") return num(c.context.head_context_budget);
    if (key == "relation_context_budget") return num(c.context.relation_context_budget);
  } else if (section == "sequence") {
    if (key == "max_seq_len") return num(c.sequence.max_seq_len);
  } else if (section == "encoder") {
    if (key == "layers") return num(c.encoder.layers);
    if (key == "heads") return num(c.encoder.heads);
    if (key == "model_dim") return num(c.encoder.model_dim);
    if (key == "ff_dim") return num(c.encoder.ff_dim);
    if (key == "dropout") return num(c.encoder.dropout);
  } else if (section == "train") {
    if (key == "batch_size") return num(c.train.batch_size);
    if (key == "learning_rate") return num(c.train.learning_rate);
    if (key == "max_epochs") return num(c.train.max_epochs);
    if (key == "clip_norm") return num(c.train.clip_norm);
    if (key == "target_loss") return void(c.train.target_loss = parse_number<double>(full, v));
    if (key == "early_stopping") return void(c.early_stopping = parse_bool(v));
    if (key == "context_mode") return void(c.train.context_mode = parse_context_mode(v));
  } else if (section == "eval") {
    if (key == "filtered") return void(c.protocols = parse_protocols(v));
    if (key == "rank_policy") return void(c.eval.rank_policy = parse_rank_policy(v));
    if (key == "hits") return void(c.eval.hits_ks = parse_ks(full, v));
    if (key == "context_mode") return void(c.eval.context_mode = parse_context_mode(v));
    if (key == "include_validation_in_context") return void(c.eval.include_validation_in_context = parse_bool(v));
    if (key == "split") return void(c.eval_split = parse_split(v));
  } else {
    throw Error("unknown config section [" + section + "]");
  }
  throw Error("unknown config key " + full);
}

}  // namespace

void apply_ini_text(RunConfig& cfg, const std::string& text, const fs::path& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.line(), e.message());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw Error("config key '" + section + "' must be inside a [section]");
    for (const auto& [key, value] : body) set_key(cfg, section, key, value.data(), base_dir);
  }
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig cfg;
  try {
    apply_ini_text(cfg, buf.str(), path.parent_path());
  } catch (const std::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return cfg;
}

void RunConfig::sync() {
  if (seed) train.seed = *seed;
  encoder.max_seq_len = sequence.max_seq_len;
  train.leave_one_out = context.leave_one_out;
}

void RunConfig::validate(bool require_seed) const {
  if (require_seed && !seed) throw Error("a seed is required (--seed N or [run] seed)");
  if (train_path.empty()) throw Error("no training file given (--train PATH or [data] train)");
  for (const auto* p : {&train_path, &valid_path, &test_path}) {
    if (!p->empty() && !fs::is_regular_file(*p)) throw Error("file not found: " + p->string());
  }
  sequence.validate();
  encoder.validate();
  eval.validate();
}

nlohmann::json RunConfig::to_json() const {
  auto path_or_null = [](const fs::path& p) -> nlohmann::json {
    if (p.empty()) return nullptr;
    return p.string();
  };
  nlohmann::json t = {{"batch_size", train.batch_size},
                      {"learning_rate", train.learning_rate},
                      {"beta1", train.beta1},
                      {"beta2", train.beta2},
                      {"epsilon", train.epsilon},
                      {"max_epochs", train.max_epochs},
                      {"seed", train.seed},
                      {"leave_one_out", train.leave_one_out},
                      {"clip_norm", train.clip_norm},
                      {"context_mode", std::string(to_string(train.context_mode))},
                      {"early_stopping", early_stopping}};
  t["target_loss"] = train.target_loss ? nlohmann::json(*train.target_loss) : nlohmann::json(nullptr);
  const char* protocol = protocols == ProtocolSelection::both    ? "both"
                         : protocols == ProtocolSelection::raw ? "raw"
                                                               : "filtered";
  return {{"data", {{"train", path_or_null(train_path)}, {"valid", path_or_null(valid_path)},
                    {"test", path_or_null(test_path)}}},
          {"out", out_dir.string()},
          {"seed", seed ? nlohmann::json(*seed) : nlohmann::json(nullptr)},
          {"context", kgc::to_json(context)},
          {"sequence", {{"max_seq_len", sequence.max_seq_len}}},
          {"encoder", kgc::to_json(encoder)},
          {"train", t},
          {"eval", {{"protocols", protocol},
                    {"rank_policy", std::string(to_string(eval.rank_policy))},
                    {"hits_ks", eval.hits_ks},
                    {"context_mode", std::string(to_string(eval.context_mode))},
                    {"include_validation_in_context", eval.include_validation_in_context},
                    {"split", std::string(to_string(eval_split))}}}};
}

}  // namespace kgc
