#include "kgc/kg.hpp"

#include <fstream>
#include <sstream>

#include "kgc/binary_io.hpp"
#include "kgc/error.hpp"

namespace kgc {

std::uint32_t LabelCatalog::intern(std::string_view label) {
  if (auto it = ids_.find(label); it != ids_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(labels_.size());
  labels_.emplace_back(label);
  ids_.emplace(labels_.back(), id);
  return id;
}

std::optional<std::uint32_t> LabelCatalog::find(std::string_view label) const {
  if (auto it = ids_.find(label); it != ids_.end()) return it->second;
  return std::nullopt;
}

const std::string& LabelCatalog::label(std::uint32_t id) const {
  if (id >= labels_.size()) throw Error("label id " + std::to_string(id) + " out of range");
  return labels_[id];
}

LabelCatalog LabelCatalog::from_labels(std::vector<std::string> labels) {
  LabelCatalog c;
  for (auto& l : labels) {
    if (c.find(l)) throw Error("duplicate label in catalog: " + l);
    c.intern(l);
  }
  return c;
}

template <class KeyFn>
KnowledgeGraph::Csr KnowledgeGraph::build_index(std::size_t keys, const std::vector<Triple>& triples,
                                                KeyFn key) {
  Csr csr;
  csr.offsets.assign(keys + 1, 0);
  for (const auto& t : triples) ++csr.offsets[key(t) + 1];
  for (std::size_t i = 0; i < keys; ++i) csr.offsets[i + 1] += csr.offsets[i];
  csr.items.resize(triples.size());
  std::vector<std::uint32_t> cursor(csr.offsets.begin(), csr.offsets.end() - 1);
  // Counting sort keeps positions ascending within each row.
  for (std::size_t i = 0; i < triples.size(); ++i) {
    csr.items[cursor[key(triples[i])]++] = static_cast<std::uint32_t>(i);
  }
  return csr;
}

KnowledgeGraph::KnowledgeGraph(LabelCatalog entities, LabelCatalog relations, std::vector<Triple> triples)
    : entities_(std::move(entities)), relations_(std::move(relations)), triples_(std::move(triples)) {
  if (triples_.size() > UINT32_MAX) throw Error("too many triples");
  for (std::size_t i = 0; i < triples_.size(); ++i) {
    const auto& t = triples_[i];
    if (!valid(t.head) || !valid(t.tail) || !valid(t.relation)) {
      throw Error("triple " + std::to_string(i) + " references an unknown id");
    }
  }
  by_head_ = build_index(entity_count(), triples_, [](const Triple& t) { return t.head.value; });
  by_relation_ = build_index(relation_count(), triples_, [](const Triple& t) { return t.relation.value; });
  by_tail_ = build_index(entity_count(), triples_, [](const Triple& t) { return t.tail.value; });

  io::Fnv1a h;
  h.update_u64(entities_.size());
  for (const auto& l : entities_.labels()) {
    h.update_u64(l.size());
    h.update(l);
  }
  h.update_u64(relations_.size());
  for (const auto& l : relations_.labels()) {
    h.update_u64(l.size());
    h.update(l);
  }
  h.update_u64(triples_.size());
  for (const auto& t : triples_) {
    h.update_u64((std::uint64_t{t.head.value} << 32) | t.tail.value);
    h.update_u64(t.relation.value);
  }
  fingerprint_ = h.digest();
}

std::span<const std::uint32_t> KnowledgeGraph::by_head(EntityId h) const {
  if (!valid(h)) throw Error("invalid entity id " + std::to_string(h.value));
  return by_head_.row(h.value);
}

std::span<const std::uint32_t> KnowledgeGraph::by_relation(RelationId r) const {
  if (!valid(r)) throw Error("invalid relation id " + std::to_string(r.value));
  return by_relation_.row(r.value);
}

std::span<const std::uint32_t> KnowledgeGraph::by_tail(EntityId t) const {
  if (!valid(t)) throw Error("invalid entity id " + std::to_string(t.value));
  return by_tail_.row(t.value);
}

std::optional<std::size_t> KnowledgeGraph::find(const Triple& t) const {
  if (!valid(t.head)) return std::nullopt;
  for (auto i : by_head(t.head)) {
    if (triples_[i] == t) return i;
  }
  return std::nullopt;
}

bool KnowledgeGraph::operator==(const KnowledgeGraph& other) const {
  return entities_ == other.entities_ && relations_ == other.relations_ && triples_ == other.triples_ &&
         by_head_.offsets == other.by_head_.offsets && by_head_.items == other.by_head_.items &&
         by_relation_.offsets == other.by_relation_.offsets && by_relation_.items == other.by_relation_.items &&
         by_tail_.offsets == other.by_tail_.offsets && by_tail_.items == other.by_tail_.items;
}

namespace {

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xe0) == 0xc0) {
      extra = 1;
      cp = c & 0x1f;
    } else if ((c & 0xf0) == 0xe0) {
      extra = 2;
      cp = c & 0x0f;
    } else if ((c & 0xf8) == 0xf0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xc0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3f);
    }
    // Overlong forms, surrogates, and out-of-range code points.
    static constexpr std::uint32_t min_cp[] = {0, 0x80, 0x800, 0x10000};
    if (cp < min_cp[extra] || cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) return false;
    i += extra + 1;
  }
  return true;
}

std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n\v\f";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<RawTriple> parse_triple_file(std::istream& in) {
  std::vector<RawTriple> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (!valid_utf8(line)) throw ParseError(line_no, "invalid UTF-8");
    std::vector<std::string_view> fields;
    std::string_view rest = line;
    while (true) {
      const auto tab = rest.find('\t');
      fields.push_back(trim(rest.substr(0, tab)));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    // Trailing tabs are tolerated as whitespace.
    while (fields.size() > 3 && fields.back().empty()) fields.pop_back();
    if (fields.size() != 3) {
      throw ParseError(line_no, "expected 3 fields, got " + std::to_string(fields.size()));
    }
    for (const auto& f : fields) {
      if (f.empty()) throw ParseError(line_no, "empty field");
    }
    out.push_back({std::string(fields[0]), std::string(fields[1]), std::string(fields[2])});
  }
  return out;
}

std::vector<RawTriple> parse_triple_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_triple_file(in);
}

std::vector<RawTriple> load_triple_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(path.string() + ": cannot open file");
  try {
    return parse_triple_file(in);
  } catch (const ParseError& e) {
    throw ParseError(0, path.string() + ": " + e.what());
  }
}

namespace {

std::vector<Triple> intern_all(std::span<const RawTriple> raw, LabelCatalog& entities, LabelCatalog& relations) {
  std::vector<Triple> out;
  out.reserve(raw.size());
  for (const auto& r : raw) {
    Triple t;
    t.head = EntityId{entities.intern(r.head)};
    t.relation = RelationId{relations.intern(r.relation)};
    t.tail = EntityId{entities.intern(r.tail)};
    out.push_back(t);
  }
  return out;
}

}  // namespace

KnowledgeGraph build_graph(std::span<const RawTriple> raw) {
  if (raw.empty()) throw Error("cannot build a graph from zero triples");
  LabelCatalog entities, relations;
  auto triples = intern_all(raw, entities, relations);
  return KnowledgeGraph(std::move(entities), std::move(relations), std::move(triples));
}

GraphStats graph_stats(const KnowledgeGraph& graph) {
  return {graph.entity_count(), graph.relation_count(), graph.triples().size()};
}

void write_triples_tsv(std::ostream& out, const KnowledgeGraph& graph) {
  for (const auto& t : graph.triples()) {
    out << graph.entities().label(t.head.value) << '\t' << graph.relations().label(t.relation.value) << '\t'
        << graph.entities().label(t.tail.value) << '\n';
  }
}

GraphStats Dataset::stats() const {
  return {train.entity_count(), train.relation_count(), train.triples().size()};
}

KnowledgeGraph Dataset::context_graph(bool include_validation) const {
  std::vector<Triple> triples(train.triples().begin(), train.triples().end());
  if (include_validation) triples.insert(triples.end(), valid.begin(), valid.end());
  return KnowledgeGraph(train.entities(), train.relations(), std::move(triples));
}

Dataset build_dataset(std::span<const RawTriple> train, std::span<const RawTriple> valid,
                      std::span<const RawTriple> test) {
  if (train.empty()) throw Error("training split is empty");
  LabelCatalog entities, relations;
  auto train_ids = intern_all(train, entities, relations);
  auto valid_ids = intern_all(valid, entities, relations);
  auto test_ids = intern_all(test, entities, relations);
  return Dataset{KnowledgeGraph(std::move(entities), std::move(relations), std::move(train_ids)),
                 std::move(valid_ids), std::move(test_ids)};
}

Dataset load_dataset(const std::filesystem::path& train, const std::filesystem::path& valid,
                     const std::filesystem::path& test) {
  auto load = [](const std::filesystem::path& p) {
    return p.empty() ? std::vector<RawTriple>{} : load_triple_file(p);
  };
  if (train.empty()) throw Error("a training split is required");
  const auto tr = load(train);
  const auto va = load(valid);
  const auto te = load(test);
  return build_dataset(tr, va, te);
}

}  // namespace kgc
