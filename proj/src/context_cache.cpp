#include <algorithm>
#include <fstream>
#include <sstream>

#include "kgc/binary_io.hpp"
#include "kgc/context.hpp"
#include "kgc/error.hpp"

namespace kgc {

namespace {

constexpr char kMagic[4] = {'M', 'C', 'T', 'X'};

template <class Id>
void write_ids(std::ostream& out, const std::vector<Id>& ids) {
  io::write_u32(out, static_cast<std::uint32_t>(ids.size()));
  for (const auto& id : ids) io::write_u32(out, id.value);
}

template <class Id>
std::vector<Id> read_ids(std::istream& in, std::uint32_t bound) {
  const auto n = io::read_u32(in);
  std::vector<Id> ids;
  ids.reserve(std::min<std::uint32_t>(n, 1u << 20));
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto v = io::read_u32(in);
    if (v >= bound) throw Error("context cache: id out of range");
    ids.push_back(Id{v});
  }
  return ids;
}

}  // namespace

void save_context_cache(const ContextTable& table, const std::filesystem::path& path) {
  std::ostringstream out(std::ios::binary);
  io::write_bytes(out, {kMagic, 4});
  io::write_u32(out, kContextCacheVersion);
  io::write_u64(out, table.source_fingerprint());
  const auto& cfg = table.config();
  io::write_u8(out, cfg.include_incoming ? 1 : 0);
  io::write_u64(out, cfg.head_context_budget);
  io::write_u64(out, cfg.relation_context_budget);
  io::write_u32(out, static_cast<std::uint32_t>(table.entity_count()));
  io::write_u32(out, static_cast<std::uint32_t>(table.relation_count()));
  for (std::uint32_t e = 0; e < table.entity_count(); ++e) {
    const auto& hc = table.head(EntityId{e});
    write_ids(out, hc.relations);
    write_ids(out, hc.entities);
  }
  for (std::uint32_t r = 0; r < table.relation_count(); ++r) {
    write_ids(out, table.relation(RelationId{r}).entities);
  }
  io::write_file_atomic(path, out.str());
}

ContextTable load_context_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(path.string() + ": cannot open context cache");
  try {
    if (io::read_bytes(in, 4) != std::string_view(kMagic, 4)) throw Error("not a context cache");
    const auto version = io::read_u32(in);
    if (version != kContextCacheVersion) {
      throw Error("unsupported context cache version " + std::to_string(version));
    }
    const auto fingerprint = io::read_u64(in);
    ContextConfig cfg;
    cfg.include_incoming = io::read_u8(in) != 0;
    cfg.head_context_budget = io::read_u64(in);
    cfg.relation_context_budget = io::read_u64(in);
    const auto n_ent = io::read_u32(in);
    const auto n_rel = io::read_u32(in);
    std::vector<HeadContext> heads(n_ent);
    for (auto& hc : heads) {
      hc.relations = read_ids<RelationId>(in, n_rel);
      hc.entities = read_ids<EntityId>(in, n_ent);
    }
    std::vector<RelationContext> rels(n_rel);
    for (auto& rc : rels) rc.entities = read_ids<EntityId>(in, n_ent);
    return ContextTable(cfg, fingerprint, std::move(heads), std::move(rels));
  } catch (const io::Truncated&) {
    throw Error(path.string() + ": truncated context cache");
  }
}

std::optional<ContextTable> load_context_cache_if_valid(const std::filesystem::path& path,
                                                        std::uint64_t expected_fingerprint,
                                                        const ContextConfig& cfg) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  auto table = load_context_cache(path);
  const auto& c = table.config();
  if (table.source_fingerprint() != expected_fingerprint || c.include_incoming != cfg.include_incoming ||
      c.head_context_budget != cfg.head_context_budget || c.relation_context_budget != cfg.relation_context_budget) {
    return std::nullopt;
  }
  // leave_one_out is a query-time flag and is not part of the table.
  return table;
}

}  // namespace kgc
