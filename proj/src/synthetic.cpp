#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include "kgc/error.hpp"
#include "kgc/kg.hpp"

namespace kgc {

namespace {

std::uint64_t triple_key(std::size_t h, std::size_t r, std::size_t t, std::size_t n_ent, std::size_t n_rel) {
  return (static_cast<std::uint64_t>(h) * n_rel + r) * n_ent + t;
}

}  // namespace

std::vector<Triple> generate_synthetic_kg(const SyntheticKgConfig& cfg) {
  const std::size_t E = cfg.entities, R = cfg.relations, T = cfg.triples;
  if (E < 2) throw Error("synthetic KG needs at least 2 entities");
  if (R < 1) throw Error("synthetic KG needs at least 1 relation");
  if (T < 1) throw Error("synthetic KG needs at least 1 triple");
  if (!(cfg.hub_fraction >= 0.0 && cfg.hub_fraction <= 1.0)) throw Error("hub_fraction must lie in [0, 1]");
  const double max_triples = static_cast<double>(E) * static_cast<double>(R) * static_cast<double>(E - 1);
  if (static_cast<double>(T) > max_triples) {
    throw Error("unsatisfiable synthetic KG: " + std::to_string(T) + " triples exceed the " +
                std::to_string(static_cast<std::uint64_t>(max_triples)) + " distinct loop-free triples");
  }
  if (static_cast<double>(E) * R * E > 1.8e19) throw Error("synthetic KG too large");

  std::mt19937_64 rng(cfg.seed);
  const std::size_t hubs =
      cfg.hub_fraction > 0.0 ? std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.hub_fraction * E)))
                             : 0;
  std::uniform_int_distribution<std::size_t> any_entity(0, E - 1);
  std::uniform_int_distribution<std::size_t> any_relation(0, R - 1);
  std::bernoulli_distribution pick_hub(0.5);

  auto draw_tail = [&](std::size_t head) {
    while (true) {
      std::size_t t;
      if (hubs > 0 && pick_hub(rng)) {
        t = std::uniform_int_distribution<std::size_t>(0, hubs - 1)(rng);
      } else {
        t = any_entity(rng);
      }
      if (t != head) return t;
    }
  };

  // Free (h, r) slots with O(1) removal.
  const std::size_t slots = E * R;
  const bool track_slots = slots <= (std::size_t{1} << 26);
  std::vector<std::uint64_t> free_slots;
  std::vector<std::uint64_t> slot_pos;
  if (track_slots) {
    free_slots.resize(slots);
    std::iota(free_slots.begin(), free_slots.end(), 0);
    slot_pos.resize(slots);
    std::iota(slot_pos.begin(), slot_pos.end(), 0);
  }
  auto take_slot = [&](std::uint64_t s) {
    const auto p = slot_pos[s];
    const auto last = free_slots.back();
    free_slots[p] = last;
    slot_pos[last] = p;
    free_slots.pop_back();
  };

  std::vector<Triple> out;
  out.reserve(T);
  std::unordered_set<std::uint64_t> present;
  present.reserve(T * 2);
  auto emit = [&](std::size_t h, std::size_t r, std::size_t t) {
    out.push_back({EntityId{static_cast<std::uint32_t>(h)}, RelationId{static_cast<std::uint32_t>(r)},
                   EntityId{static_cast<std::uint32_t>(t)}});
    present.insert(triple_key(h, r, t, E, R));
  };

  // Coverage: every entity heads one triple, in shuffled order.
  if (T >= E) {
    std::vector<std::size_t> order(E);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (auto h : order) {
      const auto r = any_relation(rng);
      if (track_slots) take_slot(h * R + r);
      emit(h, r, draw_tail(h));
    }
  }

  while (out.size() < T) {
    if (track_slots && !free_slots.empty()) {
      const auto s = free_slots[std::uniform_int_distribution<std::size_t>(0, free_slots.size() - 1)(rng)];
      take_slot(s);
      const auto h = s / R;
      emit(h, s % R, draw_tail(h));
      continue;
    }
    // Every (h, r) used: add extra tails to random pairs.
    const auto h = any_entity(rng);
    const auto r = any_relation(rng);
    std::size_t t = draw_tail(h);
    int attempts = 0;
    while (present.count(triple_key(h, r, t, E, R)) && attempts < 32) {
      t = draw_tail(h);
      ++attempts;
    }
    if (present.count(triple_key(h, r, t, E, R))) {
      // Dense regime: scan for any unused tail of this pair.
      bool found = false;
      for (std::size_t c = 0; c < E && !found; ++c) {
        if (c != h && !present.count(triple_key(h, r, c, E, R))) {
          t = c;
          found = true;
        }
      }
      if (!found) continue;
    }
    emit(h, r, t);
  }
  return out;
}

std::vector<RawTriple> label_triples(std::span<const Triple> triples) {
  std::vector<RawTriple> raw;
  raw.reserve(triples.size());
  for (const auto& t : triples) {
    raw.push_back({"e" + std::to_string(t.head.value), "r" + std::to_string(t.relation.value),
                   "e" + std::to_string(t.tail.value)});
  }
  return raw;
}

KnowledgeGraph synthetic_graph(const SyntheticKgConfig& config) {
  const auto triples = generate_synthetic_kg(config);
  const auto raw = label_triples(triples);
  return build_graph(raw);
}

}  // namespace kgc
