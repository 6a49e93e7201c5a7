#include "lesc/synthetic.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <random>

#include "lesc/error.hpp"

namespace lesc {

namespace {

std::size_t pick_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Uniform member of `cluster` with probability p_in, otherwise any index.
std::size_t pick_clustered(std::mt19937_64& rng, std::size_t n, std::size_t clusters, std::size_t cluster,
                           double p_in) {
  if (std::bernoulli_distribution(p_in)(rng)) {
    const std::size_t members = (n - cluster + clusters - 1) / clusters;
    if (members > 0) return cluster + clusters * pick_index(rng, members);
  }
  return pick_index(rng, n);
}

}  // namespace

KnowledgeGraph make_clustered_kg(const ClusteredKgConfig& cfg) {
  if (cfg.entities < 2 || cfg.relations == 0 || cfg.clusters == 0 || cfg.clusters > cfg.entities) {
    throw Error("clustered kg: invalid sizes");
  }
  std::mt19937_64 rng(cfg.seed);
  struct Pair {
    std::size_t head_cluster;
    std::size_t tail_cluster;
  };
  std::vector<std::vector<Pair>> schema(cfg.relations);
  for (std::size_t r = 0; r < cfg.relations; ++r) {
    for (std::size_t p = 0; p < cfg.pairs_per_relation; ++p) {
      schema[r].push_back({(r * cfg.pairs_per_relation + p) % cfg.clusters, pick_index(rng, cfg.clusters)});
    }
  }

  const std::size_t capacity_guess = cfg.relations * cfg.pairs_per_relation *
                                     (cfg.entities / cfg.clusters) * (cfg.entities / cfg.clusters);
  if (cfg.triples > capacity_guess / 2) throw Error("clustered kg: requested triple count too dense");

  KnowledgeGraph::Builder builder;
  std::size_t attempts = 0;
  while (builder.triple_count() < cfg.triples) {
    if (++attempts > cfg.triples * 100) throw Error("clustered kg: could not reach triple count");
    const std::size_t r = pick_index(rng, cfg.relations);
    const Pair& pair = schema[r][pick_index(rng, schema[r].size())];
    const std::size_t h = pick_clustered(rng, cfg.entities, cfg.clusters, pair.head_cluster, 1.0);
    const std::size_t t = pick_clustered(rng, cfg.entities, cfg.clusters, pair.tail_cluster, 1.0);
    if (h == t) continue;
    builder.add("e" + std::to_string(h), "r" + std::to_string(r), "e" + std::to_string(t));
  }
  return std::move(builder).build();
}

SyntheticKg make_food_kg(const FoodKgConfig& cfg) {
  if (cfg.foods == 0 || cfg.ingredients < 2 || cfg.effects == 0 || cfg.clusters == 0) {
    throw Error("food kg: invalid sizes");
  }
  if (cfg.safe_relations.empty()) throw Error("food kg: need at least one safe relation");
  std::mt19937_64 rng(cfg.seed);

  enum class Kind { kContain, kSafe, kUnsafe, kSystem };
  const std::size_t n_safe = cfg.safe_relations.size();
  const std::size_t system_rel = 1 + n_safe + cfg.unsafe_relations.size();
  const std::size_t n_rel = system_rel + (cfg.systems > 0 ? 1 : 0);
  auto kind_of = [&](std::size_t r) {
    if (r == 0) return Kind::kContain;
    if (r == system_rel) return Kind::kSystem;
    return r <= n_safe ? Kind::kSafe : Kind::kUnsafe;
  };
  auto closure_prob = [&](std::size_t r) {
    switch (kind_of(r)) {
      case Kind::kContain:
        return cfg.contain_closure;
      case Kind::kSafe:
        return cfg.safe_closure;
      case Kind::kUnsafe:
        return cfg.unsafe_closure;
      case Kind::kSystem:
        return 0.0;
    }
    return 0.0;
  };

  // Node numbering: foods, ingredients, effects, systems.
  const std::size_t ing0 = cfg.foods;
  const std::size_t eff0 = cfg.foods + cfg.ingredients;
  const std::size_t sys0 = eff0 + cfg.effects;
  const std::size_t n_nodes = sys0 + cfg.systems;
  // Per-node outgoing edges as (relation, tail) in insertion order.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> out(n_nodes);
  std::vector<std::array<std::size_t, 3>> order;
  std::map<std::array<std::size_t, 3>, bool> seen;
  auto add_edge = [&](std::size_t h, std::size_t r, std::size_t t) {
    if (h == t) return false;
    std::array<std::size_t, 3> key{h, r, t};
    if (!seen.emplace(key, true).second) return false;
    out[h].emplace_back(r, t);
    order.push_back(key);
    return true;
  };
  auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  for (std::size_t f = 0; f < cfg.foods; ++f) {
    const int count = uniform_int(cfg.min_ingredients_per_food, cfg.max_ingredients_per_food);
    for (int k = 0; k < count; ++k) {
      const std::size_t i = pick_clustered(rng, cfg.ingredients, cfg.clusters, f % cfg.clusters, cfg.in_cluster_prob);
      add_edge(f, 0, ing0 + i);
    }
  }
  std::bernoulli_distribution unsafe_coin(cfg.unsafe_relations.empty() ? 0.0 : cfg.unsafe_share);
  for (std::size_t i = 0; i < cfg.ingredients; ++i) {
    // Sub-ingredients only point to higher indices, keeping containment acyclic.
    if (i + 1 < cfg.ingredients && std::bernoulli_distribution(cfg.sub_ingredient_prob)(rng)) {
      const std::size_t j = i + 1 + pick_index(rng, cfg.ingredients - i - 1);
      add_edge(ing0 + i, 0, ing0 + j);
    }
    const int count = uniform_int(cfg.min_effects_per_ingredient, cfg.max_effects_per_ingredient);
    for (int k = 0; k < count; ++k) {
      std::size_t r;
      if (unsafe_coin(rng)) {
        r = 1 + n_safe + pick_index(rng, cfg.unsafe_relations.size());
      } else {
        r = 1 + pick_index(rng, n_safe);
      }
      const std::size_t e = pick_clustered(rng, cfg.effects, cfg.clusters, i % cfg.clusters, cfg.in_cluster_prob);
      add_edge(ing0 + i, r, eff0 + e);
    }
  }
  for (std::size_t e = 0; e < cfg.effects && cfg.systems > 0; ++e) {
    const int count = uniform_int(cfg.min_systems_per_effect, cfg.max_systems_per_effect);
    for (int k = 0; k < count; ++k) add_edge(eff0 + e, system_rel, sys0 + pick_index(rng, cfg.systems));
  }

  // Materialize composite facts one containment hop at a time. Ingredients
  // are closed from the highest index down so sub-ingredients are complete
  // before their containers read them; foods go last.
  auto close_node = [&](std::size_t x) {
    for (std::size_t k = 0; k < out[x].size(); ++k) {
      const auto [r, y] = out[x][k];
      if (r != 0) continue;
      const auto edges = out[y];  // copy; out[x] may grow
      for (const auto& [r2, z] : edges) {
        if (z == x || seen.contains({x, r2, z})) continue;
        if (std::bernoulli_distribution(closure_prob(r2))(rng)) add_edge(x, r2, z);
      }
    }
  };
  for (std::size_t i = cfg.ingredients; i-- > 0;) close_node(ing0 + i);
  for (std::size_t f = 0; f < cfg.foods; ++f) close_node(f);

  auto node_name = [&](std::size_t n) {
    if (n < ing0) return "food_" + std::to_string(n);
    if (n < eff0) return "ing_" + std::to_string(n - ing0);
    if (n < sys0) return "eff_" + std::to_string(n - eff0);
    return "sys_" + std::to_string(n - sys0);
  };
  std::vector<std::string> rel_names{"contain"};
  rel_names.insert(rel_names.end(), cfg.safe_relations.begin(), cfg.safe_relations.end());
  rel_names.insert(rel_names.end(), cfg.unsafe_relations.begin(), cfg.unsafe_relations.end());
  if (cfg.systems > 0) rel_names.push_back(cfg.system_relation);
  if (rel_names.size() != n_rel) throw Error("food kg: relation table mismatch");

  KnowledgeGraph::Builder builder;
  for (const auto& [h, r, t] : order) builder.add(node_name(h), rel_names[r], node_name(t));

  SyntheticKg result{std::move(builder).build(), {}, {}};
  result.rules.carriers.push_back(result.kg.relation("contain"));
  for (std::size_t n = 0; n < eff0; ++n) {
    if (auto id = result.kg.entities().find(node_name(n))) result.seeds.push_back(EntityId{*id});
  }
  return result;
}

}  // namespace lesc
