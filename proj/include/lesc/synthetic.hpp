#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lesc/claimgen.hpp"
#include "lesc/kgstore.hpp"

namespace lesc {

// Entities fall into clusters; each relation links a few (head cluster,
// tail cluster) pairs. Gives embedding models structure to recover.
struct ClusteredKgConfig {
  std::size_t entities = 200;
  std::size_t relations = 10;
  std::size_t triples = 2000;
  std::size_t clusters = 8;
  std::size_t pairs_per_relation = 2;
  std::uint64_t seed = 7;
};

KnowledgeGraph make_clustered_kg(const ClusteredKgConfig& cfg);

// Food-domain graph: foods contain ingredients, ingredients have effects,
// effects act on body systems.
// Composite effects of contained ingredients are materialized on the food
// for "safe" relations and only rarely for "unsafe" ones, so walks through
// an unsafe effect tend to imply a fact the graph does not hold.
struct FoodKgConfig {
  std::size_t foods = 120;
  std::size_t ingredients = 80;
  std::size_t effects = 40;
  std::size_t systems = 12;
  std::size_t clusters = 4;
  int min_ingredients_per_food = 2;
  int max_ingredients_per_food = 4;
  int min_effects_per_ingredient = 1;
  int max_effects_per_ingredient = 3;
  int min_systems_per_effect = 1;
  int max_systems_per_effect = 2;
  double sub_ingredient_prob = 0.25;
  double in_cluster_prob = 0.8;
  std::vector<std::string> safe_relations{"improve", "reduce", "maintain", "prevent"};
  std::vector<std::string> unsafe_relations{"cause", "induce"};
  std::string system_relation = "affect";
  double unsafe_share = 0.35;
  double safe_closure = 1.0;
  double unsafe_closure = 0.0;
  double contain_closure = 1.0;
  std::uint64_t seed = 11;
};

struct SyntheticKg {
  KnowledgeGraph kg;
  CompositionRules rules;
  std::vector<EntityId> seeds;  // walk starting points: foods and ingredients
};

SyntheticKg make_food_kg(const FoodKgConfig& cfg);

}  // namespace lesc
