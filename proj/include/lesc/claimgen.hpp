#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lesc/kgstore.hpp"

namespace lesc {

struct Statement {
  std::string id;
  std::vector<Triple> claims;
  bool label = true;
  std::vector<bool> claim_labels;

  std::size_t size() const noexcept { return claims.size(); }
};

struct WalkConfig {
  int min_steps = 1;
  int max_steps = 4;
  int min_walks = 1;
  int max_walks = 3;
  std::size_t max_claims = 12;
  std::optional<std::vector<EntityId>> seed_entities;

  void validate() const;
};

// Chains (x, carrier, y), (y, r, z) assert the composite fact (x, r, z).
// A statement whose composite facts are absent from the graph is false even
// though each of its claims is a graph triple.
struct CompositionRules {
  std::vector<RelationId> carriers;

  bool empty() const noexcept { return carriers.empty(); }
  bool is_carrier(RelationId r) const;
};

// One random-walk statement; every claim is a graph triple, all labels true.
Statement sample_statement(const KnowledgeGraph& kg, const WalkConfig& cfg, std::mt19937_64& rng);

// Corrupts `corruptions` distinct claims (default one) of a true statement.
Statement negate_statement(const KnowledgeGraph& kg, const Statement& s, std::mt19937_64& rng,
                           std::size_t corruptions = 1);

// Indices of claims whose composite fact (per rules) is missing from kg.
std::vector<std::size_t> composition_conflicts(const KnowledgeGraph& kg, const Statement& s,
                                               const CompositionRules& rules);

// Checks the Statement label invariants; throws Error on violation.
void check_statement(const Statement& s, std::size_t max_claims);

struct CorpusConfig {
  WalkConfig walk;
  std::size_t count = 1000;
  double negative_fraction = 0.5;
  // Share of negatives drawn as composition conflicts instead of random
  // corruptions. Ignored when `rules` is empty.
  double composition_fraction = 0.0;
  std::size_t corruptions_per_negative = 1;
  CompositionRules rules;
};

std::vector<Statement> generate_corpus(const KnowledgeGraph& kg, const CorpusConfig& cfg, std::mt19937_64& rng);

struct CorpusSplit {
  std::vector<Statement> train;
  std::vector<Statement> valid;
  std::vector<Statement> test;
};

CorpusSplit split_corpus(std::vector<Statement> statements, std::array<double, 3> ratios, std::mt19937_64& rng);

struct CorpusStats {
  std::size_t statements = 0;
  std::size_t negatives = 0;
  double mean_claims = 0.0;
  std::size_t max_claims = 0;
};

CorpusStats corpus_stats(const std::vector<Statement>& statements);

// JSON-lines: {"id", "claims": [[h, r, t], ...], "label", "claim_labels"}.
std::string statement_to_json(const KnowledgeGraph& kg, const Statement& s);
// Parses one line. Missing label defaults to true and missing claim_labels
// are filled from the label. Unknown names raise VocabularyError.
Statement statement_from_json(const KnowledgeGraph& kg, const std::string& line);
void write_corpus(const KnowledgeGraph& kg, const std::vector<Statement>& statements,
                  const std::filesystem::path& path);
std::vector<Statement> read_corpus(const KnowledgeGraph& kg, const std::filesystem::path& path);

}  // namespace lesc
