#pragma once

#include <random>
#include <span>
#include <vector>

#include "lesc/claimgen.hpp"
#include "lesc/kgstore.hpp"
#include "lesc/scoring.hpp"

namespace lesc {

struct TransEConfig {
  int dim = 18;
  int epochs = 300;
  double learning_rate = 0.05;
  double margin = 1.0;
  std::size_t batch_size = 100;
};

struct TransEResult {
  EmbeddingTable table;
  std::vector<double> epoch_loss;
};

// Margin ranking loss max(0, margin + |h + r - t| - |h' + r - t'|) against one
// corruption per triple, AdaGrad updates, entity rows renormalized to unit
// length after every batch.
TransEResult train_transe(const KnowledgeGraph& kg, const TransEConfig& cfg, std::mt19937_64& rng);

// -|h + r - t|
double transe_plausibility(const EmbeddingTable& table, const Triple& t);

enum class Aggregation { kMin, kMean };

double transe_statement_score(const EmbeddingTable& table, const Statement& s, Aggregation agg);
std::vector<double> transe_statement_scores(const EmbeddingTable& table, std::span<const Statement> statements,
                                            Aggregation agg);

}  // namespace lesc
