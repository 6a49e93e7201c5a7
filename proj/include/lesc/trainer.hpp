#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lesc/claimgen.hpp"
#include "lesc/model.hpp"
#include "lesc/transe.hpp"

namespace lesc {

enum class Ablation { kFull, kNoLt, kNoLd, kNoLE, kNoGSL, kNoLSL, kNoGSLLSL };

std::string to_string(Ablation a);
Ablation parse_ablation(const std::string& s);
const std::vector<Ablation>& all_ablations();

// Switches off the variant's component in copies the caller owns.
void apply_ablation(Ablation a, ModelConfig& model, LossConfig& loss);

struct TrainConfig {
  std::size_t batch_size = 100;
  double learning_rate = 0.001;
  int epochs = 50;
  int patience = 5;  // epochs without validation gain before stopping; 0 disables
  double l2_coeff = 1e-5;
  double lambda1 = 1.0;
  double lambda2 = 0.1;
  std::uint64_t seed = 1;
  Ablation ablation = Ablation::kFull;
  bool train_embeddings = true;
  bool f1_positive_true = true;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double valid_accuracy = 0.0;
  double wall_ms = 0.0;
};

std::string to_json(const EpochRecord& r);

struct TrainResult {
  ModelConfig model;  // after the ablation was applied
  LossConfig loss;
  LescParams params;
  EmbeddingTable embeddings;
  double threshold = 0.5;
  int best_epoch = -1;
  std::vector<EpochRecord> log;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch AdaGrad on the total loss with early stopping on validation
// accuracy; returns the best epoch's state and its calibrated threshold.
// `initial` overrides the seeded parameter initialization.
TrainResult train(std::span<const Statement> train_set, std::span<const Statement> valid_set,
                  const KnowledgeGraph& kg, const EmbeddingTable& emb, const ModelConfig& model,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {}, const LescParams* initial = nullptr);

std::vector<double> score_statements(std::span<const Statement> statements, const KnowledgeGraph& kg,
                                     const EmbeddingTable& emb, const LescParams& p, const ModelConfig& model);

struct BucketStats {
  double accuracy = 0.0;
  std::size_t count = 0;
};

struct EvalReport {
  double threshold = 0.5;
  double accuracy = 0.0;
  double f1 = 0.0;
  std::map<std::size_t, BucketStats> per_claim_count;

  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
};

EvalReport report_from_scores(std::span<const double> scores, std::span<const Statement> statements,
                              double threshold, bool positive_is_true = true);

EvalReport evaluate(std::span<const Statement> statements, const KnowledgeGraph& kg, const EmbeddingTable& emb,
                    const LescParams& p, const ModelConfig& model, double threshold, bool positive_is_true = true);

// Threshold calibrated on `valid` with 0.5 as fallback when it holds a single
// class.
double calibrate_on(std::span<const double> scores, std::span<const Statement> statements, double fallback);

// Per-claim TransE scores aggregated per statement, threshold calibrated on
// `valid`, report on `test`.
EvalReport baseline_min_transe(std::span<const Statement> valid, std::span<const Statement> test,
                               const EmbeddingTable& transe, Aggregation agg = Aggregation::kMin);

// Mean pairwise HSIC of head attention scores over statements with at least
// two claims.
double mean_attention_hsic(std::span<const Statement> statements, const KnowledgeGraph& kg,
                           const EmbeddingTable& emb, const LescParams& p, const ModelConfig& model);

struct AblationRow {
  Ablation variant = Ablation::kFull;
  EvalReport report;
  int best_epoch = -1;
};

// Trains every listed variant from the same seed and data; the full model is
// always included and comes first.
std::vector<AblationRow> run_ablation(std::span<const Statement> train_set, std::span<const Statement> valid_set,
                                      std::span<const Statement> test_set, const KnowledgeGraph& kg,
                                      const EmbeddingTable& emb, const ModelConfig& model, const TrainConfig& cfg,
                                      std::vector<Ablation> variants);

std::string ablation_table_json(const std::vector<AblationRow>& rows);

}  // namespace lesc
