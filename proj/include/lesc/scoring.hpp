#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lesc/kgstore.hpp"
#include "lesc/tensor.hpp"

namespace lesc {

using VecRef = Eigen::Ref<const Vector>;

struct EmbeddingTable {
  RowMatrix entities;   // |E| x d
  RowMatrix relations;  // |R| x d

  int dim() const noexcept { return static_cast<int>(entities.cols()); }
  Eigen::Map<const Vector> entity(EntityId e) const { return row(entities, index(e)); }
  Eigen::Map<const Vector> relation(RelationId r) const { return row(relations, index(r)); }

  static Eigen::Map<const Vector> row(const RowMatrix& m, std::uint32_t i) {
    return {m.row(i).data(), m.cols()};
  }
};

// Uniform in [-6/sqrt(d), 6/sqrt(d)], entities first, then relations.
EmbeddingTable init_embeddings(std::size_t entities, std::size_t relations, int dim, std::mt19937_64& rng);

// Throws DimensionError unless the table matches the graph's vocabularies.
void check_table(const EmbeddingTable& table, const KnowledgeGraph& kg);

// FNV-1a over the raw values, used as a reference hash in model checkpoints.
std::uint64_t table_hash(const EmbeddingTable& table);

// sum_j h_j r_j t_j
double distmult_score(const VecRef& h, const VecRef& r, const VecRef& t);

struct ClaimEncoderParams {
  Eigen::Vector3d filter = Eigen::Vector3d::Zero();
  double bias = 0.0;
};

ClaimEncoderParams init_claim_encoder(int dim, std::mt19937_64& rng);

// v_j = ReLU(w1 h_j + w2 r_j + w3 t_j + b): a 1x3 convolution over [h; r; t].
Vector encode_claim(const VecRef& h, const VecRef& r, const VecRef& t, const ClaimEncoderParams& p);

struct PretrainConfig {
  int dim = 18;
  int epochs = 50;
  double learning_rate = 0.3;
  double l2 = 1e-5;
  int negatives_per_positive = 1;
  std::size_t batch_size = 100;
};

struct PretrainResult {
  EmbeddingTable table;
  std::vector<double> epoch_loss;  // mean per-sample loss including L2
};

// DistMult with logistic loss over observed triples (y = +1) and corruptions
// (y = -1). Starts from `initial` when given, else from init_embeddings().
PretrainResult pretrain_embeddings(const KnowledgeGraph& kg, const PretrainConfig& cfg, std::mt19937_64& rng,
                                   const EmbeddingTable* initial = nullptr);

// Mean DistMult AUC of `positives` against one corruption each.
double distmult_auc(const KnowledgeGraph& kg, const EmbeddingTable& table, std::span<const Triple> positives,
                    std::mt19937_64& rng);

struct EncoderPretrainResult {
  ClaimEncoderParams params;
  Vector readout;  // auxiliary scoring weights, discarded by callers
  std::vector<double> epoch_loss;
};

// Scores a triple by w . encode_claim(h, r, t) and fits filter, bias and w
// with the same logistic loss; embeddings stay fixed.
EncoderPretrainResult pretrain_claim_encoder(const KnowledgeGraph& kg, const EmbeddingTable& table,
                                             const PretrainConfig& cfg, std::mt19937_64& rng,
                                             const ClaimEncoderParams& initial);

double encoder_auc(const KnowledgeGraph& kg, const EmbeddingTable& table, const ClaimEncoderParams& p,
                   const Vector& readout, std::span<const Triple> positives, std::mt19937_64& rng);

// JSON file carrying dim, vocabulary sizes and hash, and row-major matrices.
void save_embeddings(const EmbeddingTable& table, const KnowledgeGraph& kg, const std::filesystem::path& path);
// Rejects files whose vocabulary hash does not match kg.
EmbeddingTable load_embeddings(const std::filesystem::path& path, const KnowledgeGraph& kg);

}  // namespace lesc
