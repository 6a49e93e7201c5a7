#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "lesc/claimgen.hpp"
#include "lesc/kgstore.hpp"
#include "lesc/scoring.hpp"
#include "lesc/tensor.hpp"

namespace lesc {

// How the propagation matrix of the claim-graph convolution is formed from
// the shared-entity adjacency A.
enum class GraphVariant {
  kAdjacency,              // A
  kSquare,                 // A^2
  kAdjacencyPlusSquare,    // A + A^2
  kFullyConnected,         // every pair of distinct claims
};

// Normalization of A inside the attention layer.
enum class AttentionNorm {
  kSymmetric,  // D^-1/2 A D^-1/2
  kPrinted,    // D^1/2 A D^-1/2
};

enum class EnhanceSide { kHead, kTail };

std::string to_string(GraphVariant v);
GraphVariant parse_graph_variant(const std::string& s);
std::string to_string(AttentionNorm n);
AttentionNorm parse_attention_norm(const std::string& s);

struct ModelConfig {
  int dim = 18;
  int heads = 2;
  int top_k = 2;
  int hidden = 0;  // verifier width; 0 means 2 * dim
  GraphVariant graph = GraphVariant::kAdjacencyPlusSquare;
  AttentionNorm attention_norm = AttentionNorm::kSymmetric;
  bool attention_uses_propagation = false;  // feed A-hat instead of A to the attention layer
  bool use_enhancement = true;
  bool use_global = true;
  bool use_local = true;

  int hidden_width() const noexcept { return hidden > 0 ? hidden : 2 * dim; }
  int verifier_input() const noexcept { return 1 + 2 * dim + 2 * dim * heads; }
  bool uses_graph() const noexcept { return use_global || use_local; }
  void validate() const;
};

struct LossConfig {
  double lambda1 = 1.0;
  double lambda2 = 0.1;
  bool use_claim_labels = true;
};

struct ContextVectors {
  Vector head;
  Vector relation;
  Vector tail;
};

struct EnhancementParams {
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  Matrix head_proj;  // d x 2d, applied to [e || aggregate]
  Matrix tail_proj;  // d x 2d
};

struct LescParams {
  EnhancementParams enhancement;
  ClaimEncoderParams encoder;
  Matrix gcn_weight;               // d x d
  Vector gcn_bias;                 // d
  std::vector<Vector> attention;   // one d-vector per head
  Matrix verifier_w1;              // m x (1 + 2d + 2d * heads)
  Vector verifier_b;               // m
  Vector verifier_w2;              // m
};

// Named flat view of one parameter tensor; params and gradients built with
// the same config list their views in the same order.
struct ParamView {
  std::string name;
  std::span<double> values;
};

std::vector<ParamView> parameter_views(LescParams& p);
// Whether the forward pass under cfg reads the tensor with this view name.
// Tensors it never reads stay frozen and unregularized.
bool is_trainable(const std::string& name, const ModelConfig& cfg);
LescParams zeros_like(const LescParams& p);
// [I | 0]: the projection keeps the entity and ignores the aggregate.
Matrix bypass_projection(int dim);

LescParams init_lesc_params(const ModelConfig& cfg, std::mt19937_64& rng);
// Throws DimensionError if shapes disagree with cfg.
void check_params(const LescParams& p, const ModelConfig& cfg);

// ---------------------------------------------------------------------------
// Building blocks. Each mirrors one stage of the verifier and is usable on its
// own; verify_statement() composes them.

struct ClaimVectors {
  Vector head;
  Vector relation;
  Vector tail;
};

struct NeighborVectors {
  Vector relation;
  Vector tail;
};

ContextVectors encode_context(std::span<const ClaimVectors> claims);

// Cosine similarity; 0 when either vector is (numerically) zero.
double cosine(const VecRef& a, const VecRef& b);

struct Enhancement {
  Vector attention;  // softmax weights over neighbors (empty if none)
  Vector aggregate;  // attention-weighted neighbor tails
  Vector enhanced;   // projection of [e || aggregate]
};

// Head side scores neighbor j by w1 f(h_c, r_j, t_j) + w2 cos(r_c, r_j) +
// w3 cos(t_c, t_j). Tail side anchors the DistMult term on t_c and compares
// tails against h_c. No neighbors gives a zero aggregate.
Enhancement enhance_entity(const VecRef& entity, const ContextVectors& ctx, std::span<const NeighborVectors> nbrs,
                           const EnhancementParams& p, EnhanceSide side);

// sum_i log(1 + exp(-y_i s_i)) with labels mapped to +-1.
double triple_loss(std::span<const double> scores, std::span<const bool> labels);

struct ClaimGraph {
  Matrix adjacency;    // A: 0/1, symmetric, zero diagonal
  Matrix propagation;  // A-hat per the graph variant
  Vector degree;       // row sums of A

  Eigen::Index size() const noexcept { return adjacency.rows(); }
};

ClaimGraph build_claim_graph(std::span<const Triple> claims,
                             GraphVariant variant = GraphVariant::kAdjacencyPlusSquare);

// ReLU(A-hat V W^T + b)
Matrix gcn_forward(const Matrix& v_in, const Matrix& propagation, const Matrix& weight, const Vector& bias);

// Column means followed by column maxima.
Vector readout(const Matrix& v);

// Normalized operator used by the attention layer. Degrees below one are
// clamped to one so edgeless graphs stay defined.
Matrix attention_operator(const ClaimGraph& g, AttentionNorm norm, bool use_propagation = false);

Vector local_attention_scores(const Matrix& v_out, const ClaimGraph& g, const Vector& theta,
                              AttentionNorm norm = AttentionNorm::kSymmetric, bool use_propagation = false);

struct TopK {
  std::vector<Eigen::Index> index;  // ordered by score desc, then index asc
  Matrix selected;                  // rows of V scaled by their score
};

TopK select_topk(const Matrix& v_out, const Vector& scores, int k);

struct LocalRepresentation {
  Vector representation;           // 2d per head, heads in order
  std::vector<Vector> scores;      // attention scores per head
  std::vector<TopK> selections;
};

LocalRepresentation local_representation(const Matrix& v_out, const ClaimGraph& g, std::span<const Vector> heads,
                                         int k, AttentionNorm norm = AttentionNorm::kSymmetric,
                                         bool use_propagation = false);

// Sum over unordered head pairs of (N-1)^-2 tr(R K_a R K_b) with linear
// kernels. Zero for fewer than two heads or a single claim.
double hsic_loss(std::span<const Vector> scores);

double min_claim_score(std::span<const double> scores);
double min_claim_score(std::span<const ClaimVectors> enhanced_claims);

// log(1 + exp(-y s_y)), y = +1 for a true statement.
double statement_loss(double s_y, bool label);

// ---------------------------------------------------------------------------
// Full pipeline.

struct EnhanceCache {
  EntityId entity{};
  EnhanceSide side = EnhanceSide::kHead;
  std::vector<Neighbor> neighbors;
  Vector distmult;   // per-neighbor DistMult term
  Vector cos_rel;    // per-neighbor relation cosine
  Vector cos_ent;    // per-neighbor entity cosine
  Vector attention;
  Vector concat;     // [e || aggregate]
  Vector enhanced;
};

struct HeadTrace {
  Matrix operator_v;  // attention operator times V_out
  Vector scores;      // Z
  TopK topk;
  Vector readout;
};

struct ForwardTrace {
  std::vector<Triple> claims;
  ContextVectors context;
  std::vector<EnhanceCache> heads;  // enhancement of each claim's head
  std::vector<EnhanceCache> tails;  // enhancement of each claim's tail
  Matrix enc_pre;                   // N x d, before ReLU
  Matrix v_in;                      // N x d claim encodings
  ClaimGraph graph;
  Matrix propagated;                // A-hat V_in
  Matrix gcn_pre;                   // before ReLU
  Matrix v_out;
  Matrix attention_op;
  Vector global;                    // r_global (zeros when disabled)
  std::vector<HeadTrace> attention_heads;
  Vector local;                     // r_local (zeros when disabled)
  Vector claim_scores;              // s_i
  Eigen::Index min_index = 0;
  double s_m = 0.0;
  Vector verifier_in;
  Vector hidden_pre;
  Vector hidden;
  double logit = 0.0;
  double s_y = 0.0;

  std::vector<Vector> attention_scores() const;
  // Discrete choices made by the pass (ReLU masks, arg-max/min, top-k). Two
  // passes with equal structure lie on the same smooth piece of the loss.
  std::vector<int> structure() const;
};

struct Verification {
  double score = 0.0;
  ForwardTrace trace;
};

// Checks every id against the graph; throws VocabularyError naming the id.
void check_statement_ids(const Statement& s, const KnowledgeGraph& kg);

Verification verify_statement(const Statement& s, const KnowledgeGraph& kg, const EmbeddingTable& emb,
                              const LescParams& p, const ModelConfig& cfg);

// Per-statement objective L_c + lambda1 L_t + lambda2 L_d (no L2).
double statement_objective(const ForwardTrace& trace, const Statement& s, const LossConfig& loss);

struct Gradients {
  LescParams params;
  SparseRows entities;
  SparseRows relations;
};

Gradients zero_gradients(const LescParams& p);

// Adds weight * d(objective)/d(theta) for one statement; returns the objective.
double accumulate_gradients(const Statement& s, const KnowledgeGraph& kg, const EmbeddingTable& emb,
                            const LescParams& p, const ModelConfig& cfg, const LossConfig& loss, double weight,
                            Gradients& grads);

// Embedding rows a statement reads (claims, plus neighbors when enhancing).
void collect_embedding_rows(const Statement& s, const KnowledgeGraph& kg, const ModelConfig& cfg,
                            std::vector<std::uint32_t>& entity_rows, std::vector<std::uint32_t>& relation_rows);

struct RegularizationConfig {
  double l2 = 0.0;
  bool embeddings = true;  // penalize embedding rows read by the batch
};

// Mean statement objective over the batch plus L2 on trainable tensors.
double total_loss(std::span<const Statement> batch, const KnowledgeGraph& kg, const EmbeddingTable& emb,
                  const LescParams& p, const ModelConfig& cfg, const LossConfig& loss,
                  const RegularizationConfig& reg = {});

struct BatchGradients {
  double loss = 0.0;
  Gradients grads;
};

// total_loss and its gradient.
BatchGradients batch_gradients(std::span<const Statement> batch, const KnowledgeGraph& kg, const EmbeddingTable& emb,
                               const LescParams& p, const ModelConfig& cfg, const LossConfig& loss,
                               const RegularizationConfig& reg = {});

}  // namespace lesc
