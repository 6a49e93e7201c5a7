#include "lesc/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lesc/error.hpp"
#include "lesc/numeric.hpp"

namespace lesc {

std::string to_string(GraphVariant v) {
  switch (v) {
    case GraphVariant::kAdjacency:
      return "A";
    case GraphVariant::kSquare:
      return "A2";
    case GraphVariant::kAdjacencyPlusSquare:
      return "A+A2";
    case GraphVariant::kFullyConnected:
      return "full";
  }
  return "?";
}

GraphVariant parse_graph_variant(const std::string& s) {
  if (s == "A") return GraphVariant::kAdjacency;
  if (s == "A2") return GraphVariant::kSquare;
  if (s == "A+A2") return GraphVariant::kAdjacencyPlusSquare;
  if (s == "full") return GraphVariant::kFullyConnected;
  throw Error("unknown graph variant '" + s + "' (expected A, A2, A+A2 or full)");
}

std::string to_string(AttentionNorm n) { return n == AttentionNorm::kSymmetric ? "symmetric" : "printed"; }

AttentionNorm parse_attention_norm(const std::string& s) {
  if (s == "symmetric") return AttentionNorm::kSymmetric;
  if (s == "printed") return AttentionNorm::kPrinted;
  throw Error("unknown attention normalization '" + s + "' (expected symmetric or printed)");
}

void ModelConfig::validate() const {
  if (dim < 1) throw Error("model: dim must be positive");
  if (heads < 1) throw Error("model: heads must be positive");
  if (top_k < 1) throw Error("model: top_k must be positive");
  if (hidden < 0) throw Error("model: hidden must be non-negative");
}

std::vector<ParamView> parameter_views(LescParams& p) {
  std::vector<ParamView> views;
  views.push_back({"enhancement.omega", {p.enhancement.omega.data(), 3}});
  views.push_back({"enhancement.head_proj", as_span(p.enhancement.head_proj)});
  views.push_back({"enhancement.tail_proj", as_span(p.enhancement.tail_proj)});
  views.push_back({"encoder.filter", {p.encoder.filter.data(), 3}});
  views.push_back({"encoder.bias", {&p.encoder.bias, 1}});
  views.push_back({"gcn.weight", as_span(p.gcn_weight)});
  views.push_back({"gcn.bias", as_span(p.gcn_bias)});
  for (std::size_t a = 0; a < p.attention.size(); ++a) {
    views.push_back({"attention." + std::to_string(a), as_span(p.attention[a])});
  }
  views.push_back({"verifier.w1", as_span(p.verifier_w1)});
  views.push_back({"verifier.b", as_span(p.verifier_b)});
  views.push_back({"verifier.w2", as_span(p.verifier_w2)});
  return views;
}

bool is_trainable(const std::string& name, const ModelConfig& cfg) {
  auto starts = [&](const char* prefix) { return name.rfind(prefix, 0) == 0; };
  if (starts("enhancement.")) return cfg.use_enhancement;
  if (starts("encoder.") || starts("gcn.")) return cfg.uses_graph();
  if (starts("attention.")) return cfg.use_local;
  return true;
}

LescParams zeros_like(const LescParams& p) {
  LescParams z;
  z.enhancement.omega.setZero();
  z.enhancement.head_proj = Matrix::Zero(p.enhancement.head_proj.rows(), p.enhancement.head_proj.cols());
  z.enhancement.tail_proj = Matrix::Zero(p.enhancement.tail_proj.rows(), p.enhancement.tail_proj.cols());
  z.encoder.filter.setZero();
  z.encoder.bias = 0.0;
  z.gcn_weight = Matrix::Zero(p.gcn_weight.rows(), p.gcn_weight.cols());
  z.gcn_bias = Vector::Zero(p.gcn_bias.size());
  for (const auto& a : p.attention) z.attention.push_back(Vector::Zero(a.size()));
  z.verifier_w1 = Matrix::Zero(p.verifier_w1.rows(), p.verifier_w1.cols());
  z.verifier_b = Vector::Zero(p.verifier_b.size());
  z.verifier_w2 = Vector::Zero(p.verifier_w2.size());
  return z;
}

Matrix bypass_projection(int dim) {
  Matrix m = Matrix::Zero(dim, 2 * dim);
  m.leftCols(dim).setIdentity();
  return m;
}

namespace {

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
  }
  return m;
}

double glorot(Eigen::Index fan_in, Eigen::Index fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void expect_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(std::string(name) + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                         ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

void expect_size(const Vector& v, Eigen::Index n, const char* name) {
  if (v.size() != n) {
    throw DimensionError(std::string(name) + ": expected length " + std::to_string(n) + ", got " +
                         std::to_string(v.size()));
  }
}

}  // namespace

LescParams init_lesc_params(const ModelConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const int d = cfg.dim;
  const int m = cfg.hidden_width();
  const int in = cfg.verifier_input();
  LescParams p;
  p.enhancement.omega = Eigen::Vector3d(0.1, 0.5, 0.5);
  p.enhancement.head_proj = bypass_projection(d);
  p.enhancement.tail_proj = bypass_projection(d);
  p.encoder = init_claim_encoder(d, rng);
  p.gcn_weight = uniform_matrix(d, d, glorot(d, d), rng);
  p.gcn_bias = Vector::Zero(d);
  for (int a = 0; a < cfg.heads; ++a) p.attention.push_back(uniform_matrix(d, 1, glorot(d, 1), rng).col(0));
  p.verifier_w1 = uniform_matrix(m, in, glorot(in, m), rng);
  p.verifier_b = Vector::Zero(m);
  p.verifier_w2 = uniform_matrix(m, 1, glorot(m, 1), rng).col(0);
  return p;
}

void check_params(const LescParams& p, const ModelConfig& cfg) {
  const int d = cfg.dim;
  expect_shape(p.enhancement.head_proj, d, 2 * d, "enhancement.head_proj");
  expect_shape(p.enhancement.tail_proj, d, 2 * d, "enhancement.tail_proj");
  expect_shape(p.gcn_weight, d, d, "gcn.weight");
  expect_size(p.gcn_bias, d, "gcn.bias");
  if (p.attention.size() != static_cast<std::size_t>(cfg.heads)) {
    throw DimensionError("attention: expected " + std::to_string(cfg.heads) + " heads, got " +
                         std::to_string(p.attention.size()));
  }
  for (const auto& a : p.attention) expect_size(a, d, "attention");
  expect_shape(p.verifier_w1, cfg.hidden_width(), cfg.verifier_input(), "verifier.w1");
  expect_size(p.verifier_b, cfg.hidden_width(), "verifier.b");
  expect_size(p.verifier_w2, cfg.hidden_width(), "verifier.w2");
}

ContextVectors encode_context(std::span<const ClaimVectors> claims) {
  if (claims.empty()) throw Error("context: statement has no claims");
  const auto d = claims.front().head.size();
  ContextVectors ctx{Vector::Zero(d), Vector::Zero(d), Vector::Zero(d)};
  for (const auto& c : claims) {
    ctx.head += c.head;
    ctx.relation += c.relation;
    ctx.tail += c.tail;
  }
  const double n = static_cast<double>(claims.size());
  ctx.head /= n;
  ctx.relation /= n;
  ctx.tail /= n;
  return ctx;
}

double cosine(const VecRef& a, const VecRef& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return a.dot(b) / (na * nb);
}

namespace {

struct SideRefs {
  const Vector* anchor;      // DistMult head of the neighbor score
  const Vector* relation;    // compared against neighbor relations
  const Vector* entity;      // compared against neighbor tails
};

SideRefs side_refs(const ContextVectors& ctx, EnhanceSide side) {
  if (side == EnhanceSide::kHead) return {&ctx.head, &ctx.relation, &ctx.tail};
  return {&ctx.tail, &ctx.relation, &ctx.head};
}

// Shared core of enhance_entity and the cached pipeline version.
void enhance_core(const VecRef& entity, const ContextVectors& ctx, std::span<const NeighborVectors> nbrs,
                  const EnhancementParams& p, EnhanceSide side, Vector& distmult, Vector& cos_rel, Vector& cos_ent,
                  Vector& attention, Vector& concat, Vector& enhanced) {
  const auto d = entity.size();
  const auto m = static_cast<Eigen::Index>(nbrs.size());
  const SideRefs refs = side_refs(ctx, side);
  distmult.resize(m);
  cos_rel.resize(m);
  cos_ent.resize(m);
  attention.resize(m);
  Vector aggregate = Vector::Zero(d);
  if (m > 0) {
    Vector logits(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto& n = nbrs[static_cast<std::size_t>(j)];
      distmult[j] = distmult_score(*refs.anchor, n.relation, n.tail);
      cos_rel[j] = cosine(*refs.relation, n.relation);
      cos_ent[j] = cosine(*refs.entity, n.tail);
      logits[j] = p.omega[0] * distmult[j] + p.omega[1] * cos_rel[j] + p.omega[2] * cos_ent[j];
    }
    attention = (logits.array() - logits.maxCoeff()).exp().matrix();
    attention /= attention.sum();
    for (Eigen::Index j = 0; j < m; ++j) aggregate += attention[j] * nbrs[static_cast<std::size_t>(j)].tail;
  }
  concat.resize(2 * d);
  concat << entity, aggregate;
  const Matrix& w = side == EnhanceSide::kHead ? p.head_proj : p.tail_proj;
  if (w.rows() != d || w.cols() != 2 * d) throw DimensionError("enhancement projection does not match dim");
  enhanced = w * concat;
}

}  // namespace

Enhancement enhance_entity(const VecRef& entity, const ContextVectors& ctx, std::span<const NeighborVectors> nbrs,
                           const EnhancementParams& p, EnhanceSide side) {
  Vector dm, cr, ce, att, concat, enhanced;
  enhance_core(entity, ctx, nbrs, p, side, dm, cr, ce, att, concat, enhanced);
  const auto d = entity.size();
  return {att, concat.tail(d), enhanced};
}

double triple_loss(std::span<const double> scores, std::span<const bool> labels) {
  if (scores.size() != labels.size()) throw DimensionError("triple loss: scores and labels differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) total += logistic_loss(scores[i], labels[i] ? 1.0 : -1.0);
  return total;
}

ClaimGraph build_claim_graph(std::span<const Triple> claims, GraphVariant variant) {
  const auto n = static_cast<Eigen::Index>(claims.size());
  ClaimGraph g;
  g.adjacency = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Triple& a = claims[static_cast<std::size_t>(i)];
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Triple& b = claims[static_cast<std::size_t>(j)];
      if (a.head == b.head || a.head == b.tail || a.tail == b.head || a.tail == b.tail) {
        g.adjacency(i, j) = 1.0;
        g.adjacency(j, i) = 1.0;
      }
    }
  }
  g.degree = g.adjacency.rowwise().sum();
  switch (variant) {
    case GraphVariant::kAdjacency:
      g.propagation = g.adjacency;
      break;
    case GraphVariant::kSquare:
      g.propagation = g.adjacency * g.adjacency;
      break;
    case GraphVariant::kAdjacencyPlusSquare:
      g.propagation = g.adjacency + g.adjacency * g.adjacency;
      break;
    case GraphVariant::kFullyConnected:
      g.propagation = Matrix::Ones(n, n);
      g.propagation.diagonal().setZero();
      break;
  }
  return g;
}

Matrix gcn_forward(const Matrix& v_in, const Matrix& propagation, const Matrix& weight, const Vector& bias) {
  Matrix pre = (propagation * v_in) * weight.transpose();
  pre.rowwise() += bias.transpose();
  return pre.cwiseMax(0.0);
}

Vector readout(const Matrix& v) {
  if (v.rows() == 0) throw DimensionError("readout of an empty matrix");
  Vector out(2 * v.cols());
  out << v.colwise().mean().transpose(), v.colwise().maxCoeff().transpose();
  return out;
}

Matrix attention_operator(const ClaimGraph& g, AttentionNorm norm, bool use_propagation) {
  const Matrix& a = use_propagation ? g.propagation : g.adjacency;
  const Vector deg = use_propagation ? Vector(a.rowwise().sum()) : g.degree;
  const Vector clamped = deg.cwiseMax(1.0);
  const Vector inv_sqrt = clamped.cwiseSqrt().cwiseInverse();
  const Vector left = norm == AttentionNorm::kSymmetric ? inv_sqrt : Vector(clamped.cwiseSqrt());
  return left.asDiagonal() * a * inv_sqrt.asDiagonal();
}

Vector local_attention_scores(const Matrix& v_out, const ClaimGraph& g, const Vector& theta, AttentionNorm norm,
                              bool use_propagation) {
  return ((attention_operator(g, norm, use_propagation) * v_out) * theta).array().tanh().matrix();
}

TopK select_topk(const Matrix& v_out, const Vector& scores, int k) {
  if (scores.size() != v_out.rows()) throw DimensionError("top-k: score count differs from claim count");
  if (k < 1) throw Error("top-k: k must be positive");
  const Eigen::Index keep = std::min<Eigen::Index>(k, scores.size());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return scores[a] > scores[b]; });
  order.resize(static_cast<std::size_t>(keep));
  TopK out{order, Matrix(keep, v_out.cols())};
  for (Eigen::Index q = 0; q < keep; ++q) {
    const Eigen::Index i = order[static_cast<std::size_t>(q)];
    out.selected.row(q) = scores[i] * v_out.row(i);
  }
  return out;
}

LocalRepresentation local_representation(const Matrix& v_out, const ClaimGraph& g, std::span<const Vector> heads,
                                         int k, AttentionNorm norm, bool use_propagation) {
  const Matrix op = attention_operator(g, norm, use_propagation);
  const Matrix op_v = op * v_out;
  LocalRepresentation out;
  out.representation.resize(2 * v_out.cols() * static_cast<Eigen::Index>(heads.size()));
  for (std::size_t a = 0; a < heads.size(); ++a) {
    Vector z = (op_v * heads[a]).array().tanh().matrix();
    TopK top = select_topk(v_out, z, k);
    out.representation.segment(2 * v_out.cols() * static_cast<Eigen::Index>(a), 2 * v_out.cols()) =
        readout(top.selected);
    out.scores.push_back(std::move(z));
    out.selections.push_back(std::move(top));
  }
  return out;
}

double hsic_loss(std::span<const Vector> scores) {
  if (scores.size() < 2) return 0.0;
  const auto n = scores.front().size();
  for (const auto& s : scores) {
    if (s.size() != n) throw DimensionError("hsic: heads score different claim counts");
  }
  if (n < 2) return 0.0;
  std::vector<Vector> centered;
  for (const auto& s : scores) centered.push_back((s.array() - s.mean()).matrix());
  const double scale = 1.0 / static_cast<double>((n - 1) * (n - 1));
  double total = 0.0;
  for (std::size_t a = 0; a < centered.size(); ++a) {
    for (std::size_t b = a + 1; b < centered.size(); ++b) {
      const double c = centered[a].dot(centered[b]);
      total += c * c * scale;
    }
  }
  return total;
}

double min_claim_score(std::span<const double> scores) {
  if (scores.empty()) throw Error("min claim score of an empty statement");
  return *std::min_element(scores.begin(), scores.end());
}

double min_claim_score(std::span<const ClaimVectors> enhanced_claims) {
  std::vector<double> s;
  for (const auto& c : enhanced_claims) s.push_back(distmult_score(c.head, c.relation, c.tail));
  return min_claim_score(s);
}

double statement_loss(double s_y, bool label) { return logistic_loss(s_y, label ? 1.0 : -1.0); }

std::vector<Vector> ForwardTrace::attention_scores() const {
  std::vector<Vector> out;
  for (const auto& h : attention_heads) out.push_back(h.scores);
  return out;
}

namespace {

void push_mask(std::vector<int>& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) out.push_back(m.data()[i] > 0.0 ? 1 : 0);
}

void push_column_argmax(std::vector<int>& out, const Matrix& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    Eigen::Index arg = 0;
    m.col(j).maxCoeff(&arg);
    out.push_back(static_cast<int>(arg));
  }
}

}  // namespace

std::vector<int> ForwardTrace::structure() const {
  std::vector<int> out;
  out.push_back(static_cast<int>(min_index));
  push_mask(out, enc_pre);
  push_mask(out, gcn_pre);
  if (v_out.rows() > 0) push_column_argmax(out, v_out);
  for (const auto& h : attention_heads) {
    for (auto i : h.topk.index) out.push_back(static_cast<int>(i));
    push_column_argmax(out, h.topk.selected);
  }
  return out;
}

void check_statement_ids(const Statement& s, const KnowledgeGraph& kg) {
  if (s.claims.empty()) throw Error("statement '" + s.id + "' has no claims");
  for (const auto& t : s.claims) {
    if (index(t.head) >= kg.entity_count()) {
      throw VocabularyError("statement '" + s.id + "': unknown entity id " + std::to_string(index(t.head)));
    }
    if (index(t.tail) >= kg.entity_count()) {
      throw VocabularyError("statement '" + s.id + "': unknown entity id " + std::to_string(index(t.tail)));
    }
    if (index(t.relation) >= kg.relation_count()) {
      throw VocabularyError("statement '" + s.id + "': unknown relation id " + std::to_string(index(t.relation)));
    }
  }
}

namespace {

EnhanceCache enhance_cached(EntityId e, EnhanceSide side, const ContextVectors& ctx, const KnowledgeGraph& kg,
                            const EmbeddingTable& emb, const EnhancementParams& p) {
  EnhanceCache c;
  c.entity = e;
  c.side = side;
  const auto nbrs = kg.neighbors(e);
  c.neighbors.assign(nbrs.begin(), nbrs.end());
  std::vector<NeighborVectors> vecs;
  vecs.reserve(nbrs.size());
  for (const auto& n : nbrs) vecs.push_back({emb.relation(n.relation), emb.entity(n.tail)});
  enhance_core(emb.entity(e), ctx, vecs, p, side, c.distmult, c.cos_rel, c.cos_ent, c.attention, c.concat,
               c.enhanced);
  return c;
}

}  // namespace

Verification verify_statement(const Statement& s, const KnowledgeGraph& kg, const EmbeddingTable& emb,
                              const LescParams& p, const ModelConfig& cfg) {
  cfg.validate();
  check_params(p, cfg);
  check_statement_ids(s, kg);
  if (emb.dim() != cfg.dim) throw DimensionError("embedding dim differs from model dim");
  check_table(emb, kg);

  const int d = cfg.dim;
  const auto n = static_cast<Eigen::Index>(s.claims.size());
  ForwardTrace tr;
  tr.claims = s.claims;

  std::vector<ClaimVectors> raw;
  raw.reserve(s.claims.size());
  for (const auto& t : s.claims) raw.push_back({emb.entity(t.head), emb.relation(t.relation), emb.entity(t.tail)});

  Matrix heads(n, d), rels(n, d), tails(n, d);
  if (cfg.use_enhancement) {
    tr.context = encode_context(raw);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Triple& t = s.claims[static_cast<std::size_t>(i)];
      tr.heads.push_back(enhance_cached(t.head, EnhanceSide::kHead, tr.context, kg, emb, p.enhancement));
      tr.tails.push_back(enhance_cached(t.tail, EnhanceSide::kTail, tr.context, kg, emb, p.enhancement));
      heads.row(i) = tr.heads.back().enhanced.transpose();
      tails.row(i) = tr.tails.back().enhanced.transpose();
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      heads.row(i) = raw[static_cast<std::size_t>(i)].head.transpose();
      tails.row(i) = raw[static_cast<std::size_t>(i)].tail.transpose();
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) rels.row(i) = raw[static_cast<std::size_t>(i)].relation.transpose();

  tr.claim_scores.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    tr.claim_scores[i] = (heads.row(i).array() * rels.row(i).array() * tails.row(i).array()).sum();
  }
  tr.s_m = tr.claim_scores.minCoeff(&tr.min_index);

  tr.global = Vector::Zero(2 * d);
  tr.local = Vector::Zero(2 * d * cfg.heads);
  if (cfg.uses_graph()) {
    tr.enc_pre = p.encoder.filter[0] * heads + p.encoder.filter[1] * rels + p.encoder.filter[2] * tails;
    tr.enc_pre.array() += p.encoder.bias;
    tr.v_in = tr.enc_pre.cwiseMax(0.0);
    tr.graph = build_claim_graph(s.claims, cfg.graph);
    tr.propagated = tr.graph.propagation * tr.v_in;
    tr.gcn_pre = tr.propagated * p.gcn_weight.transpose();
    tr.gcn_pre.rowwise() += p.gcn_bias.transpose();
    tr.v_out = tr.gcn_pre.cwiseMax(0.0);
    if (cfg.use_global) tr.global = readout(tr.v_out);
    if (cfg.use_local) {
      tr.attention_op = attention_operator(tr.graph, cfg.attention_norm, cfg.attention_uses_propagation);
      const Matrix op_v = tr.attention_op * tr.v_out;
      for (int a = 0; a < cfg.heads; ++a) {
        HeadTrace h;
        h.operator_v = op_v;
        h.scores = (op_v * p.attention[static_cast<std::size_t>(a)]).array().tanh().matrix();
        h.topk = select_topk(tr.v_out, h.scores, cfg.top_k);
        h.readout = readout(h.topk.selected);
        tr.local.segment(2 * d * a, 2 * d) = h.readout;
        tr.attention_heads.push_back(std::move(h));
      }
    }
  }

  tr.verifier_in.resize(cfg.verifier_input());
  tr.verifier_in << tr.s_m, tr.global, tr.local;
  tr.hidden_pre = p.verifier_w1 * tr.verifier_in + p.verifier_b;
  tr.hidden = tr.hidden_pre.array().tanh().matrix();
  tr.logit = p.verifier_w2.dot(tr.hidden);
  tr.s_y = sigmoid(tr.logit);
  const double score = tr.s_y;
  return {score, std::move(tr)};
}

double statement_objective(const ForwardTrace& trace, const Statement& s, const LossConfig& loss) {
  double total = statement_loss(trace.s_y, s.label);
  if (loss.use_claim_labels && loss.lambda1 != 0.0) {
    double lt = 0.0;
    for (Eigen::Index i = 0; i < trace.claim_scores.size(); ++i) {
      const bool y = static_cast<std::size_t>(i) < s.claim_labels.size() ? s.claim_labels[static_cast<std::size_t>(i)]
                                                                         : s.label;
      lt += logistic_loss(trace.claim_scores[i], y ? 1.0 : -1.0);
    }
    total += loss.lambda1 * lt;
  }
  if (loss.lambda2 != 0.0) total += loss.lambda2 * hsic_loss(trace.attention_scores());
  return total;
}

}  // namespace lesc
