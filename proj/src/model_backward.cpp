#include <algorithm>
#include <cmath>

#include "lesc/error.hpp"
#include "lesc/model.hpp"
#include "lesc/numeric.hpp"

namespace lesc {

Gradients zero_gradients(const LescParams& p) { return {zeros_like(p), {}, {}}; }

namespace {

// d cos(x, y) / dx; zero where cosine() is clamped to zero.
Vector cosine_grad(const Vector& x, const Vector& y) {
  const double nx = x.norm();
  const double ny = y.norm();
  if (nx < 1e-12 || ny < 1e-12) return Vector::Zero(x.size());
  const double c = x.dot(y) / (nx * ny);
  return y / (nx * ny) - c * x / (nx * nx);
}

// Routes a readout gradient [g_mean || g_max] back to the rows of v.
Matrix readout_backward(const Matrix& v, const Vector& g) {
  const auto n = v.rows();
  const auto d = v.cols();
  Matrix out = Matrix::Zero(n, d);
  const Vector g_mean = g.head(d) / static_cast<double>(n);
  out.rowwise() += g_mean.transpose();
  for (Eigen::Index j = 0; j < d; ++j) {
    Eigen::Index arg = 0;
    v.col(j).maxCoeff(&arg);
    out(arg, j) += g[d + j];
  }
  return out;
}

struct Accumulator {
  const EmbeddingTable& emb;
  double weight;
  Gradients& grads;

  void entity(EntityId e, const Vector& g) const { accumulate_row(grads.entities, index(e), weight * g); }
  void relation(RelationId r, const Vector& g) const { accumulate_row(grads.relations, index(r), weight * g); }
};

struct ContextGrad {
  Vector head, relation, tail;
};

void enhance_backward(const EnhanceCache& c, const Vector& g_enh, const ContextVectors& ctx,
                      const EnhancementParams& p, EnhancementParams& gp, const Accumulator& acc, ContextGrad& g_ctx) {
  const auto d = g_enh.size();
  const bool head_side = c.side == EnhanceSide::kHead;
  const Matrix& w = head_side ? p.head_proj : p.tail_proj;
  Matrix& gw = head_side ? gp.head_proj : gp.tail_proj;
  gw.noalias() += acc.weight * g_enh * c.concat.transpose();
  const Vector g_concat = w.transpose() * g_enh;
  acc.entity(c.entity, g_concat.head(d));

  const auto m = static_cast<Eigen::Index>(c.neighbors.size());
  if (m == 0) return;
  const Vector g_agg = g_concat.tail(d);
  std::vector<Vector> tails, rels;
  Vector g_alpha(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& n = c.neighbors[static_cast<std::size_t>(j)];
    tails.emplace_back(acc.emb.entity(n.tail));
    rels.emplace_back(acc.emb.relation(n.relation));
    g_alpha[j] = tails.back().dot(g_agg);
  }
  const double mean = c.attention.dot(g_alpha);
  const Vector g_logit = c.attention.cwiseProduct((g_alpha.array() - mean).matrix());
  gp.omega[0] += acc.weight * g_logit.dot(c.distmult);
  gp.omega[1] += acc.weight * g_logit.dot(c.cos_rel);
  gp.omega[2] += acc.weight * g_logit.dot(c.cos_ent);

  const Vector& anchor = head_side ? ctx.head : ctx.tail;
  const Vector& ent_ref = head_side ? ctx.tail : ctx.head;
  Vector& g_anchor = head_side ? g_ctx.head : g_ctx.tail;
  Vector& g_ent_ref = head_side ? g_ctx.tail : g_ctx.head;
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& n = c.neighbors[static_cast<std::size_t>(j)];
    const Vector& tau = tails[static_cast<std::size_t>(j)];
    const Vector& rho = rels[static_cast<std::size_t>(j)];
    Vector g_tau = c.attention[j] * g_agg;
    Vector g_rho = Vector::Zero(d);
    const double c1 = g_logit[j] * p.omega[0];
    g_anchor += c1 * rho.cwiseProduct(tau);
    g_rho += c1 * anchor.cwiseProduct(tau);
    g_tau += c1 * anchor.cwiseProduct(rho);
    const double c2 = g_logit[j] * p.omega[1];
    g_ctx.relation += c2 * cosine_grad(ctx.relation, rho);
    g_rho += c2 * cosine_grad(rho, ctx.relation);
    const double c3 = g_logit[j] * p.omega[2];
    g_ent_ref += c3 * cosine_grad(ent_ref, tau);
    g_tau += c3 * cosine_grad(tau, ent_ref);
    acc.entity(n.tail, g_tau);
    acc.relation(n.relation, g_rho);
  }
}

}  // namespace

double accumulate_gradients(const Statement& s, const KnowledgeGraph& kg, const EmbeddingTable& emb,
                            const LescParams& p, const ModelConfig& cfg, const LossConfig& loss, double weight,
                            Gradients& grads) {
  const Verification ver = verify_statement(s, kg, emb, p, cfg);
  const ForwardTrace& tr = ver.trace;
  const double objective = statement_objective(tr, s, loss);
  const int d = cfg.dim;
  const auto n = static_cast<Eigen::Index>(s.claims.size());
  LescParams& gp = grads.params;
  const Accumulator acc{emb, weight, grads};

  // Verifier MLP.
  const double y = s.label ? 1.0 : -1.0;
  const double g_logit = logistic_grad(tr.s_y, y) * tr.s_y * (1.0 - tr.s_y);
  gp.verifier_w2 += weight * g_logit * tr.hidden;
  const Vector g_hpre = (g_logit * p.verifier_w2).cwiseProduct((1.0 - tr.hidden.array().square()).matrix());
  gp.verifier_w1.noalias() += weight * g_hpre * tr.verifier_in.transpose();
  gp.verifier_b += weight * g_hpre;
  const Vector g_x = p.verifier_w1.transpose() * g_hpre;
  const Vector g_global = g_x.segment(1, 2 * d);
  const Vector g_local = g_x.segment(1 + 2 * d, 2 * d * cfg.heads);

  // Claim scores: min routing plus the per-claim loss.
  Vector g_scores = Vector::Zero(n);
  g_scores[tr.min_index] += g_x[0];
  if (loss.use_claim_labels && loss.lambda1 != 0.0) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const bool yi = k < s.claim_labels.size() ? s.claim_labels[k] : s.label;
      g_scores[i] += loss.lambda1 * logistic_grad(tr.claim_scores[i], yi ? 1.0 : -1.0);
    }
  }

  Matrix heads(n, d), rels(n, d), tails(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Triple& t = s.claims[static_cast<std::size_t>(i)];
    if (cfg.use_enhancement) {
      heads.row(i) = tr.heads[static_cast<std::size_t>(i)].enhanced.transpose();
      tails.row(i) = tr.tails[static_cast<std::size_t>(i)].enhanced.transpose();
    } else {
      heads.row(i) = emb.entity(t.head).transpose();
      tails.row(i) = emb.entity(t.tail).transpose();
    }
    rels.row(i) = emb.relation(t.relation).transpose();
  }
  Matrix g_heads(n, d), g_rels(n, d), g_tails(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    g_heads.row(i) = g_scores[i] * rels.row(i).cwiseProduct(tails.row(i));
    g_rels.row(i) = g_scores[i] * heads.row(i).cwiseProduct(tails.row(i));
    g_tails.row(i) = g_scores[i] * heads.row(i).cwiseProduct(rels.row(i));
  }

  if (cfg.uses_graph()) {
    Matrix g_vout = Matrix::Zero(n, d);
    if (cfg.use_global) g_vout += readout_backward(tr.v_out, g_global);
    if (cfg.use_local) {
      std::vector<Vector> centered;
      for (const auto& h : tr.attention_heads) centered.push_back((h.scores.array() - h.scores.mean()).matrix());
      const double hsic_scale =
          n >= 2 && cfg.heads >= 2 ? loss.lambda2 * 2.0 / static_cast<double>((n - 1) * (n - 1)) : 0.0;
      for (int a = 0; a < cfg.heads; ++a) {
        const HeadTrace& h = tr.attention_heads[static_cast<std::size_t>(a)];
        const Matrix g_sel = readout_backward(h.topk.selected, g_local.segment(2 * d * a, 2 * d));
        Vector g_z = Vector::Zero(n);
        for (std::size_t q = 0; q < h.topk.index.size(); ++q) {
          const Eigen::Index i = h.topk.index[q];
          const auto row = static_cast<Eigen::Index>(q);
          g_vout.row(i) += h.scores[i] * g_sel.row(row);
          g_z[i] += tr.v_out.row(i).dot(g_sel.row(row));
        }
        if (hsic_scale != 0.0) {
          for (int b = 0; b < cfg.heads; ++b) {
            if (b == a) continue;
            const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
            g_z += hsic_scale * centered[ua].dot(centered[ub]) * centered[ub];
          }
        }
        const Vector g_pre = g_z.cwiseProduct((1.0 - h.scores.array().square()).matrix());
        gp.attention[static_cast<std::size_t>(a)] += weight * h.operator_v.transpose() * g_pre;
        const Matrix g_opv = g_pre * p.attention[static_cast<std::size_t>(a)].transpose();
        g_vout.noalias() += tr.attention_op.transpose() * g_opv;
      }
    }
    const Matrix g_gcn_pre = g_vout.cwiseProduct((tr.gcn_pre.array() > 0.0).cast<double>().matrix());
    gp.gcn_weight.noalias() += weight * g_gcn_pre.transpose() * tr.propagated;
    gp.gcn_bias += weight * g_gcn_pre.colwise().sum().transpose();
    const Matrix g_vin = tr.graph.propagation.transpose() * (g_gcn_pre * p.gcn_weight);
    const Matrix g_enc = g_vin.cwiseProduct((tr.enc_pre.array() > 0.0).cast<double>().matrix());
    gp.encoder.filter[0] += weight * g_enc.cwiseProduct(heads).sum();
    gp.encoder.filter[1] += weight * g_enc.cwiseProduct(rels).sum();
    gp.encoder.filter[2] += weight * g_enc.cwiseProduct(tails).sum();
    gp.encoder.bias += weight * g_enc.sum();
    g_heads += p.encoder.filter[0] * g_enc;
    g_rels += p.encoder.filter[1] * g_enc;
    g_tails += p.encoder.filter[2] * g_enc;
  }

  ContextGrad g_ctx{Vector::Zero(d), Vector::Zero(d), Vector::Zero(d)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const Triple& t = s.claims[k];
    if (cfg.use_enhancement) {
      enhance_backward(tr.heads[k], g_heads.row(i).transpose(), tr.context, p.enhancement, gp.enhancement, acc, g_ctx);
      enhance_backward(tr.tails[k], g_tails.row(i).transpose(), tr.context, p.enhancement, gp.enhancement, acc, g_ctx);
    } else {
      acc.entity(t.head, g_heads.row(i).transpose());
      acc.entity(t.tail, g_tails.row(i).transpose());
    }
    acc.relation(t.relation, g_rels.row(i).transpose());
  }
  if (cfg.use_enhancement) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (const auto& t : s.claims) {
      acc.entity(t.head, inv_n * g_ctx.head);
      acc.relation(t.relation, inv_n * g_ctx.relation);
      acc.entity(t.tail, inv_n * g_ctx.tail);
    }
  }
  return objective;
}

void collect_embedding_rows(const Statement& s, const KnowledgeGraph& kg, const ModelConfig& cfg,
                            std::vector<std::uint32_t>& entity_rows, std::vector<std::uint32_t>& relation_rows) {
  for (const auto& t : s.claims) {
    entity_rows.push_back(index(t.head));
    entity_rows.push_back(index(t.tail));
    relation_rows.push_back(index(t.relation));
    if (!cfg.use_enhancement) continue;
    for (EntityId e : {t.head, t.tail}) {
      for (const auto& nb : kg.neighbors(e)) {
        entity_rows.push_back(index(nb.tail));
        relation_rows.push_back(index(nb.relation));
      }
    }
  }
}

namespace {

void unique_sort(std::vector<std::uint32_t>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

double l2_penalty(std::span<const Statement> batch, const KnowledgeGraph& kg, const EmbeddingTable& emb,
                  const LescParams& p, const ModelConfig& cfg, const RegularizationConfig& reg, Gradients* grads) {
  if (reg.l2 == 0.0) return 0.0;
  double total = 0.0;
  LescParams& mp = const_cast<LescParams&>(p);  // views are only read here
  auto views = parameter_views(mp);
  std::vector<ParamView> gviews;
  if (grads) gviews = parameter_views(grads->params);
  for (std::size_t v = 0; v < views.size(); ++v) {
    if (!is_trainable(views[v].name, cfg)) continue;
    for (std::size_t i = 0; i < views[v].values.size(); ++i) {
      const double x = views[v].values[i];
      total += reg.l2 * x * x;
      if (grads) gviews[v].values[i] += 2.0 * reg.l2 * x;
    }
  }
  if (reg.embeddings) {
    std::vector<std::uint32_t> ents, rels;
    for (const auto& s : batch) collect_embedding_rows(s, kg, cfg, ents, rels);
    unique_sort(ents);
    unique_sort(rels);
    for (auto e : ents) {
      const auto row = EmbeddingTable::row(emb.entities, e);
      total += reg.l2 * row.squaredNorm();
      if (grads) accumulate_row(grads->entities, e, 2.0 * reg.l2 * row);
    }
    for (auto r : rels) {
      const auto row = EmbeddingTable::row(emb.relations, r);
      total += reg.l2 * row.squaredNorm();
      if (grads) accumulate_row(grads->relations, r, 2.0 * reg.l2 * row);
    }
  }
  return total;
}

}  // namespace

double total_loss(std::span<const Statement> batch, const KnowledgeGraph& kg, const EmbeddingTable& emb,
                  const LescParams& p, const ModelConfig& cfg, const LossConfig& loss,
                  const RegularizationConfig& reg) {
  if (batch.empty()) throw Error("loss of an empty batch");
  double sum = 0.0;
  for (const auto& s : batch) sum += statement_objective(verify_statement(s, kg, emb, p, cfg).trace, s, loss);
  return sum / static_cast<double>(batch.size()) + l2_penalty(batch, kg, emb, p, cfg, reg, nullptr);
}

BatchGradients batch_gradients(std::span<const Statement> batch, const KnowledgeGraph& kg, const EmbeddingTable& emb,
                               const LescParams& p, const ModelConfig& cfg, const LossConfig& loss,
                               const RegularizationConfig& reg) {
  if (batch.empty()) throw Error("gradient of an empty batch");
  BatchGradients out{0.0, zero_gradients(p)};
  const double w = 1.0 / static_cast<double>(batch.size());
  for (const auto& s : batch) out.loss += w * accumulate_gradients(s, kg, emb, p, cfg, loss, w, out.grads);
  out.loss += l2_penalty(batch, kg, emb, p, cfg, reg, &out.grads);
  return out;
}

}  // namespace lesc
