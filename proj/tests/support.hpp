#pragma once

// Random instance builders and independent reference implementations used by
// the unit, property and acceptance tests. Nothing here calls the library's
// own versions of the operations it checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "lesc/claimgen.hpp"
#include "lesc/kgstore.hpp"
#include "lesc/model.hpp"
#include "lesc/scoring.hpp"

namespace lesc::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Random graph over `entities` named n0.. with `relations` named p0.., each
// entity given at least one outgoing edge.
inline KnowledgeGraph random_kg(std::mt19937_64& rng, int entities, int relations, int triples) {
  KnowledgeGraph::Builder b;
  for (int e = 0; e < entities; ++e) b.add_entity("n" + std::to_string(e));
  for (int r = 0; r < relations; ++r) b.add_relation("p" + std::to_string(r));
  auto add = [&](int h) {
    int t = uniform_int(rng, 0, entities - 2);
    if (t >= h) ++t;
    b.add("n" + std::to_string(h), "p" + std::to_string(uniform_int(rng, 0, relations - 1)), "n" + std::to_string(t));
  };
  for (int e = 0; e < entities; ++e) add(e);
  while (static_cast<int>(b.triple_count()) < triples) add(uniform_int(rng, 0, entities - 1));
  return std::move(b).build();
}

inline EmbeddingTable random_table(std::mt19937_64& rng, const KnowledgeGraph& kg, int dim, double scale = 0.8) {
  EmbeddingTable t;
  t.entities.resize(static_cast<Eigen::Index>(kg.entity_count()), dim);
  t.relations.resize(static_cast<Eigen::Index>(kg.relation_count()), dim);
  std::normal_distribution<double> n(0.0, scale);
  for (Eigen::Index i = 0; i < t.entities.size(); ++i) t.entities.data()[i] = n(rng);
  for (Eigen::Index i = 0; i < t.relations.size(); ++i) t.relations.data()[i] = n(rng);
  return t;
}

// Parameters with every block away from its special initial values so all
// gradient paths carry signal.
inline LescParams random_params(std::mt19937_64& rng, const ModelConfig& cfg) {
  LescParams p = init_lesc_params(cfg, rng);
  for (auto& v : parameter_views(p)) {
    for (double& x : v.values) x += uniform(rng, -0.3, 0.3);
  }
  p.encoder.bias = uniform(rng, 0.05, 0.3);
  return p;
}

// N claims drawn from graph triples, random statement and claim labels.
inline Statement random_statement(std::mt19937_64& rng, const KnowledgeGraph& kg, int n) {
  Statement s;
  s.id = "t";
  const auto& all = kg.triples();
  while (static_cast<int>(s.claims.size()) < n) {
    const Triple& t = all[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(all.size()) - 1))];
    if (std::find(s.claims.begin(), s.claims.end(), t) == s.claims.end()) s.claims.push_back(t);
  }
  s.label = uniform_int(rng, 0, 1) == 1;
  for (int i = 0; i < n; ++i) s.claim_labels.push_back(uniform_int(rng, 0, 1) == 1);
  return s;
}

// ---------------------------------------------------------------------------
// Reference implementations.

// Adjacency by scanning every ordered pair and every entity slot.
inline std::vector<std::vector<int>> brute_adjacency(const std::vector<Triple>& claims) {
  const std::size_t n = claims.size();
  std::vector<std::vector<int>> a(n, std::vector<int>(n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const EntityId ei[2] = {claims[i].head, claims[i].tail};
      const EntityId ej[2] = {claims[j].head, claims[j].tail};
      bool shared = false;
      for (EntityId x : ei) {
        for (EntityId y : ej) shared = shared || x == y;
      }
      a[i][j] = shared ? 1 : 0;
    }
  }
  return a;
}

// Triple-loop product plus sum.
inline std::vector<std::vector<long>> brute_a_plus_a2(const std::vector<std::vector<int>>& a) {
  const std::size_t n = a.size();
  std::vector<std::vector<long>> out(n, std::vector<long>(n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      long sq = 0;
      for (std::size_t k = 0; k < n; ++k) sq += static_cast<long>(a[i][k]) * a[k][j];
      out[i][j] = a[i][j] + sq;
    }
  }
  return out;
}

inline std::vector<double> brute_readout(const std::vector<std::vector<double>>& rows) {
  const std::size_t d = rows.front().size();
  std::vector<double> mean(d, 0.0), mx(d, -HUGE_VAL);
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < d; ++j) {
      mean[j] += r[j];
      if (r[j] > mx[j]) mx[j] = r[j];
    }
  }
  for (double& m : mean) m /= static_cast<double>(rows.size());
  mean.insert(mean.end(), mx.begin(), mx.end());
  return mean;
}

// Repeated extraction of the maximum: highest score, lowest index on ties.
inline std::vector<std::size_t> brute_topk(const std::vector<double>& scores, int k) {
  std::vector<bool> used(scores.size(), false);
  std::vector<std::size_t> out;
  for (int r = 0; r < k && out.size() < scores.size(); ++r) {
    std::size_t best = scores.size();
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (used[i]) continue;
      if (best == scores.size() || scores[i] > scores[best]) best = i;
    }
    used[best] = true;
    out.push_back(best);
  }
  return out;
}

// HSIC through explicit N x N kernel and centering matrices: tr(R K_a R K_b).
inline double brute_hsic(const std::vector<std::vector<double>>& z) {
  if (z.size() < 2) return 0.0;
  const std::size_t n = z.front().size();
  if (n < 2) return 0.0;
  auto kernel = [&](const std::vector<double>& v) {
    std::vector<std::vector<double>> k(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) k[i][j] = v[i] * v[j];
    }
    return k;
  };
  auto mul = [&](const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
    std::vector<std::vector<double>> c(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < n; ++j) c[i][j] += a[i][k] * b[k][j];
      }
    }
    return c;
  };
  std::vector<std::vector<double>> r(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) r[i][j] = (i == j ? 1.0 : 0.0) - 1.0 / static_cast<double>(n);
  }
  double total = 0.0;
  for (std::size_t a = 0; a < z.size(); ++a) {
    for (std::size_t b = a + 1; b < z.size(); ++b) {
      const auto m = mul(mul(r, kernel(z[a])), mul(r, kernel(z[b])));
      double tr = 0.0;
      for (std::size_t i = 0; i < n; ++i) tr += m[i][i];
      total += tr / static_cast<double>((n - 1) * (n - 1));
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Central finite differences of total_loss.

struct GradCheck {
  double rel_error = 0.0;      // |analytic - numeric| / (|analytic| + |numeric|) over all checked coordinates
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;     // coordinates whose +-h evaluations changed the discrete structure
};

inline GradCheck finite_difference_check(const std::vector<Statement>& batch, const KnowledgeGraph& kg,
                                         const EmbeddingTable& emb, const LescParams& p, const ModelConfig& cfg,
                                         const LossConfig& loss, const RegularizationConfig& reg,
                                         double h = 1e-6) {
  const BatchGradients analytic = batch_gradients(batch, kg, emb, p, cfg, loss, reg);
  auto structure = [&](const EmbeddingTable& e, const LescParams& q) {
    std::vector<int> out;
    for (const auto& s : batch) {
      const auto st = verify_statement(s, kg, e, q, cfg).trace.structure();
      out.insert(out.end(), st.begin(), st.end());
    }
    return out;
  };
  const auto base_structure = structure(emb, p);

  std::vector<double> a_all, n_all;
  GradCheck out;
  auto probe = [&](double& slot, const EmbeddingTable& e, const LescParams& q, double analytic_value) {
    const double saved = slot;
    slot = saved + h;
    const double up = total_loss(batch, kg, e, q, cfg, loss, reg);
    const bool same_up = structure(e, q) == base_structure;
    slot = saved - h;
    const double down = total_loss(batch, kg, e, q, cfg, loss, reg);
    const bool same_down = structure(e, q) == base_structure;
    slot = saved;
    if (!same_up || !same_down) {
      ++out.skipped;
      return;
    }
    const double numeric = (up - down) / (2.0 * h);
    a_all.push_back(analytic_value);
    n_all.push_back(numeric);
    out.max_abs_error = std::max(out.max_abs_error, std::abs(analytic_value - numeric));
    ++out.checked;
  };

  LescParams q = p;
  EmbeddingTable e = emb;
  LescParams g = analytic.grads.params;
  auto qviews = parameter_views(q);
  auto gviews = parameter_views(g);
  for (std::size_t v = 0; v < qviews.size(); ++v) {
    if (!is_trainable(qviews[v].name, cfg)) continue;
    for (std::size_t i = 0; i < qviews[v].values.size(); ++i) probe(qviews[v].values[i], e, q, gviews[v].values[i]);
  }
  std::vector<std::uint32_t> ents, rels;
  for (const auto& s : batch) collect_embedding_rows(s, kg, cfg, ents, rels);
  std::sort(ents.begin(), ents.end());
  ents.erase(std::unique(ents.begin(), ents.end()), ents.end());
  std::sort(rels.begin(), rels.end());
  rels.erase(std::unique(rels.begin(), rels.end()), rels.end());
  for (auto row : ents) {
    const auto it = analytic.grads.entities.find(row);
    for (Eigen::Index j = 0; j < e.entities.cols(); ++j) {
      probe(e.entities(row, j), e, q, it == analytic.grads.entities.end() ? 0.0 : it->second[j]);
    }
  }
  for (auto row : rels) {
    const auto it = analytic.grads.relations.find(row);
    for (Eigen::Index j = 0; j < e.relations.cols(); ++j) {
      probe(e.relations(row, j), e, q, it == analytic.grads.relations.end() ? 0.0 : it->second[j]);
    }
  }
  double diff = 0.0, norm_a = 0.0, norm_n = 0.0;
  for (std::size_t i = 0; i < a_all.size(); ++i) {
    diff += (a_all[i] - n_all[i]) * (a_all[i] - n_all[i]);
    norm_a += a_all[i] * a_all[i];
    norm_n += n_all[i] * n_all[i];
  }
  const double denom = std::sqrt(norm_a) + std::sqrt(norm_n);
  out.rel_error = denom > 0.0 ? std::sqrt(diff) / denom : 0.0;
  return out;
}

}  // namespace lesc::testing
