#include "lesc/transe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lesc/error.hpp"
#include "lesc/optim.hpp"

namespace lesc {

namespace {

void normalize_row(RowMatrix& m, std::uint32_t i) {
  const double n = m.row(i).norm();
  if (n > 1e-12) m.row(i) /= n;
}

}  // namespace

TransEResult train_transe(const KnowledgeGraph& kg, const TransEConfig& cfg, std::mt19937_64& rng) {
  if (kg.empty()) throw Error("transe: empty graph");
  if (cfg.dim < 1 || cfg.epochs < 0 || cfg.batch_size == 0 || !(cfg.learning_rate > 0.0)) {
    throw Error("transe: invalid configuration");
  }
  TransEResult out;
  out.table = init_embeddings(kg.entity_count(), kg.relation_count(), cfg.dim, rng);
  for (std::uint32_t e = 0; e < kg.entity_count(); ++e) normalize_row(out.table.entities, e);
  for (std::uint32_t r = 0; r < kg.relation_count(); ++r) normalize_row(out.table.relations, r);

  AdaGrad opt(cfg.learning_rate);
  const auto ent_slot = opt.add_table("transe.entities", kg.entity_count(), static_cast<std::size_t>(cfg.dim));
  const auto rel_slot = opt.add_table("transe.relations", kg.relation_count(), static_cast<std::size_t>(cfg.dim));

  std::vector<std::size_t> order(kg.triples().size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      SparseRows g_ent, g_rel;
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        const Triple& pos = kg.triples()[order[i]];
        const Triple neg = corrupt_triple(kg, pos, rng);
        const Vector dp = out.table.entity(pos.head) + out.table.relation(pos.relation) - out.table.entity(pos.tail);
        const Vector dn = out.table.entity(neg.head) + out.table.relation(neg.relation) - out.table.entity(neg.tail);
        const double np = dp.norm();
        const double nn = dn.norm();
        const double loss = cfg.margin + np - nn;
        if (loss <= 0.0) continue;
        total += loss;
        const Vector up = np > 1e-12 ? Vector(inv * dp / np) : Vector::Zero(cfg.dim);
        const Vector un = nn > 1e-12 ? Vector(inv * dn / nn) : Vector::Zero(cfg.dim);
        accumulate_row(g_ent, index(pos.head), up);
        accumulate_row(g_ent, index(pos.tail), -up);
        accumulate_row(g_rel, index(pos.relation), up);
        accumulate_row(g_ent, index(neg.head), -un);
        accumulate_row(g_ent, index(neg.tail), un);
        accumulate_row(g_rel, index(neg.relation), -un);
      }
      opt.step_rows(ent_slot, out.table.entities, g_ent);
      opt.step_rows(rel_slot, out.table.relations, g_rel);
      for (const auto& [row, g] : g_ent) normalize_row(out.table.entities, row);
    }
    if (!std::isfinite(total)) throw TrainingError("transe: loss diverged at epoch " + std::to_string(epoch));
    out.epoch_loss.push_back(total / static_cast<double>(order.size()));
  }
  return out;
}

double transe_plausibility(const EmbeddingTable& table, const Triple& t) {
  return -(table.entity(t.head) + table.relation(t.relation) - table.entity(t.tail)).norm();
}

double transe_statement_score(const EmbeddingTable& table, const Statement& s, Aggregation agg) {
  if (s.claims.empty()) throw Error("statement '" + s.id + "' has no claims");
  double lowest = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < s.claims.size(); ++i) {
    const double v = transe_plausibility(table, s.claims[i]);
    lowest = i == 0 ? v : std::min(lowest, v);
    sum += v;
  }
  return agg == Aggregation::kMin ? lowest : sum / static_cast<double>(s.claims.size());
}

std::vector<double> transe_statement_scores(const EmbeddingTable& table, std::span<const Statement> statements,
                                            Aggregation agg) {
  std::vector<double> out;
  out.reserve(statements.size());
  for (const auto& s : statements) out.push_back(transe_statement_score(table, s, agg));
  return out;
}

}  // namespace lesc
