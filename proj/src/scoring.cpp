#include "lesc/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "lesc/error.hpp"
#include "lesc/metrics.hpp"
#include "lesc/numeric.hpp"
#include "lesc/optim.hpp"

namespace lesc {

using json = nlohmann::json;

namespace {

double init_bound(int dim) { return 6.0 / std::sqrt(static_cast<double>(dim)); }

void fill_uniform(std::span<double> values, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (double& v : values) v = u(rng);
}

void check_finite(double loss, const char* what, int epoch) {
  if (!std::isfinite(loss)) {
    throw TrainingError(std::string(what) + ": non-finite loss at epoch " + std::to_string(epoch));
  }
}

// L2 on rows touched this batch; returns the penalty and adds its gradient.
double l2_rows(const RowMatrix& m, SparseRows& grads, double coeff) {
  if (coeff == 0.0) return 0.0;
  double penalty = 0.0;
  for (auto& [row, g] : grads) {
    const auto r = EmbeddingTable::row(m, row);
    penalty += coeff * r.squaredNorm();
    g += 2.0 * coeff * r;
  }
  return penalty;
}

}  // namespace

EmbeddingTable init_embeddings(std::size_t entities, std::size_t relations, int dim, std::mt19937_64& rng) {
  if (dim < 1) throw DimensionError("embedding dimension must be >= 1");
  EmbeddingTable t;
  t.entities.resize(static_cast<Eigen::Index>(entities), dim);
  t.relations.resize(static_cast<Eigen::Index>(relations), dim);
  fill_uniform(as_span(t.entities), init_bound(dim), rng);
  fill_uniform(as_span(t.relations), init_bound(dim), rng);
  return t;
}

void check_table(const EmbeddingTable& table, const KnowledgeGraph& kg) {
  if (static_cast<std::size_t>(table.entities.rows()) != kg.entity_count() ||
      static_cast<std::size_t>(table.relations.rows()) != kg.relation_count() ||
      table.entities.cols() != table.relations.cols()) {
    throw DimensionError("embedding table shape does not match the knowledge graph");
  }
  if (!table.entities.allFinite() || !table.relations.allFinite()) throw Error("embedding table has non-finite entries");
}

std::uint64_t table_hash(const EmbeddingTable& table) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const RowMatrix& m) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(m.size()) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  mix(table.entities);
  mix(table.relations);
  return h;
}

double distmult_score(const VecRef& h, const VecRef& r, const VecRef& t) {
  if (h.size() != r.size() || h.size() != t.size()) {
    throw DimensionError("distmult_score: dimensions " + std::to_string(h.size()) + "/" + std::to_string(r.size()) +
                         "/" + std::to_string(t.size()));
  }
  return (h.array() * r.array() * t.array()).sum();
}

ClaimEncoderParams init_claim_encoder(int dim, std::mt19937_64& rng) {
  ClaimEncoderParams p;
  fill_uniform({p.filter.data(), 3}, init_bound(dim), rng);
  p.bias = 0.0;
  return p;
}

Vector encode_claim(const VecRef& h, const VecRef& r, const VecRef& t, const ClaimEncoderParams& p) {
  if (h.size() != r.size() || h.size() != t.size()) throw DimensionError("encode_claim: dimension mismatch");
  return ((p.filter[0] * h + p.filter[1] * r + p.filter[2] * t).array() + p.bias).cwiseMax(0.0).matrix();
}

PretrainResult pretrain_embeddings(const KnowledgeGraph& kg, const PretrainConfig& cfg, std::mt19937_64& rng,
                                   const EmbeddingTable* initial) {
  if (kg.empty()) throw Error("pretrain_embeddings: empty graph");
  PretrainResult out;
  out.table = initial ? *initial : init_embeddings(kg.entity_count(), kg.relation_count(), cfg.dim, rng);
  check_table(out.table, kg);
  EmbeddingTable& tab = out.table;
  const int d = tab.dim();

  AdaGrad opt(cfg.learning_rate);
  const auto ent_slot = opt.add_table("entity_embeddings", kg.entity_count(), static_cast<std::size_t>(d));
  const auto rel_slot = opt.add_table("relation_embeddings", kg.relation_count(), static_cast<std::size_t>(d));

  std::vector<std::size_t> order(kg.triples().size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    std::size_t epoch_samples = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      SparseRows ge, gr;
      double loss = 0.0;
      std::size_t samples = 0;
      auto add_sample = [&](const Triple& t, double y) {
        const auto h = tab.entity(t.head);
        const auto r = tab.relation(t.relation);
        const auto tl = tab.entity(t.tail);
        const double s = distmult_score(h, r, tl);
        loss += logistic_loss(s, y);
        const double g = logistic_grad(s, y);
        accumulate_row(ge, index(t.head), g * r.cwiseProduct(tl));
        accumulate_row(gr, index(t.relation), g * h.cwiseProduct(tl));
        accumulate_row(ge, index(t.tail), g * h.cwiseProduct(r));
        ++samples;
      };
      for (std::size_t i = start; i < stop; ++i) {
        const Triple& t = kg.triples()[order[i]];
        add_sample(t, 1.0);
        for (int k = 0; k < cfg.negatives_per_positive; ++k) add_sample(corrupt_triple(kg, t, rng), -1.0);
      }
      const double inv = 1.0 / static_cast<double>(samples);
      for (auto& [_, g] : ge) g *= inv;
      for (auto& [_, g] : gr) g *= inv;
      loss *= inv;
      loss += l2_rows(tab.entities, ge, cfg.l2) + l2_rows(tab.relations, gr, cfg.l2);
      check_finite(loss, "pretrain_embeddings", epoch);
      opt.step_rows(ent_slot, tab.entities, ge);
      opt.step_rows(rel_slot, tab.relations, gr);
      epoch_sum += loss * static_cast<double>(samples);
      epoch_samples += samples;
    }
    out.epoch_loss.push_back(epoch_sum / static_cast<double>(epoch_samples));
  }
  return out;
}

double distmult_auc(const KnowledgeGraph& kg, const EmbeddingTable& table, std::span<const Triple> positives,
                    std::mt19937_64& rng) {
  std::vector<double> pos, neg;
  for (const Triple& t : positives) {
    pos.push_back(distmult_score(table.entity(t.head), table.relation(t.relation), table.entity(t.tail)));
    const Triple c = corrupt_triple(kg, t, rng);
    neg.push_back(distmult_score(table.entity(c.head), table.relation(c.relation), table.entity(c.tail)));
  }
  return roc_auc(pos, neg);
}

namespace {

struct EncoderGrad {
  Eigen::Vector3d filter = Eigen::Vector3d::Zero();
  double bias = 0.0;
  Vector readout;
};

double encoder_score(const EmbeddingTable& tab, const Triple& t, const ClaimEncoderParams& p, const Vector& w) {
  return w.dot(encode_claim(tab.entity(t.head), tab.relation(t.relation), tab.entity(t.tail), p));
}

}  // namespace

EncoderPretrainResult pretrain_claim_encoder(const KnowledgeGraph& kg, const EmbeddingTable& table,
                                             const PretrainConfig& cfg, std::mt19937_64& rng,
                                             const ClaimEncoderParams& initial) {
  check_table(table, kg);
  const int d = table.dim();
  EncoderPretrainResult out;
  out.params = initial;
  out.readout.resize(d);
  fill_uniform(as_span(out.readout), 1.0 / std::sqrt(static_cast<double>(d)), rng);

  AdaGrad opt(cfg.learning_rate);
  const auto filter_slot = opt.add_slot("encoder.filter", 3);
  const auto bias_slot = opt.add_slot("encoder.bias", 1);
  const auto w_slot = opt.add_slot("encoder.readout", static_cast<std::size_t>(d));

  std::vector<std::size_t> order(kg.triples().size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    std::size_t epoch_samples = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      EncoderGrad g;
      g.readout = Vector::Zero(d);
      double loss = 0.0;
      std::size_t samples = 0;
      auto add_sample = [&](const Triple& t, double y) {
        const auto h = table.entity(t.head);
        const auto r = table.relation(t.relation);
        const auto tl = table.entity(t.tail);
        const Vector pre = (out.params.filter[0] * h + out.params.filter[1] * r + out.params.filter[2] * tl).array() +
                           out.params.bias;
        const Vector v = pre.cwiseMax(0.0);
        const double s = out.readout.dot(v);
        loss += logistic_loss(s, y);
        const double gs = logistic_grad(s, y);
        g.readout += gs * v;
        const Vector gpre = (pre.array() > 0.0).select(gs * out.readout, 0.0);
        g.filter[0] += gpre.dot(h);
        g.filter[1] += gpre.dot(r);
        g.filter[2] += gpre.dot(tl);
        g.bias += gpre.sum();
        ++samples;
      };
      for (std::size_t i = start; i < stop; ++i) {
        const Triple& t = kg.triples()[order[i]];
        add_sample(t, 1.0);
        for (int k = 0; k < cfg.negatives_per_positive; ++k) add_sample(corrupt_triple(kg, t, rng), -1.0);
      }
      const double inv = 1.0 / static_cast<double>(samples);
      g.filter *= inv;
      g.bias *= inv;
      g.readout *= inv;
      loss *= inv;
      loss += cfg.l2 * (out.params.filter.squaredNorm() + out.readout.squaredNorm());
      g.filter += 2.0 * cfg.l2 * out.params.filter;
      g.readout += 2.0 * cfg.l2 * out.readout;
      check_finite(loss, "pretrain_claim_encoder", epoch);
      opt.step(filter_slot, {out.params.filter.data(), 3}, {g.filter.data(), 3});
      opt.step(bias_slot, {&out.params.bias, 1}, {&g.bias, 1});
      opt.step(w_slot, as_span(out.readout), {g.readout.data(), static_cast<std::size_t>(d)});
      epoch_sum += loss * static_cast<double>(samples);
      epoch_samples += samples;
    }
    out.epoch_loss.push_back(epoch_sum / static_cast<double>(epoch_samples));
  }
  return out;
}

double encoder_auc(const KnowledgeGraph& kg, const EmbeddingTable& table, const ClaimEncoderParams& p,
                   const Vector& readout, std::span<const Triple> positives, std::mt19937_64& rng) {
  std::vector<double> pos, neg;
  for (const Triple& t : positives) {
    pos.push_back(encoder_score(table, t, p, readout));
    neg.push_back(encoder_score(table, corrupt_triple(kg, t, rng), p, readout));
  }
  return roc_auc(pos, neg);
}

void save_embeddings(const EmbeddingTable& table, const KnowledgeGraph& kg, const std::filesystem::path& path) {
  check_table(table, kg);
  json j;
  j["format"] = "lesc-embeddings";
  j["version"] = 1;
  j["dim"] = table.dim();
  j["entities"] = table.entities.rows();
  j["relations"] = table.relations.rows();
  j["vocabulary_hash"] = to_hex(kg.vocabulary_hash());
  j["entity_vectors"] = std::vector<double>(table.entities.data(), table.entities.data() + table.entities.size());
  j["relation_vectors"] =
      std::vector<double>(table.relations.data(), table.relations.data() + table.relations.size());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write embedding file " + path.string());
  out << j.dump() << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, const KnowledgeGraph& kg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embedding file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("malformed embedding file " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "lesc-embeddings") throw Error(path.string() + " is not an embedding file");
  if (j.at("vocabulary_hash").get<std::string>() != to_hex(kg.vocabulary_hash())) {
    throw VocabularyError("embedding file " + path.string() + " was built for a different vocabulary");
  }
  const int d = j.at("dim").get<int>();
  const auto ne = j.at("entities").get<Eigen::Index>();
  const auto nr = j.at("relations").get<Eigen::Index>();
  const auto ev = j.at("entity_vectors").get<std::vector<double>>();
  const auto rv = j.at("relation_vectors").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(ev.size()) != ne * d || static_cast<Eigen::Index>(rv.size()) != nr * d) {
    throw DimensionError("embedding file " + path.string() + " has inconsistent matrix sizes");
  }
  EmbeddingTable t;
  t.entities = Eigen::Map<const RowMatrix>(ev.data(), ne, d);
  t.relations = Eigen::Map<const RowMatrix>(rv.data(), nr, d);
  check_table(t, kg);
  return t;
}

}  // namespace lesc
