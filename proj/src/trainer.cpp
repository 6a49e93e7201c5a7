#include "lesc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>

#include <json.hpp>

#include "lesc/error.hpp"
#include "lesc/metrics.hpp"
#include "lesc/optim.hpp"

namespace lesc {

using json = nlohmann::ordered_json;

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::kFull:
      return "full";
    case Ablation::kNoLt:
      return "no_Lt";
    case Ablation::kNoLd:
      return "no_Ld";
    case Ablation::kNoLE:
      return "no_LE";
    case Ablation::kNoGSL:
      return "no_GSL";
    case Ablation::kNoLSL:
      return "no_LSL";
    case Ablation::kNoGSLLSL:
      return "no_GSL_LSL";
  }
  return "?";
}

const std::vector<Ablation>& all_ablations() {
  static const std::vector<Ablation> all{Ablation::kFull,  Ablation::kNoLt,  Ablation::kNoLd,    Ablation::kNoLE,
                                         Ablation::kNoGSL, Ablation::kNoLSL, Ablation::kNoGSLLSL};
  return all;
}

Ablation parse_ablation(const std::string& s) {
  for (Ablation a : all_ablations()) {
    if (to_string(a) == s) return a;
  }
  throw Error("unknown ablation '" + s + "' (expected full, no_Lt, no_Ld, no_LE, no_GSL, no_LSL or no_GSL_LSL)");
}

void apply_ablation(Ablation a, ModelConfig& model, LossConfig& loss) {
  switch (a) {
    case Ablation::kFull:
      break;
    case Ablation::kNoLt:
      loss.use_claim_labels = false;
      break;
    case Ablation::kNoLd:
      loss.lambda2 = 0.0;
      break;
    case Ablation::kNoLE:
      model.use_enhancement = false;
      break;
    case Ablation::kNoGSL:
      model.use_global = false;
      break;
    case Ablation::kNoLSL:
      model.use_local = false;
      break;
    case Ablation::kNoGSLLSL:
      model.use_global = false;
      model.use_local = false;
      break;
  }
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw Error("train: batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw Error("train: learning_rate must be positive");
  if (epochs < 1) throw Error("train: epochs must be positive");
  if (patience < 0) throw Error("train: patience must be non-negative");
  if (l2_coeff < 0.0 || lambda1 < 0.0 || lambda2 < 0.0) throw Error("train: loss weights must be non-negative");
}

std::string to_json(const EpochRecord& r) {
  json j{{"epoch", r.epoch}, {"mean_loss", r.mean_loss}, {"valid_accuracy", r.valid_accuracy}, {"wall_ms", r.wall_ms}};
  return j.dump();
}

namespace {

struct Labels {
  std::unique_ptr<bool[]> data;
  std::size_t size = 0;

  explicit Labels(std::span<const Statement> statements)
      : data(std::make_unique<bool[]>(statements.size())), size(statements.size()) {
    for (std::size_t i = 0; i < size; ++i) data[i] = statements[i].label;
  }
  std::span<const bool> span() const { return {data.get(), size}; }
  bool both_classes() const {
    const auto pos = std::count(data.get(), data.get() + size, true);
    return pos > 0 && static_cast<std::size_t>(pos) < size;
  }
};

// Optimizer slots for the trainable tensors of one configuration.
struct ParamSlots {
  std::vector<std::size_t> view_index;
  std::vector<std::size_t> slot;
};

}  // namespace

double calibrate_on(std::span<const double> scores, std::span<const Statement> statements, double fallback) {
  const Labels labels(statements);
  if (!labels.both_classes()) return fallback;
  return calibrate_threshold(scores, labels.span());
}

std::vector<double> score_statements(std::span<const Statement> statements, const KnowledgeGraph& kg,
                                     const EmbeddingTable& emb, const LescParams& p, const ModelConfig& model) {
  std::vector<double> out;
  out.reserve(statements.size());
  for (const auto& s : statements) out.push_back(verify_statement(s, kg, emb, p, model).score);
  return out;
}

TrainResult train(std::span<const Statement> train_set, std::span<const Statement> valid_set,
                  const KnowledgeGraph& kg, const EmbeddingTable& emb, const ModelConfig& model,
                  const TrainConfig& cfg, const EpochCallback& on_epoch, const LescParams* initial) {
  cfg.validate();
  if (train_set.empty()) throw Error("train: empty training split");
  TrainResult out;
  out.model = model;
  out.loss = LossConfig{cfg.lambda1, cfg.lambda2, true};
  apply_ablation(cfg.ablation, out.model, out.loss);
  out.model.validate();
  if (emb.dim() != out.model.dim) throw DimensionError("train: embedding dim differs from model dim");

  std::mt19937_64 rng(cfg.seed);
  LescParams params = initial ? *initial : init_lesc_params(out.model, rng);
  check_params(params, out.model);
  if (!out.model.use_enhancement) {
    params.enhancement.head_proj = bypass_projection(out.model.dim);
    params.enhancement.tail_proj = bypass_projection(out.model.dim);
  }
  EmbeddingTable table = emb;

  AdaGrad opt(cfg.learning_rate);
  ParamSlots slots;
  {
    const auto views = parameter_views(params);
    for (std::size_t v = 0; v < views.size(); ++v) {
      if (!is_trainable(views[v].name, out.model)) continue;
      slots.view_index.push_back(v);
      slots.slot.push_back(opt.add_slot(views[v].name, views[v].values.size()));
    }
  }
  const auto ent_table = opt.add_table("embeddings.entities", kg.entity_count(), static_cast<std::size_t>(table.dim()));
  const auto rel_table =
      opt.add_table("embeddings.relations", kg.relation_count(), static_cast<std::size_t>(table.dim()));
  const RegularizationConfig reg{cfg.l2_coeff, cfg.train_embeddings};

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Statement> batch;
  const Labels valid_labels(valid_set);

  double best_accuracy = -1.0;
  int since_best = 0;
  LescParams best_params = params;
  EmbeddingTable best_table = table;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), b + cfg.batch_size);
      batch.clear();
      for (std::size_t i = b; i < stop; ++i) batch.push_back(train_set[order[i]]);
      BatchGradients g = batch_gradients(batch, kg, table, params, out.model, out.loss, reg);
      if (!std::isfinite(g.loss) || g.loss > 1e6) {
        throw TrainingError("training diverged at epoch " + std::to_string(epoch) + " (batch loss " +
                            std::to_string(g.loss) + ")");
      }
      auto pviews = parameter_views(params);
      auto gviews = parameter_views(g.grads.params);
      for (std::size_t k = 0; k < slots.slot.size(); ++k) {
        const std::size_t v = slots.view_index[k];
        opt.step(slots.slot[k], pviews[v].values, gviews[v].values);
      }
      if (cfg.train_embeddings) {
        opt.step_rows(ent_table, table.entities, g.grads.entities);
        opt.step_rows(rel_table, table.relations, g.grads.relations);
      }
      loss_sum += g.loss;
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / static_cast<double>(batches);
    double threshold = 0.5;
    if (!valid_set.empty()) {
      const auto scores = score_statements(valid_set, kg, table, params, out.model);
      if (valid_labels.both_classes()) threshold = calibrate_threshold(scores, valid_labels.span());
      rec.valid_accuracy = accuracy_at(scores, valid_labels.span(), threshold);
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    out.log.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (valid_set.empty() || rec.valid_accuracy > best_accuracy) {
      best_accuracy = rec.valid_accuracy;
      best_params = params;
      best_table = table;
      out.best_epoch = epoch;
      out.threshold = threshold;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  out.params = std::move(best_params);
  out.embeddings = std::move(best_table);
  return out;
}

std::string EvalReport::to_json() const {
  json buckets = json::object();
  for (const auto& [n, b] : per_claim_count) buckets[std::to_string(n)] = {{"accuracy", b.accuracy}, {"count", b.count}};
  json j{{"threshold", threshold}, {"accuracy", accuracy}, {"f1", f1}, {"per_claim_count", std::move(buckets)}};
  return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    EvalReport r;
    r.threshold = j.at("threshold").get<double>();
    r.accuracy = j.at("accuracy").get<double>();
    r.f1 = j.at("f1").get<double>();
    for (const auto& [key, b] : j.at("per_claim_count").items()) {
      r.per_claim_count[std::stoul(key)] = {b.at("accuracy").get<double>(), b.at("count").get<std::size_t>()};
    }
    return r;
  } catch (const json::exception& e) {
    throw ParseError("<report>", 0, e.what());
  }
}

EvalReport report_from_scores(std::span<const double> scores, std::span<const Statement> statements,
                              double threshold, bool positive_is_true) {
  if (statements.empty()) throw Error("evaluate: empty split");
  if (scores.size() != statements.size()) throw DimensionError("evaluate: score count differs from statements");
  if (!std::isfinite(threshold)) throw Error("evaluate: threshold is not finite");
  const Labels labels(statements);
  const BinaryCounts counts = count_predictions(scores, labels.span(), threshold, positive_is_true);
  EvalReport r;
  r.threshold = threshold;
  r.accuracy = counts.accuracy();
  r.f1 = counts.f1();
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> hits;  // claims -> (correct, total)
  for (std::size_t i = 0; i < statements.size(); ++i) {
    auto& h = hits[statements[i].size()];
    h.first += (scores[i] >= threshold) == statements[i].label ? 1 : 0;
    ++h.second;
  }
  for (const auto& [n, h] : hits) {
    r.per_claim_count[n] = {static_cast<double>(h.first) / static_cast<double>(h.second), h.second};
  }
  return r;
}

EvalReport evaluate(std::span<const Statement> statements, const KnowledgeGraph& kg, const EmbeddingTable& emb,
                    const LescParams& p, const ModelConfig& model, double threshold, bool positive_is_true) {
  if (statements.empty()) throw Error("evaluate: empty split");
  const auto scores = score_statements(statements, kg, emb, p, model);
  return report_from_scores(scores, statements, threshold, positive_is_true);
}

EvalReport baseline_min_transe(std::span<const Statement> valid, std::span<const Statement> test,
                               const EmbeddingTable& transe, Aggregation agg) {
  if (test.empty()) throw Error("evaluate: empty split");
  const auto valid_scores = transe_statement_scores(transe, valid, agg);
  const Labels labels(valid);
  if (!labels.both_classes()) throw Error("baseline: validation split needs both classes");
  const double threshold = calibrate_threshold(valid_scores, labels.span());
  return report_from_scores(transe_statement_scores(transe, test, agg), test, threshold);
}

double mean_attention_hsic(std::span<const Statement> statements, const KnowledgeGraph& kg,
                           const EmbeddingTable& emb, const LescParams& p, const ModelConfig& model) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : statements) {
    if (s.size() < 2) continue;
    sum += hsic_loss(verify_statement(s, kg, emb, p, model).trace.attention_scores());
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

std::vector<AblationRow> run_ablation(std::span<const Statement> train_set, std::span<const Statement> valid_set,
                                      std::span<const Statement> test_set, const KnowledgeGraph& kg,
                                      const EmbeddingTable& emb, const ModelConfig& model, const TrainConfig& cfg,
                                      std::vector<Ablation> variants) {
  variants.erase(std::remove(variants.begin(), variants.end(), Ablation::kFull), variants.end());
  variants.insert(variants.begin(), Ablation::kFull);
  std::vector<AblationRow> rows;
  for (Ablation a : variants) {
    TrainConfig c = cfg;
    c.ablation = a;
    const TrainResult r = train(train_set, valid_set, kg, emb, model, c);
    rows.push_back({a, evaluate(test_set, kg, r.embeddings, r.params, r.model, r.threshold, cfg.f1_positive_true),
                    r.best_epoch});
  }
  return rows;
}

std::string ablation_table_json(const std::vector<AblationRow>& rows) {
  json table = json::array();
  for (const auto& row : rows) {
    table.push_back({{"variant", to_string(row.variant)},
                     {"accuracy", row.report.accuracy},
                     {"f1", row.report.f1},
                     {"threshold", row.report.threshold},
                     {"best_epoch", row.best_epoch}});
  }
  return json{{"rows", std::move(table)}}.dump(2);
}

}  // namespace lesc
