#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lesc/checkpoint.hpp"
#include "lesc/claimgen.hpp"
#include "lesc/error.hpp"
#include "lesc/kgstore.hpp"
#include "lesc/metrics.hpp"
#include "lesc/model.hpp"
#include "lesc/numeric.hpp"
#include "lesc/run_config.hpp"
#include "lesc/scoring.hpp"
#include "lesc/synthetic.hpp"
#include "lesc/trainer.hpp"
#include "lesc/transe.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace lesc;

namespace {

struct Context {
  std::string command;
  std::string config_file;
  std::optional<long long> seed;
  std::string out_dir;
  std::vector<std::string> overrides;
  RunConfig cfg;
};

void resolve(Context& ctx) {
  if (!ctx.config_file.empty()) ctx.cfg.merge_file(ctx.config_file);
  for (const auto& o : ctx.overrides) ctx.cfg.apply_override(o);
  if (ctx.seed) ctx.cfg.set("seed", std::to_string(*ctx.seed));
}

fs::path out_dir(const Context& ctx) {
  fs::path dir = ctx.out_dir.empty() ? fs::path(".") : fs::path(ctx.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error("cannot create output directory " + dir.string());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

void echo_config(const Context& ctx, const fs::path& dir) {
  write_text(dir / (ctx.command + ".config.json"), ctx.cfg.to_json());
}

std::mt19937_64 seeded(const RunConfig& cfg) { return std::mt19937_64(static_cast<std::uint64_t>(cfg.integer("seed"))); }

int as_int(const RunConfig& cfg, const std::string& key, long long lo) {
  const long long v = cfg.integer(key);
  if (v < lo || v > 1'000'000'000) throw Error("config key '" + key + "' out of range");
  return static_cast<int>(v);
}

ModelConfig model_config(const RunConfig& cfg) {
  ModelConfig m;
  m.dim = as_int(cfg, "d", 1);
  m.top_k = as_int(cfg, "k", 1);
  m.heads = as_int(cfg, "n_a", 1);
  m.hidden = as_int(cfg, "hidden", 0);
  m.graph = parse_graph_variant(cfg.str("graph"));
  m.attention_norm = parse_attention_norm(cfg.str("attention_norm"));
  m.attention_uses_propagation = cfg.boolean("attention_uses_propagation");
  m.validate();
  return m;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.batch_size = static_cast<std::size_t>(as_int(cfg, "batch_size", 1));
  t.learning_rate = cfg.real("learning_rate");
  t.epochs = as_int(cfg, "epochs", 1);
  t.patience = as_int(cfg, "patience", 0);
  t.l2_coeff = cfg.real("l2");
  t.lambda1 = cfg.real("lambda1");
  t.lambda2 = cfg.real("lambda2");
  t.seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  t.ablation = parse_ablation(cfg.str("ablation"));
  t.train_embeddings = cfg.boolean("train_embeddings");
  t.f1_positive_true = cfg.boolean("f1_positive_true");
  t.validate();
  return t;
}

fs::path corpus_file(const RunConfig& cfg, const std::string& name) {
  cfg.require_existing("corpus");
  const fs::path p = cfg.path("corpus") / name;
  if (!fs::exists(p)) throw Error("missing corpus artifact: " + p.string());
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double optional_threshold(const RunConfig& cfg, std::optional<double> stored) {
  const double t = cfg.real("threshold");
  if (std::isfinite(t)) return t;
  return stored.value_or(0.5);
}

// ---------------------------------------------------------------------------

int cmd_kg_stats(Context& ctx) {
  ctx.cfg.require_existing("kg");
  const KnowledgeGraph kg = load_triples(ctx.cfg.path("kg"));
  const DegreeSummary deg = out_degree_summary(kg);
  json j{{"entities", kg.entity_count()},
         {"relations", kg.relation_count()},
         {"triples", kg.triples().size()},
         {"out_degree",
          {{"min", deg.min}, {"max", deg.max}, {"mean", deg.mean}, {"median", deg.median}, {"sinks", deg.sinks}}}};
  if (!ctx.out_dir.empty()) echo_config(ctx, out_dir(ctx));
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_synth_kg(Context& ctx) {
  const fs::path dir = out_dir(ctx);
  const std::string kind = ctx.cfg.str("synth");
  const auto seed = static_cast<std::uint64_t>(ctx.cfg.integer("synth_seed"));
  KnowledgeGraph kg;
  if (kind == "food") {
    FoodKgConfig c;
    c.seed = seed;
    kg = make_food_kg(c).kg;
  } else if (kind == "clustered") {
    ClusteredKgConfig c;
    c.seed = seed;
    kg = make_clustered_kg(c);
  } else {
    throw Error("unknown synthetic graph kind '" + kind + "' (expected food or clustered)");
  }
  save_triples(kg, dir / "kg.tsv");
  echo_config(ctx, dir);
  std::cout << json{{"kg", (dir / "kg.tsv").string()},
                    {"entities", kg.entity_count()},
                    {"relations", kg.relation_count()},
                    {"triples", kg.triples().size()}}
                   .dump(2)
            << '\n';
  return 0;
}

json split_stats(const std::vector<Statement>& s) {
  const CorpusStats st = corpus_stats(s);
  return {{"statements", st.statements},
          {"negatives", st.negatives},
          {"avg_claims", st.mean_claims},
          {"max_claims", st.max_claims}};
}

std::array<double, 3> parse_ratios(const RunConfig& cfg) {
  const auto parts = cfg.list("split_ratios");
  if (parts.size() != 3) throw Error("split_ratios needs three comma-separated shares");
  std::array<double, 3> r{};
  for (std::size_t i = 0; i < 3; ++i) {
    try {
      std::size_t used = 0;
      r[i] = std::stod(parts[i], &used);
      if (used != parts[i].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error("split_ratios: '" + parts[i] + "' is not a number");
    }
  }
  return r;
}

int cmd_generate(Context& ctx) {
  RunConfig& cfg = ctx.cfg;
  cfg.require_existing("kg");
  const std::array<double, 3> ratios = parse_ratios(cfg);
  const fs::path dir = out_dir(ctx);
  const KnowledgeGraph kg = load_triples(cfg.path("kg"));

  CorpusConfig cc;
  cc.walk.min_steps = as_int(cfg, "min_steps", 1);
  cc.walk.max_steps = as_int(cfg, "max_steps", 1);
  cc.walk.min_walks = as_int(cfg, "min_walks", 1);
  cc.walk.max_walks = as_int(cfg, "max_walks", 1);
  cc.walk.max_claims = static_cast<std::size_t>(as_int(cfg, "max_claims", 1));
  cc.count = static_cast<std::size_t>(as_int(cfg, "count", 1));
  cc.negative_fraction = cfg.real("negative_fraction");
  cc.composition_fraction = cfg.real("composition_fraction");
  cc.corruptions_per_negative = static_cast<std::size_t>(as_int(cfg, "corruptions", 1));
  for (const auto& name : cfg.list("carriers")) {
    if (auto id = kg.relations().find(name)) cc.rules.carriers.push_back(RelationId{*id});
  }
  if (cc.composition_fraction > 0.0 && cc.rules.empty()) {
    throw Error("composition_fraction > 0 but none of the carriers '" + cfg.str("carriers") + "' is a relation");
  }
  // Walks start at entities that have outgoing edges.
  std::vector<EntityId> starts;
  for (std::uint32_t e = 0; e < kg.entity_count(); ++e) {
    if (kg.out_degree(EntityId{e}) > 0) starts.push_back(EntityId{e});
  }
  if (starts.empty()) throw Error("graph has no entity with outgoing edges");
  cc.walk.seed_entities = std::move(starts);
  cc.walk.validate();

  auto rng = seeded(cfg);
  std::vector<Statement> corpus = generate_corpus(kg, cc, rng);
  write_corpus(kg, corpus, dir / "corpus.jsonl");
  const CorpusSplit split = split_corpus(corpus, ratios, rng);
  write_corpus(kg, split.train, dir / "train.jsonl");
  write_corpus(kg, split.valid, dir / "valid.jsonl");
  write_corpus(kg, split.test, dir / "test.jsonl");
  echo_config(ctx, dir);
  json j{{"corpus", split_stats(corpus)},
         {"train", split_stats(split.train)},
         {"valid", split_stats(split.valid)},
         {"test", split_stats(split.test)}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_pretrain(Context& ctx) {
  RunConfig& cfg = ctx.cfg;
  cfg.require_existing("kg");
  PretrainConfig pc;
  pc.dim = as_int(cfg, "d", 1);
  pc.epochs = as_int(cfg, "pretrain_epochs", 1);
  pc.learning_rate = cfg.real("pretrain_lr");
  pc.l2 = cfg.real("l2");
  pc.negatives_per_positive = as_int(cfg, "pretrain_negatives", 1);
  pc.batch_size = static_cast<std::size_t>(as_int(cfg, "batch_size", 1));
  const fs::path dir = out_dir(ctx);
  const KnowledgeGraph kg = load_triples(cfg.path("kg"));
  auto rng = seeded(cfg);
  const PretrainResult r = pretrain_embeddings(kg, pc, rng);
  save_embeddings(r.table, kg, dir / "embeddings.json");
  std::string log;
  for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) {
    log += json{{"epoch", e}, {"mean_loss", r.epoch_loss[e]}}.dump() + "\n";
  }
  write_text(dir / "pretrain_log.jsonl", log);
  echo_config(ctx, dir);
  const double auc = distmult_auc(kg, r.table, kg.triples(), rng);
  std::cout << json{{"embeddings", (dir / "embeddings.json").string()},
                    {"final_loss", r.epoch_loss.empty() ? 0.0 : r.epoch_loss.back()},
                    {"train_auc", auc}}
                   .dump(2)
            << '\n';
  return 0;
}

int cmd_train(Context& ctx) {
  RunConfig& cfg = ctx.cfg;
  cfg.require_existing("kg");
  cfg.require_existing("embeddings");
  const ModelConfig model = model_config(cfg);
  const TrainConfig tc = train_config(cfg);
  const fs::path train_path = corpus_file(cfg, "train.jsonl");
  const fs::path valid_path = corpus_file(cfg, "valid.jsonl");
  const fs::path dir = out_dir(ctx);

  const KnowledgeGraph kg = load_triples(cfg.path("kg"));
  const EmbeddingTable emb = load_embeddings(cfg.path("embeddings"), kg);
  if (emb.dim() != model.dim) throw DimensionError("embeddings have dim " + std::to_string(emb.dim()) + ", config d=" +
                                                   std::to_string(model.dim));
  const auto train_set = read_corpus(kg, train_path);
  const auto valid_set = read_corpus(kg, valid_path);

  std::ofstream log(dir / "train_log.jsonl", std::ios::binary);
  if (!log) throw Error("cannot write " + (dir / "train_log.jsonl").string());
  const TrainResult r = train(train_set, valid_set, kg, emb, model, tc,
                              [&](const EpochRecord& rec) { log << to_json(rec) << '\n' << std::flush; });

  save_embeddings(r.embeddings, kg, dir / "model.embeddings.json");
  Checkpoint c{r.model, r.loss, r.params, "model.embeddings.json", table_hash(r.embeddings), r.threshold};
  save_checkpoint(c, dir / "model.json");
  echo_config(ctx, dir);
  const double valid_acc = r.best_epoch >= 0 ? r.log[static_cast<std::size_t>(r.best_epoch)].valid_accuracy : 0.0;
  std::cout << json{{"checkpoint", (dir / "model.json").string()},
                    {"ablation", to_string(tc.ablation)},
                    {"epochs_run", r.log.size()},
                    {"best_epoch", r.best_epoch},
                    {"valid_accuracy", valid_acc},
                    {"threshold", r.threshold}}
                   .dump(2)
            << '\n';
  return 0;
}

int cmd_eval(Context& ctx) {
  RunConfig& cfg = ctx.cfg;
  cfg.require_existing("kg");
  cfg.require_existing("checkpoint");
  const fs::path split_path = cfg.str("split").empty() ? corpus_file(cfg, "test.jsonl") : cfg.path("split");
  if (!fs::exists(split_path)) throw Error("missing split artifact: " + split_path.string());
  const fs::path dir = out_dir(ctx);
  const KnowledgeGraph kg = load_triples(cfg.path("kg"));
  const Checkpoint c = load_checkpoint(cfg.path("checkpoint"));
  const EmbeddingTable emb = load_checkpoint_embeddings(c, cfg.path("checkpoint"), kg);
  const auto statements = read_corpus(kg, split_path);
  const EvalReport r = evaluate(statements, kg, emb, c.params, c.model, optional_threshold(cfg, c.threshold),
                                cfg.boolean("f1_positive_true"));
  write_text(dir / "eval.json", r.to_json());
  echo_config(ctx, dir);
  std::cout << r.to_json() << '\n';
  return 0;
}

int cmd_ablate(Context& ctx) {
  RunConfig& cfg = ctx.cfg;
  cfg.require_existing("kg");
  cfg.require_existing("embeddings");
  const ModelConfig model = model_config(cfg);
  const TrainConfig tc = train_config(cfg);
  std::vector<Ablation> variants;
  for (const auto& name : cfg.list("ablations")) variants.push_back(parse_ablation(name));
  const fs::path train_path = corpus_file(cfg, "train.jsonl");
  const fs::path valid_path = corpus_file(cfg, "valid.jsonl");
  const fs::path test_path = corpus_file(cfg, "test.jsonl");
  const fs::path dir = out_dir(ctx);

  const KnowledgeGraph kg = load_triples(cfg.path("kg"));
  const EmbeddingTable emb = load_embeddings(cfg.path("embeddings"), kg);
  const auto train_set = read_corpus(kg, train_path);
  const auto valid_set = read_corpus(kg, valid_path);
  const auto test_set = read_corpus(kg, test_path);
  const auto rows = run_ablation(train_set, valid_set, test_set, kg, emb, model, tc, variants);
  const std::string table = ablation_table_json(rows);
  write_text(dir / "ablation.json", table);
  echo_config(ctx, dir);
  std::cout << table << '\n';
  return 0;
}

int cmd_baseline(Context& ctx) {
  RunConfig& cfg = ctx.cfg;
  cfg.require_existing("kg");
  const fs::path valid_path = corpus_file(cfg, "valid.jsonl");
  const fs::path test_path = corpus_file(cfg, "test.jsonl");
  const std::string agg_name = cfg.str("aggregation");
  if (agg_name != "min" && agg_name != "mean") throw Error("aggregation must be min or mean");
  TransEConfig tc;
  tc.dim = as_int(cfg, "d", 1);
  tc.epochs = as_int(cfg, "transe_epochs", 1);
  tc.learning_rate = cfg.real("transe_lr");
  tc.margin = cfg.real("transe_margin");
  tc.batch_size = static_cast<std::size_t>(as_int(cfg, "batch_size", 1));
  const fs::path dir = out_dir(ctx);
  const KnowledgeGraph kg = load_triples(cfg.path("kg"));
  const auto valid_set = read_corpus(kg, valid_path);
  const auto test_set = read_corpus(kg, test_path);
  auto rng = seeded(cfg);
  const TransEResult model = train_transe(kg, tc, rng);
  const EvalReport r =
      baseline_min_transe(valid_set, test_set, model.table, agg_name == "min" ? Aggregation::kMin : Aggregation::kMean);
  write_text(dir / "baseline.json", r.to_json());
  echo_config(ctx, dir);
  std::cout << r.to_json() << '\n';
  return 0;
}

int cmd_predict(Context& ctx) {
  RunConfig& cfg = ctx.cfg;
  cfg.require_existing("kg");
  cfg.require_existing("checkpoint");
  std::string text = cfg.str("statement");
  if (text.empty()) throw Error("missing required 'statement' (JSON or a file path)");
  if (text.front() != '{') {
    if (!fs::exists(text)) throw Error("missing statement artifact: " + text);
    text = read_file(text);
  }
  const KnowledgeGraph kg = load_triples(cfg.path("kg"));
  const Checkpoint c = load_checkpoint(cfg.path("checkpoint"));
  const EmbeddingTable emb = load_checkpoint_embeddings(c, cfg.path("checkpoint"), kg);
  const Statement s = statement_from_json(kg, text);
  const Verification v = verify_statement(s, kg, emb, c.params, c.model);
  const double threshold = optional_threshold(cfg, c.threshold);
  json claims = json::array();
  for (std::size_t i = 0; i < s.claims.size(); ++i) {
    const Triple& t = s.claims[i];
    claims.push_back({{"triple", {kg.entity_name(t.head), kg.relation_name(t.relation), kg.entity_name(t.tail)}},
                      {"score", v.trace.claim_scores[static_cast<Eigen::Index>(i)]}});
  }
  json out{{"claims", std::move(claims)},
           {"s_m", v.trace.s_m},
           {"s_y", v.score},
           {"threshold", threshold},
           {"verdict", v.score >= threshold}};
  if (!ctx.out_dir.empty()) echo_config(ctx, out_dir(ctx));
  std::cout << out.dump(2) << '\n';
  return 0;
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e)) return "parse";
  if (dynamic_cast<const VocabularyError*>(&e)) return "vocabulary";
  if (dynamic_cast<const DimensionError*>(&e)) return "dimension";
  if (dynamic_cast<const TrainingError*>(&e)) return "training";
  if (dynamic_cast<const Error*>(&e)) return "error";
  return "internal";
}

void report_error(const std::string& command, const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", message}, {"kind", kind}, {"command", command}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-claim fact checking over a knowledge graph"};
  app.require_subcommand(1);
  Context ctx;

  struct Command {
    const char* name;
    const char* help;
    int (*run)(Context&);
  };
  const std::vector<Command> commands{
      {"kg-stats", "entity/relation/triple counts and out-degree summary", cmd_kg_stats},
      {"synth-kg", "write a synthetic triple file", cmd_synth_kg},
      {"generate", "sample a labelled statement corpus and its splits", cmd_generate},
      {"pretrain", "pretrain DistMult embeddings", cmd_pretrain},
      {"train", "train the verifier", cmd_train},
      {"eval", "evaluate a checkpoint on a split", cmd_eval},
      {"ablate", "train and evaluate ablation variants", cmd_ablate},
      {"baseline", "TransE min/mean baseline", cmd_baseline},
      {"predict", "score one statement", cmd_predict},
  };
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", ctx.config_file, "JSON file of key/value settings");
    sub->add_option("--seed", ctx.seed, "seed for all randomness");
    sub->add_option("--out", ctx.out_dir, "output directory");
    sub->add_option("overrides", ctx.overrides, "key=value settings");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("", "usage", e.what());
    return 2;
  }

  for (std::size_t i = 0; i < commands.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    ctx.command = commands[i].name;
    try {
      resolve(ctx);
      return commands[i].run(ctx);
    } catch (const std::exception& e) {
      report_error(ctx.command, error_kind(e), e.what());
      return 1;
    }
  }
  return 1;
}
