#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

#include "lesc/checkpoint.hpp"
#include "lesc/error.hpp"
#include "lesc/kgstore.hpp"
#include "lesc/run_config.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace lesc;

namespace {

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "lesc_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run run_cli(const std::string& args) {
  const fs::path out = scratch() / "stdout.txt", err = scratch() / "stderr.txt";
  const std::string cmd = std::string("\"") + LESC_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

// Small synthetic graph, corpus, embeddings and a short training run shared
// by the pipeline tests.
const fs::path& pipeline() {
  static const fs::path dir = [] {
    const fs::path d = scratch() / "pipe";
    const std::string o = " --out \"" + d.string() + "\"";
    REQUIRE(run_cli("synth-kg" + o).status == 0);
    const std::string kg = " kg=\"" + (d / "kg.tsv").string() + "\"";
    REQUIRE(run_cli("generate --seed 3 count=300" + kg + o).status == 0);
    REQUIRE(run_cli("pretrain pretrain_epochs=5" + kg + o).status == 0);
    const Run t = run_cli("train epochs=2 learning_rate=0.05" + kg + " corpus=\"" + d.string() + "\" embeddings=\"" +
                       (d / "embeddings.json").string() + "\"" + o);
    REQUIRE(t.status == 0);
    return d;
  }();
  return dir;
}

std::string kg_arg() { return " kg=\"" + (pipeline() / "kg.tsv").string() + "\""; }

}  // namespace

TEST_CASE("run config rejects unknown keys and ill-typed values") {
  RunConfig c;
  CHECK_THROWS_AS(c.set("learning_rat", "0.1"), Error);
  CHECK_THROWS_AS(c.apply_override("epochs=ten"), Error);
  CHECK_THROWS_AS(c.apply_override("no_equals_sign"), Error);
  CHECK_THROWS_AS(c.set("train_embeddings", "maybe"), Error);
  c.apply_override("epochs=7");
  CHECK(c.integer("epochs") == 7);
  CHECK(c.explicitly_set("epochs"));
  CHECK_FALSE(c.explicitly_set("lambda2"));
  CHECK(c.real("lambda2") == 0.1);
  CHECK(c.list("split_ratios").size() == 3);
  CHECK_THROWS_AS(c.require_existing("kg"), Error);
  const json j = json::parse(c.to_json());
  CHECK(j["epochs"] == 7);
  CHECK(j["train_embeddings"] == true);
}

TEST_CASE("run config files merge and reject unknown keys") {
  const fs::path p = scratch() / "cfg.json";
  std::ofstream(p) << R"({"epochs": 3, "graph": "A", "threshold": null})";
  RunConfig c;
  c.merge_file(p);
  CHECK(c.integer("epochs") == 3);
  CHECK(c.str("graph") == "A");
  std::ofstream(p) << R"({"epochz": 3})";
  RunConfig d;
  CHECK_THROWS_AS(d.merge_file(p), Error);
}

TEST_CASE("kg-stats reports counts matching the store") {
  const fs::path kg = scratch() / "small.tsv";
  std::ofstream(kg) << "# comment\na\tr\tb\nb\ts\tc\na\tr\tb\n";
  const Run r = run_cli("kg-stats kg=\"" + kg.string() + "\"");
  REQUIRE(r.status == 0);
  const json j = json::parse(r.out);
  const KnowledgeGraph store = load_triples(kg);
  CHECK(j["entities"] == store.entity_count());
  CHECK(j["relations"] == store.relation_count());
  CHECK(j["triples"] == 2);
  CHECK(j["out_degree"]["sinks"] == 1);
}

TEST_CASE("kg-stats on a comment-only file fails with a JSON diagnostic") {
  const fs::path kg = scratch() / "empty.tsv";
  std::ofstream(kg) << "# only a comment\n\n";
  const Run r = run_cli("kg-stats kg=\"" + kg.string() + "\"");
  CHECK(r.status == 1);
  const json e = json::parse(r.err);
  CHECK(e["command"] == "kg-stats");
  CHECK(e.contains("error"));
  CHECK(r.err.find('\n') == r.err.size() - 1);
}

TEST_CASE("usage errors exit 2 and bad keys exit 1") {
  CHECK(run_cli("no-such-command").status == 2);
  const Run r = run_cli("kg-stats bogus_key=1");
  CHECK(r.status == 1);
  CHECK(json::parse(r.err)["error"].get<std::string>().find("bogus_key") != std::string::npos);
}

TEST_CASE("generate is byte-identical for a seed and echoes its config") {
  const fs::path a = scratch() / "gen_a", b = scratch() / "gen_b";
  for (const auto& d : {a, b}) {
    REQUIRE(run_cli("generate --seed 5 count=200" + kg_arg() + " --out \"" + d.string() + "\"").status == 0);
  }
  for (const char* f : {"corpus.jsonl", "train.jsonl", "valid.jsonl", "test.jsonl", "generate.config.json"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK(json::parse(slurp(a / "generate.config.json"))["seed"] == 5);
}

TEST_CASE("generate reports class balance and claim statistics") {
  const fs::path d = scratch() / "gen_stats";
  const Run r = run_cli("generate --seed 1 count=1000 negative_fraction=0.5" + kg_arg() + " --out \"" + d.string() + "\"");
  REQUIRE(r.status == 0);
  const json j = json::parse(r.out);
  CHECK(j["corpus"]["statements"] == 1000);
  CHECK(std::abs(j["corpus"]["negatives"].get<double>() - 500.0) < 60.0);
  CHECK(j["corpus"]["avg_claims"].get<double>() > 1.0);
  CHECK(j["train"]["statements"].get<int>() + j["valid"]["statements"].get<int>() +
            j["test"]["statements"].get<int>() == 1000);
}

TEST_CASE("train, eval and predict run end to end") {
  const fs::path d = pipeline();
  for (const char* f : {"model.json", "model.embeddings.json", "train_log.jsonl", "train.config.json"}) {
    CHECK(fs::exists(d / f));
  }
  std::istringstream log(slurp(d / "train_log.jsonl"));
  std::string line;
  int records = 0;
  while (std::getline(log, line)) {
    const json rec = json::parse(line);
    CHECK(rec.contains("mean_loss"));
    CHECK(rec.contains("valid_accuracy"));
    CHECK(rec.contains("wall_ms"));
    ++records;
  }
  CHECK(records == 2);

  const std::string ckpt = " checkpoint=\"" + (d / "model.json").string() + "\"";
  const Run e = run_cli("eval" + kg_arg() + ckpt + " corpus=\"" + d.string() + "\" --out \"" + d.string() + "\"");
  REQUIRE(e.status == 0);
  const json rep = json::parse(slurp(d / "eval.json"));
  CHECK(rep.contains("accuracy"));
  CHECK(rep.contains("f1"));

  std::ifstream test(d / "test.jsonl");
  std::getline(test, line);
  const fs::path stmt = d / "one.json";
  std::ofstream(stmt) << line;
  const Run p = run_cli("predict" + kg_arg() + ckpt + " statement=\"" + stmt.string() + "\"");
  REQUIRE(p.status == 0);
  const json out = json::parse(p.out);
  REQUIRE(out["claims"].is_array());
  for (const auto& c : out["claims"]) {
    CHECK(c["triple"].size() == 3);
    CHECK(c["score"].is_number());
  }
  CHECK(out["s_y"].get<double>() > 0.0);
  CHECK(out["s_y"].get<double>() < 1.0);
  CHECK(out["verdict"] == (out["s_y"].get<double>() >= out["threshold"].get<double>()));

  const double s_y = out["s_y"].get<double>();
  const Run low = run_cli("predict" + kg_arg() + ckpt + " statement=\"" + stmt.string() + "\" threshold=" +
                       std::to_string(s_y - 1e-3));
  const Run high = run_cli("predict" + kg_arg() + ckpt + " statement=\"" + stmt.string() + "\" threshold=" +
                        std::to_string(s_y + 1e-3));
  CHECK(json::parse(low.out)["verdict"] == true);
  CHECK(json::parse(high.out)["verdict"] == false);
}

TEST_CASE("predict names out-of-vocabulary ids") {
  const fs::path d = pipeline();
  const Run r = run_cli("predict" + kg_arg() + " checkpoint=\"" + (d / "model.json").string() +
                     "\" statement='{\"claims\":[[\"food_0\",\"contain\",\"unobtanium\"]]}'");
  CHECK(r.status == 1);
  const json e = json::parse(r.err);
  CHECK(e["kind"] == "vocabulary");
  CHECK(e["error"].get<std::string>().find("unobtanium") != std::string::npos);
}

TEST_CASE("missing artifacts are named") {
  const fs::path d = pipeline();
  const Run train = run_cli("train" + kg_arg() + " corpus=\"" + d.string() + "\" embeddings=\"" +
                         (d / "nope.json").string() + "\" --out \"" + (scratch() / "x").string() + "\"");
  CHECK(train.status == 1);
  CHECK(train.err.find("nope.json") != std::string::npos);
  const Run eval = run_cli("eval" + kg_arg() + " corpus=\"" + d.string() + "\"");
  CHECK(eval.status == 1);
  CHECK(eval.err.find("checkpoint") != std::string::npos);
  const Run gen = run_cli("generate kg=\"" + (d / "absent.tsv").string() + "\"");
  CHECK(gen.status == 1);
  CHECK(gen.err.find("absent.tsv") != std::string::npos);
}

TEST_CASE("no_LE training writes a bypass projection") {
  const fs::path d = pipeline();
  const fs::path o = scratch() / "no_le";
  REQUIRE(run_cli("train epochs=1 ablation=no_LE learning_rate=0.05" + kg_arg() + " corpus=\"" + d.string() +
               "\" embeddings=\"" + (d / "embeddings.json").string() + "\" --out \"" + o.string() + "\"")
              .status == 0);
  const Checkpoint c = load_checkpoint(o / "model.json");
  CHECK_FALSE(c.model.use_enhancement);
  const Matrix bypass = bypass_projection(c.model.dim);
  CHECK(c.params.enhancement.head_proj == bypass);
  CHECK(c.params.enhancement.tail_proj == bypass);
}
