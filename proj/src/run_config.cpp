#include "lesc/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lesc/error.hpp"

namespace lesc {

using json = nlohmann::ordered_json;

const std::vector<RunConfig::Key>& RunConfig::schema() {
  using T = Type;
  static const std::vector<Key> keys{
      {"kg", T::kPath, "", "triple file (head<TAB>relation<TAB>tail)"},
      {"corpus", T::kPath, "", "directory holding train/valid/test.jsonl"},
      {"split", T::kPath, "", "statement file to evaluate"},
      {"embeddings", T::kPath, "", "embedding file from pretrain"},
      {"checkpoint", T::kPath, "", "model checkpoint from train"},
      {"statement", T::kString, "", "statement JSON, or a path to a file holding one"},
      {"seed", T::kInt, "1", "seed for every random draw of the run"},
      {"synth", T::kString, "food", "synthetic graph kind: food or clustered"},
      {"synth_seed", T::kInt, "11", "seed of the synthetic graph"},
      {"count", T::kInt, "1000", "statements to generate"},
      {"negative_fraction", T::kReal, "0.5", "share of false statements"},
      {"composition_fraction", T::kReal, "0.5", "share of negatives built from composition conflicts"},
      {"corruptions", T::kInt, "1", "corrupted claims per random negative"},
      {"carriers", T::kString, "contain", "comma-separated carrier relations for composition"},
      {"min_steps", T::kInt, "1", "shortest walk"},
      {"max_steps", T::kInt, "4", "longest walk"},
      {"min_walks", T::kInt, "1", "fewest walks per statement"},
      {"max_walks", T::kInt, "3", "most walks per statement"},
      {"max_claims", T::kInt, "12", "claim cap per statement"},
      {"split_ratios", T::kString, "0.6,0.2,0.2", "train,valid,test shares"},
      {"d", T::kInt, "18", "embedding dimension"},
      {"k", T::kInt, "2", "claims kept by each attention head"},
      {"n_a", T::kInt, "2", "attention heads"},
      {"hidden", T::kInt, "0", "verifier width, 0 for 2d"},
      {"graph", T::kString, "A+A2", "claim graph propagation: A, A2, A+A2, full"},
      {"attention_norm", T::kString, "symmetric", "attention normalization: symmetric or printed"},
      {"attention_uses_propagation", T::kBool, "false", "use A-hat inside the attention layer"},
      {"lambda1", T::kReal, "1.0", "weight of the per-claim loss"},
      {"lambda2", T::kReal, "0.1", "weight of the HSIC penalty"},
      {"ablation", T::kString, "full", "variant to train"},
      {"ablations", T::kString, "full,no_Lt,no_Ld,no_LE,no_GSL,no_LSL,no_GSL_LSL", "variants for ablate"},
      {"batch_size", T::kInt, "100", "statements per batch"},
      {"learning_rate", T::kReal, "0.001", "AdaGrad learning rate"},
      {"epochs", T::kInt, "50", "training epochs"},
      {"patience", T::kInt, "5", "early-stopping patience, 0 disables"},
      {"l2", T::kReal, "1e-5", "L2 coefficient"},
      {"train_embeddings", T::kBool, "true", "update embeddings while training"},
      {"f1_positive_true", T::kBool, "true", "F1 positive class is the true statement"},
      {"pretrain_epochs", T::kInt, "50", "DistMult pretraining epochs"},
      {"pretrain_lr", T::kReal, "0.3", "DistMult pretraining learning rate"},
      {"pretrain_negatives", T::kInt, "1", "corruptions per triple when pretraining"},
      {"transe_epochs", T::kInt, "300", "TransE baseline epochs"},
      {"transe_lr", T::kReal, "0.05", "TransE baseline learning rate"},
      {"transe_margin", T::kReal, "1.0", "TransE margin"},
      {"aggregation", T::kString, "min", "baseline aggregation: min or mean"},
      {"threshold", T::kReal, "nan", "decision threshold override for predict/eval"},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& k : schema()) values_[k.name] = k.default_value;
}

const RunConfig::Key& RunConfig::key(const std::string& name) const {
  for (const auto& k : schema()) {
    if (k.name == name) return k;
  }
  throw Error("unknown config key '" + name + "'");
}

namespace {

bool parse_bool(const std::string& v, bool& out) {
  if (v == "true" || v == "1") return out = true, true;
  if (v == "false" || v == "0") return out = false, true;
  return false;
}

bool parse_int(const std::string& v, long long& out) {
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  return ec == std::errc() && ptr == end && !v.empty();
}

bool parse_real(const std::string& v, double& out) {
  if (v.empty()) return false;
  if (v == "nan") return out = std::nan(""), true;
  std::istringstream in(v);
  in >> out;
  return !in.fail() && in.eof();
}

}  // namespace

void RunConfig::set(const std::string& name, const std::string& value) {
  const Key& k = key(name);
  bool b;
  long long i;
  double r;
  switch (k.type) {
    case Type::kBool:
      if (!parse_bool(value, b)) throw Error("config key '" + name + "' expects true/false, got '" + value + "'");
      break;
    case Type::kInt:
      if (!parse_int(value, i)) throw Error("config key '" + name + "' expects an integer, got '" + value + "'");
      break;
    case Type::kReal:
      if (!parse_real(value, r)) throw Error("config key '" + name + "' expects a number, got '" + value + "'");
      break;
    case Type::kString:
    case Type::kPath:
      break;
  }
  values_[name] = value;
  explicit_[name] = true;
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw Error("override '" + assignment + "' is not key=value");
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  if (!j.is_object()) throw ParseError(path.string(), 0, "config must be a JSON object");
  for (const auto& [name, v] : j.items()) {
    if (v.is_null() && key(name).type == Type::kReal) {
      set(name, "nan");
    } else if (v.is_string()) {
      set(name, v.get<std::string>());
    } else if (v.is_boolean()) {
      set(name, v.get<bool>() ? "true" : "false");
    } else if (v.is_number_integer()) {
      set(name, std::to_string(v.get<long long>()));
    } else if (v.is_number()) {
      set(name, v.dump());
    } else {
      throw Error("config key '" + name + "' must hold a scalar");
    }
  }
}

bool RunConfig::explicitly_set(const std::string& name) const {
  key(name);
  return explicit_.contains(name);
}

const std::string& RunConfig::raw(const std::string& name) const {
  key(name);
  return values_.at(name);
}

long long RunConfig::integer(const std::string& name) const {
  long long v = 0;
  if (key(name).type != Type::kInt || !parse_int(raw(name), v)) throw Error("config key '" + name + "' is not an integer");
  return v;
}

double RunConfig::real(const std::string& name) const {
  double v = 0.0;
  if (key(name).type != Type::kReal || !parse_real(raw(name), v)) throw Error("config key '" + name + "' is not a number");
  return v;
}

bool RunConfig::boolean(const std::string& name) const {
  bool v = false;
  if (key(name).type != Type::kBool || !parse_bool(raw(name), v)) throw Error("config key '" + name + "' is not a boolean");
  return v;
}

std::filesystem::path RunConfig::path(const std::string& name) const { return raw(name); }

std::vector<std::string> RunConfig::list(const std::string& name) const {
  std::vector<std::string> out;
  std::stringstream in(raw(name));
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void RunConfig::require_existing(const std::string& name) const {
  const std::string& v = raw(name);
  if (v.empty()) throw Error("missing required '" + name + "' (set " + name + "=PATH)");
  if (!std::filesystem::exists(v)) throw Error("missing " + name + " artifact: " + v);
}

std::string RunConfig::to_json() const {
  json j = json::object();
  for (const auto& k : schema()) {
    const std::string& v = values_.at(k.name);
    switch (k.type) {
      case Type::kInt:
        j[k.name] = integer(k.name);
        break;
      case Type::kReal: {
        const double r = real(k.name);
        j[k.name] = std::isfinite(r) ? json(r) : json(nullptr);
        break;
      }
      case Type::kBool:
        j[k.name] = boolean(k.name);
        break;
      case Type::kString:
      case Type::kPath:
        j[k.name] = v;
        break;
    }
  }
  return j.dump(2);
}

}  // namespace lesc
