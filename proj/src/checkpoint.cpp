#include "lesc/checkpoint.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "lesc/error.hpp"
#include "lesc/numeric.hpp"

namespace lesc {

using json = nlohmann::ordered_json;

namespace {

json matrix_json(const Matrix& m) {
  json values = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) values.push_back(m(i, j));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"values", std::move(values)}};
}

Matrix matrix_from(const json& j, const std::string& name) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& values = j.at("values");
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(values.size()) != rows * cols) {
    throw DimensionError("checkpoint tensor '" + name + "' has inconsistent shape");
  }
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) {
      const double v = values[k++].get<double>();
      if (!std::isfinite(v)) throw Error("checkpoint tensor '" + name + "' holds a non-finite value");
      m(i, j2) = v;
    }
  }
  return m;
}

json vector_json(const Vector& v) { return matrix_json(Matrix(v)); }

Vector vector_from(const json& j, const std::string& name) {
  const Matrix m = matrix_from(j, name);
  if (m.cols() != 1) throw DimensionError("checkpoint tensor '" + name + "' should be a column");
  return m.col(0);
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  const ModelConfig& m = c.model;
  json j;
  j["format"] = "lesc-model";
  j["version"] = kCheckpointVersion;
  j["model"] = {{"dim", m.dim},
                {"heads", m.heads},
                {"top_k", m.top_k},
                {"hidden", m.hidden_width()},
                {"graph", to_string(m.graph)},
                {"attention_norm", to_string(m.attention_norm)},
                {"attention_uses_propagation", m.attention_uses_propagation},
                {"use_enhancement", m.use_enhancement},
                {"use_global", m.use_global},
                {"use_local", m.use_local}};
  j["loss"] = {{"lambda1", c.loss.lambda1}, {"lambda2", c.loss.lambda2}, {"use_claim_labels", c.loss.use_claim_labels}};
  j["embeddings"] = c.embeddings;
  j["embedding_hash"] = to_hex(c.embedding_hash);
  j["threshold"] = c.threshold ? json(*c.threshold) : json(nullptr);
  const LescParams& p = c.params;
  json params;
  params["enhancement.omega"] = vector_json(p.enhancement.omega);
  params["enhancement.head_proj"] = matrix_json(p.enhancement.head_proj);
  params["enhancement.tail_proj"] = matrix_json(p.enhancement.tail_proj);
  params["encoder.filter"] = vector_json(p.encoder.filter);
  params["encoder.bias"] = vector_json(Vector::Constant(1, p.encoder.bias));
  params["gcn.weight"] = matrix_json(p.gcn_weight);
  params["gcn.bias"] = vector_json(p.gcn_bias);
  for (std::size_t a = 0; a < p.attention.size(); ++a) {
    params["attention." + std::to_string(a)] = vector_json(p.attention[a]);
  }
  params["verifier.w1"] = matrix_json(p.verifier_w1);
  params["verifier.b"] = vector_json(p.verifier_b);
  params["verifier.w2"] = vector_json(p.verifier_w2);
  j["params"] = std::move(params);

  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  try {
    if (j.value("format", "") != "lesc-model") throw Error(path.string() + " is not a model checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw Error("unsupported checkpoint version " + j.at("version").dump());
    }
    Checkpoint c;
    const json& m = j.at("model");
    c.model.dim = m.at("dim").get<int>();
    c.model.heads = m.at("heads").get<int>();
    c.model.top_k = m.at("top_k").get<int>();
    c.model.hidden = m.at("hidden").get<int>();
    c.model.graph = parse_graph_variant(m.at("graph").get<std::string>());
    c.model.attention_norm = parse_attention_norm(m.at("attention_norm").get<std::string>());
    c.model.attention_uses_propagation = m.at("attention_uses_propagation").get<bool>();
    c.model.use_enhancement = m.at("use_enhancement").get<bool>();
    c.model.use_global = m.at("use_global").get<bool>();
    c.model.use_local = m.at("use_local").get<bool>();
    c.model.validate();
    const json& l = j.at("loss");
    c.loss.lambda1 = l.at("lambda1").get<double>();
    c.loss.lambda2 = l.at("lambda2").get<double>();
    c.loss.use_claim_labels = l.at("use_claim_labels").get<bool>();
    c.embeddings = j.at("embeddings").get<std::string>();
    c.embedding_hash = std::stoull(j.at("embedding_hash").get<std::string>(), nullptr, 16);
    if (!j.at("threshold").is_null()) c.threshold = j.at("threshold").get<double>();

    const json& p = j.at("params");
    auto tensor = [&](const std::string& name) -> const json& {
      if (!p.contains(name)) throw Error("checkpoint is missing tensor '" + name + "'");
      return p.at(name);
    };
    const Vector omega = vector_from(tensor("enhancement.omega"), "enhancement.omega");
    const Vector filter = vector_from(tensor("encoder.filter"), "encoder.filter");
    const Vector bias = vector_from(tensor("encoder.bias"), "encoder.bias");
    if (omega.size() != 3 || filter.size() != 3 || bias.size() != 1) {
      throw DimensionError("checkpoint enhancement/encoder scalars have wrong sizes");
    }
    c.params.enhancement.omega = omega;
    c.params.enhancement.head_proj = matrix_from(tensor("enhancement.head_proj"), "enhancement.head_proj");
    c.params.enhancement.tail_proj = matrix_from(tensor("enhancement.tail_proj"), "enhancement.tail_proj");
    c.params.encoder.filter = filter;
    c.params.encoder.bias = bias[0];
    c.params.gcn_weight = matrix_from(tensor("gcn.weight"), "gcn.weight");
    c.params.gcn_bias = vector_from(tensor("gcn.bias"), "gcn.bias");
    for (int a = 0; a < c.model.heads; ++a) {
      const std::string name = "attention." + std::to_string(a);
      c.params.attention.push_back(vector_from(tensor(name), name));
    }
    c.params.verifier_w1 = matrix_from(tensor("verifier.w1"), "verifier.w1");
    c.params.verifier_b = vector_from(tensor("verifier.b"), "verifier.b");
    c.params.verifier_w2 = vector_from(tensor("verifier.w2"), "verifier.w2");
    check_params(c.params, c.model);
    return c;
  } catch (const json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  } catch (const std::invalid_argument&) {
    throw ParseError(path.string(), 0, "malformed embedding_hash");
  }
}

EmbeddingTable load_checkpoint_embeddings(const Checkpoint& c, const std::filesystem::path& checkpoint_path,
                                          const KnowledgeGraph& kg) {
  if (c.embeddings.empty()) throw Error("checkpoint does not reference an embedding file");
  std::filesystem::path emb_path = c.embeddings;
  if (emb_path.is_relative()) emb_path = checkpoint_path.parent_path() / emb_path;
  if (!std::filesystem::exists(emb_path)) throw Error("missing embeddings file " + emb_path.string());
  EmbeddingTable table = load_embeddings(emb_path, kg);
  if (table_hash(table) != c.embedding_hash) {
    throw Error("embeddings " + emb_path.string() + " do not match the checkpoint's table hash");
  }
  if (table.dim() != c.model.dim) throw DimensionError("checkpoint embeddings have the wrong dimension");
  return table;
}

}  // namespace lesc
