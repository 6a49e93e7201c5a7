#include "lesc/claimgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "lesc/error.hpp"

namespace lesc {

using json = nlohmann::ordered_json;

void WalkConfig::validate() const {
  if (min_steps < 1 || min_steps > max_steps) throw Error("walk config: need 1 <= min_steps <= max_steps");
  if (min_walks < 1 || min_walks > max_walks) throw Error("walk config: need 1 <= min_walks <= max_walks");
  if (max_claims < 1) throw Error("walk config: max_claims must be >= 1");
  if (seed_entities && seed_entities->empty()) throw Error("walk config: seed entity list is empty");
}

bool CompositionRules::is_carrier(RelationId r) const {
  return std::find(carriers.begin(), carriers.end(), r) != carriers.end();
}

namespace {

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

struct WalkState {
  Statement statement;
  std::vector<EntityId> visited;
  std::unordered_set<std::uint32_t> visited_set;
  std::unordered_set<std::uint64_t> emitted;

  void visit(EntityId e) {
    if (visited_set.insert(index(e)).second) visited.push_back(e);
  }
};

// Follows up to `steps` unused edges from `start`; returns edges taken.
std::size_t walk_from(const KnowledgeGraph& kg, EntityId start, int steps, std::size_t max_claims,
                      WalkState& state, std::mt19937_64& rng) {
  std::size_t taken = 0;
  EntityId cur = start;
  std::vector<std::size_t> options;
  for (int step = 0; step < steps && state.statement.claims.size() < max_claims; ++step) {
    const auto nbrs = kg.neighbors(cur);
    options.clear();
    for (std::size_t j = 0; j < nbrs.size(); ++j) {
      if (!state.emitted.contains(triple_key({cur, nbrs[j].relation, nbrs[j].tail}))) options.push_back(j);
    }
    if (options.empty()) break;
    const Neighbor& edge = nbrs[options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)]];
    const Triple t{cur, edge.relation, edge.tail};
    state.emitted.insert(triple_key(t));
    state.statement.claims.push_back(t);
    if (taken == 0) state.visit(cur);
    state.visit(edge.tail);
    cur = edge.tail;
    ++taken;
  }
  return taken;
}

}  // namespace

Statement sample_statement(const KnowledgeGraph& kg, const WalkConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  if (kg.empty()) throw Error("sample_statement: empty graph");
  const std::size_t n_seeds = cfg.seed_entities ? cfg.seed_entities->size() : kg.entity_count();
  auto seed_at = [&](std::size_t i) {
    return cfg.seed_entities ? (*cfg.seed_entities)[i] : EntityId{static_cast<std::uint32_t>(i)};
  };
  std::uniform_int_distribution<std::size_t> pick_seed(0, n_seeds - 1);

  const int walks = uniform_int(rng, cfg.min_walks, cfg.max_walks);
  for (int attempt = 0; attempt < 100; ++attempt) {
    WalkState state;
    const EntityId seed = seed_at(pick_seed(rng));
    if (kg.out_degree(seed) == 0) continue;
    if (walk_from(kg, seed, uniform_int(rng, cfg.min_steps, cfg.max_steps), cfg.max_claims, state, rng) == 0) {
      continue;
    }
    for (int w = 1; w < walks && state.statement.claims.size() < cfg.max_claims; ++w) {
      const int steps = uniform_int(rng, cfg.min_steps, cfg.max_steps);
      // Restart from an entity the statement already mentions; a few tries
      // since sinks cannot start a walk.
      for (int tries = 0; tries < 8; ++tries) {
        const EntityId start =
            state.visited[std::uniform_int_distribution<std::size_t>(0, state.visited.size() - 1)(rng)];
        if (walk_from(kg, start, steps, cfg.max_claims, state, rng) > 0) break;
      }
    }
    Statement s = std::move(state.statement);
    s.label = true;
    s.claim_labels.assign(s.claims.size(), true);
    return s;
  }
  throw Error("sample_statement: no seed with outgoing edges after 100 draws");
}

Statement negate_statement(const KnowledgeGraph& kg, const Statement& s, std::mt19937_64& rng,
                           std::size_t corruptions) {
  if (!s.label) throw Error("negate_statement: statement is already false");
  if (s.claims.empty()) throw Error("negate_statement: statement has no claims");
  corruptions = std::clamp<std::size_t>(corruptions, 1, s.claims.size());
  std::vector<std::size_t> order(s.claims.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < corruptions; ++i) {
    std::swap(order[i], order[std::uniform_int_distribution<std::size_t>(i, order.size() - 1)(rng)]);
  }
  Statement out = s;
  for (std::size_t i = 0; i < corruptions; ++i) {
    const std::size_t j = order[i];
    Triple c = corrupt_triple(kg, s.claims[j], rng);
    while (std::find(out.claims.begin(), out.claims.end(), c) != out.claims.end()) c = corrupt_triple(kg, s.claims[j], rng);
    out.claims[j] = c;
    out.claim_labels[j] = false;
  }
  out.label = false;
  return out;
}

std::vector<std::size_t> composition_conflicts(const KnowledgeGraph& kg, const Statement& s,
                                               const CompositionRules& rules) {
  std::vector<std::size_t> out;
  if (rules.empty()) return out;
  for (std::size_t j = 0; j < s.claims.size(); ++j) {
    const Triple& second = s.claims[j];
    for (std::size_t i = 0; i < s.claims.size(); ++i) {
      const Triple& first = s.claims[i];
      if (i == j || first.tail != second.head || !rules.is_carrier(first.relation)) continue;
      const Triple implied{first.head, second.relation, second.tail};
      if (implied.head == implied.tail) continue;
      if (!kg.contains(implied)) {
        out.push_back(j);
        break;
      }
    }
  }
  return out;
}

void check_statement(const Statement& s, std::size_t max_claims) {
  if (s.claims.empty() || s.claims.size() > max_claims) {
    throw Error("statement " + s.id + ": claim count " + std::to_string(s.claims.size()) + " outside [1, " +
                std::to_string(max_claims) + "]");
  }
  if (s.claim_labels.size() != s.claims.size()) throw Error("statement " + s.id + ": claim_labels length mismatch");
  const bool all_true = std::all_of(s.claim_labels.begin(), s.claim_labels.end(), [](bool b) { return b; });
  if (s.label && !all_true) throw Error("statement " + s.id + ": true statement with a false claim");
  if (!s.label && all_true) throw Error("statement " + s.id + ": false statement without a false claim");
}

std::vector<Statement> generate_corpus(const KnowledgeGraph& kg, const CorpusConfig& cfg, std::mt19937_64& rng) {
  if (cfg.negative_fraction < 0.0 || cfg.negative_fraction > 1.0) throw Error("negative_fraction must be in [0,1]");
  if (cfg.composition_fraction < 0.0 || cfg.composition_fraction > 1.0) {
    throw Error("composition_fraction must be in [0,1]");
  }
  std::bernoulli_distribution negative_coin(cfg.negative_fraction);
  std::bernoulli_distribution composition_coin(cfg.rules.empty() ? 0.0 : cfg.composition_fraction);
  std::vector<Statement> out;
  out.reserve(cfg.count);
  for (std::size_t n = 0; n < cfg.count; ++n) {
    const bool negative = negative_coin(rng);
    const bool composition = negative && composition_coin(rng);
    Statement s;
    bool done = false;
    for (int attempt = 0; attempt < 1000 && !done; ++attempt) {
      s = sample_statement(kg, cfg.walk, rng);
      const auto conflicts = composition_conflicts(kg, s, cfg.rules);
      if (composition) {
        if (conflicts.empty()) continue;
        for (std::size_t j : conflicts) s.claim_labels[j] = false;
        s.label = false;
        done = true;
      } else {
        if (!conflicts.empty()) continue;
        if (negative) s = negate_statement(kg, s, rng, cfg.corruptions_per_negative);
        done = true;
      }
    }
    if (!done) throw Error("generate_corpus: could not draw a statement of the requested kind in 1000 walks");
    s.id = "s" + std::to_string(n);
    out.push_back(std::move(s));
  }
  return out;
}

CorpusSplit split_corpus(std::vector<Statement> statements, std::array<double, 3> ratios, std::mt19937_64& rng) {
  for (double r : ratios) {
    if (!(r > 0.0)) throw Error("split ratios must be positive");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) throw Error("split ratios must sum to 1");
  const std::size_t n = statements.size();
  if (n < 3) throw Error("split_corpus: need at least 3 statements, got " + std::to_string(n));
  std::shuffle(statements.begin(), statements.end(), rng);

  auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[0]));
  auto n_valid = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[1]));
  n_train = std::min(n_train, n);
  n_valid = std::min(n_valid, n - n_train);

  CorpusSplit split;
  auto first = std::make_move_iterator(statements.begin());
  split.train.assign(first, first + static_cast<std::ptrdiff_t>(n_train));
  split.valid.assign(first + static_cast<std::ptrdiff_t>(n_train),
                     first + static_cast<std::ptrdiff_t>(n_train + n_valid));
  split.test.assign(first + static_cast<std::ptrdiff_t>(n_train + n_valid), std::make_move_iterator(statements.end()));
  return split;
}

CorpusStats corpus_stats(const std::vector<Statement>& statements) {
  CorpusStats st;
  st.statements = statements.size();
  std::size_t total = 0;
  for (const auto& s : statements) {
    total += s.claims.size();
    st.max_claims = std::max(st.max_claims, s.claims.size());
    if (!s.label) ++st.negatives;
  }
  if (!statements.empty()) st.mean_claims = static_cast<double>(total) / static_cast<double>(statements.size());
  return st;
}

std::string statement_to_json(const KnowledgeGraph& kg, const Statement& s) {
  json j;
  j["id"] = s.id;
  json claims = json::array();
  for (const Triple& t : s.claims) {
    claims.push_back({kg.entity_name(t.head), kg.relation_name(t.relation), kg.entity_name(t.tail)});
  }
  j["claims"] = std::move(claims);
  j["label"] = s.label ? 1 : 0;
  json labels = json::array();
  for (bool b : s.claim_labels) labels.push_back(b ? 1 : 0);
  j["claim_labels"] = std::move(labels);
  return j.dump();
}

namespace {

bool read_label(const json& v) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number_integer()) {
    const auto x = v.get<long long>();
    if (x == 0 || x == 1) return x == 1;
  }
  throw Error("label must be 0, 1, true or false");
}

}  // namespace

Statement statement_from_json(const KnowledgeGraph& kg, const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(std::string("invalid statement JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("claims") || !j["claims"].is_array()) {
    throw Error("statement JSON needs a 'claims' array");
  }
  Statement s;
  if (j.contains("id")) s.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
  std::vector<std::string> unknown;
  for (const auto& c : j["claims"]) {
    if (!c.is_array() || c.size() != 3 || !c[0].is_string() || !c[1].is_string() || !c[2].is_string()) {
      throw Error("each claim must be a [head, relation, tail] string triple");
    }
    const auto h = kg.entities().find(c[0].get<std::string>());
    const auto r = kg.relations().find(c[1].get<std::string>());
    const auto t = kg.entities().find(c[2].get<std::string>());
    if (!h) unknown.push_back(c[0].get<std::string>());
    if (!r) unknown.push_back(c[1].get<std::string>());
    if (!t) unknown.push_back(c[2].get<std::string>());
    if (h && r && t) s.claims.push_back({EntityId{*h}, RelationId{*r}, EntityId{*t}});
  }
  if (!unknown.empty()) {
    std::string msg = "out-of-vocabulary id(s):";
    for (const auto& u : unknown) msg += " '" + u + "'";
    throw VocabularyError(msg);
  }
  if (s.claims.empty()) throw Error("statement has no claims");
  s.label = j.contains("label") ? read_label(j["label"]) : true;
  if (j.contains("claim_labels")) {
    for (const auto& v : j["claim_labels"]) s.claim_labels.push_back(read_label(v));
    if (s.claim_labels.size() != s.claims.size()) throw Error("claim_labels length differs from claims");
  } else {
    s.claim_labels.assign(s.claims.size(), s.label);
  }
  return s;
}

void write_corpus(const KnowledgeGraph& kg, const std::vector<Statement>& statements,
                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write corpus file " + path.string());
  for (const auto& s : statements) out << statement_to_json(kg, s) << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

std::vector<Statement> read_corpus(const KnowledgeGraph& kg, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus file " + path.string());
  std::vector<Statement> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      out.push_back(statement_from_json(kg, line));
    } catch (const Error& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return out;
}

}  // namespace lesc
