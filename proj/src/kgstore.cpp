#include "lesc/kgstore.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "lesc/error.hpp"

namespace lesc {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_mix(std::uint64_t& h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  // separator so ["ab","c"] and ["a","bc"] differ
  h ^= 0xff;
  h *= kFnvPrime;
}

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace

std::uint32_t Vocabulary::intern(std::string_view name) {
  if (auto it = ids_.find(name); it != ids_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(name);
  ids_.emplace(names_.back(), id);
  return id;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view name) const {
  if (auto it = ids_.find(name); it != ids_.end()) return it->second;
  return std::nullopt;
}

std::uint64_t triple_key(const Triple& t) {
  // 24 bits head, 16 bits relation, 24 bits tail.
  return (static_cast<std::uint64_t>(index(t.head)) << 40) |
         (static_cast<std::uint64_t>(index(t.relation)) << 24) | static_cast<std::uint64_t>(index(t.tail));
}

EntityId KnowledgeGraph::Builder::add_entity(std::string_view name) {
  const auto id = entities_.intern(name);
  if (id >= (1u << 24)) throw Error("too many entities (limit 2^24)");
  return EntityId{id};
}

RelationId KnowledgeGraph::Builder::add_relation(std::string_view name) {
  const auto id = relations_.intern(name);
  if (id >= (1u << 16)) throw Error("too many relations (limit 2^16)");
  return RelationId{id};
}

bool KnowledgeGraph::Builder::add(std::string_view head, std::string_view relation, std::string_view tail) {
  const EntityId h = add_entity(head);
  const RelationId r = add_relation(relation);
  const EntityId t = add_entity(tail);
  return add(Triple{h, r, t});
}

bool KnowledgeGraph::Builder::add(const Triple& t) {
  if (index(t.head) >= entities_.size() || index(t.tail) >= entities_.size() ||
      index(t.relation) >= relations_.size()) {
    throw VocabularyError("triple references an unregistered id");
  }
  if (!keys_.insert(triple_key(t)).second) return false;
  triples_.push_back(t);
  return true;
}

bool KnowledgeGraph::Builder::contains(const Triple& t) const { return keys_.contains(triple_key(t)); }

KnowledgeGraph KnowledgeGraph::Builder::build() && {
  KnowledgeGraph kg;
  kg.entities_ = std::move(entities_);
  kg.relations_ = std::move(relations_);
  kg.triples_ = std::move(triples_);
  kg.keys_ = std::move(keys_);

  const std::size_t n = kg.entities_.size();
  kg.offsets_.assign(n + 1, 0);
  for (const Triple& t : kg.triples_) ++kg.offsets_[index(t.head) + 1];
  for (std::size_t i = 0; i < n; ++i) kg.offsets_[i + 1] += kg.offsets_[i];
  kg.adjacency_.resize(kg.triples_.size());
  std::vector<std::size_t> cursor(kg.offsets_.begin(), kg.offsets_.end() - 1);
  for (const Triple& t : kg.triples_) kg.adjacency_[cursor[index(t.head)]++] = Neighbor{t.relation, t.tail};
  return kg;
}

bool KnowledgeGraph::contains(const Triple& t) const { return keys_.contains(triple_key(t)); }

std::span<const Neighbor> KnowledgeGraph::neighbors(EntityId e) const {
  const auto i = index(e);
  if (i >= entities_.size()) throw VocabularyError("unknown entity id " + std::to_string(i));
  return {adjacency_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
}

std::size_t KnowledgeGraph::out_degree(EntityId e) const { return neighbors(e).size(); }

EntityId KnowledgeGraph::entity(std::string_view name) const {
  if (auto id = entities_.find(name)) return EntityId{*id};
  throw VocabularyError("unknown entity '" + std::string(name) + "'");
}

RelationId KnowledgeGraph::relation(std::string_view name) const {
  if (auto id = relations_.find(name)) return RelationId{*id};
  throw VocabularyError("unknown relation '" + std::string(name) + "'");
}

std::uint64_t KnowledgeGraph::vocabulary_hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& n : entities_.names()) fnv_mix(h, n);
  fnv_mix(h, "\x01relations");
  for (const auto& n : relations_.names()) fnv_mix(h, n);
  return h;
}

KnowledgeGraph parse_triples(std::string_view text, const std::string& source) {
  KnowledgeGraph::Builder builder;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim_cr(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;

    std::string_view fields[3];
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      if (count < 3) fields[count] = line.substr(start, tab == std::string_view::npos ? tab : tab - start);
      ++count;
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (count != 3) {
      throw ParseError(source, line_no, "expected 3 tab-separated fields, got " + std::to_string(count));
    }
    for (const auto& f : fields) {
      if (f.empty()) throw ParseError(source, line_no, "empty field");
    }
    builder.add(fields[0], fields[1], fields[2]);
  }
  if (builder.triple_count() == 0) throw Error(source + ": no triples found");
  return std::move(builder).build();
}

KnowledgeGraph load_triples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open triple file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_triples(buf.str(), path.string());
}

void save_triples(const KnowledgeGraph& kg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write triple file " + path.string());
  for (const Triple& t : kg.triples()) {
    out << kg.entity_name(t.head) << '\t' << kg.relation_name(t.relation) << '\t' << kg.entity_name(t.tail) << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

Triple corrupt_triple(const KnowledgeGraph& kg, const Triple& t, std::mt19937_64& rng) {
  if (kg.entity_count() == 0) throw Error("cannot corrupt against an empty graph");
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(kg.entity_count() - 1));
  std::bernoulli_distribution coin(0.5);
  for (int attempt = 0; attempt < 100; ++attempt) {
    Triple c = t;
    if (coin(rng)) {
      c.head = EntityId{pick(rng)};
    } else {
      c.tail = EntityId{pick(rng)};
    }
    if (c != t && !kg.contains(c)) return c;
  }
  throw Error("corrupt_triple: no absent triple found after 100 draws (graph nearly complete around " +
              kg.entity_name(t.head) + ")");
}

DegreeSummary out_degree_summary(const KnowledgeGraph& kg) {
  DegreeSummary s;
  const std::size_t n = kg.entity_count();
  if (n == 0) return s;
  std::vector<std::size_t> deg(n);
  for (std::size_t i = 0; i < n; ++i) deg[i] = kg.out_degree(EntityId{static_cast<std::uint32_t>(i)});
  std::vector<std::size_t> sorted = deg;
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.max = sorted.back();
  s.mean = static_cast<double>(kg.triples().size()) / static_cast<double>(n);
  s.median = n % 2 ? static_cast<double>(sorted[n / 2])
                   : 0.5 * static_cast<double>(sorted[n / 2 - 1] + sorted[n / 2]);
  s.sinks = static_cast<std::size_t>(std::count(deg.begin(), deg.end(), 0));
  return s;
}

}  // namespace lesc
