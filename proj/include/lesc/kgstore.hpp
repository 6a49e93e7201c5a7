#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace lesc {

enum class EntityId : std::uint32_t {};
enum class RelationId : std::uint32_t {};

constexpr std::uint32_t index(EntityId e) noexcept { return static_cast<std::uint32_t>(e); }
constexpr std::uint32_t index(RelationId r) noexcept { return static_cast<std::uint32_t>(r); }

struct Triple {
  EntityId head{};
  RelationId relation{};
  EntityId tail{};

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

// (relation, tail) pair hanging off an entity.
struct Neighbor {
  RelationId relation{};
  EntityId tail{};

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// Dense string <-> id mapping; ids are handed out in first-insertion order.
class Vocabulary {
 public:
  std::uint32_t intern(std::string_view name);
  std::optional<std::uint32_t> find(std::string_view name) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
  };
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t, Hash, std::equal_to<>> ids_;
};

// Immutable after construction. Build one with KnowledgeGraph::Builder or
// load_triples().
class KnowledgeGraph {
 public:
  class Builder {
   public:
    // Returns false when the triple was already present.
    bool add(std::string_view head, std::string_view relation, std::string_view tail);
    // Registers an entity even if it never appears in a triple.
    EntityId add_entity(std::string_view name);
    RelationId add_relation(std::string_view name);
    bool add(const Triple& t);
    std::size_t triple_count() const noexcept { return triples_.size(); }
    bool contains(const Triple& t) const;
    KnowledgeGraph build() &&;

   private:
    Vocabulary entities_;
    Vocabulary relations_;
    std::vector<Triple> triples_;
    std::unordered_set<std::uint64_t> keys_;
  };

  KnowledgeGraph() = default;

  const Vocabulary& entities() const noexcept { return entities_; }
  const Vocabulary& relations() const noexcept { return relations_; }
  std::size_t entity_count() const noexcept { return entities_.size(); }
  std::size_t relation_count() const noexcept { return relations_.size(); }
  const std::vector<Triple>& triples() const noexcept { return triples_; }
  bool empty() const noexcept { return triples_.empty(); }

  bool contains(const Triple& t) const;

  // Outgoing (relation, tail) pairs in triple-insertion order.
  std::span<const Neighbor> neighbors(EntityId e) const;
  std::size_t out_degree(EntityId e) const;

  EntityId entity(std::string_view name) const;
  RelationId relation(std::string_view name) const;
  const std::string& entity_name(EntityId e) const { return entities_.name(index(e)); }
  const std::string& relation_name(RelationId r) const { return relations_.name(index(r)); }

  // FNV-1a over both vocabularies, used to pair embedding files with graphs.
  std::uint64_t vocabulary_hash() const;

 private:
  Vocabulary entities_;
  Vocabulary relations_;
  std::vector<Triple> triples_;
  std::unordered_set<std::uint64_t> keys_;
  std::vector<std::size_t> offsets_;  // CSR row starts, size |E|+1
  std::vector<Neighbor> adjacency_;
};

std::uint64_t triple_key(const Triple& t);

// Reads head<TAB>relation<TAB>tail lines. '#' lines and blank lines are
// skipped; duplicates are dropped.
KnowledgeGraph load_triples(const std::filesystem::path& path);
KnowledgeGraph parse_triples(std::string_view text, const std::string& source = "<memory>");
void save_triples(const KnowledgeGraph& kg, const std::filesystem::path& path);

// Replaces head or tail (fair coin) with a uniform entity until the result
// is not a known triple. Throws after 100 failed draws.
Triple corrupt_triple(const KnowledgeGraph& kg, const Triple& t, std::mt19937_64& rng);

struct DegreeSummary {
  std::size_t min = 0;
  std::size_t max = 0;
  double mean = 0.0;
  double median = 0.0;
  std::size_t sinks = 0;  // entities without outgoing edges
};

DegreeSummary out_degree_summary(const KnowledgeGraph& kg);

}  // namespace lesc
