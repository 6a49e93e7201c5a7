#include <doctest.h>

#include <filesystem>

#include "lesc/error.hpp"
#include "lesc/synthetic.hpp"
#include "lesc/scoring.hpp"
#include "support.hpp"

using namespace lesc;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Vector random_vec(std::mt19937_64& rng, int d) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = testing::uniform(rng, -2.0, 2.0);
  return v;
}

}  // namespace

TEST_CASE("distmult examples") {
  CHECK(distmult_score(vec({1, 0}), vec({1, 1}), vec({1, 0})) == 1.0);
  CHECK(distmult_score(vec({1, 2}), vec({3, 4}), vec({5, 6})) == 63.0);
  CHECK_THROWS_AS(distmult_score(vec({1, 2}), vec({3}), vec({5, 6})), DimensionError);
}

TEST_CASE("distmult is symmetric in head and tail and trilinear") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Vector h = random_vec(rng, 6), r = random_vec(rng, 6), t = random_vec(rng, 6);
    const double a = testing::uniform(rng, -3.0, 3.0);
    const double s = distmult_score(h, r, t);
    CHECK(distmult_score(t, r, h) == doctest::Approx(s).epsilon(1e-12));
    CHECK(distmult_score(a * h, r, t) == doctest::Approx(a * s).epsilon(1e-12));
    CHECK(distmult_score(h, a * r, t) == doctest::Approx(a * s).epsilon(1e-12));
  }
}

TEST_CASE("distmult gradient matches central differences") {
  std::mt19937_64 rng(2);
  const double eps = 1e-4;
  for (int i = 0; i < 20; ++i) {
    Vector h = random_vec(rng, 6);
    const Vector r = random_vec(rng, 6), t = random_vec(rng, 6);
    const Vector analytic = r.cwiseProduct(t);
    Vector numeric(6);
    for (int j = 0; j < 6; ++j) {
      const double saved = h[j];
      h[j] = saved + eps;
      const double up = distmult_score(h, r, t);
      h[j] = saved - eps;
      const double down = distmult_score(h, r, t);
      h[j] = saved;
      numeric[j] = (up - down) / (2 * eps);
    }
    CHECK((analytic - numeric).norm() / (analytic.norm() + numeric.norm()) < 1e-4);
  }
}

TEST_CASE("claim encoder examples") {
  ClaimEncoderParams p;
  p.filter = {1, 0, 0};
  p.bias = 0;
  const Vector v = encode_claim(vec({2, -3}), vec({5, 5}), vec({7, 7}), p);
  CHECK(v[0] == 2.0);
  CHECK(v[1] == 0.0);

  p.filter.setZero();
  p.bias = 1;
  CHECK(encode_claim(vec({2, -3, 4}), vec({5, 5, 1}), vec({7, 7, 0}), p) == Vector::Ones(3));
  CHECK_THROWS_AS(encode_claim(vec({1, 2}), vec({1}), vec({1, 2}), p), DimensionError);
}

TEST_CASE("claim encoder output is nonnegative with dimension d") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const int d = testing::uniform_int(rng, 1, 9);
    ClaimEncoderParams p;
    p.filter = {testing::uniform(rng, -1, 1), testing::uniform(rng, -1, 1), testing::uniform(rng, -1, 1)};
    p.bias = testing::uniform(rng, -1, 1);
    const Vector v = encode_claim(random_vec(rng, d), random_vec(rng, d), random_vec(rng, d), p);
    CHECK(v.size() == d);
    CHECK((v.array() >= 0.0).all());
  }
}

TEST_CASE("initialization bounds") {
  std::mt19937_64 rng(4);
  const EmbeddingTable t = init_embeddings(30, 5, 18, rng);
  CHECK(t.entities.rows() == 30);
  CHECK(t.relations.rows() == 5);
  CHECK(t.entities.cwiseAbs().maxCoeff() <= 6.0 / std::sqrt(18.0));
  CHECK(t.relations.cwiseAbs().maxCoeff() <= 6.0 / std::sqrt(18.0));
}

TEST_CASE("zero pretraining epochs returns the initialization") {
  const KnowledgeGraph kg = make_clustered_kg({});
  PretrainConfig cfg;
  cfg.epochs = 0;
  std::mt19937_64 a(5), b(5);
  const auto r = pretrain_embeddings(kg, cfg, a);
  const EmbeddingTable init = init_embeddings(kg.entity_count(), kg.relation_count(), cfg.dim, b);
  CHECK(r.table.entities == init.entities);
  CHECK(r.table.relations == init.relations);
  CHECK(r.epoch_loss.empty());
}

TEST_CASE("pretraining lowers the loss and separates held-out triples") {
  const KnowledgeGraph full = make_clustered_kg({});
  std::vector<Triple> triples = full.triples();
  std::mt19937_64 rng(6);
  std::shuffle(triples.begin(), triples.end(), rng);
  KnowledgeGraph::Builder b;
  for (std::size_t e = 0; e < full.entity_count(); ++e) b.add_entity(full.entity_name(EntityId(static_cast<std::uint32_t>(e))));
  for (std::size_t r = 0; r < full.relation_count(); ++r) {
    b.add_relation(full.relation_name(RelationId(static_cast<std::uint32_t>(r))));
  }
  for (std::size_t i = 200; i < triples.size(); ++i) b.add(triples[i]);
  const KnowledgeGraph kg = std::move(b).build();
  const auto result = pretrain_embeddings(kg, PretrainConfig{}, rng);
  CHECK(result.epoch_loss.back() < result.epoch_loss.front());
  double pos = 0.0, neg = 0.0;
  for (std::size_t i = 0; i < 200; ++i) {
    const Triple c = corrupt_triple(full, triples[i], rng);
    pos += distmult_score(result.table.entity(triples[i].head), result.table.relation(triples[i].relation),
                          result.table.entity(triples[i].tail));
    neg += distmult_score(result.table.entity(c.head), result.table.relation(c.relation), result.table.entity(c.tail));
  }
  CHECK(pos > neg);
  CHECK(distmult_auc(full, result.table, std::span<const Triple>(triples.data(), 200), rng) >= 0.85);
}

TEST_CASE("encoder pretraining lowers its loss and beats a random filter") {
  const KnowledgeGraph kg = make_clustered_kg({});
  std::mt19937_64 rng(7);
  const auto emb = pretrain_embeddings(kg, PretrainConfig{}, rng).table;
  const ClaimEncoderParams start = init_claim_encoder(emb.dim(), rng);
  const auto r = pretrain_claim_encoder(kg, emb, PretrainConfig{}, rng, start);
  CHECK(r.epoch_loss.back() < r.epoch_loss.front());
  std::mt19937_64 e1(8), e2(8);
  const double trained = encoder_auc(kg, emb, r.params, r.readout, kg.triples(), e1);
  const double random = encoder_auc(kg, emb, start, r.readout, kg.triples(), e2);
  CHECK(trained > random);
}

TEST_CASE("embedding file round trip and vocabulary check") {
  const KnowledgeGraph kg = parse_triples("a\tr\tb\nb\ts\tc\n");
  std::mt19937_64 rng(9);
  const EmbeddingTable t = init_embeddings(kg.entity_count(), kg.relation_count(), 4, rng);
  const auto path = std::filesystem::temp_directory_path() / "lesc_emb_roundtrip.json";
  save_embeddings(t, kg, path);
  const EmbeddingTable back = load_embeddings(path, kg);
  CHECK(back.entities == t.entities);
  CHECK(back.relations == t.relations);
  CHECK(table_hash(back) == table_hash(t));
  const KnowledgeGraph other = parse_triples("a\tr\tb\nb\ts\td\n");
  CHECK_THROWS_AS(load_embeddings(path, other), VocabularyError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_embeddings(path, kg), Error);
}

TEST_CASE("table shape check") {
  const KnowledgeGraph kg = parse_triples("a\tr\tb\n");
  std::mt19937_64 rng(1);
  CHECK_NOTHROW(check_table(init_embeddings(2, 1, 3, rng), kg));
  CHECK_THROWS_AS(check_table(init_embeddings(3, 1, 3, rng), kg), DimensionError);
}
