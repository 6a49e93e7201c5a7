#include <doctest.h>

#include "lesc/trainer.hpp"
#include "support.hpp"

using namespace lesc;
using namespace lesc::testing;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.dim = 6;
  cfg.heads = 2;
  cfg.top_k = 2;
  return cfg;
}

}  // namespace

TEST_CASE("analytic gradient matches finite differences on one statement") {
  std::mt19937_64 rng(3);
  const KnowledgeGraph kg = random_kg(rng, 12, 3, 30);
  const ModelConfig cfg = small_config();
  const EmbeddingTable emb = random_table(rng, kg, cfg.dim);
  const LescParams p = random_params(rng, cfg);
  const LossConfig loss{1.0, 0.5, true};
  for (int n : {1, 2, 3, 5}) {
    CAPTURE(n);
    const std::vector<Statement> batch{random_statement(rng, kg, n)};
    const GradCheck g = finite_difference_check(batch, kg, emb, p, cfg, loss, {1e-3, true});
    CHECK(g.checked > 0);
    CHECK(g.rel_error < 1e-6);
  }
}


TEST_CASE("gradients stay exact under every ablation") {
  std::mt19937_64 rng(5);
  const KnowledgeGraph kg = random_kg(rng, 10, 3, 26);
  for (Ablation a : all_ablations()) {
    CAPTURE(to_string(a));
    ModelConfig cfg = small_config();
    LossConfig loss{1.0, 0.3, true};
    apply_ablation(a, cfg, loss);
    const EmbeddingTable emb = random_table(rng, kg, cfg.dim);
    const LescParams p = random_params(rng, cfg);
    const std::vector<Statement> batch{random_statement(rng, kg, 3), random_statement(rng, kg, 4)};
    const GradCheck g = finite_difference_check(batch, kg, emb, p, cfg, loss, {1e-3, true});
    CHECK(g.checked > 0);
    CHECK(g.rel_error < 1e-6);
  }
}

TEST_CASE("gradients stay exact for every graph variant and attention option") {
  std::mt19937_64 rng(9);
  const KnowledgeGraph kg = random_kg(rng, 10, 3, 26);
  for (GraphVariant v : {GraphVariant::kAdjacency, GraphVariant::kSquare, GraphVariant::kAdjacencyPlusSquare,
                         GraphVariant::kFullyConnected}) {
    for (AttentionNorm norm : {AttentionNorm::kSymmetric, AttentionNorm::kPrinted}) {
      for (bool use_prop : {false, true}) {
        CAPTURE(to_string(v));
        CAPTURE(to_string(norm));
        CAPTURE(use_prop);
        ModelConfig cfg = small_config();
        cfg.graph = v;
        cfg.attention_norm = norm;
        cfg.attention_uses_propagation = use_prop;
        cfg.heads = 3;
        const EmbeddingTable emb = random_table(rng, kg, cfg.dim);
        const LescParams p = random_params(rng, cfg);
        const std::vector<Statement> batch{random_statement(rng, kg, 4)};
        const GradCheck g = finite_difference_check(batch, kg, emb, p, cfg, {1.0, 0.5, true}, {0.0, false});
        CHECK(g.checked > 0);
        CHECK(g.rel_error < 1e-6);
      }
    }
  }
}

TEST_CASE("no_Ld removes every HSIC contribution from the gradient") {
  std::mt19937_64 rng(13);
  const KnowledgeGraph kg = random_kg(rng, 10, 3, 26);
  ModelConfig cfg = small_config();
  const EmbeddingTable emb = random_table(rng, kg, cfg.dim);
  const LescParams p = random_params(rng, cfg);
  const std::vector<Statement> batch{random_statement(rng, kg, 4), random_statement(rng, kg, 5)};
  const LossConfig full{1.0, 0.1, true};
  LossConfig ablated = full;
  apply_ablation(Ablation::kNoLd, cfg, ablated);
  const auto g_full = batch_gradients(batch, kg, emb, p, cfg, full);
  const auto g_ablated = batch_gradients(batch, kg, emb, p, cfg, ablated);
  const auto g_zero = batch_gradients(batch, kg, emb, p, cfg, {1.0, 0.0, true});
  double full_gap = 0.0;
  for (std::size_t a = 0; a < p.attention.size(); ++a) {
    CHECK((g_ablated.grads.params.attention[a] - g_zero.grads.params.attention[a]).norm() == 0.0);
    full_gap += (g_full.grads.params.attention[a] - g_zero.grads.params.attention[a]).norm();
  }
  CHECK(full_gap > 0.0);
}
