#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "logbel/propagate.hpp"

namespace logbel {
namespace {

using testing::max_abs_diff;

TEST(FullPropagate, BeliefsAreNormalized) {
  Rng rng(21);
  const CausalTree t = random_tree(31, 3, rng);
  const auto table = full_propagate(t);
  for (const auto& b : table.bel) {
    double s = 0;
    for (double p : b.dist) s += p;
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(FullPropagate, ChainFixtureMatchesBruteForce) {
  Rng rng(22);
  const CausalTree t = chain_fixture(rng, 3);
  const auto table = full_propagate(t);
  const auto brute = brute_force_marginals(t);
  for (NodeIndex i = 0; i < t.size(); ++i) EXPECT_LT(max_abs_diff(table.bel[i].dist, brute[i].dist), 1e-10);
}

TEST(FullPropagate, TableInvariants) {
  Rng rng(23);
  const CausalTree t = random_tree(25, 2, rng);
  const auto table = full_propagate(t);
  EXPECT_EQ(table.pi[t.root()].values(), t.node(t.root()).prior);
  for (NodeIndex i = 0; i < t.size(); ++i) {
    if (t.is_leaf(i)) EXPECT_EQ(table.lambda[i].values(), t.node(i).evidence);
    OpCounters scratch;
    const auto product = hadamard(table.lambda[i], table.pi[i], scratch);
    EXPECT_LT(max_abs_diff(product.normalized(), table.bel[i].dist), 1e-12);
  }
}

TEST(FullPropagate, EquationCountIsInternalPlusEdges) {
  Rng rng(24);
  const CausalTree t = random_tree(41, 2, rng);
  const auto table = full_propagate(t);
  const std::size_t internal = (t.size() - 1) / 2;
  EXPECT_EQ(table.counters.equation_evals, internal + t.size() - 1);
}

TEST(FullPropagate, LinearInNodeCount) {
  for (std::size_t n : {127u, 255u, 511u}) {
    Rng rng(25);
    const auto a = full_propagate(balanced_tree(n, 2, rng)).counters.matrix_vector_mults;
    const auto b = full_propagate(balanced_tree(2 * n + 1, 2, rng)).counters.matrix_vector_mults;
    const double ratio = static_cast<double>(b) / static_cast<double>(a);
    EXPECT_GE(ratio, 1.8);
    EXPECT_LE(ratio, 2.2);
  }
}

TEST(Belief, PinnedRootAndPurity) {
  const CausalTree t = build_tree(testing::identity_spec({1, 0}, {1, 1}));
  const auto table = full_propagate(t);
  EXPECT_EQ(belief(table, 0).dist, (std::vector<double>{1, 0}));
  EXPECT_EQ(belief(table, 1).dist, belief(table, 1).dist);
  EXPECT_THROW(belief(table, 99), Error);
}

TEST(Lazy, UpdateCostsDepthEquations) {
  Rng rng(31);
  const CausalTree t = random_tree(63, 2, rng);
  LazyState state(t);
  for (NodeIndex leaf : t.leaves_in_order()) {
    const auto before = state.counters().equation_evals;
    state.update(leaf, random_evidence(2, rng));
    EXPECT_EQ(state.counters().equation_evals - before, t.depth(leaf));
  }
}

TEST(Lazy, UpdateMatchesRebuildAndIsIdempotent) {
  Rng rng(32);
  CausalTree t = random_tree(45, 3, rng);
  LazyState state(t);
  const auto leaves = t.leaves_in_order();
  for (int step = 0; step < 40; ++step) {
    const NodeIndex leaf = leaves[rng.index(leaves.size())];
    auto lik = random_evidence(3, rng);
    state.update(leaf, lik);
    t.set_evidence(leaf, lik);
  }
  const auto table = full_propagate(t);
  for (NodeIndex i = 0; i < t.size(); ++i) {
    EXPECT_LT(max_relative_difference(state.lambda(i), table.lambda[i]), 1e-12);
  }
  std::vector<ScaledVector> before;
  for (NodeIndex i = 0; i < t.size(); ++i) before.push_back(state.lambda(i));
  state.update(leaves[0], t.node(leaves[0]).evidence);
  for (NodeIndex i = 0; i < t.size(); ++i) {
    EXPECT_EQ(state.lambda(i).values(), before[i].values());
  }
}

TEST(Lazy, QueryMatchesFullPropagation) {
  Rng rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    const CausalTree t = random_tree(1 + 2 * (1 + rng.index(15)), 2 + rng.index(2), rng);
    LazyState state(t);
    const auto table = full_propagate(t);
    for (NodeIndex i = 0; i < t.size(); ++i) EXPECT_LT(max_abs_diff(state.query(i).dist, table.bel[i].dist), 1e-10);
  }
}

TEST(Lazy, RootQueryUsesPriorDirectly) {
  Rng rng(34);
  const CausalTree t = random_tree(15, 2, rng);
  LazyState state(t);
  const auto before = state.counters().equation_evals;
  state.query(t.root());
  EXPECT_EQ(state.counters().equation_evals, before);
}

TEST(Lazy, DeepChainQueryCostIsLinear) {
  Rng rng(35);
  for (std::size_t n : {101u, 201u, 401u}) {
    const CausalTree t = chain_tree(n, 2, rng);
    LazyState state(t);
    const NodeIndex deepest = t.index_of("x" + std::to_string(n / 2));
    const auto before = state.counters().equation_evals;
    state.query(deepest);
    EXPECT_EQ(state.counters().equation_evals - before, n / 2 - 1);
  }
}

TEST(Lazy, InterleavingsAgreeWithFullPropagation) {
  Rng rng(36);
  CausalTree t = random_tree(101, 2, rng);
  LazyState state(t);
  const auto leaves = t.leaves_in_order();
  for (int step = 0; step < 200; ++step) {
    if (rng.uniform() < 0.5) {
      const NodeIndex leaf = leaves[rng.index(leaves.size())];
      auto lik = random_evidence(2, rng);
      state.update(leaf, lik);
      t.set_evidence(leaf, lik);
    } else {
      const NodeIndex x = rng.index(t.size());
      EXPECT_LT(max_abs_diff(state.query(x).dist, full_propagate(t).bel[x].dist), 1e-10);
    }
  }
}

}  // namespace
}  // namespace logbel
