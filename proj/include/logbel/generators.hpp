#pragma once

// Seeded generators for trees, evidence and (see jointree.hpp) polytrees.
//
// Everything is derived from a 64-bit Mersenne twister through the explicit
// conversions below rather than <random> distributions, whose output is
// implementation-defined; a seed therefore reproduces the same corpus on
// every platform.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "logbel/model.hpp"

namespace logbel {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform on {0, ..., n-1}.
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  // Symmetric Dirichlet(1): normalized Exp(1) draws.
  std::vector<double> dirichlet(std::size_t k);

 private:
  std::mt19937_64 engine_;
};

// Hard (one-hot) evidence with probability 1/2, otherwise a soft likelihood
// with entries uniform on [0, 1).
std::vector<double> random_evidence(std::size_t k, Rng& rng);

// Uniformly random full binary tree shape on n (odd) nodes, Dirichlet CPTs,
// domain k everywhere, random evidence.  Node ids are "n<i>" in preorder.
CausalTree random_tree(std::size_t n, std::size_t k, Rng& rng);

// Complete binary tree on n (odd) nodes filled level by level.
CausalTree balanced_tree(std::size_t n, std::size_t k, Rng& rng);

// Caterpillar x1 -> x2 -> ... where every x_i also has an evidence leaf e_i.
// For odd n the last x gets two leaves (e_L, e_{L+1}); for even n it gets one
// leaf plus the unit-domain virtual leaf added by normalization.  Depth is
// floor(n / 2).
CausalTree chain_tree(std::size_t n, std::size_t k, Rng& rng);

// The four-link chain x1..x4 with leaves e1..e5.
CausalTree chain_fixture(Rng& rng, std::size_t k = 2);

}  // namespace logbel
