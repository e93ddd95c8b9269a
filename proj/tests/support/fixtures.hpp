#pragma once

// Shared test fixtures and small comparison helpers.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "logbel/generators.hpp"
#include "logbel/error.hpp"
#include "logbel/linalg.hpp"
#include "logbel/model.hpp"

namespace logbel::testing {

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// Compares two vectors up to a positive scalar: both are normalized first.
inline double normalized_diff(const ScaledVector& a, const ScaledVector& b) {
  return max_abs_diff(a.normalized(), b.normalized());
}

// u with prior [0.5, 0.5] and identity channels to leaves y and z.
inline NetworkSpec identity_spec(std::vector<double> ey = {1, 1}, std::vector<double> ez = {1, 1}) {
  NetworkSpec s;
  s.nodes.push_back({"u", 2, std::nullopt, {}, {0.5, 0.5}, {}});
  s.nodes.push_back({"y", 2, "u", {{1, 0}, {0, 1}}, {}, std::move(ey)});
  s.nodes.push_back({"z", 2, "u", {{1, 0}, {0, 1}}, {}, std::move(ez)});
  return s;
}

// Tree of arbitrary arity: node i > 0 hangs under a uniformly chosen earlier
// node; domains drawn from [1, kmax].
inline CausalTree random_general_tree(std::size_t n, std::size_t kmax, Rng& rng) {
  std::vector<NodeIndex> parent(n, kNoNode);
  std::vector<bool> has_child(n, false);
  for (NodeIndex i = 1; i < n; ++i) {
    parent[i] = rng.index(i);
    has_child[parent[i]] = true;
  }
  std::vector<std::size_t> domain(n);
  for (auto& k : domain) k = 1 + rng.index(kmax);
  domain[0] = std::max<std::size_t>(domain[0], 2);
  NetworkSpec spec;
  for (NodeIndex i = 0; i < n; ++i) {
    NodeSpec s;
    s.id = "g" + std::to_string(i);
    s.domain = domain[i];
    if (parent[i] == kNoNode) {
      s.prior = rng.dirichlet(domain[i]);
    } else {
      s.parent = "g" + std::to_string(parent[i]);
      for (std::size_t r = 0; r < domain[parent[i]]; ++r) s.cpt.push_back(rng.dirichlet(domain[i]));
    }
    spec.nodes.push_back(std::move(s));
  }
  for (NodeIndex i = 0; i < n; ++i) {
    if (!has_child[i]) spec.nodes[i].evidence = random_evidence(domain[i], rng);
  }
  return build_tree(spec);
}

}  // namespace logbel::testing
