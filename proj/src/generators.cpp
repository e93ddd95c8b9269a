#include "logbel/generators.hpp"

#include <cmath>

#include "logbel/error.hpp"

namespace logbel {

std::vector<double> Rng::dirichlet(std::size_t k) {
  std::vector<double> out(k);
  double total = 0.0;
  for (auto& x : out) {
    x = -std::log1p(-uniform());
    total += x;
  }
  if (total <= 0.0) return std::vector<double>(k, 1.0 / static_cast<double>(k));
  for (auto& x : out) x /= total;
  return out;
}

std::vector<double> random_evidence(std::size_t k, Rng& rng) {
  if (rng.uniform() < 0.5) {
    std::vector<double> v(k, 0.0);
    v[rng.index(k)] = 1.0;
    return v;
  }
  for (;;) {
    std::vector<double> v(k);
    bool any = false;
    for (auto& x : v) {
      x = rng.uniform();
      any = any || x > 0.0;
    }
    if (any) return v;
  }
}

namespace {

// Fills CPTs, the prior and evidence for a shape given as parent indices
// (parents before children).
CausalTree fill(const std::vector<NodeIndex>& parent, const std::vector<std::string>& ids,
                const std::vector<std::size_t>& domain, Rng& rng) {
  const std::size_t n = parent.size();
  std::vector<bool> has_child(n, false);
  for (NodeIndex i = 0; i < n; ++i) {
    if (parent[i] != kNoNode) has_child[parent[i]] = true;
  }
  NetworkSpec spec;
  spec.nodes.resize(n);
  for (NodeIndex i = 0; i < n; ++i) {
    auto& s = spec.nodes[i];
    s.id = ids[i];
    s.domain = domain[i];
    if (parent[i] == kNoNode) {
      s.prior = rng.dirichlet(domain[i]);
    } else {
      s.parent = ids[parent[i]];
      for (std::size_t r = 0; r < domain[parent[i]]; ++r) s.cpt.push_back(rng.dirichlet(domain[i]));
    }
  }
  for (NodeIndex i = 0; i < n; ++i) {
    if (!has_child[i]) spec.nodes[i].evidence = random_evidence(domain[i], rng);
  }
  return build_tree(spec);
}

void require_odd(std::size_t n, const char* what) {
  if (n < 3 || n % 2 == 0) {
    throw Error(ErrorCode::kInvalidNetwork, std::string(what) + " trees need an odd node count of at least 3");
  }
}

std::vector<std::string> numbered(std::size_t n) {
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = "n" + std::to_string(i);
  return ids;
}

}  // namespace

CausalTree random_tree(std::size_t n, std::size_t k, Rng& rng) {
  require_odd(n, "random");
  // Full binary trees with m leaves number Catalan(m-1); a subtree with m
  // leaves puts i of them on the left with probability
  // Catalan(i-1) Catalan(m-i-1) / Catalan(m-1).
  auto log_catalan = [](std::size_t c) {
    const double x = static_cast<double>(c);
    return std::lgamma(2 * x + 1) - std::lgamma(x + 2) - std::lgamma(x + 1);
  };
  std::vector<NodeIndex> parent;
  struct Pending {
    NodeIndex parent;
    std::size_t leaves;
  };
  std::vector<Pending> stack{{kNoNode, (n + 1) / 2}};
  std::vector<double> weight;
  while (!stack.empty()) {
    const Pending p = stack.back();
    stack.pop_back();
    const NodeIndex self = parent.size();
    parent.push_back(p.parent);
    const std::size_t m = p.leaves;
    if (m == 1) continue;
    weight.assign(m - 1, 0.0);
    const double base = log_catalan(m - 1);
    for (std::size_t i = 1; i < m; ++i) weight[i - 1] = std::exp(log_catalan(i - 1) + log_catalan(m - i - 1) - base);
    double u = rng.uniform();
    std::size_t left = m - 1;
    for (std::size_t i = 1; i < m; ++i) {
      if (u < weight[i - 1]) {
        left = i;
        break;
      }
      u -= weight[i - 1];
    }
    stack.push_back({self, m - left});
    stack.push_back({self, left});
  }
  return fill(parent, numbered(n), std::vector<std::size_t>(n, k), rng);
}

CausalTree balanced_tree(std::size_t n, std::size_t k, Rng& rng) {
  require_odd(n, "balanced");
  // Heap layout: children of i are 2i+1 and 2i+2.
  std::vector<NodeIndex> parent(n, kNoNode);
  for (NodeIndex i = 1; i < n; ++i) parent[i] = (i - 1) / 2;
  return fill(parent, numbered(n), std::vector<std::size_t>(n, k), rng);
}

CausalTree chain_tree(std::size_t n, std::size_t k, Rng& rng) {
  if (n < 3) throw Error(ErrorCode::kTreeTooSmall, "chain needs at least three nodes");
  const std::size_t links = n / 2;
  std::vector<NodeIndex> parent;
  std::vector<std::string> ids;
  for (std::size_t i = 1; i <= links; ++i) {
    ids.push_back("x" + std::to_string(i));
    parent.push_back(i == 1 ? kNoNode : 2 * (i - 2));
    ids.push_back("e" + std::to_string(i));
    parent.push_back(2 * (i - 1));
  }
  if (n % 2 == 1) {
    ids.push_back("e" + std::to_string(links + 1));
    parent.push_back(2 * (links - 1));
  }
  // e_i is declared before x_{i+1}, so it is the left child of x_i.
  CausalTree tree = fill(parent, ids, std::vector<std::size_t>(parent.size(), k), rng);
  if (n % 2 == 1) return tree;
  return normalize_tree(tree).tree;
}

CausalTree chain_fixture(Rng& rng, std::size_t k) { return chain_tree(9, k, rng); }

}  // namespace logbel
