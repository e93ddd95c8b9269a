#include "logbel/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "logbel/error.hpp"

namespace logbel {

namespace {

void check_stochastic_row(const std::vector<double>& row, const std::string& what) {
  double total = 0.0;
  for (double x : row) {
    if (!std::isfinite(x) || x < 0.0) {
      throw Error(ErrorCode::kRowNotStochastic, what + " has a negative or non-finite entry");
    }
    total += x;
  }
  if (std::abs(total - 1.0) > kStochasticTolerance) {
    std::ostringstream msg;
    msg << what << " sums to " << total;
    throw Error(ErrorCode::kRowNotStochastic, msg.str());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// CausalTree

std::optional<NodeIndex> CausalTree::find(std::string_view id) const {
  const auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

NodeIndex CausalTree::index_of(std::string_view id) const {
  if (auto i = find(id)) return *i;
  throw Error(ErrorCode::kUnknownNode, "no node with id '" + std::string(id) + "'");
}

std::size_t CausalTree::depth(NodeIndex i) const {
  std::size_t d = 0;
  for (NodeIndex p = node(i).parent; p != kNoNode; p = nodes_[p].parent) ++d;
  return d;
}

std::size_t CausalTree::height() const {
  std::vector<std::size_t> depth_of(size(), 0);
  std::size_t best = 0;
  for (NodeIndex i : preorder()) {
    if (nodes_[i].parent != kNoNode) depth_of[i] = depth_of[nodes_[i].parent] + 1;
    best = std::max(best, depth_of[i]);
  }
  return best;
}

std::size_t CausalTree::max_domain() const {
  std::size_t k = 0;
  for (const auto& n : nodes_) k = std::max(k, n.domain);
  return k;
}

bool CausalTree::is_complete_binary() const {
  return std::all_of(nodes_.begin(), nodes_.end(),
                     [](const Node& n) { return n.children.empty() || n.children.size() == 2; });
}

std::vector<NodeIndex> CausalTree::leaves_in_order() const {
  std::vector<NodeIndex> out;
  std::vector<NodeIndex> stack{root_};
  while (!stack.empty()) {
    const NodeIndex i = stack.back();
    stack.pop_back();
    const auto& ch = nodes_[i].children;
    if (ch.empty()) out.push_back(i);
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  return out;
}

std::vector<NodeIndex> CausalTree::preorder() const {
  std::vector<NodeIndex> out;
  out.reserve(size());
  std::vector<NodeIndex> stack{root_};
  while (!stack.empty()) {
    const NodeIndex i = stack.back();
    stack.pop_back();
    out.push_back(i);
    const auto& ch = nodes_[i].children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  return out;
}

void validate_likelihood(const std::vector<double>& likelihood, std::size_t domain) {
  if (likelihood.size() != domain) {
    throw Error(ErrorCode::kDimensionMismatch, "likelihood has " + std::to_string(likelihood.size()) +
                                                   " entries, domain is " + std::to_string(domain));
  }
  bool any_positive = false;
  for (double x : likelihood) {
    if (!std::isfinite(x) || x < 0.0) {
      throw Error(ErrorCode::kDimensionMismatch, "likelihood entries must be finite and nonnegative");
    }
    any_positive = any_positive || x > 0.0;
  }
  if (!any_positive) throw Error(ErrorCode::kAllZeroLikelihood, "likelihood vector is all zero");
}

void CausalTree::set_evidence(NodeIndex leaf, std::vector<double> likelihood) {
  if (leaf >= size()) throw Error(ErrorCode::kUnknownNode, "node index out of range");
  auto& n = nodes_[leaf];
  if (!n.children.empty()) throw Error(ErrorCode::kNotALeaf, "'" + n.id + "' is not a leaf");
  validate_likelihood(likelihood, n.domain);
  n.evidence = std::move(likelihood);
}

void CausalTree::set_evidence(std::string_view leaf_id, std::vector<double> likelihood) {
  set_evidence(index_of(leaf_id), std::move(likelihood));
}

// ---------------------------------------------------------------------------
// build_tree

CausalTree build_tree(const NetworkSpec& spec) {
  CausalTree tree;
  auto& nodes = tree.nodes_;
  nodes.resize(spec.nodes.size());

  for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
    const auto& s = spec.nodes[i];
    if (s.id.empty()) throw Error(ErrorCode::kInvalidNetwork, "node id must be non-empty");
    if (!tree.by_id_.emplace(s.id, i).second) throw Error(ErrorCode::kDuplicateId, "duplicate id '" + s.id + "'");
    if (s.domain == 0) throw Error(ErrorCode::kDimensionMismatch, "node '" + s.id + "' has domain 0");
    nodes[i].id = s.id;
    nodes[i].domain = s.domain;
  }

  NodeIndex root = kNoNode;
  for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
    const auto& s = spec.nodes[i];
    if (!s.parent) {
      if (root != kNoNode) {
        throw Error(ErrorCode::kMultipleRoots, "both '" + nodes[root].id + "' and '" + s.id + "' have no parent");
      }
      root = i;
      continue;
    }
    const auto p = tree.find(*s.parent);
    if (!p) throw Error(ErrorCode::kUnknownNode, "parent '" + *s.parent + "' of '" + s.id + "' does not exist");
    if (*p == i) throw Error(ErrorCode::kCycle, "node '" + s.id + "' is its own parent");
    nodes[i].parent = *p;
    nodes[*p].children.push_back(i);
  }
  if (root == kNoNode) throw Error(ErrorCode::kMissingRoot, spec.nodes.empty() ? "network is empty" : "every node has a parent");
  tree.root_ = root;

  // Every node must be reachable from the root; otherwise the parent links
  // close a cycle.
  if (tree.preorder().size() != nodes.size()) throw Error(ErrorCode::kCycle, "parent links contain a cycle");

  for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
    const auto& s = spec.nodes[i];
    auto& n = nodes[i];
    const bool is_root = i == root;
    const bool is_leaf = n.children.empty();

    if (is_root) {
      if (!s.cpt.empty()) throw Error(ErrorCode::kInvalidNetwork, "root '" + s.id + "' must not carry a cpt");
      if (s.prior.size() != n.domain) {
        throw Error(ErrorCode::kDimensionMismatch, "prior of root '" + s.id + "' must have " + std::to_string(n.domain) + " entries");
      }
      check_stochastic_row(s.prior, "prior of '" + s.id + "'");
      n.prior = s.prior;
    } else {
      if (!s.prior.empty()) throw Error(ErrorCode::kInvalidNetwork, "non-root '" + s.id + "' must not carry a prior");
      const std::size_t parent_domain = nodes[n.parent].domain;
      if (s.cpt.size() != parent_domain) {
        throw Error(ErrorCode::kDimensionMismatch, "cpt of '" + s.id + "' must have " + std::to_string(parent_domain) + " rows");
      }
      for (std::size_t r = 0; r < s.cpt.size(); ++r) {
        if (s.cpt[r].size() != n.domain) {
          throw Error(ErrorCode::kDimensionMismatch, "cpt row of '" + s.id + "' must have " + std::to_string(n.domain) + " entries");
        }
        check_stochastic_row(s.cpt[r], "cpt row " + std::to_string(r) + " of '" + s.id + "'");
      }
      n.cpt = ScaledMatrix::from_rows(s.cpt);
    }

    if (is_leaf) {
      if (s.evidence.empty()) throw Error(ErrorCode::kLeafWithoutEvidence, "leaf '" + s.id + "' has no evidence");
      validate_likelihood(s.evidence, n.domain);
      n.evidence = s.evidence;
    } else if (!s.evidence.empty()) {
      throw Error(ErrorCode::kInvalidNetwork, "internal node '" + s.id + "' must not carry evidence");
    }
  }
  return tree;
}

NetworkSpec to_spec(const CausalTree& tree) {
  NetworkSpec spec;
  spec.nodes.reserve(tree.size());
  for (const auto& n : tree.nodes()) {
    NodeSpec s;
    s.id = n.id;
    s.domain = n.domain;
    if (n.parent != kNoNode) {
      s.parent = tree.node(n.parent).id;
      s.cpt = n.cpt.to_rows();
    }
    s.prior = n.prior;
    s.evidence = n.evidence;
    spec.nodes.push_back(std::move(s));
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Normalization

ShapeNormalization normalize_shape(const std::vector<std::vector<NodeIndex>>& children, NodeIndex root) {
  using Origin = ShapeNormalization::Origin;
  ShapeNormalization out;
  out.root = root;
  out.nodes.resize(children.size());
  for (NodeIndex i = 0; i < children.size(); ++i) {
    out.nodes[i].source = i;
    for (NodeIndex c : children[i]) out.nodes[c].parent = i;
  }

  auto append = [&](Origin origin, NodeIndex source, NodeIndex parent) {
    ShapeNormalization::Entry e;
    e.origin = origin;
    e.source = source;
    e.parent = parent;
    out.nodes.push_back(std::move(e));
    return out.nodes.size() - 1;
  };

  for (NodeIndex i = 0; i < children.size(); ++i) {
    const auto& ch = children[i];
    if (ch.empty()) continue;
    if (ch.size() == 1) {
      const NodeIndex v = append(Origin::kVirtualLeaf, i, i);
      out.nodes[i].children = {ch[0], v};
      continue;
    }
    // Right-leaning spine of copies: i -> (c1, d1), d1 -> (c2, d2), ...
    NodeIndex holder = i;
    for (std::size_t j = 0; j + 2 < ch.size(); ++j) {
      const NodeIndex d = append(Origin::kSplit, i, holder);
      out.nodes[holder].children = {ch[j], d};
      out.nodes[ch[j]].parent = holder;
      holder = d;
    }
    out.nodes[holder].children = {ch[ch.size() - 2], ch.back()};
    out.nodes[ch[ch.size() - 2]].parent = holder;
    out.nodes[ch.back()].parent = holder;
  }
  return out;
}

NormalizedTree normalize_tree(const CausalTree& tree) {
  using Origin = ShapeNormalization::Origin;
  std::vector<std::vector<NodeIndex>> children(tree.size());
  for (NodeIndex i = 0; i < tree.size(); ++i) children[i] = tree.node(i).children;
  const ShapeNormalization shape = normalize_shape(children, tree.root());

  NormalizedTree out;
  out.tree = tree;
  auto& nodes = out.tree.nodes_;
  auto fresh_id = [&](std::string base) {
    while (out.tree.by_id_.count(base)) base += "'";
    return base;
  };

  std::vector<std::size_t> split_count(tree.size(), 0);
  for (NodeIndex i = tree.size(); i < shape.nodes.size(); ++i) {
    const auto& e = shape.nodes[i];
    const auto& owner = tree.node(e.source);
    CausalTree::Node n;
    if (e.origin == Origin::kSplit) {
      n.id = fresh_id(owner.id + "#split" + std::to_string(++split_count[e.source]));
      n.domain = owner.domain;
      n.cpt = ScaledMatrix::identity(owner.domain);
    } else {
      n.id = fresh_id(owner.id + "#virtual");
      n.domain = 1;
      n.cpt = ScaledMatrix(owner.domain, 1, std::vector<double>(owner.domain, 1.0));
      n.evidence = {1.0};
    }
    out.tree.by_id_.emplace(n.id, i);
    nodes.push_back(std::move(n));
  }
  for (NodeIndex i = 0; i < shape.nodes.size(); ++i) {
    nodes[i].parent = shape.nodes[i].parent;
    nodes[i].children = shape.nodes[i].children;
  }

  out.original_to_normalized.resize(tree.size());
  std::iota(out.original_to_normalized.begin(), out.original_to_normalized.end(), NodeIndex{0});
  out.is_original.assign(out.tree.size(), false);
  for (NodeIndex i = 0; i < tree.size(); ++i) out.is_original[i] = true;
  return out;
}

// ---------------------------------------------------------------------------
// Brute force

Belief make_belief(const ScaledVector& unnormalized) {
  Belief b;
  b.dist = unnormalized.normalized();
  if (b.dist.empty()) throw Error(ErrorCode::kImpossibleEvidence, "evidence has probability zero");
  b.log_normalizer = -unnormalized.log_sum();
  return b;
}

std::vector<Belief> brute_force_marginals(const CausalTree& tree, const BruteForceOptions& options) {
  const std::size_t n = tree.size();
  const NodeIndex root = tree.root();

  std::vector<NodeIndex> internal;
  std::vector<NodeIndex> leaves;
  for (NodeIndex i : tree.preorder()) (tree.is_leaf(i) ? leaves : internal).push_back(i);

  std::vector<std::vector<double>> acc(n);
  for (NodeIndex i = 0; i < n; ++i) acc[i].assign(tree.node(i).domain, 0.0);

  if (internal.empty()) {
    // A lone root that is also the evidence leaf.
    const auto& r = tree.node(root);
    for (std::size_t v = 0; v < r.domain; ++v) acc[root][v] = r.prior[v] * r.evidence[v];
  } else {
    std::uint64_t states = 1;
    for (NodeIndex i : internal) {
      states *= tree.node(i).domain;
      if (states > options.max_states) {
        throw Error(ErrorCode::kStateSpaceTooLarge, "joint enumeration exceeds " + std::to_string(options.max_states) + " states");
      }
    }

    // Plain tables: cpt[i][parent_value * domain + value].
    std::vector<std::vector<double>> cpt(n);
    for (NodeIndex i = 0; i < n; ++i) {
      const auto& node = tree.node(i);
      if (node.parent == kNoNode) continue;
      const auto rows = node.cpt.to_rows();
      for (const auto& row : rows) cpt[i].insert(cpt[i].end(), row.begin(), row.end());
    }

    std::vector<std::size_t> value(n, 0);
    std::vector<double> leaf_factor(leaves.size());
    std::vector<double> prefix(leaves.size() + 1);
    std::vector<double> suffix(leaves.size() + 1);

    for (std::uint64_t s = 0; s < states; ++s) {
      double weight = tree.node(root).prior[value[root]];
      for (NodeIndex i : internal) {
        if (i == root) continue;
        const auto& node = tree.node(i);
        weight *= cpt[i][value[node.parent] * node.domain + value[i]];
      }
      for (std::size_t l = 0; l < leaves.size(); ++l) {
        const auto& node = tree.node(leaves[l]);
        const double* row = cpt[leaves[l]].data() + value[node.parent] * node.domain;
        double f = 0.0;
        for (std::size_t v = 0; v < node.domain; ++v) f += row[v] * node.evidence[v];
        leaf_factor[l] = f;
      }
      prefix[0] = 1.0;
      for (std::size_t l = 0; l < leaves.size(); ++l) prefix[l + 1] = prefix[l] * leaf_factor[l];
      suffix[leaves.size()] = 1.0;
      for (std::size_t l = leaves.size(); l-- > 0;) suffix[l] = suffix[l + 1] * leaf_factor[l];

      const double total = weight * prefix[leaves.size()];
      for (NodeIndex i : internal) acc[i][value[i]] += total;
      for (std::size_t l = 0; l < leaves.size(); ++l) {
        const auto& node = tree.node(leaves[l]);
        const double others = weight * prefix[l] * suffix[l + 1];
        if (others == 0.0) continue;
        const double* row = cpt[leaves[l]].data() + value[node.parent] * node.domain;
        for (std::size_t v = 0; v < node.domain; ++v) acc[leaves[l]][v] += others * row[v] * node.evidence[v];
      }

      // Odometer over internal nodes.
      for (NodeIndex i : internal) {
        if (++value[i] < tree.node(i).domain) break;
        value[i] = 0;
      }
    }
  }

  std::vector<Belief> out(n);
  for (NodeIndex i = 0; i < n; ++i) out[i] = make_belief(ScaledVector(acc[i]));
  return out;
}

Belief brute_force_marginal(const CausalTree& tree, NodeIndex node, const BruteForceOptions& options) {
  if (node >= tree.size()) throw Error(ErrorCode::kUnknownNode, "node index out of range");
  return brute_force_marginals(tree, options)[node];
}

}  // namespace logbel
