#include "logbel/propagate.hpp"

#include <algorithm>

#include "logbel/error.hpp"

namespace logbel {

namespace {

void require_complete_binary(const CausalTree& tree) {
  if (!tree.is_complete_binary()) {
    throw Error(ErrorCode::kInvalidNetwork, "propagation needs a complete binary tree; normalize it first");
  }
}

ScaledVector evidence_of(const CausalTree::Node& leaf) { return ScaledVector(leaf.evidence); }

}  // namespace

PropagationTable full_propagate(const CausalTree& tree) {
  require_complete_binary(tree);
  const std::size_t n = tree.size();
  PropagationTable t;
  t.lambda.resize(n);
  t.pi.resize(n);
  t.bel.resize(n);
  auto& ops = t.counters;

  // message[c] = M_{c|parent(c)} . lambda(c), kept for the pi pass.
  std::vector<ScaledVector> message(n);
  const auto order = tree.preorder();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeIndex x = *it;
    const auto& node = tree.node(x);
    if (node.children.empty()) {
      t.lambda[x] = evidence_of(node);
    } else {
      const NodeIndex y = node.children[0];
      const NodeIndex z = node.children[1];
      t.lambda[x] = hadamard(message[y], message[z], ops);
      ops.equation_evals += 1;
    }
    if (node.parent != kNoNode) message[x] = multiply(node.cpt, t.lambda[x], ops);
  }

  for (NodeIndex x : order) {
    const auto& node = tree.node(x);
    if (node.parent == kNoNode) {
      t.pi[x] = ScaledVector(node.prior);
    } else {
      const auto& siblings = tree.node(node.parent).children;
      const NodeIndex v = siblings[0] == x ? siblings[1] : siblings[0];
      t.pi[x] = multiply_transposed(node.cpt, hadamard(t.pi[node.parent], message[v], ops), ops);
      ops.equation_evals += 1;
    }
    t.bel[x] = make_belief(hadamard(t.lambda[x], t.pi[x], ops));
  }
  return t;
}

const Belief& belief(const PropagationTable& table, NodeIndex node) {
  if (node >= table.bel.size()) throw Error(ErrorCode::kUnknownNode, "node index out of range");
  return table.bel[node];
}

// ---------------------------------------------------------------------------
// LazyState

LazyState::LazyState(CausalTree tree) : tree_(std::move(tree)) {
  require_complete_binary(tree_);
  lambda_.resize(tree_.size());
  const auto order = tree_.preorder();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (tree_.is_leaf(*it)) {
      lambda_[*it] = evidence_of(tree_.node(*it));
    } else {
      recompute_lambda(*it);
    }
  }
}

ScaledVector LazyState::message(NodeIndex child) { return multiply(tree_.node(child).cpt, lambda_[child], counters_); }

void LazyState::recompute_lambda(NodeIndex node) {
  const auto& ch = tree_.node(node).children;
  lambda_[node] = hadamard(message(ch[0]), message(ch[1]), counters_);
  counters_.equation_evals += 1;
}

void LazyState::update(NodeIndex leaf, std::vector<double> likelihood) {
  tree_.set_evidence(leaf, std::move(likelihood));
  lambda_[leaf] = evidence_of(tree_.node(leaf));
  for (NodeIndex p = tree_.node(leaf).parent; p != kNoNode; p = tree_.node(p).parent) recompute_lambda(p);
}

Belief LazyState::query(NodeIndex node) {
  if (node >= tree_.size()) throw Error(ErrorCode::kUnknownNode, "node index out of range");
  std::vector<NodeIndex> path;
  for (NodeIndex p = node; p != kNoNode; p = tree_.node(p).parent) path.push_back(p);
  std::reverse(path.begin(), path.end());

  ScaledVector pi(tree_.node(path.front()).prior);
  for (std::size_t i = 1; i < path.size(); ++i) {
    const NodeIndex u = path[i - 1];
    const NodeIndex x = path[i];
    const auto& siblings = tree_.node(u).children;
    const NodeIndex v = siblings[0] == x ? siblings[1] : siblings[0];
    pi = multiply_transposed(tree_.node(x).cpt, hadamard(pi, message(v), counters_), counters_);
    counters_.equation_evals += 1;
  }
  return make_belief(hadamard(lambda_[node], pi, counters_));
}

}  // namespace logbel
