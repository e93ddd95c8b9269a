#pragma once

// Linear-time lambda/pi propagation over a complete binary causal tree, and
// the depth-bounded variant that keeps only lambda vectors current.

#include <vector>

#include "logbel/linalg.hpp"
#include "logbel/model.hpp"

namespace logbel {

struct PropagationTable {
  std::vector<ScaledVector> lambda;
  std::vector<ScaledVector> pi;
  std::vector<Belief> bel;
  OpCounters counters;
};

// One bottom-up lambda pass and one top-down pi pass.  Requires a complete
// binary tree.  Throws ImpossibleEvidence.
PropagationTable full_propagate(const CausalTree& tree);

// Throws UnknownNode.
const Belief& belief(const PropagationTable& table, NodeIndex node);

class LazyState {
 public:
  // Computes every lambda once; pi vectors are never stored.
  explicit LazyState(CausalTree tree);

  // Replaces a leaf's likelihood and recomputes the lambda vectors of its
  // ancestors, one equation each.  Throws NotALeaf, DimensionMismatch,
  // AllZeroLikelihood.
  void update(NodeIndex leaf, std::vector<double> likelihood);

  // Walks pi down the root-to-node path.  Throws UnknownNode,
  // ImpossibleEvidence.
  Belief query(NodeIndex node);

  const CausalTree& tree() const { return tree_; }
  const ScaledVector& lambda(NodeIndex node) const { return lambda_.at(node); }
  const OpCounters& counters() const { return counters_; }

 private:
  ScaledVector message(NodeIndex child);  // M_{child|parent} . lambda(child)
  void recompute_lambda(NodeIndex node);

  CausalTree tree_;
  std::vector<ScaledVector> lambda_;
  OpCounters counters_;
};

}  // namespace logbel
