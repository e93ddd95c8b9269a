#include "logbel/contraction.hpp"

#include <algorithm>

namespace logbel {

TreeShape TreeShape::of(const CausalTree& tree) {
  TreeShape shape;
  shape.root = tree.root();
  shape.children.assign(tree.size(), {kNoNode, kNoNode});
  for (NodeIndex i = 0; i < tree.size(); ++i) {
    const auto& ch = tree.node(i).children;
    if (ch.empty()) continue;
    if (ch.size() != 2) throw Error(ErrorCode::kInvalidNetwork, "node '" + tree.node(i).id + "' does not have two children");
    shape.children[i] = {ch[0], ch[1]};
  }
  return shape;
}

TreeShape TreeShape::of(const ShapeNormalization& norm) {
  TreeShape shape;
  shape.root = norm.root;
  shape.children.assign(norm.nodes.size(), {kNoNode, kNoNode});
  for (NodeIndex i = 0; i < norm.nodes.size(); ++i) {
    const auto& ch = norm.nodes[i].children;
    if (ch.empty()) continue;
    if (ch.size() != 2) throw Error(ErrorCode::kInvalidNetwork, "shape is not complete binary");
    shape.children[i] = {ch[0], ch[1]};
  }
  return shape;
}

const LevelNode& LevelView::at(NodeIndex node) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), node,
                             [](const LevelNode& n, NodeIndex x) { return n.node < x; });
  if (it == nodes.end() || it->node != node) throw Error(ErrorCode::kLevelOutOfRange, "node absent at this level");
  return *it;
}

bool LevelView::contains(NodeIndex node) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), node,
                             [](const LevelNode& n, NodeIndex x) { return n.node < x; });
  return it != nodes.end() && it->node == node;
}

ContractionPlan::ContractionPlan(const TreeShape& shape) : shape_(shape) {
  const std::size_t n = shape_.size();
  if (n < 3 || shape_.root >= n || shape_.is_leaf(shape_.root)) {
    throw Error(ErrorCode::kTreeTooSmall, "contraction needs a root with two children");
  }

  std::vector<NodeIndex> parent(n, kNoNode);
  std::vector<NodeIndex> stack{shape_.root};
  std::size_t seen = 0;
  while (!stack.empty()) {
    const NodeIndex x = stack.back();
    stack.pop_back();
    ++seen;
    const auto& ch = shape_.children[x];
    if (ch[0] == kNoNode && ch[1] == kNoNode) {
      leaf_order_.push_back(x);
      continue;
    }
    for (NodeIndex c : ch) {
      if (c >= n || parent[c] != kNoNode || c == shape_.root) {
        throw Error(ErrorCode::kInvalidNetwork, "shape is not a complete binary tree");
      }
      parent[c] = x;
    }
    stack.push_back(ch[1]);
    stack.push_back(ch[0]);
  }
  if (seen != n) throw Error(ErrorCode::kInvalidNetwork, "shape is not connected");

  versions_.resize(n);
  raked_as_parent_.assign(n, kNone);
  raked_as_leaf_.assign(n, kNone);
  for (NodeIndex x = 0; x < n; ++x) {
    if (shape_.is_leaf(x)) continue;
    NodeVersion v;
    v.child = shape_.children[x];
    for (Side s : {Side::kLeft, Side::kRight}) {
      v.slot[index_of(s)] = slots_.size();
      slots_.push_back(CoeffSlot{x, s, 0, kNone, kNone});
    }
    versions_[x].push_back(v);
  }
  initial_slots_ = slots_.size();

  auto consume = [&](SlotId s, std::size_t rake) {
    if (slots_[s].consumer != kNone) throw Error(ErrorCode::kConstructionError, "coefficient consumed twice");
    slots_[s].consumer = rake;
  };

  std::vector<NodeIndex> leaves = leaf_order_;
  std::vector<bool> removed(n, false);
  leaf_counts_.push_back(leaves.size());
  for (std::size_t round = 0; leaves.size() > 2; ++round) {
    for (std::size_t i = 1; i + 1 < leaves.size(); i += 2) {
      const NodeIndex e = leaves[i];
      const NodeIndex x = parent[e];
      const NodeIndex u = parent[x];
      if (u == kNoNode) throw Error(ErrorCode::kNotRakeable, "leaf's parent is the root");
      const NodeVersion xv = versions_[x].back();
      const NodeVersion uv = versions_[u].back();

      RakeEvent r;
      r.round = round;
      r.leaf = e;
      r.parent = x;
      r.grandparent = u;
      r.leaf_side = xv.child[0] == e ? Side::kLeft : Side::kRight;
      r.survivor = xv.child[index_of(other_side(r.leaf_side))];
      r.parent_side = uv.child[0] == x ? Side::kLeft : Side::kRight;
      r.sibling = uv.child[index_of(other_side(r.parent_side))];

      const std::size_t ri = rakes_.size();
      r.grandparent_version = versions_[u].size();
      r.grandparent_slot = uv.slot[index_of(r.parent_side)];
      r.leaf_slot = xv.slot[index_of(r.leaf_side)];
      r.survivor_slot = xv.slot[index_of(other_side(r.leaf_side))];
      r.output_slot = slots_.size();
      slots_.push_back(CoeffSlot{u, r.parent_side, round + 1, ri, kNone});
      consume(r.grandparent_slot, ri);
      consume(r.leaf_slot, ri);
      consume(r.survivor_slot, ri);

      NodeVersion nv = uv;
      nv.created_seq = ri + 1;
      nv.level = round + 1;
      nv.child[index_of(r.parent_side)] = r.survivor;
      nv.slot[index_of(r.parent_side)] = r.output_slot;
      versions_[u].push_back(nv);

      parent[r.survivor] = u;
      removed[e] = removed[x] = true;
      raked_as_parent_[x] = ri;
      raked_as_leaf_[e] = ri;
      rakes_.push_back(r);
    }
    std::erase_if(leaves, [&](NodeIndex l) { return removed[l]; });
    round_end_.push_back(rakes_.size());
    leaf_counts_.push_back(leaves.size());
  }
}

std::size_t ContractionPlan::ind(NodeIndex x) const {
  if (raked_as_parent_.at(x) != kNone) return rakes_[raked_as_parent_[x]].round;
  if (raked_as_leaf_.at(x) != kNone) return rakes_[raked_as_leaf_[x]].round;
  return rounds();
}

std::size_t ContractionPlan::version_at(NodeIndex x, std::size_t level) const {
  const auto& vs = versions_.at(x);
  std::size_t j = 0;
  while (j + 1 < vs.size() && vs[j + 1].level <= level) ++j;
  return j;
}

LevelView ContractionPlan::view_after(std::size_t rake_count) const {
  if (rake_count > rakes_.size()) throw Error(ErrorCode::kLevelOutOfRange, "rake count out of range");
  auto alive = [&](NodeIndex x) {
    return (raked_as_parent_[x] == kNone || raked_as_parent_[x] >= rake_count) &&
           (raked_as_leaf_[x] == kNone || raked_as_leaf_[x] >= rake_count);
  };
  LevelView view;
  view.root = shape_.root;
  for (NodeIndex x = 0; x < shape_.size(); ++x) {
    if (!alive(x)) continue;
    LevelNode ln;
    ln.node = x;
    if (!shape_.is_leaf(x)) {
      const auto& vs = versions_[x];
      std::size_t j = 0;
      while (j + 1 < vs.size() && vs[j + 1].created_seq <= rake_count) ++j;
      ln.child = vs[j].child;
      ln.slot = vs[j].slot;
    }
    view.nodes.push_back(ln);
  }
  for (const auto& ln : view.nodes) {
    if (ln.child[0] == kNoNode) continue;
    for (NodeIndex c : ln.child) {
      auto it = std::lower_bound(view.nodes.begin(), view.nodes.end(), c,
                                 [](const LevelNode& a, NodeIndex b) { return a.node < b; });
      it->parent = ln.node;
    }
  }
  for (NodeIndex l : leaf_order_) {
    if (alive(l)) view.leaves.push_back(l);
  }
  return view;
}

LevelView ContractionPlan::level(std::size_t i) const {
  if (i > rounds()) throw Error(ErrorCode::kLevelOutOfRange, "level " + std::to_string(i) + " exceeds final level");
  return view_after(i == 0 ? 0 : round_end_[i - 1]);
}

std::vector<SlotId> ContractionPlan::consumer_chain(NodeIndex e) const {
  std::vector<SlotId> chain;
  for (std::size_t ri = raked_as_leaf_.at(e); ri != kNone; ri = slots_[rakes_[ri].output_slot].consumer) {
    chain.push_back(rakes_[ri].output_slot);
  }
  return chain;
}

ScaledMatrix DenseAlgebra::rake(const Coeff& u_x, const Coeff& x_e, const ScaledVector& lambda_e, const Coeff& x_z,
                                OpCounters& ops) const {
  return multiply(scale_columns(u_x, multiply(x_e, lambda_e, ops), ops), x_z, ops);
}

ScaledMatrix DenseAlgebra::corrupted(const Coeff& m) const {
  ScaledMatrix out = m;
  for (std::size_t c = 0; c < out.cols(); ++c) out.mantissa_at(0, c) *= 1.5;
  out.rebalance();
  return out;
}

template class BasicContraction<DenseAlgebra>;

ContractionIndex contract(const CausalTree& tree) {
  if (tree.size() < 3) throw Error(ErrorCode::kTreeTooSmall, "contraction needs at least three nodes");
  const TreeShape shape = TreeShape::of(tree);
  std::vector<ScaledMatrix> edge(tree.size());
  std::vector<ScaledVector> evidence(tree.size());
  for (NodeIndex i = 0; i < tree.size(); ++i) {
    const auto& node = tree.node(i);
    if (node.parent != kNoNode) edge[i] = node.cpt;
    if (node.children.empty()) evidence[i] = ScaledVector(node.evidence);
  }
  return ContractionIndex(shape, std::move(edge), ScaledVector(tree.node(tree.root()).prior), std::move(evidence));
}

}  // namespace logbel
