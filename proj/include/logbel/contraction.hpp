#pragma once

// Tree contraction for logarithmic-time evidence updates and queries.
//
// A complete binary causal tree T0 is contracted by rounds of RAKE steps
// until only the root and the two extreme leaves remain.  Each rake removes a
// leaf e and its parent x and rewrites one coefficient of the grandparent u:
//
//   U'  =  U_x . Diag(X_e . lambda(e)) . X_z
//
// where U_x is u's coefficient on x's side and X_e, X_z are x's coefficients
// towards e and towards the surviving child z.  Only the lambda-side
// coefficients (A = left, B = right) are stored; the pi-side ones are views
// (C is the parent's coefficient towards the sibling, D the transpose of the
// parent's coefficient towards the node).
//
// The schedule (which node is raked when, which coefficient feeds which
// equation) depends only on the tree shape and lives in ContractionPlan.
// BasicContraction holds the coefficient values for a given algebra: dense
// matrices here, factored matrices for compiled join trees.

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "logbel/error.hpp"
#include "logbel/linalg.hpp"
#include "logbel/model.hpp"

namespace logbel {

enum class Side : std::uint8_t { kLeft = 0, kRight = 1 };
constexpr Side other_side(Side s) { return s == Side::kLeft ? Side::kRight : Side::kLeft; }
constexpr std::size_t index_of(Side s) { return static_cast<std::size_t>(s); }

using SlotId = std::size_t;
inline constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

// Shape of a complete binary tree.
struct TreeShape {
  std::vector<std::array<NodeIndex, 2>> children;  // kNoNode for leaves
  NodeIndex root = kNoNode;

  std::size_t size() const { return children.size(); }
  bool is_leaf(NodeIndex i) const { return children[i][0] == kNoNode; }

  static TreeShape of(const CausalTree& tree);
  static TreeShape of(const ShapeNormalization& shape);
};

struct RakeEvent {
  std::size_t round = 0;
  NodeIndex leaf = kNoNode;         // e
  NodeIndex parent = kNoNode;       // x
  NodeIndex survivor = kNoNode;     // z
  NodeIndex sibling = kNoNode;      // v
  NodeIndex grandparent = kNoNode;  // u
  Side leaf_side = Side::kLeft;     // e under x
  Side parent_side = Side::kLeft;   // x under u
  std::size_t grandparent_version = 0;  // u's version created by this rake
  SlotId grandparent_slot = kNone;  // U_x
  SlotId leaf_slot = kNone;         // X_e
  SlotId survivor_slot = kNone;     // X_z
  SlotId output_slot = kNone;       // U'
};

// The equations of one node between two rewrites.  Rakes run sequentially
// within a round, so a node can be rewritten more than once per round; each
// rewrite is a new version.
struct NodeVersion {
  std::size_t created_seq = 0;  // 0 for T0, else 1 + index of the creating rake
  std::size_t level = 0;        // 0 for T0, else 1 + round of the creating rake
  std::array<NodeIndex, 2> child{kNoNode, kNoNode};
  std::array<SlotId, 2> slot{kNone, kNone};  // A (left), B (right)
};

struct CoeffSlot {
  NodeIndex owner = kNoNode;
  Side side = Side::kLeft;
  std::size_t level = 0;           // level of the contracted tree where it first appears
  std::size_t defined_by = kNone;  // rake index, kNone for T0 coefficients
  std::size_t consumer = kNone;    // rake index whose equation reads it
};

struct LevelNode {
  NodeIndex node = kNoNode;
  NodeIndex parent = kNoNode;
  std::array<NodeIndex, 2> child{kNoNode, kNoNode};
  std::array<SlotId, 2> slot{kNone, kNone};
};

// The tree after a prefix of the rake sequence, with the coefficient slots
// valid there.
struct LevelView {
  NodeIndex root = kNoNode;
  std::vector<LevelNode> nodes;  // alive nodes, ascending node index
  std::vector<NodeIndex> leaves;  // left-to-right

  const LevelNode& at(NodeIndex node) const;
  bool contains(NodeIndex node) const;
};

class ContractionPlan {
 public:
  // Throws TreeTooSmall for fewer than three nodes, InvalidNetwork for a
  // tree that is not complete binary.
  explicit ContractionPlan(const TreeShape& shape);

  const TreeShape& shape() const { return shape_; }
  std::size_t node_count() const { return shape_.size(); }

  // Number of CONTRACT rounds; the contracted trees are T_0 .. T_rounds().
  std::size_t rounds() const { return round_end_.size(); }
  // Leaf count of T_i for i = 0 .. rounds().
  const std::vector<std::size_t>& leaf_counts() const { return leaf_counts_; }
  // Levels T_0 .. T_rounds().
  std::size_t level_count() const { return rounds() + 1; }

  const std::vector<RakeEvent>& rakes() const { return rakes_; }
  const RakeEvent& rake(std::size_t r) const { return rakes_.at(r); }
  // Index one past the last rake of round i.
  std::size_t round_end(std::size_t round) const { return round_end_.at(round); }

  const std::vector<CoeffSlot>& slots() const { return slots_; }
  const CoeffSlot& slot(SlotId s) const { return slots_.at(s); }
  std::size_t initial_slot_count() const { return initial_slots_; }

  const std::vector<NodeVersion>& versions(NodeIndex x) const { return versions_.at(x); }
  // Index of x's version in force at level i.
  std::size_t version_at(NodeIndex x, std::size_t level) const;
  // Rake that removes x as a raked parent / raked leaf, or kNone.
  std::size_t raked_as_parent(NodeIndex x) const { return raked_as_parent_.at(x); }
  std::size_t raked_as_leaf(NodeIndex e) const { return raked_as_leaf_.at(e); }
  // Rake whose equation reads leaf e's likelihood, or kNone.
  std::size_t leaf_consumer(NodeIndex e) const { return raked_as_leaf_.at(e); }
  // Highest level i at which x still has equations.
  std::size_t ind(NodeIndex x) const;

  LevelView view_after(std::size_t rake_count) const;
  LevelView level(std::size_t i) const;

  // Chain of slots rewritten when leaf e changes, in recomputation order.
  std::vector<SlotId> consumer_chain(NodeIndex e) const;

 private:
  TreeShape shape_;
  std::vector<NodeIndex> leaf_order_;
  std::vector<std::size_t> leaf_counts_;
  std::vector<std::size_t> round_end_;
  std::vector<RakeEvent> rakes_;
  std::vector<CoeffSlot> slots_;
  std::size_t initial_slots_ = 0;
  std::vector<std::vector<NodeVersion>> versions_;
  std::vector<std::size_t> raked_as_parent_;
  std::vector<std::size_t> raked_as_leaf_;
};

struct PiLambdaTriple {
  ScaledVector pi;     // pi(x)
  ScaledVector left;   // lambda of the left child
  ScaledVector right;  // lambda of the right child

  ScaledVector& side(Side s) { return s == Side::kLeft ? left : right; }
  const ScaledVector& side(Side s) const { return s == Side::kLeft ? left : right; }
};

struct UpdateReport {
  std::vector<SlotId> recomputed;  // in recomputation order
};

// Dense algebra: coefficients are matrices.
struct DenseAlgebra {
  using Coeff = ScaledMatrix;

  ScaledVector apply(const Coeff& m, const ScaledVector& v, OpCounters& ops) const { return multiply(m, v, ops); }
  ScaledVector apply_transposed(const Coeff& m, const ScaledVector& v, OpCounters& ops) const {
    return multiply_transposed(m, v, ops);
  }
  // U_x . Diag(X_e . lambda_e) . X_z
  Coeff rake(const Coeff& u_x, const Coeff& x_e, const ScaledVector& lambda_e, const Coeff& x_z, OpCounters& ops) const;
  ScaledMatrix materialize(const Coeff& m) const { return m; }
  // Scales the first row by 1.5.
  Coeff corrupted(const Coeff& m) const;
};

template <class Algebra>
class BasicContraction {
 public:
  using Coeff = typename Algebra::Coeff;

  // `edge` holds, for every non-root node, the coefficient on the edge from
  // its parent (rows indexed by the parent's value).  `evidence` holds the
  // likelihood of every leaf.
  BasicContraction(const TreeShape& shape, std::vector<Coeff> edge, ScaledVector prior,
                   std::vector<ScaledVector> evidence, Algebra algebra = {});

  const ContractionPlan& plan() const { return plan_; }
  const Coeff& coefficient(SlotId s) const { return coeff_.at(s); }
  std::size_t stored_coefficients() const { return coeff_.size(); }
  const ScaledVector& evidence(NodeIndex leaf) const { return evidence_.at(leaf); }
  const ScaledVector& prior() const { return prior_; }
  const OpCounters& counters() const { return counters_; }
  const Algebra& algebra() const { return algebra_; }
  // Recursion frames (one per level visited) of the last calc_pi_lambda,
  // pi_query or belief_query.
  std::size_t last_recursion_depth() const { return last_depth_; }

  ScaledVector lambda_query(NodeIndex x);
  ScaledVector pi_query(NodeIndex x);
  // Throws UnknownNode, LevelOutOfRange (x absent from T_level or a leaf there).
  PiLambdaTriple calc_pi_lambda(NodeIndex x, std::size_t level);
  // Throws ImpossibleEvidence.
  Belief belief_query(NodeIndex x);
  // Throws NotALeaf, DimensionMismatch, AllZeroLikelihood.
  UpdateReport update_evidence(NodeIndex leaf, const std::vector<double>& likelihood);

  // Bottom-up lambda and top-down pi over the equations of the tree after
  // `rake_count` rakes; entries of removed nodes are left empty.
  struct Evaluation {
    std::vector<ScaledVector> lambda;
    std::vector<ScaledVector> pi;
  };
  Evaluation evaluate_after(std::size_t rake_count);

  // Fault injection for the verification harness.
  void corrupt_coefficient(SlotId s);

 private:
  void check_node(NodeIndex x) const;
  ScaledVector eval_lambda(const std::array<SlotId, 2>& slot, const ScaledVector& left, const ScaledVector& right);
  ScaledVector combine(const ScaledVector& left_message, const ScaledVector& right_message);
  ScaledVector eval_pi(SlotId toward_node, const ScaledVector& parent_pi, const ScaledVector& sibling_message);

  // A child's lambda given as `lambda` plus the rakes that rebuild it, in
  // application order.  The first `foreign` rakes rebuild a grandchild that
  // became this child when a node was raked; the rest are rewrites of this
  // side, which preserve the message (coefficient . lambda) sent up it, so
  // they only need evaluating when the exact lambda is asked for.
  struct LazySide {
    std::vector<std::size_t> rewrites;
    ScaledVector lambda;
    std::size_t foreign = 0;
  };
  struct Frame {
    ScaledVector pi;
    std::array<LazySide, 2> side;
  };
  ScaledVector message(LazySide& side, SlotId own_slot);
  // Evaluates the first `count` pending rakes of the side.
  void materialize(LazySide& side, std::size_t count);
  // Frame for version `version` of x, which must be in force during round
  // `level` (between T_level and T_level+1).
  Frame calc(NodeIndex x, std::size_t level, std::size_t version, std::size_t depth);
  Coeff recompute(const RakeEvent& r);

  ContractionPlan plan_;
  Algebra algebra_;
  std::vector<Coeff> coeff_;
  ScaledVector prior_;
  std::vector<ScaledVector> evidence_;
  OpCounters counters_;
  std::size_t last_depth_ = 0;
};

using ContractionIndex = BasicContraction<DenseAlgebra>;

// Preprocesses a normalized causal tree.  Throws TreeTooSmall.
ContractionIndex contract(const CausalTree& tree);

// ---------------------------------------------------------------------------
// Implementation

template <class Algebra>
BasicContraction<Algebra>::BasicContraction(const TreeShape& shape, std::vector<Coeff> edge, ScaledVector prior,
                                            std::vector<ScaledVector> evidence, Algebra algebra)
    : plan_(shape), algebra_(std::move(algebra)), prior_(std::move(prior)), evidence_(std::move(evidence)) {
  if (edge.size() != shape.size() || evidence_.size() != shape.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "per-node inputs must cover every node");
  }
  coeff_.reserve(plan_.slots().size());
  for (SlotId s = 0; s < plan_.initial_slot_count(); ++s) {
    const auto& slot = plan_.slot(s);
    coeff_.push_back(std::move(edge[shape.children[slot.owner][index_of(slot.side)]]));
  }
  for (const auto& r : plan_.rakes()) coeff_.push_back(recompute(r));
}

template <class Algebra>
typename BasicContraction<Algebra>::Coeff BasicContraction<Algebra>::recompute(const RakeEvent& r) {
  return algebra_.rake(coeff_[r.grandparent_slot], coeff_[r.leaf_slot], evidence_[r.leaf], coeff_[r.survivor_slot],
                       counters_);
}

template <class Algebra>
void BasicContraction<Algebra>::check_node(NodeIndex x) const {
  if (x >= plan_.node_count()) throw Error(ErrorCode::kUnknownNode, "node index " + std::to_string(x) + " out of range");
}

template <class Algebra>
ScaledVector BasicContraction<Algebra>::combine(const ScaledVector& left_message, const ScaledVector& right_message) {
  counters_.equation_evals += 1;
  return hadamard(left_message, right_message, counters_);
}

template <class Algebra>
ScaledVector BasicContraction<Algebra>::eval_lambda(const std::array<SlotId, 2>& slot, const ScaledVector& left,
                                                    const ScaledVector& right) {
  return combine(algebra_.apply(coeff_[slot[0]], left, counters_), algebra_.apply(coeff_[slot[1]], right, counters_));
}

template <class Algebra>
ScaledVector BasicContraction<Algebra>::eval_pi(SlotId toward_node, const ScaledVector& parent_pi,
                                                const ScaledVector& sibling_message) {
  counters_.equation_evals += 1;
  return algebra_.apply_transposed(coeff_[toward_node], hadamard(parent_pi, sibling_message, counters_), counters_);
}

template <class Algebra>
ScaledVector BasicContraction<Algebra>::message(LazySide& side, SlotId own_slot) {
  materialize(side, side.foreign);
  const SlotId slot = side.rewrites.empty() ? own_slot : plan_.rake(side.rewrites.front()).output_slot;
  return algebra_.apply(coeff_[slot], side.lambda, counters_);
}

template <class Algebra>
void BasicContraction<Algebra>::materialize(LazySide& side, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    const auto& r = plan_.rake(side.rewrites[i]);
    const auto& removed = plan_.versions(r.parent).back();
    side.lambda = r.leaf_side == Side::kLeft ? eval_lambda(removed.slot, evidence_[r.leaf], side.lambda)
                                             : eval_lambda(removed.slot, side.lambda, evidence_[r.leaf]);
  }
  side.rewrites.erase(side.rewrites.begin(), side.rewrites.begin() + static_cast<std::ptrdiff_t>(count));
  side.foreign -= std::min(side.foreign, count);
}

template <class Algebra>
ScaledVector BasicContraction<Algebra>::lambda_query(NodeIndex x) {
  check_node(x);
  const auto& shape = plan_.shape();
  if (shape.is_leaf(x)) return evidence_[x];
  // Each equation at ind(x) has at least one leaf operand; follow the other.
  std::vector<NodeIndex> chain;
  for (NodeIndex cur = x; !shape.is_leaf(cur);) {
    chain.push_back(cur);
    const auto& v = plan_.versions(cur).back();
    const bool left_leaf = shape.is_leaf(v.child[0]);
    const bool right_leaf = shape.is_leaf(v.child[1]);
    if (left_leaf && right_leaf) break;
    cur = left_leaf ? v.child[1] : v.child[0];
  }
  ScaledVector below;
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    const auto& v = plan_.versions(*it).back();
    const ScaledVector& l = shape.is_leaf(v.child[0]) ? evidence_[v.child[0]] : below;
    const ScaledVector& r = shape.is_leaf(v.child[1]) ? evidence_[v.child[1]] : below;
    below = eval_lambda(v.slot, l, r);
  }
  return below;
}

// One frame per level.  Within round i the rewrites between (x, T_i) and a
// node version that survives into T_{i+1} are walked iteratively: either x
// itself was rewritten later in the round (one of its children was spliced
// out), or x was raked and its pi comes from the grandparent's version right
// after that rake.  The frame recurses once on the surviving version and then
// replays the walk backwards.
template <class Algebra>
typename BasicContraction<Algebra>::Frame BasicContraction<Algebra>::calc(NodeIndex x, std::size_t level,
                                                                          std::size_t version, std::size_t depth) {
  last_depth_ = std::max(last_depth_, depth);
  const auto& shape = plan_.shape();

  if (level == plan_.rounds()) {
    const auto& v = plan_.versions(x).back();
    if (x != shape.root || !shape.is_leaf(v.child[0]) || !shape.is_leaf(v.child[1])) {
      throw Error(ErrorCode::kConstructionError, "final level is not a three-node tree");
    }
    return Frame{prior_, {LazySide{{}, evidence_[v.child[0]]}, LazySide{{}, evidence_[v.child[1]]}}};
  }

  struct Step {
    NodeIndex node;
    std::size_t version;
    bool raked;  // node was raked; otherwise it was rewritten
  };
  std::vector<Step> walk;
  NodeIndex y = x;
  std::size_t j = version;
  for (;;) {
    const auto& vs = plan_.versions(y);
    if (j + 1 < vs.size()) {
      if (vs[j + 1].level != level + 1) break;
      walk.push_back({y, j, false});
      ++j;
      continue;
    }
    const std::size_t ri = plan_.raked_as_parent(y);
    if (ri == kNone || plan_.rake(ri).round != level) break;
    walk.push_back({y, j, true});
    y = plan_.rake(ri).grandparent;
    j = plan_.rake(ri).grandparent_version;
  }

  Frame t = calc(y, level + 1, j, depth + 1);
  for (auto it = walk.rbegin(); it != walk.rend(); ++it) {
    if (!it->raked) {
      const std::size_t ri = plan_.versions(y)[j].created_seq - 1;
      t.side[index_of(plan_.rake(ri).parent_side)].rewrites.push_back(ri);
      j = it->version;
      continue;
    }
    const auto& r = plan_.rake(plan_.raked_as_parent(it->node));
    const auto& uv = plan_.versions(y)[j];
    const std::size_t sib = index_of(other_side(r.parent_side));
    Frame out;
    out.pi = eval_pi(r.grandparent_slot, t.pi, message(t.side[sib], uv.slot[sib]));
    LazySide& survivor = t.side[index_of(r.parent_side)];
    survivor.foreign = survivor.rewrites.size();
    out.side[index_of(r.leaf_side)] = LazySide{{}, evidence_[r.leaf]};
    out.side[index_of(other_side(r.leaf_side))] = std::move(survivor);
    t = std::move(out);
    y = it->node;
    j = it->version;
  }
  return t;
}

template <class Algebra>
PiLambdaTriple BasicContraction<Algebra>::calc_pi_lambda(NodeIndex x, std::size_t level) {
  check_node(x);
  if (level > plan_.rounds()) throw Error(ErrorCode::kLevelOutOfRange, "level " + std::to_string(level) + " exceeds final level");
  if (plan_.shape().is_leaf(x) || plan_.ind(x) < level) {
    throw Error(ErrorCode::kLevelOutOfRange, "node has no lambda equation at level " + std::to_string(level));
  }
  last_depth_ = 0;
  Frame f = calc(x, level, plan_.version_at(x, level), 1);
  materialize(f.side[0], f.side[0].rewrites.size());
  materialize(f.side[1], f.side[1].rewrites.size());
  return PiLambdaTriple{std::move(f.pi), std::move(f.side[0].lambda), std::move(f.side[1].lambda)};
}

template <class Algebra>
ScaledVector BasicContraction<Algebra>::pi_query(NodeIndex x) {
  check_node(x);
  last_depth_ = 0;
  const auto& shape = plan_.shape();
  if (x == shape.root) return prior_;
  if (!shape.is_leaf(x)) return calc(x, plan_.ind(x), plan_.versions(x).size() - 1, 1).pi;

  const std::size_t ri = plan_.raked_as_leaf(x);
  NodeIndex parent;
  Side side;
  if (ri != kNone) {
    parent = plan_.rake(ri).parent;
    side = plan_.rake(ri).leaf_side;
  } else {
    parent = shape.root;
    side = plan_.versions(parent).back().child[0] == x ? Side::kLeft : Side::kRight;
  }
  const auto& pv = plan_.versions(parent).back();
  Frame f = calc(parent, plan_.ind(parent), plan_.versions(parent).size() - 1, 1);
  const std::size_t sib = index_of(other_side(side));
  return eval_pi(pv.slot[index_of(side)], f.pi, message(f.side[sib], pv.slot[sib]));
}

template <class Algebra>
Belief BasicContraction<Algebra>::belief_query(NodeIndex x) {
  check_node(x);
  if (plan_.shape().is_leaf(x)) {
    const ScaledVector pi = pi_query(x);
    return make_belief(hadamard(evidence_[x], pi, counters_));
  }
  last_depth_ = 0;
  const auto& versions = plan_.versions(x);
  Frame f = calc(x, plan_.ind(x), versions.size() - 1, 1);
  const auto& slot = versions.back().slot;
  const ScaledVector lambda = combine(message(f.side[0], slot[0]), message(f.side[1], slot[1]));
  return make_belief(hadamard(lambda, f.pi, counters_));
}

template <class Algebra>
UpdateReport BasicContraction<Algebra>::update_evidence(NodeIndex leaf, const std::vector<double>& likelihood) {
  check_node(leaf);
  if (!plan_.shape().is_leaf(leaf)) throw Error(ErrorCode::kNotALeaf, "node " + std::to_string(leaf) + " is not a leaf");
  validate_likelihood(likelihood, evidence_[leaf].size());
  evidence_[leaf] = ScaledVector(likelihood);

  UpdateReport report;
  for (std::size_t ri = plan_.leaf_consumer(leaf); ri != kNone;) {
    const auto& r = plan_.rake(ri);
    coeff_[r.output_slot] = recompute(r);
    report.recomputed.push_back(r.output_slot);
    ri = plan_.slot(r.output_slot).consumer;
  }
  return report;
}

template <class Algebra>
typename BasicContraction<Algebra>::Evaluation BasicContraction<Algebra>::evaluate_after(std::size_t rake_count) {
  const LevelView view = plan_.view_after(rake_count);
  Evaluation ev;
  ev.lambda.resize(plan_.node_count());
  ev.pi.resize(plan_.node_count());

  // Children have larger depth; order alive nodes root-first.
  std::vector<NodeIndex> order{view.root};
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& n = view.at(order[i]);
    if (n.child[0] != kNoNode) {
      order.push_back(n.child[0]);
      order.push_back(n.child[1]);
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto& n = view.at(*it);
    ev.lambda[*it] = n.child[0] == kNoNode ? evidence_[*it] : eval_lambda(n.slot, ev.lambda[n.child[0]], ev.lambda[n.child[1]]);
  }
  for (NodeIndex x : order) {
    const auto& n = view.at(x);
    if (n.parent == kNoNode) {
      ev.pi[x] = prior_;
      continue;
    }
    const auto& p = view.at(n.parent);
    const Side s = p.child[0] == x ? Side::kLeft : Side::kRight;
    const NodeIndex sibling = p.child[index_of(other_side(s))];
    ev.pi[x] = eval_pi(p.slot[index_of(s)], ev.pi[n.parent],
                       algebra_.apply(coeff_[p.slot[index_of(other_side(s))]], ev.lambda[sibling], counters_));
  }
  return ev;
}

template <class Algebra>
void BasicContraction<Algebra>::corrupt_coefficient(SlotId s) {
  coeff_.at(s) = algebra_.corrupted(coeff_.at(s));
}

}  // namespace logbel
