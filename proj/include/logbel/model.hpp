#pragma once

// Causal-tree data model: construction and validation, normalization to a
// complete binary tree, evidence, the JSON network format, and a brute-force
// joint-enumeration oracle.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "logbel/linalg.hpp"

namespace logbel {

using NodeIndex = std::size_t;
inline constexpr NodeIndex kNoNode = static_cast<NodeIndex>(-1);

inline constexpr double kStochasticTolerance = 1e-9;

// Posterior marginal.  `dist` sums to one; `log_normalizer` is log(alpha),
// alpha being the constant that normalized lambda * pi (so -log_normalizer is
// the log-probability of the evidence).
struct Belief {
  std::vector<double> dist;
  double log_normalizer = 0.0;
};

// Input description of one node, mirroring the network file.
struct NodeSpec {
  std::string id;
  std::size_t domain = 0;
  std::optional<std::string> parent;
  std::vector<std::vector<double>> cpt;  // parent-domain rows, own-domain columns
  std::vector<double> prior;             // root only
  std::vector<double> evidence;          // leaves only
};

struct NetworkSpec {
  std::vector<NodeSpec> nodes;
};

class CausalTree {
 public:
  struct Node {
    std::string id;
    std::size_t domain = 0;
    NodeIndex parent = kNoNode;
    std::vector<NodeIndex> children;  // declaration order
    ScaledMatrix cpt;                 // M_{node|parent}; empty for the root
    std::vector<double> prior;        // root only
    std::vector<double> evidence;     // leaves only
  };

  std::size_t size() const { return nodes_.size(); }
  const Node& node(NodeIndex i) const { return nodes_.at(i); }
  const std::vector<Node>& nodes() const { return nodes_; }
  NodeIndex root() const { return root_; }

  bool is_leaf(NodeIndex i) const { return nodes_.at(i).children.empty(); }
  std::optional<NodeIndex> find(std::string_view id) const;
  // Throws UnknownNode.
  NodeIndex index_of(std::string_view id) const;

  std::size_t depth(NodeIndex i) const;
  std::size_t height() const;
  std::size_t max_domain() const;
  // Every internal node has exactly two children.
  bool is_complete_binary() const;
  // Leaves in left-to-right order.
  std::vector<NodeIndex> leaves_in_order() const;
  // Nodes with every parent before its children.
  std::vector<NodeIndex> preorder() const;

  // Replaces the likelihood of a leaf.  Throws NotALeaf, DimensionMismatch,
  // AllZeroLikelihood.
  void set_evidence(NodeIndex leaf, std::vector<double> likelihood);
  void set_evidence(std::string_view leaf_id, std::vector<double> likelihood);

 private:
  friend CausalTree build_tree(const NetworkSpec& spec);
  friend struct NormalizedTree normalize_tree(const CausalTree& tree);

  std::vector<Node> nodes_;
  std::unordered_map<std::string, NodeIndex> by_id_;
  NodeIndex root_ = kNoNode;
};

// Validates a network description.  Child order is declaration order.
CausalTree build_tree(const NetworkSpec& spec);

// Checks a likelihood vector for a node of the given domain size.
void validate_likelihood(const std::vector<double>& likelihood, std::size_t domain);

// Shape-level normalization shared by dense trees and compiled join trees.
// Original nodes keep their indices; inserted nodes are appended.
struct ShapeNormalization {
  enum class Origin { kOriginal, kSplit, kVirtualLeaf };
  struct Entry {
    Origin origin = Origin::kOriginal;
    NodeIndex source = kNoNode;  // the original node this entry stands for / serves
    NodeIndex parent = kNoNode;
    std::vector<NodeIndex> children;
  };
  std::vector<Entry> nodes;
  NodeIndex root = kNoNode;
};

ShapeNormalization normalize_shape(const std::vector<std::vector<NodeIndex>>& children, NodeIndex root);

struct NormalizedTree {
  CausalTree tree;
  // Index in `tree` of every node of the input tree.
  std::vector<NodeIndex> original_to_normalized;
  std::vector<bool> is_original;
};

// Splits nodes with more than two children using identity-edge copies of the
// node, and gives single-child nodes an uninformative unit-domain leaf.
NormalizedTree normalize_tree(const CausalTree& tree);

// JSON network format: {"nodes":[{"id","domain","parent","cpt","prior","evidence"}]}.
NetworkSpec parse_network_spec(std::string_view json_text);
CausalTree parse_network(std::string_view json_text);
std::string serialize_network(const CausalTree& tree);
NetworkSpec to_spec(const CausalTree& tree);

struct BruteForceOptions {
  std::uint64_t max_states = std::uint64_t{1} << 24;
};

// Exact marginals by summing the joint over every assignment of the internal
// nodes; leaf variables are summed inside each term.  Independent of the
// propagation code.  Throws StateSpaceTooLarge, ImpossibleEvidence.
std::vector<Belief> brute_force_marginals(const CausalTree& tree, const BruteForceOptions& options = {});
Belief brute_force_marginal(const CausalTree& tree, NodeIndex node, const BruteForceOptions& options = {});

// Normalizes a nonnegative vector; throws ImpossibleEvidence on zero mass.
Belief make_belief(const ScaledVector& unnormalized);

}  // namespace logbel
