#pragma once

// Polytrees compiled into join trees whose clique-to-clique conditionals are
// kept in factored form (a 0/1 selection times a separator-to-clique table),
// then handed to the contraction engine.
//
// Cliques are the families {v} u parents(v).  Inside a clique the variable
// itself comes first and is the most significant digit of the mixed-radix
// state index; its parents follow in declaration order.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "logbel/contraction.hpp"
#include "logbel/generators.hpp"
#include "logbel/linalg.hpp"
#include "logbel/model.hpp"

namespace logbel {

struct VariableSpec {
  std::string id;
  std::size_t domain = 0;
  std::vector<std::string> parents;
  std::vector<std::vector<double>> cpt;  // one row per joint parent assignment
  std::vector<double> prior;             // parentless variables only
};

class Polytree {
 public:
  struct Variable {
    std::string id;
    std::size_t domain = 0;
    std::vector<std::size_t> parents;
    std::vector<std::size_t> children;
    // cpt[row * domain + value]; a single row holding the prior when
    // parentless.
    std::vector<double> cpt;
  };

  std::size_t size() const { return vars_.size(); }
  const Variable& variable(std::size_t i) const { return vars_.at(i); }
  const std::vector<Variable>& variables() const { return vars_; }
  std::optional<std::size_t> find(std::string_view id) const;
  // Throws UnknownVariable.
  std::size_t index_of(std::string_view id) const;
  // Largest parent count.
  std::size_t max_parents() const;
  std::size_t edge_count() const;
  // Variables with every parent before its children.
  const std::vector<std::size_t>& topological_order() const { return topo_; }
  // Row of the CPT for the given parent values (declaration order).
  std::size_t cpt_row(std::size_t var, const std::vector<std::size_t>& parent_values) const;

 private:
  friend Polytree build_polytree(const std::vector<VariableSpec>& spec);

  std::vector<Variable> vars_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::vector<std::size_t> topo_;
};

// Throws DuplicateId, UnknownVariable, NotAPolytree, InvalidNetwork,
// DimensionMismatch, RowNotStochastic.
Polytree build_polytree(const std::vector<VariableSpec>& spec);

// JSON: {"variables":[{"id","domain","parents","cpt","prior"}]}.
std::vector<VariableSpec> parse_polytree_spec(std::string_view json_text);
Polytree parse_polytree(std::string_view json_text);
std::string serialize_polytree(const Polytree& pt);

// Random polytree on n variables: a random recursive tree with each edge
// oriented at random, at most `max_parents` parents per variable, domains
// drawn from {2, ..., max_domain}, Dirichlet CPTs.  Ids are "v<i>", declared
// in shuffled order.
Polytree random_polytree(std::size_t n, std::size_t max_parents, std::size_t max_domain, Rng& rng);

// Exact prior marginals by one pass in topological order.
std::vector<std::vector<double>> prior_marginals(const Polytree& pt);

// Exact posterior marginals by enumerating every joint assignment; evidence
// holds one likelihood per variable.  Throws StateSpaceTooLarge,
// ImpossibleEvidence.
std::vector<Belief> brute_force_polytree(const Polytree& pt, const std::vector<std::vector<double>>& evidence,
                                         std::uint64_t max_states = std::uint64_t{1} << 24);

struct Clique {
  std::size_t variable = 0;            // the family's child variable
  std::vector<std::size_t> members;    // variable first, then its parents
  std::vector<std::size_t> radix;      // member domain sizes
  std::vector<std::size_t> stride;     // member strides
  std::size_t states = 1;              // K

  // Position of variable v among the members, or npos.
  std::size_t position_of(std::size_t v) const;
  std::size_t coordinate(std::size_t state, std::size_t position) const {
    return (state / stride[position]) % radix[position];
  }
};

struct CliqueSet {
  std::vector<Clique> cliques;  // cliques[v] is the family of variable v
  // Per-instance checks: the moral graph is chordal, each family is complete
  // in it, and every maximal clique of the moral graph is a family.
  bool moral_graph_chordal = false;
  bool families_complete = false;
  bool maximal_cliques_are_families = false;
};

// Throws ConstructionError if a per-instance check fails.
CliqueSet extract_cliques(const Polytree& pt);

// True iff the undirected graph is chordal (maximum cardinality search and a
// perfect-elimination check).
bool is_chordal(const std::vector<std::vector<std::size_t>>& adjacency);

struct JoinTree {
  struct Edge {
    std::size_t parent = 0;     // clique closer to the root
    std::size_t child = 0;
    std::size_t separator = 0;  // the single shared variable
  };
  std::vector<Clique> cliques;
  std::vector<Edge> edges;  // oriented away from the root
  std::size_t root = 0;
  std::vector<std::size_t> parent_edge;             // per clique; npos for the root
  std::vector<std::vector<std::size_t>> child_edges;  // per clique

  std::size_t max_separator_size() const;
};

// One edge per polytree edge, separator {parent variable}.  The root clique is
// the family of `root_variable` (default: the first parentless variable).
// Throws UnknownVariable, ConstructionError.
JoinTree build_join_tree(const CliqueSet& cliques, const Polytree& pt,
                         std::optional<std::string_view> root_variable = std::nullopt);

// For every variable, the cliques that contain it induce a connected subtree.
bool has_running_intersection(const JoinTree& jt, std::size_t variable_count);

// left (K_parent x L, one 1 per row) times right (L x K_child).
struct FactoredMatrix {
  Selection left;
  ScaledMatrix right;

  std::size_t rows() const { return left.rows(); }
  std::size_t cols() const { return right.cols(); }
  ScaledMatrix materialize() const { return multiply(left, right); }
};

// Products executed by the factored pipeline, by operand shapes.
struct ShapeCounters {
  std::uint64_t lk_by_kl = 0;        // (L x K) . (K x L'), K x L' a selection
  std::uint64_t lk_by_diag = 0;      // (L x K) . Diag_K
  std::uint64_t ll_by_lk = 0;        // (L x L') . (L' x K)
  std::uint64_t lk_by_vector = 0;    // (L x K) . vector, or its transpose
  std::uint64_t other = 0;

  friend bool operator==(const ShapeCounters&, const ShapeCounters&) = default;
};

struct FactoredAlgebra {
  using Coeff = FactoredMatrix;

  ScaledVector apply(const Coeff& m, const ScaledVector& v, OpCounters& ops) const;
  ScaledVector apply_transposed(const Coeff& m, const ScaledVector& v, OpCounters& ops) const;
  // B' = U^l . (((U^r . Diag(X_e . lambda_e)) . X_z^l) . X_z^r): the left
  // factor is kept, everything else folds into the right factor.
  Coeff rake(const Coeff& u_x, const Coeff& x_e, const ScaledVector& lambda_e, const Coeff& x_z, OpCounters& ops) const;
  ScaledMatrix materialize(const Coeff& m) const { return m.materialize(); }
  // Scales the right-factor row selected by the first row by 1.5.
  Coeff corrupted(const Coeff& m) const;

  mutable ShapeCounters shapes;
};

using FactoredContraction = BasicContraction<FactoredAlgebra>;

inline constexpr std::size_t kDefaultMaxCliqueStates = 4096;

// The join tree as a causal tree.  Node i < n is the clique of variable i,
// node n + i the evidence leaf of variable i; normalization nodes follow.
struct CompiledJoinTree {
  std::size_t variable_count = 0;
  TreeShape shape;
  std::vector<std::size_t> domain;      // per node
  std::vector<FactoredMatrix> edge;     // per node; empty for the root
  ScaledVector prior;
  std::vector<ScaledVector> evidence;   // per node; leaves only
  std::vector<Clique> cliques;
  // Parent of each clique and evidence leaf before normalization.
  std::vector<NodeIndex> original_parent;

  NodeIndex clique_node(std::size_t var) const { return var; }
  NodeIndex evidence_leaf(std::size_t var) const { return variable_count + var; }
  // The same tree with every factored matrix materialized.
  CausalTree to_causal_tree(const Polytree& pt) const;
};

// Throws ZeroMarginalDivisor, DimensionOverflow.
CompiledJoinTree compile_join_tree(const JoinTree& jt, const Polytree& pt,
                                   const std::vector<std::vector<double>>& marginals,
                                   std::size_t max_clique_states = kDefaultMaxCliqueStates);

struct EngineOptions {
  std::optional<std::string> root_variable;
  std::size_t max_clique_states = kDefaultMaxCliqueStates;
};

class PolytreeEngine {
 public:
  explicit PolytreeEngine(Polytree pt, const EngineOptions& options = {});

  // Throws UnknownVariable, DimensionMismatch, AllZeroLikelihood.
  UpdateReport update(std::string_view variable, const std::vector<double>& likelihood);
  // Belief of the variable's own clique marginalized onto the variable.
  // Throws UnknownVariable, ImpossibleEvidence.
  Belief query(std::string_view variable);
  // Same, through the clique of `clique_variable`, which must contain it.
  Belief query_via(std::string_view variable, std::string_view clique_variable);

  const Polytree& polytree() const { return pt_; }
  const JoinTree& join_tree() const { return jt_; }
  const CompiledJoinTree& compiled() const { return compiled_; }
  const FactoredContraction& contraction() const { return contraction_; }
  FactoredContraction& contraction() { return contraction_; }
  const std::vector<std::vector<double>>& evidence() const { return evidence_; }

 private:
  Polytree pt_;
  JoinTree jt_;
  CompiledJoinTree compiled_;
  FactoredContraction contraction_;
  std::vector<std::vector<double>> evidence_;
};

}  // namespace logbel
