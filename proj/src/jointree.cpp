#include <algorithm>
#include <limits>
#include <set>

#include "logbel/error.hpp"
#include "logbel/jointree.hpp"

namespace logbel {

namespace {

constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

std::size_t saturating_product(std::size_t a, std::size_t b) {
  if (a != 0 && b > npos / a) return npos;
  return a * b;
}

Clique make_clique(const Polytree& pt, std::size_t v) {
  Clique c;
  c.variable = v;
  c.members.push_back(v);
  for (std::size_t p : pt.variable(v).parents) c.members.push_back(p);
  for (std::size_t m : c.members) c.radix.push_back(pt.variable(m).domain);
  c.stride.assign(c.members.size(), 1);
  for (std::size_t j = c.members.size() - 1; j-- > 0;) c.stride[j] = saturating_product(c.stride[j + 1], c.radix[j + 1]);
  c.states = saturating_product(c.stride[0], c.radix[0]);
  return c;
}

// p(w | pa(w)) times the marginals of the parents other than `skip`, over the
// clique states.
std::vector<double> family_weights(const Clique& c, const Polytree& pt, const std::vector<std::vector<double>>& marg,
                                   std::size_t skip) {
  const auto& w = pt.variable(c.variable);
  const std::size_t rows = c.states / w.domain;
  std::vector<double> out(c.states);
  for (std::size_t s = 0; s < c.states; ++s) {
    const std::size_t x = c.coordinate(s, 0);
    const std::size_t row = s % rows;
    double p = w.cpt[row * w.domain + x];
    for (std::size_t j = 1; j < c.members.size(); ++j) {
      if (c.members[j] != skip) p *= marg[c.members[j]][c.coordinate(s, j)];
    }
    out[s] = p;
  }
  return out;
}

Selection projection(const Clique& c, std::size_t position) {
  std::vector<std::size_t> col(c.states);
  for (std::size_t s = 0; s < c.states; ++s) col[s] = c.coordinate(s, position);
  return Selection(std::move(col), c.radix[position]);
}

}  // namespace

std::size_t Clique::position_of(std::size_t v) const {
  const auto it = std::find(members.begin(), members.end(), v);
  return it == members.end() ? npos : static_cast<std::size_t>(it - members.begin());
}

bool is_chordal(const std::vector<std::vector<std::size_t>>& adjacency) {
  const std::size_t n = adjacency.size();
  std::vector<std::set<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) adj[i].insert(adjacency[i].begin(), adjacency[i].end());

  // Maximum cardinality search; the reverse visit order is a perfect
  // elimination ordering iff the graph is chordal.
  std::vector<std::size_t> weight(n, 0);
  std::vector<std::size_t> visit_pos(n, npos);
  std::vector<std::size_t> order;
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t best = npos;
    for (std::size_t i = 0; i < n; ++i) {
      if (visit_pos[i] == npos && (best == npos || weight[i] > weight[best])) best = i;
    }
    visit_pos[best] = step;
    order.push_back(best);
    for (std::size_t w : adj[best]) {
      if (visit_pos[w] == npos) ++weight[w];
    }
  }
  for (std::size_t v : order) {
    std::size_t last = npos;
    for (std::size_t w : adj[v]) {
      if (visit_pos[w] < visit_pos[v] && (last == npos || visit_pos[w] > visit_pos[last])) last = w;
    }
    if (last == npos) continue;
    for (std::size_t w : adj[v]) {
      if (w != last && visit_pos[w] < visit_pos[v] && !adj[last].count(w)) return false;
    }
  }
  return true;
}

CliqueSet extract_cliques(const Polytree& pt) {
  const std::size_t n = pt.size();
  if (pt.edge_count() + 1 != n) throw Error(ErrorCode::kNotAPolytree, "underlying graph has a cycle or is disconnected");

  CliqueSet out;
  for (std::size_t v = 0; v < n; ++v) out.cliques.push_back(make_clique(pt, v));

  // Moral graph: parent-child edges plus edges between co-parents.
  std::vector<std::set<std::size_t>> moral(n);
  for (std::size_t v = 0; v < n; ++v) {
    const auto& m = out.cliques[v].members;
    for (std::size_t a : m)
      for (std::size_t b : m)
        if (a != b) moral[a].insert(b);
  }
  std::vector<std::vector<std::size_t>> adjacency(n);
  for (std::size_t v = 0; v < n; ++v) adjacency[v].assign(moral[v].begin(), moral[v].end());
  out.moral_graph_chordal = is_chordal(adjacency);

  out.families_complete = true;
  for (const auto& c : out.cliques) {
    for (std::size_t a : c.members)
      for (std::size_t b : c.members)
        if (a != b && !moral[a].count(b)) out.families_complete = false;
  }

  // Candidate cliques {v} u (neighbors eliminated later); in a chordal graph
  // every maximal clique is among them.
  out.maximal_cliques_are_families = out.moral_graph_chordal;
  if (out.moral_graph_chordal) {
    std::vector<std::size_t> weight(n, 0);
    std::vector<bool> visited(n, false);
    std::vector<std::set<std::size_t>> candidates;
    for (std::size_t step = 0; step < n; ++step) {
      std::size_t best = npos;
      for (std::size_t i = 0; i < n; ++i) {
        if (!visited[i] && (best == npos || weight[i] > weight[best])) best = i;
      }
      std::set<std::size_t> cand{best};
      for (std::size_t w : moral[best]) {
        if (visited[w]) cand.insert(w);
      }
      candidates.push_back(std::move(cand));
      visited[best] = true;
      for (std::size_t w : moral[best]) {
        if (!visited[w]) ++weight[w];
      }
    }
    std::set<std::set<std::size_t>> families;
    for (const auto& c : out.cliques) families.emplace(c.members.begin(), c.members.end());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      bool maximal = true;
      for (std::size_t j = 0; j < candidates.size() && maximal; ++j) {
        if (i != j && candidates[j].size() > candidates[i].size() &&
            std::includes(candidates[j].begin(), candidates[j].end(), candidates[i].begin(), candidates[i].end())) {
          maximal = false;
        }
      }
      if (maximal && !families.count(candidates[i])) out.maximal_cliques_are_families = false;
    }
  }
  if (!out.moral_graph_chordal || !out.families_complete || !out.maximal_cliques_are_families) {
    throw Error(ErrorCode::kConstructionError, "moral graph check failed");
  }
  return out;
}

std::size_t JoinTree::max_separator_size() const {
  std::size_t c = 0;
  for (const auto& e : edges) {
    const auto& a = cliques[e.parent].members;
    const auto& b = cliques[e.child].members;
    std::size_t shared = 0;
    for (std::size_t v : a) shared += std::count(b.begin(), b.end(), v);
    c = std::max(c, shared);
  }
  return c;
}

bool has_running_intersection(const JoinTree& jt, std::size_t variable_count) {
  for (std::size_t v = 0; v < variable_count; ++v) {
    std::size_t nodes = 0;
    for (const auto& c : jt.cliques) nodes += c.position_of(v) != npos;
    std::size_t edges = 0;
    for (const auto& e : jt.edges) {
      edges += jt.cliques[e.parent].position_of(v) != npos && jt.cliques[e.child].position_of(v) != npos;
    }
    // The join tree is a tree, so the induced subgraph is a forest.
    if (nodes > 0 && edges + 1 != nodes) return false;
  }
  return true;
}

JoinTree build_join_tree(const CliqueSet& cliques, const Polytree& pt, std::optional<std::string_view> root_variable) {
  const std::size_t n = pt.size();
  if (cliques.cliques.size() != n) throw Error(ErrorCode::kConstructionError, "one clique per variable expected");
  JoinTree jt;
  jt.cliques = cliques.cliques;
  if (root_variable) {
    jt.root = pt.index_of(*root_variable);
  } else {
    jt.root = pt.topological_order().front();
    for (std::size_t v = 0; v < n; ++v) {
      if (pt.variable(v).parents.empty()) {
        jt.root = v;
        break;
      }
    }
  }

  // Undirected clique adjacency, one link per polytree edge, separator = parent.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> links(n);
  for (std::size_t w = 0; w < n; ++w) {
    for (std::size_t v : pt.variable(w).parents) {
      links[v].push_back({w, v});
      links[w].push_back({v, v});
    }
  }
  jt.parent_edge.assign(n, npos);
  jt.child_edges.assign(n, {});
  std::vector<bool> reached(n, false);
  std::vector<std::size_t> queue{jt.root};
  reached[jt.root] = true;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const std::size_t u = queue[head];
    for (const auto& [w, sep] : links[u]) {
      if (reached[w]) continue;
      reached[w] = true;
      jt.parent_edge[w] = jt.edges.size();
      jt.child_edges[u].push_back(jt.edges.size());
      jt.edges.push_back({u, w, sep});
      queue.push_back(w);
    }
  }
  if (queue.size() != n || jt.edges.size() + 1 != n) throw Error(ErrorCode::kConstructionError, "join tree is not spanning");
  for (const auto& e : jt.edges) {
    if (jt.cliques[e.parent].position_of(e.separator) == npos || jt.cliques[e.child].position_of(e.separator) == npos) {
      throw Error(ErrorCode::kConstructionError, "separator missing from an endpoint clique");
    }
  }
  if (jt.max_separator_size() != (n > 1 ? 1u : 0u)) throw Error(ErrorCode::kConstructionError, "separator is not a single variable");
  if (!has_running_intersection(jt, n)) throw Error(ErrorCode::kConstructionError, "running intersection violated");
  return jt;
}

ScaledVector FactoredAlgebra::apply(const Coeff& m, const ScaledVector& v, OpCounters& ops) const {
  ++shapes.lk_by_vector;
  return gather(m.left, multiply(m.right, v, ops));
}

ScaledVector FactoredAlgebra::apply_transposed(const Coeff& m, const ScaledVector& v, OpCounters& ops) const {
  ++shapes.lk_by_vector;
  return multiply_transposed(m.right, scatter_add(m.left, v), ops);
}

FactoredMatrix FactoredAlgebra::rake(const Coeff& u_x, const Coeff& x_e, const ScaledVector& lambda_e, const Coeff& x_z,
                                     OpCounters& ops) const {
  if (u_x.cols() != x_e.rows() || x_e.rows() != x_z.rows() || x_e.cols() != lambda_e.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "factored rake operands do not fit");
  }
  ++shapes.lk_by_vector;
  const ScaledVector w = gather(x_e.left, multiply(x_e.right, lambda_e, ops));
  ++shapes.lk_by_diag;
  const ScaledMatrix scaled = scale_columns(u_x.right, w, ops);
  ++shapes.lk_by_kl;
  const ScaledMatrix folded = multiply(scaled, x_z.left);
  ++shapes.ll_by_lk;
  return {u_x.left, multiply(folded, x_z.right, ops)};
}

FactoredMatrix FactoredAlgebra::corrupted(const Coeff& m) const {
  FactoredMatrix out = m;
  const std::size_t r = out.left.column_of(0);
  for (std::size_t c = 0; c < out.right.cols(); ++c) out.right.mantissa_at(r, c) *= 1.5;
  out.right.rebalance();
  return out;
}

template class BasicContraction<FactoredAlgebra>;

CompiledJoinTree compile_join_tree(const JoinTree& jt, const Polytree& pt, const std::vector<std::vector<double>>& marginals,
                                   std::size_t max_clique_states) {
  const std::size_t n = pt.size();
  for (const auto& c : jt.cliques) {
    if (c.states > max_clique_states) {
      throw Error(ErrorCode::kDimensionOverflow,
                  "clique of '" + pt.variable(c.variable).id + "' has more than " + std::to_string(max_clique_states) + " states");
    }
  }

  std::vector<std::vector<NodeIndex>> children(2 * n);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t e : jt.child_edges[v]) children[v].push_back(jt.edges[e].child);
    std::sort(children[v].begin(), children[v].end());
    children[v].push_back(n + v);
  }
  const ShapeNormalization norm = normalize_shape(children, jt.root);

  CompiledJoinTree out;
  out.variable_count = n;
  out.shape = TreeShape::of(norm);
  out.cliques = jt.cliques;
  out.original_parent.assign(2 * n, kNoNode);
  for (NodeIndex v = 0; v < n; ++v)
    for (NodeIndex c : children[v]) out.original_parent[c] = v;
  const std::size_t size = norm.nodes.size();
  out.domain.resize(size);
  out.edge.resize(size);
  out.evidence.resize(size);
  for (NodeIndex i = 0; i < size; ++i) {
    const auto& entry = norm.nodes[i];
    using Origin = ShapeNormalization::Origin;
    if (i < n) {
      out.domain[i] = jt.cliques[i].states;
    } else if (i < 2 * n) {
      out.domain[i] = pt.variable(i - n).domain;
    } else if (entry.origin == Origin::kSplit) {
      out.domain[i] = jt.cliques[entry.source].states;
    } else {
      out.domain[i] = 1;
    }
  }

  for (NodeIndex i = 0; i < size; ++i) {
    const auto& entry = norm.nodes[i];
    using Origin = ShapeNormalization::Origin;
    if (i == norm.root) continue;
    if (i < n) {
      const auto& e = jt.edges[jt.parent_edge[i]];
      const Clique& parent = jt.cliques[e.parent];
      const Clique& child = jt.cliques[i];
      const std::size_t s = e.separator;
      const std::size_t pos = child.position_of(s);
      std::vector<double> weights = family_weights(child, pt, marginals, s);
      if (s == child.variable) {
        const auto& mw = marginals[s];
        for (std::size_t a = 0; a < mw.size(); ++a) {
          if (!(mw[a] > 0.0)) {
            throw Error(ErrorCode::kZeroMarginalDivisor, "prior marginal of '" + pt.variable(s).id + "' has a zero entry");
          }
        }
        for (std::size_t st = 0; st < child.states; ++st) weights[st] /= mw[child.coordinate(st, 0)];
      }
      const std::size_t L = child.radix[pos];
      std::vector<double> right(L * child.states, 0.0);
      for (std::size_t st = 0; st < child.states; ++st) right[child.coordinate(st, pos) * child.states + st] = weights[st];
      out.edge[i] = {projection(parent, parent.position_of(s)), ScaledMatrix(L, child.states, std::move(right))};
      out.edge[i].right.rebalance();
    } else if (i < 2 * n) {
      const Clique& c = jt.cliques[i - n];
      out.edge[i] = {projection(c, 0), ScaledMatrix::identity(c.radix[0])};
      out.evidence[i] = ScaledVector::ones(c.radix[0]);
    } else if (entry.origin == Origin::kSplit) {
      const std::size_t K = jt.cliques[entry.source].states;
      out.edge[i] = {Selection::identity(K), ScaledMatrix::identity(K)};
    } else {
      const std::size_t K = out.domain[entry.parent];
      out.edge[i] = {Selection(std::vector<std::size_t>(K, 0), 1), ScaledMatrix(1, 1, {1.0})};
      out.evidence[i] = ScaledVector::ones(1);
    }
  }

  const Clique& root = jt.cliques[jt.root];
  out.prior = ScaledVector(family_weights(root, pt, marginals, npos));
  return out;
}

CausalTree CompiledJoinTree::to_causal_tree(const Polytree& pt) const {
  const std::size_t n = variable_count;
  NetworkSpec spec;
  auto name = [&](NodeIndex i) { return (i < n ? "C:" : "E:") + pt.variable(i < n ? i : i - n).id; };
  for (NodeIndex i = 0; i < 2 * n; ++i) {
    NodeSpec s;
    s.id = name(i);
    s.domain = domain[i];
    if (original_parent[i] == kNoNode) {
      s.prior = prior.values();
    } else {
      s.parent = name(original_parent[i]);
      s.cpt = edge[i].materialize().to_rows();
    }
    if (i >= n) s.evidence = evidence[i].values();
    spec.nodes.push_back(std::move(s));
  }
  return normalize_tree(build_tree(spec)).tree;
}

namespace {

JoinTree join_tree_for(const Polytree& pt, const EngineOptions& options) {
  std::optional<std::string_view> root;
  if (options.root_variable) root = *options.root_variable;
  return build_join_tree(extract_cliques(pt), pt, root);
}

FactoredContraction contraction_for(const CompiledJoinTree& c) {
  return FactoredContraction(c.shape, c.edge, c.prior, c.evidence);
}

}  // namespace

PolytreeEngine::PolytreeEngine(Polytree pt, const EngineOptions& options)
    : pt_(std::move(pt)),
      jt_(join_tree_for(pt_, options)),
      compiled_(compile_join_tree(jt_, pt_, prior_marginals(pt_), options.max_clique_states)),
      contraction_(contraction_for(compiled_)) {
  for (const auto& v : pt_.variables()) evidence_.emplace_back(v.domain, 1.0);
}

UpdateReport PolytreeEngine::update(std::string_view variable, const std::vector<double>& likelihood) {
  const std::size_t v = pt_.index_of(variable);
  validate_likelihood(likelihood, pt_.variable(v).domain);
  UpdateReport report = contraction_.update_evidence(compiled_.evidence_leaf(v), likelihood);
  evidence_[v] = likelihood;
  return report;
}

Belief PolytreeEngine::query(std::string_view variable) { return query_via(variable, variable); }

Belief PolytreeEngine::query_via(std::string_view variable, std::string_view clique_variable) {
  const std::size_t v = pt_.index_of(variable);
  const std::size_t c = pt_.index_of(clique_variable);
  const Clique& clique = compiled_.cliques[c];
  const std::size_t pos = clique.position_of(v);
  if (pos == npos) {
    throw Error(ErrorCode::kUnknownVariable,
                "clique of '" + std::string(clique_variable) + "' does not contain '" + std::string(variable) + "'");
  }
  const Belief b = contraction_.belief_query(compiled_.clique_node(c));
  Belief out;
  out.log_normalizer = b.log_normalizer;
  out.dist.assign(clique.radix[pos], 0.0);
  for (std::size_t s = 0; s < clique.states; ++s) out.dist[clique.coordinate(s, pos)] += b.dist[s];
  return out;
}

}  // namespace logbel
