#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "logbel/error.hpp"
#include "logbel/jointree.hpp"

namespace logbel {

namespace {

using nlohmann::json;

void check_stochastic(const std::vector<double>& row, const std::string& what) {
  double total = 0.0;
  for (double p : row) {
    if (!std::isfinite(p) || p < 0.0) {
      throw Error(ErrorCode::kRowNotStochastic, what + " has a negative or non-finite entry");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kStochasticTolerance) {
    std::ostringstream msg;
    msg << what << " sums to " << total;
    throw Error(ErrorCode::kRowNotStochastic, msg.str());
  }
}

std::vector<double> read_vector(const json& j, const std::string& what) {
  if (!j.is_array()) throw Error(ErrorCode::kParseError, what + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : j) {
    if (!x.is_number()) throw Error(ErrorCode::kParseError, what + " must contain only numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

std::optional<std::size_t> Polytree::find(std::string_view id) const {
  const auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::size_t Polytree::index_of(std::string_view id) const {
  const auto i = find(id);
  if (!i) throw Error(ErrorCode::kUnknownVariable, "unknown variable '" + std::string(id) + "'");
  return *i;
}

std::size_t Polytree::max_parents() const {
  std::size_t p = 0;
  for (const auto& v : vars_) p = std::max(p, v.parents.size());
  return p;
}

std::size_t Polytree::edge_count() const {
  std::size_t e = 0;
  for (const auto& v : vars_) e += v.parents.size();
  return e;
}

std::size_t Polytree::cpt_row(std::size_t var, const std::vector<std::size_t>& parent_values) const {
  const auto& v = vars_.at(var);
  if (parent_values.size() != v.parents.size()) throw Error(ErrorCode::kDimensionMismatch, "wrong number of parent values");
  std::size_t row = 0;
  for (std::size_t j = 0; j < v.parents.size(); ++j) row = row * vars_[v.parents[j]].domain + parent_values[j];
  return row;
}

Polytree build_polytree(const std::vector<VariableSpec>& spec) {
  if (spec.empty()) throw Error(ErrorCode::kInvalidNetwork, "polytree has no variables");
  Polytree pt;
  const std::size_t n = spec.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!pt.by_id_.emplace(spec[i].id, i).second) throw Error(ErrorCode::kDuplicateId, "duplicate variable '" + spec[i].id + "'");
  }
  pt.vars_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = spec[i];
    auto& v = pt.vars_[i];
    v.id = s.id;
    if (s.domain == 0) throw Error(ErrorCode::kInvalidNetwork, "variable '" + s.id + "' has an empty domain");
    v.domain = s.domain;
    std::set<std::size_t> seen;
    for (const auto& pid : s.parents) {
      const std::size_t p = pt.index_of(pid);
      if (p == i) throw Error(ErrorCode::kNotAPolytree, "variable '" + s.id + "' is its own parent");
      if (!seen.insert(p).second) throw Error(ErrorCode::kInvalidNetwork, "variable '" + s.id + "' lists parent '" + pid + "' twice");
      v.parents.push_back(p);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p : pt.vars_[i].parents) pt.vars_[p].children.push_back(i);
  }

  // Singly connected: n - 1 edges and connected.
  if (pt.edge_count() != n - 1) throw Error(ErrorCode::kNotAPolytree, "underlying graph has a cycle or is disconnected");
  std::vector<bool> reached(n, false);
  std::vector<std::size_t> stack{0};
  reached[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    auto visit = [&](std::size_t w) {
      if (!reached[w]) {
        reached[w] = true;
        ++count;
        stack.push_back(w);
      }
    };
    for (std::size_t w : pt.vars_[u].parents) visit(w);
    for (std::size_t w : pt.vars_[u].children) visit(w);
  }
  if (count != n) throw Error(ErrorCode::kNotAPolytree, "underlying graph has a cycle or is disconnected");

  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = spec[i];
    auto& v = pt.vars_[i];
    if (v.parents.empty()) {
      if (!s.cpt.empty()) throw Error(ErrorCode::kInvalidNetwork, "parentless '" + s.id + "' takes a prior, not a cpt");
      if (s.prior.size() != v.domain) throw Error(ErrorCode::kDimensionMismatch, "prior of '" + s.id + "' has the wrong length");
      check_stochastic(s.prior, "prior of '" + s.id + "'");
      v.cpt = s.prior;
      continue;
    }
    if (!s.prior.empty()) throw Error(ErrorCode::kInvalidNetwork, "'" + s.id + "' has parents and takes a cpt, not a prior");
    std::size_t rows = 1;
    for (std::size_t p : v.parents) {
      rows *= pt.vars_[p].domain;
      if (rows > s.cpt.size()) break;
    }
    if (rows != s.cpt.size()) throw Error(ErrorCode::kDimensionMismatch, "cpt of '" + s.id + "' has the wrong number of rows");
    v.cpt.reserve(rows * v.domain);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::string what = "cpt row " + std::to_string(r) + " of '" + s.id + "'";
      if (s.cpt[r].size() != v.domain) throw Error(ErrorCode::kDimensionMismatch, what + " has the wrong length");
      check_stochastic(s.cpt[r], what);
      v.cpt.insert(v.cpt.end(), s.cpt[r].begin(), s.cpt[r].end());
    }
  }

  // Kahn's algorithm in declaration order.
  std::vector<std::size_t> pending(n);
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    pending[i] = pt.vars_[i].parents.size();
    if (pending[i] == 0) ready.push_back(i);
  }
  for (std::size_t head = 0; head < ready.size(); ++head) {
    for (std::size_t c : pt.vars_[ready[head]].children) {
      if (--pending[c] == 0) ready.push_back(c);
    }
  }
  pt.topo_ = std::move(ready);
  return pt;
}

std::vector<VariableSpec> parse_polytree_spec(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::kParseError, "polytree file must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "variables") throw Error(ErrorCode::kParseError, "unknown top-level key '" + key + "'");
  }
  if (!doc.contains("variables") || !doc["variables"].is_array()) {
    throw Error(ErrorCode::kParseError, "polytree file needs a \"variables\" array");
  }
  static const std::set<std::string> kKeys{"id", "domain", "parents", "cpt", "prior"};
  std::vector<VariableSpec> out;
  for (const auto& jv : doc["variables"]) {
    if (!jv.is_object()) throw Error(ErrorCode::kParseError, "each variable must be an object");
    for (const auto& [key, _] : jv.items()) {
      if (!kKeys.count(key)) throw Error(ErrorCode::kParseError, "unknown variable key '" + key + "'");
    }
    if (!jv.contains("id") || !jv["id"].is_string()) throw Error(ErrorCode::kParseError, "variable needs a string \"id\"");
    VariableSpec s;
    s.id = jv["id"].get<std::string>();
    if (!jv.contains("domain") || !jv["domain"].is_number_integer() || jv["domain"].get<long long>() < 1) {
      throw Error(ErrorCode::kParseError, "variable '" + s.id + "' needs a positive integer \"domain\"");
    }
    s.domain = jv["domain"].get<std::size_t>();
    if (jv.contains("parents")) {
      if (!jv["parents"].is_array()) throw Error(ErrorCode::kParseError, "\"parents\" of '" + s.id + "' must be an array");
      for (const auto& p : jv["parents"]) {
        if (!p.is_string()) throw Error(ErrorCode::kParseError, "\"parents\" of '" + s.id + "' must hold strings");
        s.parents.push_back(p.get<std::string>());
      }
    }
    if (jv.contains("cpt")) {
      if (!jv["cpt"].is_array()) throw Error(ErrorCode::kParseError, "cpt of '" + s.id + "' must be an array of rows");
      for (const auto& row : jv["cpt"]) s.cpt.push_back(read_vector(row, "cpt row of '" + s.id + "'"));
    }
    if (jv.contains("prior")) s.prior = read_vector(jv["prior"], "prior of '" + s.id + "'");
    if (!s.parents.empty() && !jv.contains("cpt")) throw Error(ErrorCode::kInvalidNetwork, "'" + s.id + "' needs a \"cpt\"");
    if (s.parents.empty() && !jv.contains("prior")) throw Error(ErrorCode::kInvalidNetwork, "parentless '" + s.id + "' needs a \"prior\"");
    out.push_back(std::move(s));
  }
  return out;
}

Polytree parse_polytree(std::string_view json_text) { return build_polytree(parse_polytree_spec(json_text)); }

std::string serialize_polytree(const Polytree& pt) {
  json vars = json::array();
  for (const auto& v : pt.variables()) {
    json jv;
    jv["id"] = v.id;
    jv["domain"] = v.domain;
    json parents = json::array();
    for (std::size_t p : v.parents) parents.push_back(pt.variable(p).id);
    jv["parents"] = std::move(parents);
    if (v.parents.empty()) {
      jv["prior"] = v.cpt;
    } else {
      json rows = json::array();
      for (std::size_t r = 0; r * v.domain < v.cpt.size(); ++r) {
        rows.push_back(std::vector<double>(v.cpt.begin() + r * v.domain, v.cpt.begin() + (r + 1) * v.domain));
      }
      jv["cpt"] = std::move(rows);
    }
    vars.push_back(std::move(jv));
  }
  json doc;
  doc["variables"] = std::move(vars);
  return doc.dump(2) + "\n";
}

Polytree random_polytree(std::size_t n, std::size_t max_parents, std::size_t max_domain, Rng& rng) {
  if (n == 0 || max_domain < 2) throw Error(ErrorCode::kInvalidNetwork, "random polytree needs n >= 1 and domains >= 2");
  std::vector<std::vector<std::size_t>> parents(n);
  std::vector<std::size_t> domain(n);
  for (std::size_t i = 0; i < n; ++i) domain[i] = 2 + rng.index(max_domain - 1);
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t j = rng.index(i);
    const bool into_j = rng.index(2) == 0 && parents[j].size() < max_parents;
    if (into_j || max_parents == 0) {
      parents[j].push_back(i);
    } else {
      parents[i].push_back(j);
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

  std::vector<VariableSpec> spec;
  for (std::size_t i : order) {
    VariableSpec s;
    s.id = "v" + std::to_string(i);
    s.domain = domain[i];
    std::size_t rows = 1;
    for (std::size_t p : parents[i]) {
      s.parents.push_back("v" + std::to_string(p));
      rows *= domain[p];
    }
    if (parents[i].empty()) {
      s.prior = rng.dirichlet(domain[i]);
    } else {
      for (std::size_t r = 0; r < rows; ++r) s.cpt.push_back(rng.dirichlet(domain[i]));
    }
    spec.push_back(std::move(s));
  }
  return build_polytree(spec);
}

std::vector<std::vector<double>> prior_marginals(const Polytree& pt) {
  std::vector<std::vector<double>> marg(pt.size());
  for (std::size_t w : pt.topological_order()) {
    const auto& v = pt.variable(w);
    marg[w].assign(v.domain, 0.0);
    std::vector<std::size_t> values(v.parents.size(), 0);
    const std::size_t rows = v.cpt.size() / v.domain;
    for (std::size_t r = 0; r < rows; ++r) {
      double weight = 1.0;
      for (std::size_t j = 0; j < values.size(); ++j) weight *= marg[v.parents[j]][values[j]];
      for (std::size_t x = 0; x < v.domain; ++x) marg[w][x] += weight * v.cpt[r * v.domain + x];
      for (std::size_t j = values.size(); j-- > 0;) {
        if (++values[j] < pt.variable(v.parents[j]).domain) break;
        values[j] = 0;
      }
    }
  }
  return marg;
}

std::vector<Belief> brute_force_polytree(const Polytree& pt, const std::vector<std::vector<double>>& evidence,
                                         std::uint64_t max_states) {
  const std::size_t n = pt.size();
  if (evidence.size() != n) throw Error(ErrorCode::kDimensionMismatch, "one likelihood per variable expected");
  std::uint64_t total = 1;
  for (const auto& v : pt.variables()) {
    total *= v.domain;
    if (total > max_states) throw Error(ErrorCode::kStateSpaceTooLarge, "joint state space exceeds the cap");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (evidence[i].size() != pt.variable(i).domain) throw Error(ErrorCode::kDimensionMismatch, "likelihood length mismatch");
  }

  std::vector<std::vector<double>> acc(n);
  for (std::size_t i = 0; i < n; ++i) acc[i].assign(pt.variable(i).domain, 0.0);
  std::vector<std::size_t> x(n, 0);
  std::vector<std::size_t> pv;
  double mass = 0.0;
  for (std::uint64_t s = 0; s < total; ++s) {
    double joint = 1.0;
    for (std::size_t i = 0; i < n && joint != 0.0; ++i) {
      const auto& v = pt.variable(i);
      pv.clear();
      for (std::size_t p : v.parents) pv.push_back(x[p]);
      joint *= v.cpt[pt.cpt_row(i, pv) * v.domain + x[i]] * evidence[i][x[i]];
    }
    if (joint != 0.0) {
      mass += joint;
      for (std::size_t i = 0; i < n; ++i) acc[i][x[i]] += joint;
    }
    for (std::size_t i = n; i-- > 0;) {
      if (++x[i] < pt.variable(i).domain) break;
      x[i] = 0;
    }
  }
  if (!(mass > 0.0)) throw Error(ErrorCode::kImpossibleEvidence, "evidence has probability zero");
  std::vector<Belief> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].dist = acc[i];
    for (double& p : out[i].dist) p /= mass;
    out[i].log_normalizer = -std::log(mass);
  }
  return out;
}

}  // namespace logbel
