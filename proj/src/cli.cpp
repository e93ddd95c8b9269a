#include "logbel/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "logbel/error.hpp"
#include "logbel/generators.hpp"

namespace logbel {

std::optional<Strategy> parse_strategy(std::string_view name) {
  if (name == "full") return Strategy::kFull;
  if (name == "lazy") return Strategy::kLazy;
  if (name == "contract") return Strategy::kContract;
  if (name == "polytree") return Strategy::kPolytree;
  return std::nullopt;
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kFull: return "full";
    case Strategy::kLazy: return "lazy";
    case Strategy::kContract: return "contract";
    case Strategy::kPolytree: return "polytree";
  }
  return "?";
}

std::vector<StreamCommand> parse_stream(std::string_view text) {
  std::vector<StreamCommand> out;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream words(raw);
    std::string op;
    if (!(words >> op)) continue;
    auto fail = [&](const std::string& what) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(line) + ": " + what);
    };
    StreamCommand c;
    c.line = line;
    if (!(words >> c.id)) fail("missing id");
    std::string tok;
    if (op == "Q") {
      c.kind = StreamCommand::Kind::kQuery;
    } else if (op == "U") {
      c.kind = StreamCommand::Kind::kHard;
      if (!(words >> tok)) fail("missing value index");
      std::size_t used = 0;
      try {
        const long long v = std::stoll(tok, &used);
        if (v < 0 || used != tok.size()) fail("bad value index '" + tok + "'");
        c.value = static_cast<std::size_t>(v);
      } catch (const std::logic_error&) {
        fail("bad value index '" + tok + "'");
      }
    } else if (op == "S") {
      c.kind = StreamCommand::Kind::kSoft;
      while (words >> tok) {
        std::size_t used = 0;
        try {
          c.likelihood.push_back(std::stod(tok, &used));
        } catch (const std::logic_error&) {
          fail("bad likelihood entry '" + tok + "'");
        }
        if (used != tok.size()) fail("bad likelihood entry '" + tok + "'");
      }
      if (c.likelihood.empty()) fail("missing likelihood");
    } else {
      fail("unknown command '" + op + "'");
    }
    if (c.kind != StreamCommand::Kind::kSoft && words >> tok) fail("trailing input '" + tok + "'");
    out.push_back(std::move(c));
  }
  return out;
}

Network parse_network_file(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  Network net;
  if (doc.is_object() && doc.contains("variables")) {
    net.polytree = parse_polytree(text);
  } else {
    net.tree = parse_network(text);
  }
  return net;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kParseError, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Network load_network(const std::string& path) { return parse_network_file(read_file(path)); }

struct Session::Impl {
  // Dense strategies: the normalized tree (tree files) or the materialized
  // compiled tree (polytree files).
  std::optional<CausalTree> tree;
  std::optional<PropagationTable> table;
  OpCounters full_ops;
  std::optional<LazyState> lazy;
  std::optional<ContractionIndex> contract;
  // Polytree files.
  std::optional<Polytree> pt;
  std::optional<CompiledJoinTree> compiled;
  std::optional<PolytreeEngine> engine;

  NodeIndex update_node(std::string_view id) const {
    if (pt) return compiled->evidence_leaf(pt->index_of(id));
    const NodeIndex i = tree->index_of(id);
    if (!tree->is_leaf(i)) throw Error(ErrorCode::kNotALeaf, "'" + std::string(id) + "' is not a leaf");
    return i;
  }
};

Session::Session(const Network& net, Strategy strategy) : strategy_(strategy), impl_(std::make_unique<Impl>()) {
  auto& m = *impl_;
  if (net.is_polytree()) {
    m.pt = *net.polytree;
    if (strategy == Strategy::kPolytree) {
      m.engine.emplace(*m.pt);
      m.compiled = m.engine->compiled();
      return;
    }
    m.compiled = compile_join_tree(build_join_tree(extract_cliques(*m.pt), *m.pt), *m.pt, prior_marginals(*m.pt));
    m.tree = m.compiled->to_causal_tree(*m.pt);
  } else {
    if (strategy == Strategy::kPolytree) throw Error(ErrorCode::kInvalidNetwork, "the polytree strategy needs a polytree file");
    m.tree = normalize_tree(*net.tree).tree;
  }
  if (strategy == Strategy::kLazy) m.lazy.emplace(*m.tree);
  if (strategy == Strategy::kContract) m.contract.emplace(contract(*m.tree));
}

Session::~Session() = default;
Session::Session(Session&&) noexcept = default;

std::size_t Session::domain(std::string_view id) const {
  const auto& m = *impl_;
  if (m.pt) return m.pt->variable(m.pt->index_of(id)).domain;
  return m.tree->node(m.update_node(id)).domain;
}

void Session::update(std::string_view id, const std::vector<double>& likelihood) {
  auto& m = *impl_;
  if (m.engine) {
    m.engine->update(id, likelihood);
    return;
  }
  const NodeIndex leaf = m.update_node(id);
  switch (strategy_) {
    case Strategy::kFull:
      m.tree->set_evidence(leaf, likelihood);
      m.table.reset();
      break;
    case Strategy::kLazy: m.lazy->update(leaf, likelihood); break;
    default: m.contract->update_evidence(leaf, likelihood); break;
  }
}

Belief Session::query(std::string_view id) {
  auto& m = *impl_;
  if (m.engine) return m.engine->query(id);
  NodeIndex node;
  const Clique* clique = nullptr;
  if (m.pt) {
    const std::size_t v = m.pt->index_of(id);
    node = m.compiled->clique_node(v);
    clique = &m.compiled->cliques[v];
  } else {
    node = m.tree->index_of(id);
  }
  Belief b;
  switch (strategy_) {
    case Strategy::kFull:
      if (!m.table) {
        m.table = full_propagate(*m.tree);
        m.full_ops += m.table->counters;
      }
      b = belief(*m.table, node);
      break;
    case Strategy::kLazy: b = m.lazy->query(node); break;
    default: b = m.contract->belief_query(node); break;
  }
  if (!clique) return b;
  Belief out;
  out.log_normalizer = b.log_normalizer;
  out.dist.assign(clique->radix[0], 0.0);
  for (std::size_t s = 0; s < clique->states; ++s) out.dist[clique->coordinate(s, 0)] += b.dist[s];
  return out;
}

OpCounters Session::counters() const {
  const auto& m = *impl_;
  if (m.engine) return m.engine->contraction().counters();
  switch (strategy_) {
    case Strategy::kFull: return m.full_ops;
    case Strategy::kLazy: return m.lazy->counters();
    default: return m.contract->counters();
  }
}

void Session::corrupt_coefficient(SlotId s) {
  auto& m = *impl_;
  auto check = [&](std::size_t stored) {
    if (s >= stored) throw Error(ErrorCode::kDimensionMismatch, "no coefficient slot " + std::to_string(s));
  };
  if (m.engine) {
    check(m.engine->contraction().stored_coefficients());
    m.engine->contraction().corrupt_coefficient(s);
  } else if (m.contract) {
    check(m.contract->stored_coefficients());
    m.contract->corrupt_coefficient(s);
  } else {
    throw Error(ErrorCode::kInvalidNetwork, "only contract and polytree sessions hold coefficients");
  }
}

std::string format_query(std::string_view id, const Belief& b) {
  std::string out = "Q " + std::string(id);
  char buf[64];
  for (double p : b.dist) {
    std::snprintf(buf, sizeof buf, " %.12f", p);
    out += buf;
  }
  return out;
}

namespace {

std::vector<double> likelihood_of(const StreamCommand& c, std::size_t domain) {
  if (c.kind == StreamCommand::Kind::kSoft) return c.likelihood;
  if (c.value >= domain) {
    throw Error(ErrorCode::kDimensionMismatch,
                "value index " + std::to_string(c.value) + " out of range for '" + c.id + "' (domain " + std::to_string(domain) + ")");
  }
  std::vector<double> lik(domain, 0.0);
  lik[c.value] = 1.0;
  return lik;
}

void report(std::ostream& err, std::size_t line, const Error& e) {
  err << "error";
  if (line) err << " (line " << line << ")";
  err << ": " << e.what() << "\n";
}

// Ground truth for verify.
class Oracle {
 public:
  Oracle(const Network& net, const std::string& kind) : net_(net) {
    if (kind == "full") {
      full_.emplace(net, Strategy::kFull);
    } else if (kind != "brute") {
      throw Error(ErrorCode::kParseError, "unknown oracle '" + kind + "' (expected brute or full)");
    } else if (net.is_polytree()) {
      for (const auto& v : net.polytree->variables()) evidence_.emplace_back(v.domain, 1.0);
    } else {
      tree_ = *net.tree;
    }
  }

  void update(std::string_view id, const std::vector<double>& lik) {
    if (full_) {
      full_->update(id, lik);
    } else if (net_.is_polytree()) {
      const std::size_t v = net_.polytree->index_of(id);
      validate_likelihood(lik, net_.polytree->variable(v).domain);
      evidence_[v] = lik;
    } else {
      tree_->set_evidence(id, lik);
    }
  }

  Belief query(std::string_view id) {
    if (full_) return full_->query(id);
    if (net_.is_polytree()) {
      const std::size_t v = net_.polytree->index_of(id);
      return brute_force_polytree(*net_.polytree, evidence_)[v];
    }
    return brute_force_marginal(*tree_, tree_->index_of(id));
  }

 private:
  const Network& net_;
  std::optional<Session> full_;
  std::optional<CausalTree> tree_;
  std::vector<std::vector<double>> evidence_;
};

}  // namespace

int cmd_run(const std::string& network_path, const std::string& ops_path, std::string_view strategy, std::ostream& out,
            std::ostream& err) {
  const auto s = parse_strategy(strategy);
  if (!s) {
    err << "error: unknown strategy '" << strategy << "' (expected full, lazy, contract or polytree)\n";
    return 1;
  }
  std::size_t line = 0;
  try {
    const Network net = load_network(network_path);
    const auto ops = parse_stream(read_file(ops_path));
    Session session(net, *s);
    for (const auto& c : ops) {
      line = c.line;
      if (c.kind == StreamCommand::Kind::kQuery) {
        out << format_query(c.id, session.query(c.id)) << "\n";
      } else {
        session.update(c.id, likelihood_of(c, session.domain(c.id)));
      }
    }
  } catch (const Error& e) {
    report(err, line, e);
    return e.code() == ErrorCode::kImpossibleEvidence ? 2 : 1;
  }
  return 0;
}

int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err) {
  std::size_t line = 0;
  try {
    const Network net = load_network(options.network);
    const auto ops = parse_stream(read_file(options.ops));
    Oracle oracle(net, options.oracle);
    std::vector<Session> sessions;
    sessions.emplace_back(net, Strategy::kContract);
    if (net.is_polytree()) sessions.emplace_back(net, Strategy::kPolytree);
    if (options.corrupt_slot) {
      for (auto& s : sessions) s.corrupt_coefficient(*options.corrupt_slot);
    }

    double worst = 0.0;
    std::size_t queries = 0;
    for (const auto& c : ops) {
      line = c.line;
      if (c.kind != StreamCommand::Kind::kQuery) {
        const auto lik = likelihood_of(c, sessions.front().domain(c.id));
        oracle.update(c.id, lik);
        for (auto& s : sessions) s.update(c.id, lik);
        continue;
      }
      ++queries;
      std::optional<Belief> want;
      try {
        want = oracle.query(c.id);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kImpossibleEvidence) throw;
      }
      for (auto& s : sessions) {
        double dev = 0.0;
        try {
          const Belief got = s.query(c.id);
          dev = want ? 0.0 : INFINITY;
          if (want) {
            if (got.dist.size() != want->dist.size()) dev = INFINITY;
            for (std::size_t i = 0; i < got.dist.size() && std::isfinite(dev); ++i) {
              dev = std::max(dev, std::abs(got.dist[i] - want->dist[i]));
            }
          }
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kImpossibleEvidence) throw;
          dev = want ? INFINITY : 0.0;
        }
        if (!(dev <= options.tolerance)) {
          out << "FAIL line " << c.line << ": Q " << c.id << " under " << to_string(s.strategy()) << " deviates by " << dev
              << " (tolerance " << options.tolerance << ")\n";
          return 3;
        }
        worst = std::max(worst, dev);
      }
    }
    out << "PASS " << queries << " queries, max deviation " << worst << " (oracle " << options.oracle << ")\n";
  } catch (const Error& e) {
    report(err, line, e);
    return 1;
  }
  return 0;
}

std::vector<BenchRow> run_bench(const BenchOptions& options) {
  if (options.shape != "chain" && options.shape != "balanced" && options.shape != "random") {
    throw Error(ErrorCode::kInvalidNetwork, "unknown shape '" + options.shape + "' (expected chain, balanced or random)");
  }
  if (options.n.empty() || options.k == 0 || options.cycles == 0) {
    throw Error(ErrorCode::kInvalidNetwork, "bench parameters must be positive");
  }
  using Clock = std::chrono::steady_clock;
  auto ns_since = [](Clock::time_point t0) {
    return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0).count());
  };

  std::vector<BenchRow> rows;
  for (std::size_t n : options.n) {
    Rng rng(options.seed);
    Network net;
    if (options.shape == "chain") {
      net.tree = chain_tree(n, options.k, rng);
    } else if (options.shape == "balanced") {
      net.tree = balanced_tree(n, options.k, rng);
    } else {
      net.tree = random_tree(n, options.k, rng);
    }
    const CausalTree& tree = *net.tree;
    std::vector<NodeIndex> leaves = tree.leaves_in_order();
    struct Cycle {
      NodeIndex leaf;
      std::vector<double> likelihood;
      NodeIndex query;
    };
    std::vector<Cycle> cycles;
    for (std::size_t i = 0; i < options.cycles; ++i) {
      const NodeIndex leaf = leaves[rng.index(leaves.size())];
      auto lik = random_evidence(tree.node(leaf).domain, rng);
      cycles.push_back({leaf, std::move(lik), rng.index(tree.size())});
    }

    for (Strategy s : {Strategy::kFull, Strategy::kContract}) {
      const std::string name(to_string(s));
      auto t0 = Clock::now();
      Session session(net, s);
      const std::uint64_t build_ns = ns_since(t0);
      const OpCounters build = session.counters();
      OpCounters upd, qry;
      std::uint64_t upd_ns = 0, qry_ns = 0;
      for (const auto& c : cycles) {
        const auto& id = tree.node(c.leaf).id;
        OpCounters before = session.counters();
        t0 = Clock::now();
        session.update(id, c.likelihood);
        upd_ns += ns_since(t0);
        upd += session.counters() - before;
        before = session.counters();
        t0 = Clock::now();
        try {
          session.query(tree.node(c.query).id);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kImpossibleEvidence) throw;
        }
        qry_ns += ns_since(t0);
        qry += session.counters() - before;
      }
      auto row = [&](std::string op, std::uint64_t count, const OpCounters& ops, std::uint64_t ns) {
        rows.push_back({options.shape, n, options.k, name, std::move(op), count, ops.scalar_mult_adds, ops.equation_evals, ns});
      };
      row("build", 1, build, build_ns);
      row("update", cycles.size(), upd, upd_ns);
      row("query", cycles.size(), qry, qry_ns);
    }
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << kBenchHeader << "\n";
  for (const auto& r : rows) {
    out << r.shape << ',' << r.n << ',' << r.k << ',' << r.strategy << ',' << r.op << ',' << r.count << ',' << r.mult_adds << ','
        << r.equation_evals << ',' << r.wall_ns << "\n";
  }
  return out.str();
}

std::vector<BenchRow> parse_bench_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kBenchHeader) throw Error(ErrorCode::kParseError, "bench CSV header mismatch");
  std::vector<BenchRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) f.push_back(cell);
    if (f.size() != 9) throw Error(ErrorCode::kParseError, "bench CSV row needs 9 fields: " + line);
    try {
      rows.push_back({f[0], std::stoull(f[1]), std::stoull(f[2]), f[3], f[4], std::stoull(f[5]), std::stoull(f[6]),
                      std::stoull(f[7]), std::stoull(f[8])});
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kParseError, "bad number in bench CSV row: " + line);
    }
  }
  return rows;
}

int cmd_bench(const BenchOptions& options, std::ostream& out, std::ostream& err) {
  std::vector<BenchRow> rows;
  try {
    rows = run_bench(options);
  } catch (const Error& e) {
    report(err, 0, e);
    return 1;
  }
  const std::string csv = bench_csv(rows);
  if (options.csv.empty()) {
    out << csv;
    return 0;
  }
  std::ofstream file(options.csv, std::ios::binary);
  if (!file || !(file << csv) || !file.flush()) {
    err << "error: cannot write '" << options.csv << "'\n";
    return 1;
  }
  for (const auto& r : rows) {
    if (r.op != "query") continue;
    const double per_cycle = static_cast<double>(r.mult_adds) / static_cast<double>(r.count);
    out << r.shape << " n=" << r.n << " " << r.strategy << ": " << per_cycle << " query mult-adds per cycle\n";
  }
  return 0;
}

}  // namespace logbel
