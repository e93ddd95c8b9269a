#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "fixtures.hpp"
#include "logbel/cli.hpp"

namespace logbel {
namespace {

namespace fs = std::filesystem;

std::string data(const std::string& name) { return std::string(LOGBEL_TEST_DATA) + "/" + name; }

std::string temp_file(const std::string& name, const std::string& content) {
  const fs::path p = fs::temp_directory_path() / ("logbel_cli_" + name);
  std::ofstream(p) << content;
  return p.string();
}

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(const std::string& network, const std::string& ops, const std::string& strategy) {
  std::ostringstream out, err;
  const int code = cmd_run(network, ops, strategy, out, err);
  return {code, out.str(), err.str()};
}

Outcome verify(VerifyOptions o) {
  std::ostringstream out, err;
  const int code = cmd_verify(o, out, err);
  return {code, out.str(), err.str()};
}

// Parses "Q id p..." lines into (id, probabilities).
std::vector<std::pair<std::string, std::vector<double>>> parse_output(const std::string& text) {
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream w(line);
    std::string q, id;
    w >> q >> id;
    std::vector<double> p;
    double x;
    while (w >> x) p.push_back(x);
    rows.push_back({id, p});
  }
  return rows;
}

void expect_same_output(const std::string& a, const std::string& b, double tol) {
  const auto ra = parse_output(a);
  const auto rb = parse_output(b);
  ASSERT_EQ(ra.size(), rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    EXPECT_EQ(ra[i].first, rb[i].first);
    EXPECT_LE(testing::max_abs_diff(ra[i].second, rb[i].second), tol);
  }
}

// A random stream over the leaves (updates) and all nodes (queries).
std::string random_stream(const CausalTree& tree, std::size_t ops, Rng& rng) {
  const auto leaves = tree.leaves_in_order();
  std::ostringstream s;
  for (std::size_t i = 0; i < ops; ++i) {
    if (rng.index(2)) {
      s << "Q " << tree.node(rng.index(tree.size())).id << "\n";
      continue;
    }
    const auto& leaf = tree.node(leaves[rng.index(leaves.size())]);
    if (rng.index(2)) {
      s << "U " << leaf.id << " " << rng.index(leaf.domain) << "\n";
    } else {
      s << "S " << leaf.id;
      for (std::size_t j = 0; j < leaf.domain; ++j) s << " " << 0.1 + rng.uniform();
      s << "\n";
    }
  }
  return s.str();
}

TEST(Stream, ParsesCommandsAndComments) {
  const auto c = parse_stream("# header\n\nU e 1\nS x 0.5 1e-3 2  # trailing\n  Q u\n");
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0].kind, StreamCommand::Kind::kHard);
  EXPECT_EQ(c[0].id, "e");
  EXPECT_EQ(c[0].value, 1u);
  EXPECT_EQ(c[0].line, 3u);
  EXPECT_EQ(c[1].kind, StreamCommand::Kind::kSoft);
  EXPECT_EQ(c[1].likelihood, (std::vector<double>{0.5, 1e-3, 2}));
  EXPECT_EQ(c[2].kind, StreamCommand::Kind::kQuery);
  EXPECT_EQ(c[2].line, 5u);
}

TEST(Stream, RejectsMalformedLines) {
  for (const char* bad : {"X e", "U e", "U e -1", "U e 1.5", "S e", "S e 1 abc", "Q", "Q u extra", "U e 1 2"}) {
    try {
      parse_stream(std::string("Q u\n") + bad + "\n");
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kParseError) << bad;
      EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << bad;
    }
  }
}

TEST(Format, TwelveDecimals) {
  EXPECT_EQ(format_query("u", Belief{{1.0, 0.0}, 0.0}), "Q u 1.000000000000 0.000000000000");
  EXPECT_EQ(format_query("x", Belief{{0.25, 0.125, 0.625}, 0.0}), "Q x 0.250000000000 0.125000000000 0.625000000000");
}

TEST(Run, IdentityTreeUnderEveryStrategy) {
  for (const char* s : {"full", "lazy", "contract"}) {
    const Outcome o = run(data("identity.json"), data("identity_ops.txt"), s);
    EXPECT_EQ(o.code, 0) << s << o.err;
    EXPECT_EQ(o.out, "Q u 1.000000000000 0.000000000000\n") << s;
  }
}

TEST(Run, QueryBeforeUpdateUsesFileEvidence) {
  const std::string net = temp_file("initial.json", R"({"nodes":[
    {"id":"u","domain":2,"parent":null,"prior":[0.5,0.5]},
    {"id":"e","domain":2,"parent":"u","cpt":[[1,0],[0,1]],"evidence":[0,1]},
    {"id":"f","domain":2,"parent":"u","cpt":[[1,0],[0,1]],"evidence":[1,1]}]})");
  const std::string ops = temp_file("initial_ops.txt", "Q u\nQ f\n");
  for (const char* s : {"full", "lazy", "contract"}) {
    const Outcome o = run(net, ops, s);
    EXPECT_EQ(o.code, 0);
    EXPECT_EQ(o.out, "Q u 0.000000000000 1.000000000000\nQ f 0.000000000000 1.000000000000\n") << s;
  }
}

TEST(Run, ExitCodes) {
  EXPECT_EQ(run(data("identity.json"), data("identity_ops.txt"), "bogus").code, 1);
  EXPECT_EQ(run(data("identity.json"), data("identity_ops.txt"), "polytree").code, 1);
  EXPECT_EQ(run(data("missing.json"), data("identity_ops.txt"), "full").code, 1);
  EXPECT_EQ(run(data("identity.json"), temp_file("bad_ops.txt", "Q u\nZ u\n"), "full").code, 1);
  EXPECT_EQ(run(data("identity.json"), temp_file("unknown_ops.txt", "Q nope\n"), "contract").code, 1);
  EXPECT_EQ(run(data("identity.json"), temp_file("range_ops.txt", "U e 2\n"), "contract").code, 1);
  EXPECT_EQ(run(data("identity.json"), temp_file("interior_ops.txt", "U u 0\n"), "lazy").code, 1);
  for (const char* s : {"full", "lazy", "contract"}) {
    const Outcome o = run(data("identity.json"), data("impossible_ops.txt"), s);
    EXPECT_EQ(o.code, 2) << s;
    EXPECT_NE(o.err.find("line 3"), std::string::npos) << o.err;
  }
}

TEST(Run, StrategiesAgreeOnRandomTrees) {
  Rng rng(101);
  for (int t = 0; t < 10; ++t) {
    const CausalTree tree = testing::random_general_tree(3 + rng.index(40), 3, rng);
    const std::string net = temp_file("agree.json", serialize_network(tree));
    const std::string ops = temp_file("agree_ops.txt", random_stream(tree, 60, rng));
    const Outcome full = run(net, ops, "full");
    if (full.code == 2) continue;
    ASSERT_EQ(full.code, 0) << full.err;
    for (const char* s : {"lazy", "contract"}) {
      const Outcome o = run(net, ops, s);
      ASSERT_EQ(o.code, 0) << o.err;
      expect_same_output(full.out, o.out, 1e-10);
    }
  }
}

TEST(Run, PolytreeStrategiesAgree) {
  const Outcome poly = run(data("collider.json"), data("collider_ops.txt"), "polytree");
  ASSERT_EQ(poly.code, 0) << poly.err;
  EXPECT_EQ(parse_output(poly.out).size(), 7u);
  for (const char* s : {"full", "lazy", "contract"}) {
    const Outcome o = run(data("collider.json"), data("collider_ops.txt"), s);
    ASSERT_EQ(o.code, 0) << o.err;
    expect_same_output(poly.out, o.out, 1e-10);
  }
}

TEST(Run, PolytreeMatchesBruteForce) {
  const Polytree pt = parse_polytree(read_file(data("collider.json")));
  const Outcome o = run(data("collider.json"), temp_file("collider_q.txt", "U c 1\nQ p1\n"), "polytree");
  std::vector<std::vector<double>> ev{{1, 1}, {1, 1, 1}, {1, 1}, {0, 1}};
  const auto want = brute_force_polytree(pt, ev);
  EXPECT_LE(testing::max_abs_diff(parse_output(o.out).at(0).second, want[0].dist), 1e-12);
}

TEST(Verify, ChainAgainstFullPropagation) {
  Rng rng(103);
  const CausalTree tree = chain_tree(41, 2, rng);
  VerifyOptions o;
  o.network = temp_file("chain.json", serialize_network(tree));
  o.ops = temp_file("chain_ops.txt", random_stream(tree, 100, rng));
  o.oracle = "full";
  o.tolerance = 1e-8;
  const Outcome r = verify(o);
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_EQ(r.out.rfind("PASS", 0), 0u) << r.out;
}

TEST(Verify, BruteForceOnTreesAndPolytrees) {
  VerifyOptions o;
  o.network = data("polytree10.json");
  o.ops = data("polytree10_ops.txt");
  o.oracle = "brute";
  o.tolerance = 1e-9;
  Outcome r = verify(o);
  EXPECT_EQ(r.code, 0) << r.out << r.err;

  Rng rng(107);
  const CausalTree tree = testing::random_general_tree(12, 3, rng);
  o.network = temp_file("brute_tree.json", serialize_network(tree));
  o.ops = temp_file("brute_tree_ops.txt", random_stream(tree, 40, rng));
  r = verify(o);
  EXPECT_EQ(r.code, 0) << r.out << r.err;
}

TEST(Verify, CorruptedCoefficientIsCaught) {
  VerifyOptions o;
  o.network = data("identity.json");
  o.ops = temp_file("corrupt_ops.txt", "S e 0.3 0.6\nQ f\nQ u\n");
  o.oracle = "brute";
  ASSERT_EQ(verify(o).code, 0);
  o.corrupt_slot = 0;
  const Outcome r = verify(o);
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("line 2: Q f"), std::string::npos) << r.out;

  o.corrupt_slot = 1000;
  EXPECT_EQ(verify(o).code, 1);
}

TEST(Verify, BadOracleIsAnInputError) {
  VerifyOptions o;
  o.network = data("identity.json");
  o.ops = data("identity_ops.txt");
  o.oracle = "psychic";
  EXPECT_EQ(verify(o).code, 1);
}

BenchOptions small_bench() {
  BenchOptions b;
  b.shape = "chain";
  b.n = {31, 63};
  b.k = 2;
  b.cycles = 50;
  b.seed = 9;
  return b;
}

std::vector<BenchRow> without_wall(std::vector<BenchRow> rows) {
  for (auto& r : rows) r.wall_ns = 0;
  return rows;
}

TEST(Bench, DeterministicAndRoundTrips) {
  const auto a = run_bench(small_bench());
  const auto b = run_bench(small_bench());
  EXPECT_EQ(without_wall(a), without_wall(b));
  EXPECT_EQ(a.size(), 2u * 2u * 3u);
  const std::string csv = bench_csv(a);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "shape,n,k,strategy,op,count,mult_adds,equation_evals,wall_ns");
  EXPECT_EQ(parse_bench_csv(csv), a);
  EXPECT_THROW(parse_bench_csv("shape,n\n"), Error);
}

TEST(Bench, CountersMatchSessionTotals) {
  BenchOptions o = small_bench();
  o.n = {63};
  const auto rows = run_bench(o);
  // Replaying the same cycles by hand gives the same contract totals.
  Rng rng(o.seed);
  Network net;
  net.tree = chain_tree(63, 2, rng);
  const auto leaves = net.tree->leaves_in_order();
  Session s(net, Strategy::kContract);
  for (std::size_t i = 0; i < o.cycles; ++i) {
    const NodeIndex leaf = leaves[rng.index(leaves.size())];
    const auto lik = random_evidence(2, rng);
    const NodeIndex q = rng.index(net.tree->size());
    s.update(net.tree->node(leaf).id, lik);
    s.query(net.tree->node(q).id);
  }
  std::uint64_t total = 0;
  for (const auto& r : rows)
    if (r.strategy == "contract") total += r.mult_adds;
  EXPECT_EQ(total, s.counters().scalar_mult_adds);
}

TEST(Bench, ContractBeatsFullOnChains) {
  BenchOptions o = small_bench();
  o.n = {255};
  o.cycles = 100;
  std::uint64_t full = 0, con = 0;
  for (const auto& r : run_bench(o)) {
    if (r.op == "build") continue;
    (r.strategy == "full" ? full : con) += r.mult_adds;
  }
  EXPECT_LT(10 * con, full);
}

TEST(Bench, InvalidParametersAndUnwritablePath) {
  std::ostringstream out, err;
  BenchOptions o = small_bench();
  o.shape = "star";
  EXPECT_EQ(cmd_bench(o, out, err), 1);
  o = small_bench();
  o.shape = "balanced";
  o.n = {32};
  EXPECT_EQ(cmd_bench(o, out, err), 1);
  o = small_bench();
  o.cycles = 0;
  EXPECT_EQ(cmd_bench(o, out, err), 1);
  o = small_bench();
  o.csv = "/nonexistent-dir/out.csv";
  EXPECT_EQ(cmd_bench(o, out, err), 1);
  o = small_bench();
  o.csv = (fs::temp_directory_path() / "logbel_cli_bench.csv").string();
  EXPECT_EQ(cmd_bench(o, out, err), 0);
  EXPECT_EQ(without_wall(parse_bench_csv(read_file(o.csv))), without_wall(run_bench(o)));
}

// The installed binary, end to end.
Outcome exec(const std::string& args) {
  const std::string err_path = (fs::temp_directory_path() / "logbel_cli_stderr.txt").string();
  const std::string cmd = std::string(LOGBEL_BINARY) + " " + args + " 2>" + err_path;
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string out;
  std::array<char, 4096> buf;
  while (std::size_t got = std::fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), got);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out, read_file(err_path)};
}

TEST(Binary, RunVerifyBench) {
  Outcome o = exec("run --network " + data("identity.json") + " --ops " + data("identity_ops.txt") + " --strategy lazy");
  EXPECT_EQ(o.code, 0);
  EXPECT_EQ(o.out, "Q u 1.000000000000 0.000000000000\n");
  o = exec("run --network " + data("identity.json") + " --ops " + data("impossible_ops.txt"));
  EXPECT_EQ(o.code, 2);
  o = exec("run --network " + data("identity.json"));
  EXPECT_EQ(o.code, 1);
  o = exec("verify --network " + data("collider.json") + " --ops " + data("collider_ops.txt") + " --oracle brute --tol 1e-9");
  EXPECT_EQ(o.code, 0) << o.out << o.err;
  o = exec("verify --network " + data("collider.json") + " --ops " + data("collider_ops.txt") + " --corrupt-slot 2");
  EXPECT_EQ(o.code, 3) << o.out;
  o = exec("bench --shape balanced --n 15,31 --k 2 --cycles 5 --seed 3");
  EXPECT_EQ(o.code, 0);
  EXPECT_EQ(o.out.substr(0, o.out.find('\n')), "shape,n,k,strategy,op,count,mult_adds,equation_evals,wall_ns");
  o = exec("--help");
  EXPECT_EQ(o.code, 0);
  EXPECT_EQ(o.out.find("corrupt"), std::string::npos);
}

}  // namespace
}  // namespace logbel
