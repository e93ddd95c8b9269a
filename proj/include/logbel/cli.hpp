#pragma once

// Command-line front end: networks, operation streams, strategy sessions and
// the run / verify / bench commands.  The commands write to the given streams
// and return the process exit code.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "logbel/contraction.hpp"
#include "logbel/jointree.hpp"
#include "logbel/model.hpp"
#include "logbel/propagate.hpp"

namespace logbel {

enum class Strategy { kFull, kLazy, kContract, kPolytree };

std::optional<Strategy> parse_strategy(std::string_view name);
std::string_view to_string(Strategy s);

// One line of an operation stream:
//   U <id> <value-index>    hard evidence
//   S <id> <v1> ... <vk>    soft evidence
//   Q <id>                  query
// '#' starts a comment; blank lines are ignored.
struct StreamCommand {
  enum class Kind { kHard, kSoft, kQuery };
  Kind kind = Kind::kQuery;
  std::string id;
  std::size_t value = 0;
  std::vector<double> likelihood;
  std::size_t line = 0;
};

// Throws ParseError naming the line.
std::vector<StreamCommand> parse_stream(std::string_view text);

// A causal-tree file ("nodes") or a polytree file ("variables").
struct Network {
  std::optional<CausalTree> tree;
  std::optional<Polytree> polytree;

  bool is_polytree() const { return polytree.has_value(); }
};

Network parse_network_file(std::string_view text);
// Throws ParseError when the file cannot be read.
Network load_network(const std::string& path);
std::string read_file(const std::string& path);

// A network under one strategy.  Tree files are normalized first; polytree
// files run the factored engine (polytree) or the dense strategies over the
// materialized compiled tree.  Ids are those of the file.
class Session {
 public:
  // Throws InvalidNetwork when the strategy does not apply.
  Session(const Network& net, Strategy strategy);
  ~Session();
  Session(Session&&) noexcept;

  Strategy strategy() const { return strategy_; }
  // Domain of an updatable id.  Throws UnknownNode / UnknownVariable, NotALeaf.
  std::size_t domain(std::string_view id) const;
  void update(std::string_view id, const std::vector<double>& likelihood);
  Belief query(std::string_view id);
  OpCounters counters() const;
  // Fault injection; contract and polytree only.
  void corrupt_coefficient(SlotId s);

 private:
  struct Impl;
  Strategy strategy_;
  std::unique_ptr<Impl> impl_;
};

// "Q <id> <p_0> ... <p_{k-1}>" with 12 decimals.
std::string format_query(std::string_view id, const Belief& b);

int cmd_run(const std::string& network_path, const std::string& ops_path, std::string_view strategy, std::ostream& out,
            std::ostream& err);

struct VerifyOptions {
  std::string network;
  std::string ops;
  std::string oracle = "brute";
  double tolerance = 1e-9;
  std::optional<SlotId> corrupt_slot;
};

// Exit 0 within tolerance, 1 on input errors, 3 on a deviation.
int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err);

struct BenchOptions {
  std::string shape = "chain";
  std::vector<std::size_t> n;
  std::size_t k = 2;
  std::size_t cycles = 100;
  std::uint64_t seed = 1;
  std::string csv;
};

struct BenchRow {
  std::string shape;
  std::size_t n = 0;
  std::size_t k = 0;
  std::string strategy;
  std::string op;  // build, update or query
  std::uint64_t count = 0;
  std::uint64_t mult_adds = 0;
  std::uint64_t equation_evals = 0;
  std::uint64_t wall_ns = 0;

  friend bool operator==(const BenchRow&, const BenchRow&) = default;
};

inline constexpr std::string_view kBenchHeader = "shape,n,k,strategy,op,count,mult_adds,equation_evals,wall_ns";

// Throws InvalidNetwork for unknown shapes or sizes the shape cannot take.
std::vector<BenchRow> run_bench(const BenchOptions& options);
std::string bench_csv(const std::vector<BenchRow>& rows);
// Throws ParseError.
std::vector<BenchRow> parse_bench_csv(std::string_view text);

// Exit 1 on invalid parameters or an unwritable CSV path.
int cmd_bench(const BenchOptions& options, std::ostream& out, std::ostream& err);

}  // namespace logbel
