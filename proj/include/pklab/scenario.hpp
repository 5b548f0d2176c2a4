#pragma once

// Scenario files and run orchestration: the user-facing surface.
//
// A scenario is a JSON document selecting a time grid, a lattice, one model
// (driver kernel, rational kernel, lattice economy, or information-driven
// economy), instruments to price, and run controls.  Running a scenario
// produces a RunReport listing every library invariant with an explicit
// pass / fail / skip status, plus deterministic CSV and JSON output files.
//
// Everything here is deterministic given (scenario, seed): identical inputs
// produce byte-identical output files.  Wall-clock timing is therefore kept
// out of the serialized report and surfaced separately.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pklab/inflation.hpp"
#include "pklab/lattice.hpp"

namespace pklab {

enum class ModelKind {
  DriverKernel,
  Rational,
  InflationLog,
  InflationPower,
  InflationGeneric,
  InformationEconomy,
};

enum class LatticeKind { BinomialTree, Chain, Explicit };

// A recipe for one adapted process on the scenario lattice.
struct ProcessSpec {
  enum class Kind {
    Constant,            // value at every node
    PerIndex,            // deterministic value per time index
    Binomial,            // start, then multiply by up / down per move
    MartingaleBinomial,  // up given; down chosen so the process is a martingale
    Random,              // iid uniform(lo, hi) per node from an own seed
    Explicit,            // full per-node table
  };
  Kind kind = Kind::Constant;
  double value = 1.0;
  std::vector<double> per_index;
  double start = 1.0;
  double up = 1.0;
  double down = 1.0;
  std::uint64_t seed = 0;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::vector<double>> levels;
};

// Optional multiplicative bump of one priced value, for exercising the
// failure paths of the certification checks.
struct PerturbSpec {
  bool active = false;
  int index = 0;
  NodeId node = 0;
  double factor = 1.0;
};

struct BondSpec {
  int maturity = 1;
};

struct IncomeSpec {
  std::string name;
  std::vector<double> dividends;  // one per index in [1, horizon]
  double terminal = 0.0;          // value per terminal node (0 = pure income)
  PerturbSpec perturb;
};

struct ClaimSpec {
  enum class Payoff { Unit, Money, LiquidityMoney, AffineEstimates };
  std::string name;
  int maturity = 1;
  Payoff payoff = Payoff::Unit;
  AffineMap map;  // AffineEstimates only
};

struct UtilityParams {
  std::string kind;  // "log" | "power" | "generic-exp"
  double A = 1.0, B = 1.0;
  double p = 0.5, q = 0.5;  // power
  double a = 1.0, b = 1.0;  // generic-exp marginal decay rates
};

struct PriorSpec {
  bool discrete = true;
  std::vector<double> values;   // atoms
  std::vector<double> weights;  // atom masses
  double lo = 0.0, hi = 1.0;    // uniform density support
};

struct FactorSpec {
  int reveal_index = 1;
  double sigma = 1.0;
  std::uint64_t stream = 0;
  PriorSpec prior;
};

struct Scenario {
  std::string name;
  std::vector<double> times;

  LatticeKind lattice = LatticeKind::BinomialTree;
  double up_prob = 0.5;
  struct Edge {
    int i = 0;
    NodeId from = 0, to = 0;
    double prob = 1.0;
  };
  std::vector<NodeId> level_counts;  // Explicit lattices
  std::vector<Edge> edges;

  ModelKind model = ModelKind::DriverKernel;

  // driver-kernel
  ProcessSpec increments;
  double tail = 0.0;

  // rational
  std::vector<double> alpha, beta;
  ProcessSpec factor;

  // lattice economies
  UtilityParams utility;
  ProcessSpec k, M, lambda;
  double gamma = 0.0;
  double mu = 1.0;
  std::optional<double> wealth;  // when set, mu is solved from the budget

  // information economy
  std::vector<FactorSpec> factors;
  AffineMap consumption_map, money_map, liquidity_map;

  std::vector<BondSpec> bonds;
  std::vector<IncomeSpec> incomes;
  std::vector<ClaimSpec> claims;

  int paths = 1000;
  std::uint64_t seed = 1;
  std::optional<double> tail_bound;  // bound on the disclosed kernel tail mass
  std::map<std::string, double> tol_overrides;
};

// Parses and structurally validates a scenario document.  origin names the
// source (file name) in error messages.
Scenario parse_scenario(const std::string& json_text, const std::string& origin);
Scenario load_scenario(const std::string& path);

struct InvariantResult {
  std::string name;
  std::string status;  // "pass" | "fail" | "skip"
  double deviation = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct TruncationNote {
  std::string name;
  double value = 0.0;
  std::optional<double> bound;  // unset: disclosure only
  bool ok = true;
};

struct BondPrice {
  int maturity = 0;
  double price = 0.0;
  double rate = 0.0;
};

struct IncomePrice {
  std::string name;
  double price = 0.0;
};

struct ClaimPrice {
  std::string name;
  int maturity = 0;
  double value = 0.0;
  double se = 0.0;   // 0 for lattice (exact) valuations
  int paths = 0;     // 0 for lattice valuations
};

struct RunReport {
  std::string scenario_name;
  std::string model;
  std::string command;  // "simulate" | "verify"
  std::uint64_t seed = 0;
  int paths = 0;
  std::vector<BondPrice> bonds;
  std::vector<IncomePrice> incomes;
  std::vector<ClaimPrice> claims;
  std::vector<InvariantResult> invariants;
  std::vector<TruncationNote> truncation;
  std::vector<std::string> outputs;  // files written, in order
  double elapsed_seconds = 0.0;      // wall clock; never serialized

  bool all_ok() const;  // no failed invariant, no exceeded truncation bound
  std::string to_json() const;
};

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<int> paths;
  std::string out_dir = ".";
  std::map<std::string, double> tol_overrides;  // wins over scenario values
  bool write_files = true;
};

// Full run: builds the model, runs the invariant suite, prices instruments,
// writes report.json plus the data files for the scenario kind.
RunReport cmd_simulate(const Scenario& sc, const RunOptions& opt);

// Invariant suite only: no instrument pricing, writes report.json alone.
RunReport cmd_verify(const Scenario& sc, const RunOptions& opt);

// CSV "j,P,R" of the bond curve seen from time index at_index: at one node,
// or probability-weighted across the level when node is unset.
std::string curve_csv(const Scenario& sc, const RunOptions& opt, int at_index,
                      std::optional<NodeId> node = {});

// Every invariant name a report can contain, in report order; tolerance
// overrides are validated against this list (plus "tail-bound").
const std::vector<std::string>& known_check_names();

}  // namespace pklab
