#include "pklab/scenario.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace pklab {

namespace {

using nlohmann::json;

[[noreturn]] void sfail(const std::string& origin, const std::string& what) {
  fail("scenario", origin + ": " + what);
}

const json& need(const json& o, const char* key, const std::string& origin,
                 const std::string& ctx) {
  if (!o.is_object()) sfail(origin, ctx + " must be an object");
  auto it = o.find(key);
  if (it == o.end()) sfail(origin, ctx + " requires \"" + key + "\"");
  return *it;
}

double as_num(const json& v, const std::string& origin, const std::string& ctx) {
  if (!v.is_number()) sfail(origin, ctx + " must be a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& origin, const std::string& ctx) {
  if (!v.is_number_integer()) sfail(origin, ctx + " must be an integer");
  return v.get<int>();
}

std::uint64_t as_u64(const json& v, const std::string& origin,
                     const std::string& ctx) {
  if (!v.is_number_unsigned() && !v.is_number_integer())
    sfail(origin, ctx + " must be a non-negative integer");
  if (v.is_number_integer() && v.get<std::int64_t>() < 0)
    sfail(origin, ctx + " must be a non-negative integer");
  return v.get<std::uint64_t>();
}

std::string as_str(const json& v, const std::string& origin,
                   const std::string& ctx) {
  if (!v.is_string()) sfail(origin, ctx + " must be a string");
  return v.get<std::string>();
}

std::vector<double> as_num_list(const json& v, const std::string& origin,
                                const std::string& ctx) {
  if (!v.is_array()) sfail(origin, ctx + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(as_num(e, origin, ctx + " entries"));
  return out;
}

double opt_num(const json& o, const char* key, double fallback,
               const std::string& origin, const std::string& ctx) {
  auto it = o.find(key);
  if (it == o.end()) return fallback;
  return as_num(*it, origin, ctx + "." + key);
}

ProcessSpec parse_process(const json& o, const std::string& origin,
                          const std::string& ctx) {
  ProcessSpec p;
  const std::string kind = as_str(need(o, "kind", origin, ctx), origin, ctx + ".kind");
  if (kind == "constant") {
    p.kind = ProcessSpec::Kind::Constant;
    p.value = as_num(need(o, "value", origin, ctx), origin, ctx + ".value");
  } else if (kind == "per-index") {
    p.kind = ProcessSpec::Kind::PerIndex;
    p.per_index = as_num_list(need(o, "values", origin, ctx), origin, ctx + ".values");
  } else if (kind == "binomial") {
    p.kind = ProcessSpec::Kind::Binomial;
    p.start = as_num(need(o, "start", origin, ctx), origin, ctx + ".start");
    p.up = as_num(need(o, "up", origin, ctx), origin, ctx + ".up");
    p.down = as_num(need(o, "down", origin, ctx), origin, ctx + ".down");
  } else if (kind == "martingale-binomial") {
    p.kind = ProcessSpec::Kind::MartingaleBinomial;
    p.start = as_num(need(o, "start", origin, ctx), origin, ctx + ".start");
    p.up = as_num(need(o, "up", origin, ctx), origin, ctx + ".up");
  } else if (kind == "random") {
    p.kind = ProcessSpec::Kind::Random;
    p.seed = as_u64(need(o, "seed", origin, ctx), origin, ctx + ".seed");
    p.lo = as_num(need(o, "lo", origin, ctx), origin, ctx + ".lo");
    p.hi = as_num(need(o, "hi", origin, ctx), origin, ctx + ".hi");
  } else if (kind == "explicit") {
    const json& lv = need(o, "values", origin, ctx);
    if (!lv.is_array()) sfail(origin, ctx + ".values must be an array of per-level arrays");
    p.kind = ProcessSpec::Kind::Explicit;
    for (const auto& level : lv)
      p.levels.push_back(as_num_list(level, origin, ctx + ".values levels"));
  } else {
    sfail(origin, ctx + ".kind \"" + kind +
                      "\" is not one of constant, per-index, binomial, "
                      "martingale-binomial, random, explicit");
  }
  return p;
}

AffineMap parse_map(const json& o, const std::string& origin,
                    const std::string& ctx) {
  AffineMap m;
  m.base = as_num(need(o, "base", origin, ctx), origin, ctx + ".base");
  m.slopes = as_num_list(need(o, "slopes", origin, ctx), origin, ctx + ".slopes");
  return m;
}

PriorSpec parse_prior(const json& o, const std::string& origin,
                      const std::string& ctx) {
  PriorSpec p;
  const std::string kind = as_str(need(o, "kind", origin, ctx), origin, ctx + ".kind");
  if (kind == "discrete") {
    p.discrete = true;
    p.values = as_num_list(need(o, "values", origin, ctx), origin, ctx + ".values");
    p.weights = as_num_list(need(o, "weights", origin, ctx), origin, ctx + ".weights");
  } else if (kind == "uniform") {
    p.discrete = false;
    p.lo = as_num(need(o, "lo", origin, ctx), origin, ctx + ".lo");
    p.hi = as_num(need(o, "hi", origin, ctx), origin, ctx + ".hi");
  } else {
    sfail(origin, ctx + ".kind \"" + kind + "\" is not one of discrete, uniform");
  }
  return p;
}

UtilityParams parse_utility(const json& o, const std::string& origin,
                            const std::string& ctx) {
  UtilityParams u;
  u.kind = as_str(need(o, "kind", origin, ctx), origin, ctx + ".kind");
  if (u.kind != "log" && u.kind != "power" && u.kind != "generic-exp")
    sfail(origin, ctx + ".kind \"" + u.kind +
                      "\" is not one of log, power, generic-exp");
  u.A = as_num(need(o, "A", origin, ctx), origin, ctx + ".A");
  u.B = as_num(need(o, "B", origin, ctx), origin, ctx + ".B");
  if (u.kind == "power") {
    u.p = as_num(need(o, "p", origin, ctx), origin, ctx + ".p");
    u.q = as_num(need(o, "q", origin, ctx), origin, ctx + ".q");
  }
  if (u.kind == "generic-exp") {
    u.a = as_num(need(o, "a", origin, ctx), origin, ctx + ".a");
    u.b = as_num(need(o, "b", origin, ctx), origin, ctx + ".b");
    if (u.a <= 0.0 || u.b <= 0.0)
      sfail(origin, ctx + ": generic-exp decay rates a, b must be positive");
  }
  return u;
}

ClaimSpec parse_claim(const json& o, const std::string& origin,
                      const std::string& ctx) {
  ClaimSpec c;
  c.name = as_str(need(o, "name", origin, ctx), origin, ctx + ".name");
  c.maturity = as_int(need(o, "maturity", origin, ctx), origin, ctx + ".maturity");
  const json& pay = need(o, "payoff", origin, ctx);
  if (pay.is_string()) {
    const std::string kind = pay.get<std::string>();
    if (kind == "unit")
      c.payoff = ClaimSpec::Payoff::Unit;
    else if (kind == "money")
      c.payoff = ClaimSpec::Payoff::Money;
    else if (kind == "liquidity-money")
      c.payoff = ClaimSpec::Payoff::LiquidityMoney;
    else
      sfail(origin, ctx + ".payoff \"" + kind +
                        "\" is not one of unit, money, liquidity-money");
  } else {
    const std::string kind =
        as_str(need(pay, "kind", origin, ctx + ".payoff"), origin, ctx + ".payoff.kind");
    if (kind != "affine-estimates")
      sfail(origin, ctx + ".payoff.kind must be affine-estimates");
    c.payoff = ClaimSpec::Payoff::AffineEstimates;
    c.map = parse_map(pay, origin, ctx + ".payoff");
  }
  return c;
}

void parse_grid(const json& o, Scenario& sc, const std::string& origin) {
  if (o.contains("times")) {
    sc.times = as_num_list(o["times"], origin, "grid.times");
  } else {
    const double t0 = opt_num(o, "t0", 0.0, origin, "grid");
    const double dt = as_num(need(o, "dt", origin, "grid"), origin, "grid.dt");
    const int periods = as_int(need(o, "periods", origin, "grid"), origin, "grid.periods");
    if (periods < 1) sfail(origin, "grid.periods must be at least 1");
    for (int i = 0; i <= periods; ++i) sc.times.push_back(t0 + dt * i);
  }
  if (sc.times.size() < 2) sfail(origin, "grid needs at least two times");
}

void parse_lattice(const json& o, Scenario& sc, const std::string& origin) {
  const std::string kind =
      as_str(need(o, "kind", origin, "lattice"), origin, "lattice.kind");
  if (kind == "binomial-tree") {
    sc.lattice = LatticeKind::BinomialTree;
    sc.up_prob = opt_num(o, "up-prob", 0.5, origin, "lattice");
  } else if (kind == "chain") {
    sc.lattice = LatticeKind::Chain;
  } else if (kind == "explicit") {
    sc.lattice = LatticeKind::Explicit;
    for (const auto& c : need(o, "levels", origin, "lattice")) {
      const int n = as_int(c, origin, "lattice.levels entries");
      if (n < 1) sfail(origin, "lattice.levels entries must be positive");
      sc.level_counts.push_back(static_cast<NodeId>(n));
    }
    const json& edges = need(o, "edges", origin, "lattice");
    if (!edges.is_array()) sfail(origin, "lattice.edges must be an array");
    for (const auto& e : edges) {
      if (!e.is_array() || e.size() != 4)
        sfail(origin, "lattice.edges entries must be [i, from, to, prob]");
      Scenario::Edge edge;
      edge.i = as_int(e[0], origin, "lattice.edges i");
      edge.from = static_cast<NodeId>(as_int(e[1], origin, "lattice.edges from"));
      edge.to = static_cast<NodeId>(as_int(e[2], origin, "lattice.edges to"));
      edge.prob = as_num(e[3], origin, "lattice.edges prob");
      sc.edges.push_back(edge);
    }
  } else {
    sfail(origin, "lattice.kind \"" + kind +
                      "\" is not one of binomial-tree, chain, explicit");
  }
}

void parse_model(const json& o, Scenario& sc, const std::string& origin) {
  const std::string kind =
      as_str(need(o, "kind", origin, "model"), origin, "model.kind");
  if (kind == "driver-kernel") {
    sc.model = ModelKind::DriverKernel;
    sc.increments =
        parse_process(need(o, "increments", origin, "model"), origin, "model.increments");
    sc.tail = opt_num(o, "tail", 0.0, origin, "model");
  } else if (kind == "rational") {
    sc.model = ModelKind::Rational;
    sc.alpha = as_num_list(need(o, "alpha", origin, "model"), origin, "model.alpha");
    sc.beta = as_num_list(need(o, "beta", origin, "model"), origin, "model.beta");
    sc.factor =
        parse_process(need(o, "factor", origin, "model"), origin, "model.factor");
  } else if (kind == "inflation-log" || kind == "inflation-power" ||
             kind == "inflation-generic") {
    sc.model = kind == "inflation-log"     ? ModelKind::InflationLog
               : kind == "inflation-power" ? ModelKind::InflationPower
                                           : ModelKind::InflationGeneric;
    sc.utility =
        parse_utility(need(o, "utility", origin, "model"), origin, "model.utility");
    const char* expect = sc.model == ModelKind::InflationLog     ? "log"
                         : sc.model == ModelKind::InflationPower ? "power"
                                                                 : "generic-exp";
    if (sc.utility.kind != expect)
      sfail(origin, std::string("model.utility.kind must be ") + expect +
                        " for model " + kind);
    sc.k = parse_process(need(o, "k", origin, "model"), origin, "model.k");
    sc.M = parse_process(need(o, "M", origin, "model"), origin, "model.M");
    sc.lambda =
        parse_process(need(o, "lambda", origin, "model"), origin, "model.lambda");
    sc.gamma = opt_num(o, "gamma", 0.0, origin, "model");
    sc.mu = opt_num(o, "mu", 1.0, origin, "model");
    if (o.contains("wealth"))
      sc.wealth = as_num(o["wealth"], origin, "model.wealth");
  } else if (kind == "information-economy") {
    sc.model = ModelKind::InformationEconomy;
    const json& fs = need(o, "factors", origin, "model");
    if (!fs.is_array() || fs.empty())
      sfail(origin, "model.factors must be a non-empty array");
    int fi = 0;
    for (const auto& f : fs) {
      const std::string ctx = "model.factors[" + std::to_string(fi++) + "]";
      FactorSpec spec;
      spec.reveal_index =
          as_int(need(f, "reveal-index", origin, ctx), origin, ctx + ".reveal-index");
      spec.sigma = as_num(need(f, "sigma", origin, ctx), origin, ctx + ".sigma");
      spec.stream = as_u64(need(f, "stream", origin, ctx), origin, ctx + ".stream");
      spec.prior = parse_prior(need(f, "prior", origin, ctx), origin, ctx + ".prior");
      sc.factors.push_back(std::move(spec));
    }
    sc.consumption_map = parse_map(need(o, "consumption-map", origin, "model"),
                                   origin, "model.consumption-map");
    sc.money_map =
        parse_map(need(o, "money-map", origin, "model"), origin, "model.money-map");
    sc.liquidity_map = parse_map(need(o, "liquidity-map", origin, "model"),
                                 origin, "model.liquidity-map");
    sc.utility =
        parse_utility(need(o, "utility", origin, "model"), origin, "model.utility");
    sc.gamma = opt_num(o, "gamma", 0.0, origin, "model");
    sc.mu = opt_num(o, "mu", 1.0, origin, "model");
  } else {
    sfail(origin,
          "model.kind \"" + kind +
              "\" is not one of driver-kernel, rational, inflation-log, "
              "inflation-power, inflation-generic, information-economy");
  }
}

void parse_instruments(const json& o, Scenario& sc, const std::string& origin) {
  if (o.contains("bonds")) {
    const json& bs = o["bonds"];
    if (!bs.is_array()) sfail(origin, "instruments.bonds must be an array");
    for (const auto& b : bs) {
      BondSpec spec;
      spec.maturity = as_int(b, origin, "instruments.bonds entries");
      sc.bonds.push_back(spec);
    }
  }
  if (o.contains("income")) {
    const json& is = o["income"];
    if (!is.is_array()) sfail(origin, "instruments.income must be an array");
    int n = 0;
    for (const auto& a : is) {
      const std::string ctx = "instruments.income[" + std::to_string(n++) + "]";
      IncomeSpec spec;
      spec.name = as_str(need(a, "name", origin, ctx), origin, ctx + ".name");
      spec.dividends =
          as_num_list(need(a, "dividends", origin, ctx), origin, ctx + ".dividends");
      spec.terminal = opt_num(a, "terminal", 0.0, origin, ctx);
      if (a.contains("perturb")) {
        const json& p = a["perturb"];
        spec.perturb.active = true;
        spec.perturb.index =
            as_int(need(p, "index", origin, ctx + ".perturb"), origin, ctx + ".perturb.index");
        spec.perturb.node = static_cast<NodeId>(
            as_int(need(p, "node", origin, ctx + ".perturb"), origin, ctx + ".perturb.node"));
        spec.perturb.factor = as_num(need(p, "factor", origin, ctx + ".perturb"),
                                     origin, ctx + ".perturb.factor");
      }
      sc.incomes.push_back(std::move(spec));
    }
  }
  if (o.contains("claims")) {
    const json& cs = o["claims"];
    if (!cs.is_array()) sfail(origin, "instruments.claims must be an array");
    int n = 0;
    for (const auto& c : cs)
      sc.claims.push_back(
          parse_claim(c, origin, "instruments.claims[" + std::to_string(n++) + "]"));
  }
}

void parse_run(const json& o, Scenario& sc, const std::string& origin) {
  if (o.contains("seed")) sc.seed = as_u64(o["seed"], origin, "run.seed");
  if (o.contains("paths")) {
    sc.paths = as_int(o["paths"], origin, "run.paths");
    if (sc.paths < 2) sfail(origin, "run.paths must be at least 2");
  }
  if (o.contains("tail-bound"))
    sc.tail_bound = as_num(o["tail-bound"], origin, "run.tail-bound");
  if (o.contains("tolerances")) {
    const json& t = o["tolerances"];
    if (!t.is_object()) sfail(origin, "run.tolerances must be an object");
    for (const auto& [key, val] : t.items())
      sc.tol_overrides[key] = as_num(val, origin, "run.tolerances." + key);
  }
}

}  // namespace

Scenario parse_scenario(const std::string& json_text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    sfail(origin, e.what());
  }
  if (!doc.is_object()) sfail(origin, "top level must be an object");

  Scenario sc;
  if (doc.contains("name")) sc.name = as_str(doc["name"], origin, "name");
  parse_grid(need(doc, "grid", origin, "scenario"), sc, origin);
  parse_lattice(need(doc, "lattice", origin, "scenario"), sc, origin);
  parse_model(need(doc, "model", origin, "scenario"), sc, origin);
  if (doc.contains("instruments")) parse_instruments(doc["instruments"], sc, origin);
  if (doc.contains("run")) parse_run(doc["run"], sc, origin);

  if (sc.model == ModelKind::InformationEconomy) {
    for (const auto& c : sc.claims)
      if (c.maturity < 1 ||
          c.maturity > static_cast<int>(sc.times.size()) - 1)
        sfail(origin, "claim \"" + c.name + "\" maturity out of range");
    if (!sc.incomes.empty())
      sfail(origin, "income assets need a lattice model");
  } else {
    for (const auto& c : sc.claims)
      if (c.payoff == ClaimSpec::Payoff::AffineEstimates)
        sfail(origin, "claim \"" + c.name +
                          "\": affine-estimates payoffs need an information economy");
    if ((sc.model == ModelKind::DriverKernel || sc.model == ModelKind::Rational) &&
        !sc.claims.empty())
      sfail(origin, "claims need an economy model");
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("scenario", "cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

}  // namespace pklab
