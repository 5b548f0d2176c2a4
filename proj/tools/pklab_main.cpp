// pklab: build a scenario, run its invariant suite, price its instruments,
// and emit deterministic reports.  Exit codes: 0 all checks pass, 1 at least
// one invariant or truncation bound failed, 2 usage / input / model errors.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pklab/scenario.hpp"

namespace {

std::map<std::string, double> parse_overrides(const std::vector<std::string>& kv) {
  std::map<std::string, double> out;
  for (const auto& s : kv) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::invalid_argument("tol-override: expected name=value, got \"" + s +
                                  "\"");
    const std::string name = s.substr(0, eq);
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(s.substr(eq + 1), &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("tol-override \"" + name +
                                  "\": value is not a number");
    }
    if (used != s.size() - eq - 1)
      throw std::invalid_argument("tol-override \"" + name +
                                  "\": value is not a number");
    out[name] = value;
  }
  return out;
}

void print_report(const pklab::RunReport& r) {
  std::printf("scenario %s (%s), command %s, seed %llu, paths %d\n",
              r.scenario_name.c_str(), r.model.c_str(), r.command.c_str(),
              static_cast<unsigned long long>(r.seed), r.paths);
  int pass = 0, failed = 0, skip = 0;
  for (const auto& iv : r.invariants) {
    if (iv.status == "pass") ++pass;
    if (iv.status == "fail") ++failed;
    if (iv.status == "skip") ++skip;
  }
  std::printf("invariants: %d pass, %d fail, %d skip\n", pass, failed, skip);
  for (const auto& iv : r.invariants)
    if (iv.status == "fail")
      std::printf("  FAIL %s: deviation %.3e > tolerance %.3e (%s)\n",
                  iv.name.c_str(), iv.deviation, iv.tolerance,
                  iv.detail.c_str());
  for (const auto& t : r.truncation) {
    if (t.bound)
      std::printf("truncation %s: %.3e (bound %.3e) %s\n", t.name.c_str(),
                  t.value, *t.bound, t.ok ? "ok" : "EXCEEDED");
    else
      std::printf("truncation %s: %.3e (disclosed)\n", t.name.c_str(), t.value);
  }
  for (const auto& b : r.bonds)
    std::printf("bond j=%d: P = %.12g, R = %.12g\n", b.maturity, b.price,
                b.rate);
  for (const auto& a : r.incomes)
    std::printf("income %s: S_0 = %.12g\n", a.name.c_str(), a.price);
  for (const auto& c : r.claims) {
    if (c.paths > 0)
      std::printf("claim %s (j=%d): %.12g  (se %.3e, %d paths)\n",
                  c.name.c_str(), c.maturity, c.value, c.se, c.paths);
    else
      std::printf("claim %s (j=%d): %.12g\n", c.name.c_str(), c.maturity,
                  c.value);
  }
  for (const auto& f : r.outputs) std::printf("wrote %s\n", f.c_str());
  std::printf("wrote report.json\n");
  std::printf("elapsed %.3f s\n", r.elapsed_seconds);
  std::printf("%s\n", r.all_ok() ? "OK" : "CHECKS FAILED");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pklab: discrete-time pricing kernels, bonds, information "
               "filtering, and monetary economies"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> paths;
  std::vector<std::string> overrides;
  int at_index = 0;
  std::optional<unsigned> node;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", scenario_path, "scenario JSON file")
        ->required();
    cmd->add_option("--seed", seed, "override the scenario seed");
    cmd->add_option("--paths", paths, "override the scenario path count");
    cmd->add_option("--out", out_dir, "output directory (default .)");
    cmd->add_option("--tol-override", overrides,
                    "name=value tolerance override, repeatable");
  };

  CLI::App* sim = app.add_subcommand(
      "simulate", "run the invariant suite, price instruments, write files");
  add_common(sim);
  CLI::App* ver = app.add_subcommand(
      "verify", "run the invariant suite only and write report.json");
  add_common(ver);
  CLI::App* cur = app.add_subcommand("curve", "print the discount bond curve");
  add_common(cur);
  cur->add_option("--at-index", at_index, "time index the curve is seen from")
      ->required();
  cur->add_option("--node", node, "lattice node (default: level average)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const pklab::Scenario sc = pklab::load_scenario(scenario_path);
    pklab::RunOptions opt;
    opt.seed = seed;
    opt.paths = paths;
    opt.out_dir = out_dir;
    opt.tol_overrides = parse_overrides(overrides);

    if (cur->parsed()) {
      std::optional<pklab::NodeId> n;
      if (node) n = *node;
      const std::string csv = pklab::curve_csv(sc, opt, at_index, n);
      namespace fs = std::filesystem;
      fs::create_directories(out_dir);
      const fs::path p = fs::path(out_dir) / "curve.csv";
      std::ofstream os(p, std::ios::binary);
      if (!os) throw std::runtime_error("cannot write " + p.string());
      os << csv;
      std::fputs(csv.c_str(), stdout);
      std::printf("wrote curve.csv\n");
      return 0;
    }

    const pklab::RunReport report = sim->parsed() ? pklab::cmd_simulate(sc, opt)
                                                  : pklab::cmd_verify(sc, opt);
    print_report(report);
    return report.all_ok() ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
