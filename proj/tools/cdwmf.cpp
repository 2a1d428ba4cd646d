#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cdwmf/io.hpp"
#include "cdwmf/luttinger.hpp"
#include "cdwmf/phase.hpp"
#include "cdwmf/selfcheck.hpp"
#include "cdwmf/ttpv.hpp"

using namespace cdwmf;
namespace fs = std::filesystem;
using std::numbers::pi;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_checks_failed = 1;
constexpr int exit_invalid = 2;
constexpr int exit_not_converged = 3;

struct Invalid : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Values given on the command line; merged over the config file.
struct Flags {
  json values = json::object();
  std::string config_file;

  void number(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<double>(flag, [this, key](const double& v) { values[key] = v; }, help);
  }
  void integer(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<int>(flag, [this, key](const int& v) { values[key] = v; }, help);
  }
  void text(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(flag, [this, key](const std::string& v) { values[key] = v; }, help);
  }
  void toggle(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_flag_callback(flag, [this, key] { values[key] = true; }, help);
  }

  json merged() const {
    json c = json::object();
    if (!config_file.empty()) {
      try {
        c = json::parse(read_file(config_file));
      } catch (const std::exception& e) {
        throw Invalid("cannot read config " + config_file + ": " + e.what());
      }
      if (!c.is_object()) throw Invalid("config file must hold a JSON object");
    }
    c.update(values);
    return c;
  }
};

void model_flags(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config_file, "JSON config file; flags override its keys");
  f.text(app, "--model", "model", "ttpv or luttinger");
  f.number(app, "--t", "t", "nearest-neighbour hopping");
  f.number(app, "--tp", "tp", "next-nearest-neighbour hopping t'");
  f.number(app, "--V", "V", "nearest-neighbour interaction");
  f.number(app, "--mu", "mu", "chemical potential");
  f.number(app, "--beta", "beta", "inverse temperature");
  f.number(app, "--T", "T", "temperature, overrides beta");
  f.integer(app, "--L", "L", "lattice size (ttpv)");
  f.number(app, "--kappa", "kappa", "antinodal patch size (luttinger)");
  f.number(app, "--Q", "Q", "nodal point in radians (luttinger)");
  f.number(app, "--Q-pi", "Q_pi", "nodal point in units of pi (luttinger)");
  f.text(app, "--band", "band", "taylor or full antinodal bands (luttinger)");
  f.integer(app, "--antinodal-count", "antinodal_count", "antinodal momenta (luttinger)");
}

template <class T>
T get(const json& c, const std::string& key, T fallback) {
  if (!c.contains(key) || c.at(key).is_null()) return fallback;
  try {
    return c.at(key).get<T>();
  } catch (const std::exception&) {
    throw Invalid("config key '" + key + "' has the wrong type");
  }
}

std::string model_of(const json& c) {
  const std::string m = get<std::string>(c, "model", "ttpv");
  if (m != "ttpv" && m != "luttinger") throw Invalid("model must be ttpv or luttinger, got " + m);
  return m;
}

double beta_of(const json& c, double fallback) {
  if (c.contains("T")) {
    const double T = get<double>(c, "T", 0.0);
    if (!(T > 0)) throw Invalid("T must be positive");
    return 1.0 / T;
  }
  return get<double>(c, "beta", fallback);
}

TtpvParams ttpv_params(const json& c) {
  TtpvParams p;
  p.t = get<double>(c, "t", p.t);
  p.t_prime = get<double>(c, "tp", p.t_prime);
  p.V = get<double>(c, "V", p.V);
  p.mu = get<double>(c, "mu", p.mu);
  p.beta = beta_of(c, p.beta);
  p.L = get<int>(c, "L", p.L);
  p.validate();
  return p;
}

LuttParams lutt_params(const json& c) {
  LuttParams p;
  p.t = get<double>(c, "t", p.t);
  p.t_prime = get<double>(c, "tp", p.t_prime);
  p.V = get<double>(c, "V", p.V);
  p.beta = beta_of(c, p.beta);
  p.kappa = get<double>(c, "kappa", p.kappa);
  if (c.contains("Q_pi")) p.Q = get<double>(c, "Q_pi", 0.0) * pi;
  p.Q = get<double>(c, "Q", p.Q);
  const std::string band = get<std::string>(c, "band", "taylor");
  if (band != "taylor" && band != "full") throw Invalid("band must be taylor or full");
  p.band = band == "full" ? BandChoice::full : BandChoice::taylor;
  p.antinodal_count = get<int>(c, "antinodal_count", p.antinodal_count);
  p.validate();
  return p;
}

json resolved(const json& c) {
  json r = c;
  if (model_of(c) == "ttpv") {
    r["params"] = to_json(ttpv_params(c));
  } else {
    r["params"] = to_json(lutt_params(c));
    r["mu"] = get<double>(c, "mu", 0.0);
  }
  return r;
}

void emit(const std::string& out, const std::string& content) {
  if (out.empty() || out == "-") {
    std::cout << content;
  } else {
    write_atomic(out, content);
  }
}

bool cdw_wins(double omega_cdw, double omega_n, bool cdw_converged, double gap, double t) {
  return cdw_converged && gap >= 1e-4 * t && omega_cdw < omega_n;
}

int run_point(const json& c) {
  const int iterations = get<int>(c, "max_iterations", 3000);
  if (iterations < 1) throw Invalid("max_iterations must be positive");
  json cfg = resolved(c);
  cfg["max_iterations"] = iterations;
  json out{{"provenance", provenance(cfg)}};
  bool ok = true;
  if (model_of(c) == "ttpv") {
    const TtpvModel m(ttpv_params(c));
    SolveOptions o;
    o.max_iterations = iterations;
    const MfSolution n = m.solve_branch(Branch::N, {}, o);
    const MfSolution d = m.solve_branch(Branch::CDW, {}, o);
    const bool cdw = cdw_wins(d.omega_per_site, n.omega_per_site, d.converged, d.gap, m.params().t);
    const MfSolution& s = cdw ? d : n;
    out["model"] = "ttpv";
    out["branches"] = {{"N", to_json(n)}, {"CDW", to_json(d)}};
    out["stable"] = to_string(s.branch);
    out["omega"] = s.omega_per_site;
    out["nu"] = s.nu;
    out["gap"] = s.gap;
    out["residual_norm"] = s.residual_norm;
    ok = n.converged && d.status != SolveStatus::not_converged;
  } else {
    const LuttingerModel m(lutt_params(c));
    const double mu = get<double>(c, "mu", 0.0);
    LuttSolveOptions o;
    o.max_iterations = iterations;
    const LuttSolution n = m.self_consistent_point(mu, Branch::N, o);
    const LuttSolution d = m.self_consistent_point(mu, Branch::CDW, o);
    const bool cdw = cdw_wins(d.omega_total_per_site, n.omega_total_per_site, d.converged, d.gap, m.params().t);
    const LuttSolution& s = cdw ? d : n;
    out["model"] = "luttinger";
    out["branches"] = {{"N", to_json(n)}, {"CDW", to_json(d)}};
    out["stable"] = to_string(s.branch);
    out["omega"] = s.omega_total_per_site;
    out["nu"] = s.nu_total;
    out["nu_a"] = s.nu_a;
    out["tQ"] = s.nodal.tQ;
    out["gap"] = s.gap;
    out["g_a"] = s.couplings.g_a;
    out["energy_constants"] = {{"e_kin", s.constants.e_kin}, {"e_1", s.constants.e_1},
                               {"e_int", s.constants.e_int}};
    out["residual_norm"] = s.residual_norm;
    ok = n.converged && d.status != SolveStatus::not_converged;
  }
  out["converged"] = ok;
  std::cout << out.dump(2) << "\n";
  return ok ? exit_ok : exit_not_converged;
}

std::unique_ptr<BranchModel> branch_model(const json& c) {
  if (model_of(c) == "ttpv") return std::make_unique<TtpvBranchModel>(ttpv_params(c));
  return std::make_unique<LuttBranchModel>(lutt_params(c));
}

std::pair<double, double> mu_range(const json& c, const BranchModel& m) {
  auto r = m.default_mu_range();
  r.first = get<double>(c, "mu_min", r.first);
  r.second = get<double>(c, "mu_max", r.second);
  if (!(r.first < r.second)) throw Invalid("mu_min must be below mu_max");
  return r;
}

int n_mu_of(const json& c, int fallback) {
  const int n = get<int>(c, "n_mu", fallback);
  if (n < 16) throw Invalid("n_mu must be at least 16");
  return n;
}

int run_scan(const json& c) {
  const auto model = branch_model(c);
  const auto [lo, hi] = mu_range(c, *model);
  const int n = n_mu_of(c, 201);
  json cfg = resolved(c);
  cfg["mu_min"] = lo;
  cfg["mu_max"] = hi;
  cfg["n_mu"] = n;
  const json prov = provenance(cfg);
  const MuScan scan = scan_mu(*model, lo, hi, n);
  emit(get<std::string>(c, "out", ""), scan_to_csv(scan, prov));
  const std::string bfile = get<std::string>(c, "boundaries", "");
  if (!bfile.empty()) {
    json b = to_json(find_crossings(*model, scan));
    b["provenance"] = prov;
    b["schema_version"] = schema_version;
    write_atomic(bfile, b.dump(2) + "\n");
  }
  int converged = 0;
  for (std::size_t i = 0; i < scan.mu.size(); ++i) converged += scan.normal[i].converged();
  return converged > 0 ? exit_ok : exit_not_converged;
}

std::vector<double> axis_values(const json& c) {
  if (c.contains("axis_values")) {
    const auto v = get<std::vector<double>>(c, "axis_values", {});
    if (v.empty()) throw Invalid("axis_values is empty");
    return v;
  }
  if (!c.contains("axis_min") || !c.contains("axis_max")) throw Invalid("axis_min and axis_max are required");
  const double a = get<double>(c, "axis_min", 0.0), b = get<double>(c, "axis_max", 0.0);
  const int n = get<int>(c, "axis_n", 41);
  if (n < 1) throw Invalid("axis_n must be positive");
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
  return v;
}

json with_axis(json c, const std::string& axis, double v) {
  if (axis == "Q") c.erase("Q_pi");
  if (axis == "T") c.erase("beta");
  c[axis] = v;
  return c;
}

int run_diagram(const json& c) {
  const std::string model = model_of(c);
  const std::string axis = get<std::string>(c, "axis", "V");
  const std::vector<std::string> allowed =
      model == "ttpv" ? std::vector<std::string>{"V", "tp", "T"} : std::vector<std::string>{"V", "tp", "kappa", "Q", "T"};
  if (std::find(allowed.begin(), allowed.end(), axis) == allowed.end()) {
    throw Invalid("axis " + axis + " is not available for model " + model);
  }
  const bool q_fixed = get<bool>(c, "q_fixed", false);
  const bool n_side = get<bool>(c, "n_side", false);
  if (q_fixed && model != "luttinger") throw Invalid("q_fixed needs the luttinger model");
  if (q_fixed && axis == "Q") throw Invalid("q_fixed conflicts with a Q axis");
  const std::vector<double> values = axis_values(c);
  for (double v : values) resolved(with_axis(c, axis, v));  // validates every column up front
  const int nu_n = get<int>(c, "nu_n", 81);
  if (nu_n < 2) throw Invalid("nu_n must be at least 2");
  std::vector<double> nu;
  for (int i = 0; i < nu_n; ++i) nu.push_back(double(i) / (nu_n - 1));
  const int n_mu = n_mu_of(c, 81);
  std::optional<std::pair<double, double>> range;
  if (c.contains("mu_min") || c.contains("mu_max")) {
    if (!c.contains("mu_min") || !c.contains("mu_max")) throw Invalid("give both mu_min and mu_max");
    range = std::pair{get<double>(c, "mu_min", 0.0), get<double>(c, "mu_max", 0.0)};
    if (!(range->first < range->second)) throw Invalid("mu_min must be below mu_max");
  }
  const std::string out = get<std::string>(c, "out", "diagram");

  json cfg = resolved(c);
  cfg["axis"] = axis;
  cfg["axis_values"] = values;
  cfg["nu_n"] = nu_n;
  cfg["n_mu"] = n_mu;
  cfg["q_fixed"] = q_fixed;
  cfg["n_side"] = n_side;
  if (range) {
    cfg["mu_min"] = range->first;
    cfg["mu_max"] = range->second;
  }
  for (const char* k : {"out", "resume", "workers"}) cfg.erase(k);
  const json prov = provenance(cfg);

  ColumnFn column;
  if (q_fixed) {
    const LuttParams base = lutt_params(c);
    column = q_fixed_luttinger_column([=](double v) { return lutt_params(with_axis(c, axis, v)); }, n_mu,
                                      base.Q, n_side, range);
  } else {
    column = standard_column([=](double v) { return branch_model(with_axis(c, axis, v)); }, n_mu, range);
  }
  SweepOptions so;
  so.persist_dir = (fs::path(out) / "columns").string();
  so.resume = get<bool>(c, "resume", false);
  so.workers = get<int>(c, "workers", 0);
  so.provenance_json = prov.dump();
  const PhaseDiagram d = sweep2d({axis, values}, nu, column, so);

  int ok = 0;
  for (const ColumnResult& col : d.columns) {
    ok += col.ok;
    write_atomic((fs::path(out) / ("column_" + std::to_string(col.index) + ".csv")).string(),
                 column_to_csv(col, nu, prov));
    if (!col.ok) std::cerr << "column " << col.index << " (" << axis << "=" << col.axis_value << ") failed: " << col.error << "\n";
  }
  const json j = to_json(d);
  write_atomic((fs::path(out) / "diagram.json").string(), j.dump(1) + "\n");
  write_atomic((fs::path(out) / "diagram.svg").string(), render_svg(j));
  std::cerr << ok << "/" << d.columns.size() << " columns ok, written to " << out << "\n";
  return ok > 0 ? exit_ok : exit_not_converged;
}

int run_fixq(const json& c) {
  if (model_of(c) != "luttinger") throw Invalid("fixq needs the luttinger model");
  const LuttParams p = lutt_params(c);
  const std::string br = get<std::string>(c, "branch", "CDW");
  if (br != "CDW" && br != "N") throw Invalid("branch must be CDW or N");
  const Branch branch = br == "CDW" ? Branch::CDW : Branch::N;
  const double tol = get<double>(c, "tol", 1e-8);
  const int max_steps = get<int>(c, "max_steps", 200);
  if (!(tol > 0) || max_steps < 1) throw Invalid("tol and max_steps must be positive");
  json cfg = resolved(c);
  cfg["branch"] = br;
  cfg["tol"] = tol;
  cfg["max_steps"] = max_steps;
  const FixQResult r = fix_Q(p, get<double>(c, "mu", 0.0), branch, p.Q, tol, max_steps);
  json out{{"schema_version", schema_version}, {"provenance", provenance(cfg)}, {"result", to_json(r)}};
  emit(get<std::string>(c, "out", ""), out.dump(2) + "\n");
  return r.converged ? exit_ok : exit_not_converged;
}

int run_selfcheck(const json& c) {
  const CheckReport r = cdwmf::run_selfcheck(canned_sets());
  json items = json::array();
  for (const CheckItem& i : r.items) {
    std::printf("%s %-13s %-70s err=%.3e tol=%.1e  %s\n", i.passed ? "PASS" : "FAIL", i.suite.c_str(),
                i.name.c_str(), i.measured, i.tolerance, i.detail.c_str());
    items.push_back({{"suite", i.suite}, {"name", i.name}, {"measured", i.measured},
                     {"tolerance", i.tolerance}, {"passed", i.passed}, {"detail", i.detail}});
  }
  std::printf("%d of %zu checks failed\n", r.failures(), r.items.size());
  const std::string out = get<std::string>(c, "out", "");
  if (!out.empty()) {
    json j{{"schema_version", schema_version}, {"provenance", provenance({{"command", "selfcheck"}})},
           {"passed", r.passed()}, {"items", items}};
    write_atomic(out, j.dump(2) + "\n");
  }
  return r.passed() ? exit_ok : exit_checks_failed;
}

int run_render(const json& c) {
  const std::string in = get<std::string>(c, "in", "");
  if (in.empty()) throw Invalid("render needs --in");
  json d;
  try {
    d = json::parse(read_file(in));
  } catch (const std::exception& e) {
    throw Invalid("cannot read diagram " + in + ": " + e.what());
  }
  emit(get<std::string>(c, "out", ""), render_svg(d));
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hartree-Fock charge density wave phase diagrams"};
  app.require_subcommand(1);
  Flags f;

  CLI::App* point = app.add_subcommand("point", "solve both branches at one chemical potential; JSON to stdout");
  model_flags(point, f);
  f.integer(point, "--max-iterations", "max_iterations", "solver iteration cap (default 3000)");

  CLI::App* scan = app.add_subcommand("scan-mu", "both branches on a mu grid; CSV");
  model_flags(scan, f);
  f.number(scan, "--mu-min", "mu_min", "lower end of the mu grid");
  f.number(scan, "--mu-max", "mu_max", "upper end of the mu grid");
  f.integer(scan, "--n-mu", "n_mu", "mu grid points (default 201)");
  f.text(scan, "--out", "out", "CSV file, stdout when omitted");
  f.text(scan, "--boundaries", "boundaries", "also write located crossings as JSON");

  CLI::App* diag = app.add_subcommand("phase-diagram", "parameter x filling diagram; CSV, JSON and SVG");
  model_flags(diag, f);
  f.text(diag, "--axis", "axis", "swept parameter: V, tp, kappa, Q, T");
  f.number(diag, "--axis-min", "axis_min", "first axis value");
  f.number(diag, "--axis-max", "axis_max", "last axis value");
  f.integer(diag, "--axis-n", "axis_n", "axis values (default 41)");
  f.integer(diag, "--nu-n", "nu_n", "filling grid points (default 81)");
  f.number(diag, "--mu-min", "mu_min", "lower end of each column's mu scan");
  f.number(diag, "--mu-max", "mu_max", "upper end of each column's mu scan");
  f.integer(diag, "--n-mu", "n_mu", "mu scan points per column (default 81)");
  f.toggle(diag, "--q-fixed", "q_fixed", "luttinger: fix Q = tQ at every boundary");
  f.toggle(diag, "--n-side", "n_side", "with --q-fixed, take tQ from the N side");
  f.integer(diag, "--workers", "workers", "parallel columns (default CDWMF_WORKERS or all cores)");
  f.toggle(diag, "--resume", "resume", "reuse column files written for the same configuration");
  f.text(diag, "--out", "out", "output directory (default ./diagram)");

  CLI::App* fixq = app.add_subcommand("fixq", "iterate Q = tQ at fixed mu (luttinger); JSON trace");
  model_flags(fixq, f);
  f.text(fixq, "--branch", "branch", "CDW or N (default CDW)");
  f.number(fixq, "--tol", "tol", "stop when successive Q differ by less (default 1e-8)");
  f.integer(fixq, "--max-steps", "max_steps", "iteration cap (default 200)");
  f.text(fixq, "--out", "out", "JSON file, stdout when omitted");

  CLI::App* check = app.add_subcommand("selfcheck", "property checks at canned parameter sets");
  f.text(check, "--out", "out", "also write the report as JSON");

  CLI::App* render = app.add_subcommand("render", "SVG from a diagram JSON");
  f.text(render, "--in", "in", "diagram.json");
  f.text(render, "--out", "out", "SVG file, stdout when omitted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_invalid;
  }

  try {
    const json c = f.merged();
    if (point->parsed()) return run_point(c);
    if (scan->parsed()) return run_scan(c);
    if (diag->parsed()) return run_diagram(c);
    if (fixq->parsed()) return run_fixq(c);
    if (check->parsed()) return run_selfcheck(c);
    if (render->parsed()) return run_render(c);
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid parameters: " << e.what() << "\n";
    return exit_invalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_not_converged;
  }
  return exit_invalid;
}
