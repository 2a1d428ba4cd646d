#include "cdwmf/luttinger.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <tuple>

#include "cdwmf/hf_kernel.hpp"

namespace cdwmf {

namespace {

constexpr double pi = std::numbers::pi;
constexpr double sqrt2 = std::numbers::sqrt2;

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(10);
  os << x;
  return os.str();
}

}  // namespace

void LuttParams::validate() const {
  if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("t must be positive");
  if (!(std::abs(t_prime) < 0.5 * t)) {
    throw std::invalid_argument("t' must satisfy -t/2 < t' < t/2");
  }
  if (!(V >= 0.0) || !std::isfinite(V)) throw std::invalid_argument("V must be nonnegative");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be positive");
  if (!(kappa > 0.0 && kappa <= 1.0)) {
    throw std::invalid_argument("kappa must lie in (0, 1], got " + fmt(kappa));
  }
  if (antinodal_count < 4) throw std::invalid_argument("antinodal_count must be >= 4");
  const double lo = (1.0 - kappa) * pi / 2.0, hi = (1.0 + kappa) * pi / 2.0;
  if (!(Q > lo && Q < hi)) {
    throw std::invalid_argument("Q must satisfy (1-kappa)pi/2 < Q < (1+kappa)pi/2, got Q/pi = " +
                                fmt(Q / pi));
  }
  const double denom = 2.0 * pi * (t + 2.0 * t_prime * std::cos(Q));
  const double ratio = V * (1.0 - kappa) * std::sin(Q) / denom;
  if (!(denom > 0.0) || !(ratio >= 0.0 && ratio < 1.0)) {
    throw std::invalid_argument(
        "coupling clause violated: need 0 <= V(1-kappa)sin(Q)/(2pi[t+2t'cos(Q)]) < 1, got " +
        fmt(ratio));
  }
}

bool LuttParams::q_in_warning_zone() const { return std::abs(Q - pi / 2.0) < 1e-9; }

DerivedCouplings derived_couplings(const LuttParams& p) {
  p.validate();
  DerivedCouplings d;
  const double sQ = std::sin(p.Q), cQ = std::cos(p.Q);
  const double hop = p.t + 2.0 * p.t_prime * cQ;
  d.g_eff = p.V * p.V * (1.0 - p.kappa) / (sQ * pi * (hop + p.V / pi * (1.0 - p.kappa) * sQ));
  d.g_a = 2.0 * p.V - d.g_eff;
  d.v_F = 2.0 * sqrt2 * sQ * hop;
  return d;
}

NodalState solve_tQ(const LuttParams& p, double mu, double nu_a) {
  const DerivedCouplings d = derived_couplings(p);
  const double k = p.kappa, V = p.V, Q = p.Q;
  const double cQ = std::cos(Q);
  // nu = A + B tQ and C = Cc + Cb tQ
  const double A = 0.5 - (1.0 - k) + k * k * (nu_a - 0.5);
  const double B = 2.0 * (1.0 - k) / pi;
  const double Cc = -(1.0 - k) * cQ + 0.5 * (1.0 - k) * (1.0 - k);
  const double Cb = 2.0 * (1.0 - k) * cQ / pi;
  const double a = sqrt2 * d.v_F + 2.0 * V * B - 2.0 * V * Cb * cQ;
  const double c = -sqrt2 * d.v_F * Q + 2.0 * V * A - 4.0 * p.t * cQ -
                   4.0 * p.t_prime * cQ * cQ - 2.0 * V * Cc * cQ;
  if (std::abs(a) < 1e-12 * (1.0 + std::abs(d.v_F) + V)) {
    throw DegenerateGeometry("nodal Fermi point equation is degenerate (vanishing tQ coefficient)");
  }
  NodalState s;
  s.mu = mu;
  s.tQ = (mu - c) / a;
  s.nu = A + B * s.tQ;
  s.C = Cc + Cb * s.tQ;
  s.mu_a = mu - 2.0 * V * s.nu - 4.0 * p.t_prime + d.g_a * nu_a * k * k;
  s.tQ_in_window = s.tQ > (1.0 - k) * pi / 2.0 && s.tQ < (1.0 + k) * pi / 2.0;
  return s;
}

EnergyConstants energy_constants(const LuttParams& p, double mu, double tQ, double nu_a, double nu) {
  const DerivedCouplings d = derived_couplings(p);
  const double k = p.kappa, V = p.V, Q = p.Q, t = p.t, tp = p.t_prime;
  const double cQ = std::cos(Q);
  const double m = 1.0 - k;
  const double C = m * cQ * (2.0 * tQ / pi - 1.0) + 0.5 * m * m;
  EnergyConstants e;
  e.e_kin = 0.5 * m * m * (-4.0 * (t + tp) + (t + 2.0 * tp) * m * m * pi * pi / 3.0) +
            m * (2.0 * tQ / pi - 1.0 + k) *
                (sqrt2 * d.v_F * (tQ / 2.0 - Q + pi * m / 4.0) - 4.0 * t * cQ - 4.0 * tp * cQ * cQ);
  e.e_1 = (mu - 2.0 * V * nu) * nu_a * k * k + 0.5 * d.g_a * nu_a * nu_a * k * k * k * k;
  e.e_int = -mu * nu + V * nu * nu + V * std::pow(k * m * cQ, 2) - V * C * C;
  return e;
}

std::shared_ptr<const AntinodalGrid> antinodal_bands(const LuttParams& p) {
  static std::mutex mutex;
  using Key = std::tuple<int, double, double, double, int>;
  static std::map<Key, std::shared_ptr<const AntinodalGrid>> cache;
  const Key key{p.antinodal_count, p.kappa, p.t, p.t_prime, int(p.band)};
  {
    std::lock_guard<std::mutex> lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto g = std::make_shared<AntinodalGrid>();
  const AntinodalSize size = antinodal_size_for_count(p.antinodal_count, p.kappa);
  g->L = size.L;
  g->per_axis = size.per_axis;
  g->grid = build_antinodal_grid(size.L, p.kappa);
  g->weight = g->grid.weight;
  const std::size_t n = g->grid.size();
  g->e_plus.resize(n);
  g->e_minus.resize(n);
  const double dk = 2.0 * pi / size.L;
  std::map<std::pair<double, double>, double> groups;
  for (std::size_t i = 0; i < n; ++i) {
    if (p.band == BandChoice::taylor) {
      // rotated coordinates keep symmetry-related points bit-identical
      const double kp = dk * (g->grid.labels[i][0] + 0.5);
      const double km = dk * (g->grid.labels[i][1] + 0.5);
      const double hyper = 2.0 * p.t * kp * km;
      const double radial = 2.0 * p.t_prime * (kp * kp + km * km);
      g->e_plus[i] = hyper - radial;
      g->e_minus[i] = -hyper - radial;
    } else {
      const Momentum& k = g->grid.points[i];
      g->e_plus[i] = band_antinodal(Flavor::plus, k, p.t, p.t_prime, BandChoice::full);
      g->e_minus[i] = band_antinodal(Flavor::minus, k, p.t, p.t_prime, BandChoice::full);
    }
    groups[{g->e_plus[i], g->e_minus[i]}] += 1.0;
  }
  for (const auto& [e, mult] : groups) {
    g->g_plus.push_back(e.first);
    g->g_minus.push_back(e.second);
    g->g_mult.push_back(mult);
  }
  std::lock_guard<std::mutex> lock(mutex);
  if (cache.size() > 32) cache.clear();
  cache.emplace(key, g);
  return g;
}

LuttingerModel::LuttingerModel(const LuttParams& params) : params_(params) {
  params_.validate();
  couplings_ = derived_couplings(params_);
  grid_ = antinodal_bands(params_);
}

LuttingerModel LuttingerModel::with_Q(double Q) const {
  LuttParams p = params_;
  p.Q = Q;
  return LuttingerModel(p);
}

LuttingerModel LuttingerModel::with_beta(double beta) const {
  LuttParams p = params_;
  p.beta = beta;
  return LuttingerModel(p);
}

Block2 LuttingerModel::assemble_block(std::size_t i, double mu_a, const AntinodalAnsatz& a) const {
  Block2 b;
  b.a_plus = grid_->e_plus[i] + a.q0 + a.q1 - mu_a;
  b.a_minus = grid_->e_minus[i] + a.q0 - a.q1 - mu_a;
  b.b = a.delta;
  return b;
}

LuttingerModel::Sums LuttingerModel::evaluate(double mu_a, const AntinodalAnsatz& a,
                                              bool with_energy) const {
  const double beta = params_.beta;
  const AntinodalGrid& G = *grid_;
  const double shift = a.q0 - mu_a;
  const double d2 = a.delta * a.delta;
  double n0 = 0.0, n1 = 0.0, nt0 = 0.0, e = 0.0;
  for (std::size_t i = 0; i < G.g_mult.size(); ++i) {
    const double w = G.g_mult[i];
    const double ap = G.g_plus[i] + shift + a.q1;
    const double am = G.g_minus[i] + shift - a.q1;
    const double a0 = 0.5 * (ap + am);
    const double a1 = 0.5 * (ap - am);
    const double W = std::sqrt(a1 * a1 + d2);
    const double fp = detail::fermi_fast(a0 + W, beta);
    const double fm = detail::fermi_fast(a0 - W, beta);
    const double r = detail::split_ratio(fp, fm, W);
    n0 += w * (fp + fm);
    n1 += w * 2.0 * a1 * r;
    nt0 += w * a.delta * r;
    if (with_energy) {
      e -= w * (detail::grand_term_fast(a0 + W, beta) + detail::grand_term_fast(a0 - W, beta));
    }
  }
  Sums s;
  s.op.n0 = n0 * G.weight;
  s.op.n1 = n1 * G.weight;
  s.op.nt0 = nt0 * G.weight;
  s.e_hfg = e * G.weight;
  return s;
}

AntinodalOrder LuttingerModel::order_parameters(double mu_a, const AntinodalAnsatz& a) const {
  return evaluate(mu_a, a, false).op;
}

double LuttingerModel::omega_antinodal(double mu_a, const AntinodalAnsatz& a) const {
  const Sums s = evaluate(mu_a, a, true);
  const double ga = couplings_.g_a;
  const AntinodalOrder& o = s.op;
  return s.e_hfg - a.q0 * o.n0 - a.q1 * o.n1 - 2.0 * a.delta * o.nt0 +
         0.5 * ga * (o.n0 * o.n0 - o.n1 * o.n1 - 4.0 * o.nt0 * o.nt0);
}

double LuttingerModel::antinodal_filling(double mu_a, const AntinodalAnsatz& a) const {
  return order_parameters(mu_a, a).n0 / kappa2();
}

namespace {

std::vector<double> delta_seeds(double scale, bool cdw, const LuttSolveOptions& o) {
  std::vector<double> out{cdw ? 0.5 * scale : 0.0};
  if (!cdw) return out;
  std::mt19937 rng(o.rng_seed);
  std::uniform_real_distribution<double> dist(0.05 * scale, 1.5 * scale);
  for (int i = 0; i < o.extra_seeds; ++i) out.push_back(dist(rng));
  return out;
}

SolveStatus from_min(MinStatus s) {
  return s == MinStatus::converged   ? SolveStatus::converged
         : s == MinStatus::collapsed ? SolveStatus::collapsed
                                     : SolveStatus::not_converged;
}

}  // namespace

MfSolution LuttingerModel::solve_inner(double mu_a, Branch branch,
                                       const std::optional<AntinodalAnsatz>& seed,
                                       const LuttSolveOptions& options) const {
  const double ga = couplings_.g_a;
  const double k2 = kappa2();
  const bool cdw = branch == Branch::CDW;
  auto to_ansatz = [](const std::vector<double>& x) { return AntinodalAnsatz{x[0], x[1], x[2]}; };
  ObjectiveFn objective = [&](const std::vector<double>& x) {
    return omega_antinodal(mu_a, to_ansatz(x));
  };
  ResidualFn residuals = [&](const std::vector<double>& x) {
    const AntinodalOrder o = order_parameters(mu_a, to_ansatz(x));
    return std::vector<double>{x[0] - ga * o.n0, x[1] + ga * o.n1, x[2] + 2.0 * ga * o.nt0};
  };
  MinimizeSpec spec;
  spec.dimension = 3;
  spec.frozen = {false, false, !cdw};
  spec.pinned = 0;
  spec.pinned_lo = std::min(0.0, ga * k2);
  spec.pinned_hi = std::max(0.0, ga * k2);
  spec.tracked = cdw ? 2 : -1;
  spec.residual_tol = options.residual_tol;
  spec.objective_tol = options.objective_tol;
  spec.max_iterations = options.max_iterations;
  spec.polish = options.polish;
  const double scale = std::max(0.0, 0.5 * ga * k2);
  if (seed) {
    double d = cdw ? std::abs(seed->delta) : 0.0;
    if (cdw && d < spec.collapse_threshold) d = 0.5 * scale;
    spec.seeds.push_back({seed->q0, seed->q1, d});
  }
  if (!seed || options.multistart) {
    for (double d : delta_seeds(scale, cdw, options)) spec.seeds.push_back({0.5 * ga * k2, 0.0, d});
  }
  const MinimizeResult res = minimize(objective, residuals, spec);
  MfSolution sol;
  sol.branch = branch;
  std::vector<double> x = res.x;
  if (res.status == MinStatus::collapsed || !cdw) x[2] = 0.0;
  x[2] = std::abs(x[2]);
  sol.ansatz = VariationalAnsatz::restricted_form(x[0], x[1], x[2]);
  sol.omega_per_site = objective(x);
  sol.nu = antinodal_filling(mu_a, to_ansatz(x));
  sol.gap = 2.0 * x[2];
  sol.residual_norm = res.residual_norm;
  sol.status = from_min(res.status);
  sol.converged = sol.status == SolveStatus::converged;
  for (const auto& s : res.seeds) sol.iterations += s.iterations;
  return sol;
}

LuttSolution LuttingerModel::assemble(double mu, Branch branch, const AntinodalAnsatz& a,
                                      double nu_a) const {
  LuttSolution s;
  s.branch = branch;
  s.ansatz = a;
  s.nu_a = nu_a;
  s.couplings = couplings_;
  s.nodal = solve_tQ(params_, mu, nu_a);
  s.constants = energy_constants(params_, mu, s.nodal.tQ, nu_a, s.nodal.nu);
  s.omega_antinodal_per_site = omega_antinodal(s.nodal.mu_a, a);
  s.omega_total_per_site = s.omega_antinodal_per_site + s.constants.total();
  s.nu_total = s.nodal.nu;
  s.gap = 2.0 * std::abs(a.delta);
  return s;
}

LuttSolution LuttingerModel::self_consistent_point(double mu, Branch branch,
                                                   const LuttSolveOptions& options) const {
  const bool cdw = branch == Branch::CDW;
  const double ga = couplings_.g_a;
  const double k2 = kappa2();

  if (options.loop == OuterLoop::damped) {
    double nu_a = options.nu_a_seed.value_or(0.5);
    std::optional<AntinodalAnsatz> warm = options.seed;
    LuttSolveOptions inner = options;
    double alpha = options.outer_alpha;
    double prev_diff = 0.0;
    MfSolution last;
    int outer = 0, iterations = 0;
    double diff = 1.0;
    for (outer = 1; outer <= options.max_outer; ++outer) {
      const NodalState ns = solve_tQ(params_, mu, nu_a);
      last = solve_inner(ns.mu_a, branch, warm, inner);
      iterations += last.iterations;
      inner.multistart = false;
      if (last.status == SolveStatus::collapsed) break;
      warm = AntinodalAnsatz{last.ansatz.q[0], last.ansatz.q[1], last.ansatz.m[0]};
      diff = last.nu - nu_a;
      if (std::abs(diff) < options.nu_a_tol) break;
      if (outer > 1 && diff * prev_diff < 0.0) alpha *= 0.5;
      prev_diff = diff;
      nu_a += alpha * diff;
    }
    const AntinodalAnsatz a{last.ansatz.q[0], last.ansatz.q[1], last.ansatz.m[0]};
    LuttSolution s = assemble(mu, branch, a, nu_a);
    s.status = last.status;
    if (s.status == SolveStatus::converged && !(std::abs(diff) < options.nu_a_tol)) {
      s.status = SolveStatus::not_converged;
    }
    s.converged = s.status == SolveStatus::converged;
    s.residual_norm = last.residual_norm;
    s.nu_a_change = std::abs(diff);
    s.outer_iterations = std::min(outer, options.max_outer);
    s.iterations = iterations;
    return s;
  }

  // Joint form: the blocks depend on q0 - mu_a only, and mu_a is affine in
  // nu_a = n0 / kappa^2, so s = q0 - mu_a obeys s = -alpha0 + c n0.
  const double alpha0 = solve_tQ(params_, mu, 0.0).mu_a;
  const double alpha1 = solve_tQ(params_, mu, 1.0).mu_a - alpha0;
  const double c = ga - alpha1 / k2;
  auto split = [&](const std::vector<double>& x, double& nu_a) {
    const AntinodalAnsatz probe{x[0], x[1], x[2]};  // q0 - mu_a stored in slot 0
    const AntinodalOrder o = order_parameters(0.0, probe);
    nu_a = o.n0 / k2;
    return o;
  };
  ObjectiveFn objective = [&](const std::vector<double>& x) {
    double nu_a = 0.0;
    const AntinodalOrder o = split(x, nu_a);
    (void)o;
    const NodalState ns = solve_tQ(params_, mu, nu_a);
    const AntinodalAnsatz a{x[0] + ns.mu_a, x[1], x[2]};
    return assemble(mu, branch, a, nu_a).omega_total_per_site;
  };
  ResidualFn residuals = [&](const std::vector<double>& x) {
    double nu_a = 0.0;
    const AntinodalOrder o = split(x, nu_a);
    return std::vector<double>{x[0] + alpha0 - c * o.n0, x[1] + ga * o.n1,
                               x[2] + 2.0 * ga * o.nt0};
  };
  MinimizeSpec spec;
  spec.dimension = 3;
  spec.frozen = {false, false, !cdw};
  spec.pinned = 0;
  spec.pinned_lo = -alpha0 + std::min(0.0, c * k2);
  spec.pinned_hi = -alpha0 + std::max(0.0, c * k2);
  spec.tracked = cdw ? 2 : -1;
  spec.residual_tol = options.residual_tol;
  spec.objective_tol = options.objective_tol;
  spec.max_iterations = options.max_iterations;
  spec.polish = false;
  const double scale = std::max(0.0, 0.5 * ga * k2);
  const double nu_a0 = options.nu_a_seed.value_or(0.5);
  const double s0 = -alpha0 + c * k2 * nu_a0;
  if (options.seed) {
    double d = cdw ? std::abs(options.seed->delta) : 0.0;
    if (cdw && d < spec.collapse_threshold) d = 0.5 * scale;
    const double mu_a = solve_tQ(params_, mu, nu_a0).mu_a;
    spec.seeds.push_back({options.seed->q0 - mu_a, options.seed->q1, d});
  }
  if (!options.seed || options.multistart) {
    for (double d : delta_seeds(scale, cdw, options)) spec.seeds.push_back({s0, 0.0, d});
  }

  auto finish = [&](const MinimizeResult& res) {
    std::vector<double> x = res.x;
    if (res.status == MinStatus::collapsed || !cdw) x[2] = 0.0;
    x[2] = std::abs(x[2]);
    double nu_a = 0.0;
    split(x, nu_a);
    const NodalState ns = solve_tQ(params_, mu, nu_a);
    LuttSolution s = assemble(mu, branch, {x[0] + ns.mu_a, x[1], x[2]}, nu_a);
    s.status = from_min(res.status);
    s.converged = s.status == SolveStatus::converged;
    s.residual_norm = res.residual_norm;
    for (const auto& sd : res.seeds) s.iterations += sd.iterations;
    s.outer_iterations = 1;
    s.nu_a_change = std::abs(antinodal_filling(s.nodal.mu_a, s.ansatz) - nu_a);
    return s;
  };

  LuttSolution best = finish(minimize(objective, residuals, spec));
  if (!options.polish || !best.converged) return best;
  // Minimality check of the antinodal problem at the converged mu_a.
  LuttSolveOptions inner = options;
  inner.multistart = false;
  const MfSolution pol = solve_inner(best.nodal.mu_a, branch, best.ansatz, inner);
  const double moved = std::max({std::abs(pol.ansatz.q[0] - best.ansatz.q0),
                                 std::abs(pol.ansatz.q[1] - best.ansatz.q1),
                                 std::abs(pol.ansatz.m[0] - best.ansatz.delta)});
  if (pol.converged && moved > 1e-6) {
    MinimizeSpec again = spec;
    again.seeds = {{pol.ansatz.q[0] - best.nodal.mu_a, pol.ansatz.q[1], pol.ansatz.m[0]}};
    LuttSolution retry = finish(minimize(objective, residuals, again));
    if (retry.converged && retry.omega_total_per_site < best.omega_total_per_site) best = retry;
  }
  return best;
}

double omega_antinodal(const LuttParams& p, double mu_a, const AntinodalAnsatz& a) {
  return LuttingerModel(p).omega_antinodal(mu_a, a);
}

LuttSolution self_consistent_point(const LuttParams& p, double mu, Branch branch,
                                   const LuttSolveOptions& options) {
  return LuttingerModel(p).self_consistent_point(mu, branch, options);
}

FixQResult fix_Q(const LuttParams& p, const std::function<double(double Q)>& tq_of_Q, double Q0,
                 double tol, int max_steps) {
  FixQResult r;
  const double lo = (1.0 - p.kappa) * pi / 2.0, hi = (1.0 + p.kappa) * pi / 2.0;
  if (!(Q0 > lo && Q0 < hi)) {
    throw std::invalid_argument("fix_Q: starting Q outside the allowed window");
  }
  double Q = Q0;
  for (int step = 1; step <= max_steps; ++step) {
    double next = 0.0;
    try {
      next = tq_of_Q(Q);
    } catch (const std::exception& e) {
      r.failure = std::string("tQ evaluation failed: ") + e.what();
      r.Q = Q;
      r.iterations = step;
      return r;
    }
    r.trace.push_back({Q, next});
    r.iterations = step;
    if (!std::isfinite(next) || !(next > lo && next < hi)) {
      r.failure = "iteration left the allowed Q window at Q/pi = " + fmt(next / pi);
      r.Q = Q;
      return r;
    }
    if (std::abs(next - Q) < tol) {
      r.Q = next;
      r.converged = true;
      return r;
    }
    Q = next;
  }
  r.Q = Q;
  r.failure = "no convergence within " + std::to_string(max_steps) + " steps";
  return r;
}

FixQResult fix_Q(const LuttParams& p, double mu, Branch branch, double Q0, double tol,
                 int max_steps) {
  std::optional<AntinodalAnsatz> warm;
  std::optional<double> warm_nu_a;
  auto map = [&](double Q) {
    LuttParams pq = p;
    pq.Q = Q;
    LuttSolveOptions o;
    o.seed = warm;
    o.nu_a_seed = warm_nu_a;
    const LuttSolution s = LuttingerModel(pq).self_consistent_point(mu, branch, o);
    if (s.status == SolveStatus::not_converged) {
      throw std::runtime_error("self-consistent point did not converge");
    }
    warm = s.ansatz;
    warm_nu_a = s.nu_a;
    return s.nodal.tQ;
  };
  return fix_Q(p, map, Q0, tol, max_steps);
}

}  // namespace cdwmf
