#include "cdwmf/ttpv.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>

namespace cdwmf {

namespace {

constexpr double pi = std::numbers::pi;

int canonical_index(int n) { return n >= 0 ? n : -n - 1; }

}  // namespace

void TtpvParams::validate() const {
  if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("t must be positive");
  if (!(std::abs(t_prime) < 0.5 * t)) {
    throw std::invalid_argument("t' must satisfy -t/2 < t' < t/2");
  }
  if (!(V >= 0.0) || !std::isfinite(V)) throw std::invalid_argument("V must be nonnegative");
  if (!std::isfinite(mu)) throw std::invalid_argument("mu must be finite");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be positive");
  if (L < 2 || L % 2 != 0) throw std::invalid_argument("L must be a positive even integer");
}

VariationalAnsatz VariationalAnsatz::restricted_form(double q0, double q1, double delta) {
  VariationalAnsatz a;
  a.q[0] = q0;
  a.q[1] = q1;
  a.m[0] = delta;
  a.restricted = true;
  return a;
}

double VariationalAnsatz::restriction_violation() const {
  double v = std::max({std::abs(q[2]), std::abs(q[3]), std::abs(q[4])});
  for (int j = 1; j < 5; ++j) v = std::max(v, std::abs(m[j]));
  return v;
}

std::string to_string(Branch b) { return b == Branch::N ? "N" : "CDW"; }

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::collapsed: return "collapsed";
    case SolveStatus::not_converged: return "not_converged";
  }
  return "unknown";
}

std::shared_ptr<const TtpvBands> ttpv_bands(int L, double t, double t_prime) {
  static std::mutex mutex;
  static std::map<std::tuple<int, double, double>, std::shared_ptr<const TtpvBands>> cache;
  const auto key = std::make_tuple(L, t, t_prime);
  {
    std::lock_guard<std::mutex> lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto bands = std::make_shared<TtpvBands>();
  bands->L = L;
  bands->t = t;
  bands->t_prime = t_prime;
  bands->half = build_half_bz(L);
  bands->weight = bands->half.weight;
  const std::size_t n = bands->half.size();
  bands->eps.resize(n);
  bands->eps_q.resize(n);
  bands->u.resize(n);
  const double dk = 2.0 * pi / L;
  std::map<std::pair<int, int>, double> groups;
  for (std::size_t i = 0; i < n; ++i) {
    const Momentum& k = bands->half.points[i];
    bands->eps[i] = eps(k, t, t_prime);
    bands->eps_q[i] = eps(shift_by_nesting(k), t, t_prime);
    bands->u[i] = vertex_basis(k);
    int j1 = canonical_index(bands->half.labels[i][0]);
    int j2 = canonical_index(bands->half.labels[i][1]);
    if (j1 > j2) std::swap(j1, j2);
    groups[{j1, j2}] += 1.0;
  }
  for (const auto& [key_j, mult] : groups) {
    const double c1 = std::cos(dk * (key_j.first + 0.5));
    const double c2 = std::cos(dk * (key_j.second + 0.5));
    const double s = c1 + c2;
    const double p = c1 * c2;
    bands->g_eps.push_back(-2.0 * t * s - 4.0 * t_prime * p);
    bands->g_eps_q.push_back(2.0 * t * s - 4.0 * t_prime * p);
    bands->g_u1.push_back(s);
    bands->g_mult.push_back(mult);
  }
  std::lock_guard<std::mutex> lock(mutex);
  if (cache.size() > 32) cache.clear();
  cache.emplace(key, bands);
  return bands;
}

TtpvModel::TtpvModel(const TtpvParams& params) : params_(params) {
  params_.validate();
  bands_ = ttpv_bands(params_.L, params_.t, params_.t_prime);
}

TtpvModel TtpvModel::with_mu(double mu) const {
  TtpvModel m = *this;
  m.params_.mu = mu;
  m.params_.validate();
  return m;
}

TtpvModel TtpvModel::with_beta(double beta) const {
  TtpvModel m = *this;
  m.params_.beta = beta;
  m.params_.validate();
  return m;
}

Block2 TtpvModel::assemble_block(const Momentum& k, const VariationalAnsatz& a) const {
  const auto u = vertex_basis(k);
  const double e = eps(k, params_.t, params_.t_prime);
  const double eq = eps(shift_by_nesting(k), params_.t, params_.t_prime);
  double qu = 0.0, mu_im = 0.0;
  for (int j = 0; j < 4; ++j) {
    qu += a.q[j + 1] * u[j];
    mu_im += a.m[j + 1] * u[j];
  }
  Block2 b;
  b.a_plus = e + a.q[0] - params_.mu + qu;
  b.a_minus = eq + a.q[0] - params_.mu - qu;
  b.b = {a.m[0], mu_im};
  return b;
}

TtpvModel::Sums TtpvModel::evaluate(const VariationalAnsatz& a, bool with_energy) const {
  const double beta = params_.beta;
  const double shift = a.q[0] - params_.mu;
  const TtpvBands& B = *bands_;
  Sums s;
  const bool restricted = a.restriction_violation() == 0.0;
  if (restricted) {
    const double q1 = a.q[1];
    const double d = a.m[0];
    const double d2 = d * d;
    double n0 = 0.0, n1 = 0.0, nt0 = 0.0, e = 0.0;
    for (std::size_t g = 0; g < B.g_mult.size(); ++g) {
      const double w = B.g_mult[g];
      const double qu = q1 * B.g_u1[g];
      const double ap = B.g_eps[g] + shift + qu;
      const double am = B.g_eps_q[g] + shift - qu;
      const double a0 = 0.5 * (ap + am);
      const double a1 = 0.5 * (ap - am);
      const double W = std::sqrt(a1 * a1 + d2);
      const double fp = detail::fermi_fast(a0 + W, beta);
      const double fm = detail::fermi_fast(a0 - W, beta);
      const double r = detail::split_ratio(fp, fm, W);
      n0 += w * (fp + fm);
      n1 += w * 2.0 * a1 * r * B.g_u1[g];
      nt0 += w * 2.0 * d * r;
      if (with_energy) {
        e -= w * (detail::grand_term_fast(a0 + W, beta) + detail::grand_term_fast(a0 - W, beta));
      }
    }
    s.op.n[0] = n0 * B.weight;
    s.op.n[1] = n1 * B.weight;
    s.op.n_tilde[0] = nt0 * B.weight;
    s.e_hfg = e * B.weight;
    return s;
  }
  std::array<double, 5> n{}, nt{};
  double e = 0.0;
  for (std::size_t i = 0; i < B.eps.size(); ++i) {
    const auto& u = B.u[i];
    double qu = 0.0, mu_im = 0.0;
    for (int j = 0; j < 4; ++j) {
      qu += a.q[j + 1] * u[j];
      mu_im += a.m[j + 1] * u[j];
    }
    const double ap = B.eps[i] + shift + qu;
    const double am = B.eps_q[i] + shift - qu;
    const double a0 = 0.5 * (ap + am);
    const double a1 = 0.5 * (ap - am);
    const double W = std::sqrt(a1 * a1 + a.m[0] * a.m[0] + mu_im * mu_im);
    const double fp = detail::fermi_fast(a0 + W, beta);
    const double fm = detail::fermi_fast(a0 - W, beta);
    const double r = detail::split_ratio(fp, fm, W);
    n[0] += fp + fm;
    nt[0] += 2.0 * a.m[0] * r;
    for (int j = 0; j < 4; ++j) {
      n[j + 1] += 2.0 * a1 * r * u[j];
      nt[j + 1] += 2.0 * mu_im * r * u[j];
    }
    if (with_energy) {
      e -= detail::grand_term_fast(a0 + W, beta) + detail::grand_term_fast(a0 - W, beta);
    }
  }
  for (int j = 0; j < 5; ++j) {
    s.op.n[j] = n[j] * B.weight;
    s.op.n_tilde[j] = nt[j] * B.weight;
  }
  s.e_hfg = e * B.weight;
  return s;
}

double TtpvModel::omega_from(const VariationalAnsatz& a, const Sums& s) const {
  const auto& n = s.op.n;
  const auto& nt = s.op.n_tilde;
  double counter = 0.0, quad = 0.0;
  for (int j = 0; j < 5; ++j) counter += a.q[j] * n[j] + a.m[j] * nt[j];
  for (int j = 1; j < 5; ++j) quad += n[j] * n[j] + nt[j] * nt[j];
  return s.e_hfg - counter + params_.V * (n[0] * n[0] - nt[0] * nt[0] - 0.25 * quad);
}

OrderParameters TtpvModel::order_parameters(const VariationalAnsatz& a) const {
  return evaluate(a, false).op;
}

double TtpvModel::omega_hf(const VariationalAnsatz& a) const {
  return omega_from(a, evaluate(a, true));
}

std::array<double, 10> TtpvModel::gap_residuals(const VariationalAnsatz& a) const {
  const OrderParameters op = order_parameters(a);
  const double V = params_.V;
  std::array<double, 10> r{};
  r[0] = a.q[0] - 2.0 * V * op.n[0];
  r[5] = a.m[0] + 2.0 * V * op.n_tilde[0];
  for (int j = 1; j < 5; ++j) {
    r[j] = a.q[j] + 0.5 * V * op.n[j];
    r[5 + j] = a.m[j] + 0.5 * V * op.n_tilde[j];
  }
  return r;
}

double TtpvModel::filling(const VariationalAnsatz& a) const { return order_parameters(a).n[0]; }

MfSolution TtpvModel::solve_branch(Branch branch, const std::optional<VariationalAnsatz>& seed,
                                   const SolveOptions& options) const {
  const double V = params_.V;
  const bool cdw = branch == Branch::CDW;
  auto to_ansatz = [](const std::vector<double>& x) {
    return VariationalAnsatz::restricted_form(x[0], x[1], x[2]);
  };
  ObjectiveFn objective = [&](const std::vector<double>& x) { return omega_hf(to_ansatz(x)); };
  ResidualFn residuals = [&](const std::vector<double>& x) {
    const OrderParameters op = order_parameters(to_ansatz(x));
    return std::vector<double>{x[0] - 2.0 * V * op.n[0], x[1] + 0.5 * V * op.n[1],
                               x[2] + 2.0 * V * op.n_tilde[0]};
  };

  MinimizeSpec spec;
  spec.dimension = 3;
  spec.frozen = {false, false, !cdw};
  spec.pinned = 0;
  spec.pinned_lo = 0.0;
  spec.pinned_hi = 2.0 * V;
  spec.tracked = cdw ? 2 : -1;
  spec.residual_tol = options.residual_tol;
  spec.objective_tol = options.objective_tol;
  spec.max_iterations = options.max_iterations;
  spec.polish = options.polish;

  const double delta0 = cdw ? 0.5 * V : 0.0;
  if (seed) {
    double d = cdw ? std::abs(seed->m[0]) : 0.0;
    if (cdw && d < spec.collapse_threshold) d = delta0;
    spec.seeds.push_back({seed->q[0], seed->q[1], d});
  }
  if (!seed || options.multistart) {
    spec.seeds.push_back({V, -0.125 * V, delta0});
    if (cdw) {
      std::mt19937 rng(options.rng_seed);
      std::uniform_real_distribution<double> dist(0.05 * V, 1.5 * V);
      for (int i = 0; i < options.extra_seeds; ++i) spec.seeds.push_back({V, -0.125 * V, dist(rng)});
    }
  }

  const MinimizeResult res = minimize(objective, residuals, spec);
  MfSolution sol;
  sol.branch = branch;
  std::vector<double> x = res.x;
  if (res.status == MinStatus::collapsed || !cdw) x[2] = 0.0;
  x[2] = std::abs(x[2]);
  sol.ansatz = to_ansatz(x);
  sol.omega_per_site = omega_hf(sol.ansatz);
  sol.nu = filling(sol.ansatz);
  sol.gap = 2.0 * std::abs(x[2]);
  sol.residual_norm = res.residual_norm;
  sol.status = res.status == MinStatus::converged   ? SolveStatus::converged
               : res.status == MinStatus::collapsed ? SolveStatus::collapsed
                                                    : SolveStatus::not_converged;
  sol.converged = sol.status == SolveStatus::converged;
  for (const auto& s : res.seeds) sol.iterations += s.iterations;
  return sol;
}

MinimizeResult TtpvModel::minimize_full(const std::vector<VariationalAnsatz>& seeds,
                                        const SolveOptions& options) const {
  const double V = params_.V;
  auto to_ansatz = [](const std::vector<double>& x) {
    VariationalAnsatz a;
    a.restricted = false;
    for (int j = 0; j < 5; ++j) {
      a.q[j] = x[j];
      a.m[j] = x[5 + j];
    }
    return a;
  };
  ObjectiveFn objective = [&](const std::vector<double>& x) { return omega_hf(to_ansatz(x)); };
  ResidualFn residuals = [&](const std::vector<double>& x) {
    const auto r = gap_residuals(to_ansatz(x));
    return std::vector<double>(r.begin(), r.end());
  };
  MinimizeSpec spec;
  spec.dimension = 10;
  spec.pinned = 0;
  spec.pinned_lo = 0.0;
  spec.pinned_hi = 2.0 * V;
  spec.residual_tol = options.residual_tol;
  spec.objective_tol = options.objective_tol;
  spec.max_iterations = options.max_iterations;
  spec.polish = options.polish;
  spec.polish_max_evaluations = 1500;
  for (const auto& s : seeds) {
    std::vector<double> x(10);
    for (int j = 0; j < 5; ++j) {
      x[j] = s.q[j];
      x[5 + j] = s.m[j];
    }
    spec.seeds.push_back(x);
  }
  MinimizeResult res = minimize(objective, residuals, spec);
  // m -> -m is a symmetry; report m0 >= 0.
  auto canonical = [](std::vector<double>& x) {
    if (x[5] < 0.0) {
      for (int j = 5; j < 10; ++j) x[j] = -x[j];
    }
  };
  canonical(res.x);
  for (auto& s : res.seeds) canonical(s.x);
  return res;
}

Block2 assemble_block(const Momentum& k, const TtpvParams& p, const VariationalAnsatz& a) {
  return TtpvModel(p).assemble_block(k, a);
}
OrderParameters order_parameters(const TtpvParams& p, const VariationalAnsatz& a) {
  return TtpvModel(p).order_parameters(a);
}
double omega_hf(const TtpvParams& p, const VariationalAnsatz& a) { return TtpvModel(p).omega_hf(a); }
std::array<double, 10> gap_residuals(const TtpvParams& p, const VariationalAnsatz& a) {
  return TtpvModel(p).gap_residuals(a);
}
double filling(const TtpvParams& p, const VariationalAnsatz& a) { return TtpvModel(p).filling(a); }
MfSolution solve_branch(const TtpvParams& p, Branch branch,
                        const std::optional<VariationalAnsatz>& seed, const SolveOptions& options) {
  return TtpvModel(p).solve_branch(branch, seed, options);
}

RestrictedCheckReport verify_restricted_minimum(const TtpvParams& p, const std::vector<double>& mus,
                                                double tol) {
  RestrictedCheckReport report;
  std::mt19937 rng(7331);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  for (double mu : mus) {
    TtpvParams pm = p;
    pm.mu = mu;
    const TtpvModel model(pm);
    const MfSolution cdw = model.solve_branch(Branch::CDW);
    const MfSolution nrm = model.solve_branch(Branch::N);
    const MfSolution& low =
        cdw.converged && cdw.omega_per_site < nrm.omega_per_site ? cdw : nrm;

    std::vector<VariationalAnsatz> seeds;
    for (int s = 0; s < 4; ++s) {
      VariationalAnsatz a = (s < 3 ? cdw : nrm).ansatz;
      a.restricted = false;
      if (s < 3 && a.m[0] == 0.0) a.m[0] = 0.5 * p.V;
      for (int j = 1; j < 5; ++j) {
        a.q[j] += jitter(rng) * std::max(1.0, p.V);
        a.m[j] += jitter(rng) * std::max(1.0, p.V);
      }
      seeds.push_back(a);
    }
    const MinimizeResult full = model.minimize_full(seeds);

    VariationalAnsatz ddw = nrm.ansatz;
    ddw.restricted = false;
    ddw.m[2] = 1.0;
    for (int j = 2; j < 5; ++j) ddw.q[j] = 0.01 * (j - 1);
    ddw.m[0] = 0.01;
    const MinimizeResult from_ddw = model.minimize_full({ddw});

    RestrictedCheckEntry e;
    e.mu = mu;
    for (int j = 0; j < 5; ++j) {
      e.best.q[j] = full.x[j];
      e.best.m[j] = full.x[5 + j];
    }
    e.best.restricted = false;
    e.omega_best = full.value;
    e.omega_restricted_cdw = cdw.omega_per_site;
    e.omega_restricted_n = nrm.omega_per_site;
    e.violation = e.best.restriction_violation();
    e.satisfied = full.status == MinStatus::converged && e.violation < tol &&
                  full.value >= low.omega_per_site - tol;
    e.omega_ddw_seed = from_ddw.value;
    e.ddw_below_cdw = cdw.converged && from_ddw.value < cdw.omega_per_site - 1e-10;
    report.all_satisfied = report.all_satisfied && e.satisfied && !e.ddw_below_cdw;
    report.entries.push_back(e);
  }
  return report;
}

}  // namespace cdwmf
