#include "cdwmf/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cdwmf/hf_kernel.hpp"

namespace cdwmf {

namespace {

constexpr double pi = std::numbers::pi;

std::string describe(const std::vector<std::pair<std::string, double>>& kv) {
  std::ostringstream os;
  os.precision(10);
  for (std::size_t i = 0; i < kv.size(); ++i) {
    if (i) os << " ";
    os << kv[i].first << "=" << kv[i].second;
  }
  return os.str();
}

CheckItem make(std::string suite, std::string name, double measured, double tol,
               std::string detail) {
  CheckItem c;
  c.suite = std::move(suite);
  c.name = std::move(name);
  c.measured = measured;
  c.tolerance = tol;
  c.passed = std::isfinite(measured) && measured < tol;
  c.detail = std::move(detail);
  return c;
}

struct GlobalMin {
  double omega = 0.0;
  double nu = 0.0;
  bool cdw = false;
  bool ok = false;
};

GlobalMin lowest(const TtpvParams& p) {
  TtpvModel m(p);
  const MfSolution n = m.solve_branch(Branch::N);
  const MfSolution c = m.solve_branch(Branch::CDW);
  GlobalMin g{n.omega_per_site, n.nu, false, n.converged};
  if (c.converged && c.omega_per_site < n.omega_per_site) g = {c.omega_per_site, c.nu, true, true};
  return g;
}

}  // namespace

bool CheckReport::passed() const { return failures() == 0; }

int CheckReport::failures() const {
  return int(std::count_if(items.begin(), items.end(), [](const CheckItem& c) { return !c.passed; }));
}

std::vector<CannedSet> canned_sets() {
  auto ttpv = [](double tp, double V, double mu) {
    TtpvParams p;
    p.t_prime = tp;
    p.V = V;
    p.mu = mu;
    return p;
  };
  auto lutt = [](double tp, double V, double kappa, double Q_pi) {
    LuttParams p;
    p.t_prime = tp;
    p.V = V;
    p.kappa = kappa;
    p.Q = Q_pi * pi;
    return p;
  };
  return {
      {"half-filled", ttpv(0.0, 4.0, 4.0), lutt(0.0, 4.0, 0.8, 0.45), 0.43 * pi, Branch::CDW},
      {"hole-doped", ttpv(-0.2, 4.0, 2.0), lutt(-0.2, 4.0, 0.6, 0.40), 0.45 * pi, Branch::N},
      {"weak-coupling", ttpv(0.1, 2.0, 0.5), lutt(0.1, 2.0, 0.7, 0.42), 0.40 * pi, Branch::N},
      {"large-kappa", ttpv(-0.1, 1.0, 3.0), lutt(-0.1, 3.0, 0.9, 0.47), 0.46 * pi, Branch::CDW},
      {"particle-side", ttpv(0.2, 3.0, -2.0), lutt(0.0, 4.0, 0.8, 0.55), 0.56 * pi, Branch::CDW},
  };
}

double mu_for_tQ(const LuttParams& p, double tQ, double nu_a) {
  const double t0 = solve_tQ(p, 0.0, nu_a).tQ;
  const double t1 = solve_tQ(p, 1.0, nu_a).tQ;
  return (tQ - t0) / (t1 - t0);
}

CheckItem check_energy_consistency(const LuttParams& p, double mu, Branch branch, double delta_mu,
                                   double tol) {
  const LuttingerModel model(p);
  const LuttSolution centre = model.self_consistent_point(mu, branch);
  const std::string label = describe({{"tp", p.t_prime}, {"V", p.V}, {"kappa", p.kappa},
                                      {"Q/pi", p.Q / pi}, {"mu", mu}});
  if (centre.status == SolveStatus::not_converged) {
    return make("consistency", label, std::numeric_limits<double>::infinity(), tol,
                "self-consistent point did not converge");
  }
  LuttSolveOptions warm;
  warm.seed = centre.ansatz;
  warm.nu_a_seed = centre.nu_a;
  warm.multistart = false;
  auto side = [&](double m) {
    const LuttSolution s = model.self_consistent_point(m, centre.branch, warm);
    return std::pair{s.constants.total(), s.nodal.mu_a};
  };
  const auto [e_hi, mua_hi] = side(mu + delta_mu);
  const auto [e_lo, mua_lo] = side(mu - delta_mu);
  const double lhs = (e_hi - e_lo) / (2.0 * delta_mu);
  const double dmua = (mua_hi - mua_lo) / (2.0 * delta_mu);
  const double rhs = -centre.nu_total + p.kappa * p.kappa * centre.nu_a * dmua;
  const double rel = std::abs(lhs - rhs) / std::max(std::abs(rhs), 1e-12);
  return make("consistency", label, rel, tol,
              describe({{"lhs", lhs}, {"rhs", rhs}, {"nu_a", centre.nu_a}}));
}

CheckItem check_particle_hole(const TtpvParams& p, double tol) {
  TtpvParams q = p;
  q.t_prime = -p.t_prime;
  q.mu = 2.0 * p.V - p.mu;
  const GlobalMin a = lowest(p);
  const GlobalMin b = lowest(q);
  const std::string label = describe({{"tp", p.t_prime}, {"V", p.V}, {"mu", p.mu}});
  if (!a.ok || !b.ok) {
    return make("particle-hole", label, std::numeric_limits<double>::infinity(), tol,
                "solve did not converge");
  }
  const double e_omega = std::abs((b.omega - a.omega) - (p.mu - p.V));
  const double e_nu = std::abs(b.nu - (1.0 - a.nu));
  return make("particle-hole", label, std::max(e_omega, e_nu), tol,
              describe({{"omega_err", e_omega}, {"nu_err", e_nu}, {"nu", a.nu}}));
}

double kinetic_quadrature(const LuttParams& p, double tQ) {
  using boost::math::quadrature::gauss_kronrod;
  const double k = p.kappa, t = p.t, tp = p.t_prime, Q = p.Q;
  const double vF = derived_couplings(p).v_F;
  const double half = (1.0 - k) * pi / std::numbers::sqrt2;
  const double norm = 1.0 / (4.0 * pi * pi);
  auto square = [&](double kp) {
    auto f = [&](double km) { return -4.0 * (t + tp) + (t + 2.0 * tp) * (kp * kp + km * km); };
    return gauss_kronrod<double, 15>::integrate(f, -half, half);
  };
  const double e_m2 = norm * gauss_kronrod<double, 15>::integrate(square, -half, half);
  const double c0 = -4.0 * t * std::cos(Q) - 4.0 * tp * std::cos(Q) * std::cos(Q);
  auto strip = [&](double kp) {
    auto f = [&](double) { return c0 + vF * kp; };
    return gauss_kronrod<double, 15>::integrate(f, -half, half);
  };
  const double lo = -(k * pi + 2.0 * Q - pi) / std::numbers::sqrt2;
  const double hi = std::numbers::sqrt2 * (tQ - Q);
  const double e_pp = norm * gauss_kronrod<double, 15>::integrate(strip, lo, hi);
  return e_m2 + 4.0 * e_pp;
}

CheckItem check_kinetic_quadrature(const LuttParams& p, double tQ, double tol) {
  const double closed = energy_constants(p, 0.0, tQ, 0.5, 0.5).e_kin;
  const double quad = kinetic_quadrature(p, tQ);
  const double err = std::abs(closed - quad);
  return make("kinetic", describe({{"tp", p.t_prime}, {"kappa", p.kappa}, {"Q/pi", p.Q / pi},
                                   {"tQ/pi", tQ / pi}}),
              err, tol, describe({{"closed", closed}, {"quadrature", quad}}));
}

CheckItem check_kernel_invariants(unsigned seed, int n_blocks, double tol) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> diag(-3.0, 3.0), off(-2.0, 2.0);
  const double betas[] = {0.5, 10.0, 1e5};
  double worst = 0.0;
  for (int i = 0; i < n_blocks; ++i) {
    Block2 b;
    b.a_plus = diag(rng);
    b.a_minus = diag(rng);
    b.b = {off(rng), off(rng)};
    const BlockSpectrum s = spectrum(b);
    for (double beta : betas) {
      const BlockOccupation o = occupation(b, beta);
      const double fp = fermi(s.e_plus, beta), fm = fermi(s.e_minus, beta);
      const double tr = o.theta + o.theta_bar;
      const double det = o.theta * o.theta_bar - std::norm(o.theta_tilde);
      worst = std::max({worst, std::abs(tr - (fp + fm)), std::abs(det - fp * fm)});
      worst = std::max({worst, std::max(0.0, -o.theta), std::max(0.0, o.theta - 1.0),
                        std::max(0.0, -o.theta_bar), std::max(0.0, o.theta_bar - 1.0)});
      if (beta >= 1e5 && std::min(std::abs(s.e_plus), std::abs(s.e_minus)) > 1e-3) {
        // rho^2 = rho once both levels are sharply filled or empty
        const double r00 = o.theta * o.theta + std::norm(o.theta_tilde);
        const double r11 = o.theta_bar * o.theta_bar + std::norm(o.theta_tilde);
        const std::complex<double> r01 = o.theta_tilde * (o.theta + o.theta_bar);
        worst = std::max({worst, std::abs(r00 - o.theta), std::abs(r11 - o.theta_bar),
                          std::abs(r01 - o.theta_tilde)});
      }
    }
  }
  return make("hf-kernel", "random blocks seed=" + std::to_string(seed), worst, tol,
              std::to_string(n_blocks) + " blocks x 3 temperatures");
}

CheckReport run_selfcheck(const std::vector<CannedSet>& sets) {
  CheckReport r;
  unsigned seed = 11;
  for (const CannedSet& s : sets) {
    const double mu = mu_for_tQ(s.lutt, s.lutt_tQ, 0.5);
    CheckItem c = check_energy_consistency(s.lutt, mu, s.lutt_branch);
    c.name = s.name + ": " + c.name;
    r.items.push_back(c);
    CheckItem ph = check_particle_hole(s.ttpv);
    ph.name = s.name + ": " + ph.name;
    r.items.push_back(ph);
    CheckItem kin = check_kinetic_quadrature(s.lutt, s.lutt_tQ);
    kin.name = s.name + ": " + kin.name;
    r.items.push_back(kin);
    r.items.push_back(check_kernel_invariants(seed++));
  }
  return r;
}

}  // namespace cdwmf
