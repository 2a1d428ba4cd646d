#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <stdexcept>

#include "cdwmf/lattice.hpp"
#include "cdwmf/selfcheck.hpp"
#include "cdwmf/ttpv.hpp"
#include "dense_oracle.hpp"

using namespace cdwmf;
using std::numbers::pi;
using cd = std::complex<double>;
using testing::Dense;
using testing::dense_oracle;

namespace {

double free_fermion_omega(const TtpvParams& p) {
  double s = 0;
  for (const auto& k : build_bz(p.L).points) {
    const double x = p.beta * (eps(k, p.t, p.t_prime) - p.mu);
    s -= (x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x))) / p.beta;
  }
  return s / (double(p.L) * p.L);
}

TtpvParams params(double tp, double V, double mu, int L = 100, double beta = 1e5) {
  TtpvParams p;
  p.t_prime = tp;
  p.V = V;
  p.mu = mu;
  p.L = L;
  p.beta = beta;
  return p;
}

}  // namespace

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(TtpvModel{params(0.5, 4, 0)}, std::invalid_argument);
  CHECK_THROWS_AS(TtpvModel{params(-0.6, 4, 0)}, std::invalid_argument);
  CHECK_THROWS_AS(TtpvModel{params(0, -1, 0)}, std::invalid_argument);
  CHECK_THROWS_AS(TtpvModel{params(0, 4, 0, 7)}, std::invalid_argument);
  CHECK_THROWS_AS(TtpvModel{params(0, 4, 0, 10, 0.0)}, std::invalid_argument);
  TtpvParams p = params(0, 4, 0);
  p.t = 0;
  CHECK_THROWS_AS(TtpvModel{p}, std::invalid_argument);
}

TEST_CASE("block assembly") {
  const TtpvParams free = params(-0.2, 4, 0);
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> u(-pi, pi);
  for (int i = 0; i < 20; ++i) {
    const Momentum k{std::abs(u(rng)), u(rng)};
    const Block2 b0 = assemble_block(k, free, VariationalAnsatz{});
    CHECK(b0.a_plus == doctest::Approx(eps(k, 1, -0.2)));
    CHECK(b0.a_minus == doctest::Approx(eps(shift_by_nesting(k), 1, -0.2)));
    CHECK(b0.b == cd(0));

    const double q0 = 1.3, q1 = -0.4, D = 0.8, mu = 2.1;
    const TtpvParams p = params(-0.2, 4, mu);
    const BlockSpectrum s =
        spectrum(assemble_block(k, p, VariationalAnsatz::restricted_form(q0, q1, D)));
    const double c1 = std::cos(k.k1), c2 = std::cos(k.k2);
    const double root = std::sqrt(std::pow(-2 + q1, 2) * std::pow(c1 + c2, 2) + D * D);
    const double base = -4 * -0.2 * c1 * c2 + q0 - mu;
    CHECK(s.e_plus == doctest::Approx(base + root).epsilon(1e-12));
    CHECK(s.e_minus == doctest::Approx(base - root).epsilon(1e-12));

    VariationalAnsatz full;
    for (int j = 0; j < 5; ++j) {
      full.q[j] = u(rng) / pi;
      full.m[j] = u(rng) / pi;
    }
    full.restricted = false;
    const Block2 bk = assemble_block(k, p, full);
    const Block2 bq = assemble_block(shift_by_nesting(k), p, full);
    CHECK(std::abs(bq.b - std::conj(bk.b)) < 1e-12);
  }
}

TEST_CASE("order parameters in trivial limits") {
  const TtpvParams empty = params(0.1, 0, -5);
  CHECK(order_parameters(empty, {}).n[0] == doctest::Approx(0.0));
  const TtpvParams half = params(0, 4, 0);
  CHECK(order_parameters(half, {}).n[0] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("dense oracle at L=4") {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 10; ++trial) {
    const TtpvParams p = params(0.3 * u(rng), 2 + u(rng), 2 * u(rng), 4, 3.0 + trial);
    const VariationalAnsatz r = VariationalAnsatz::restricted_form(u(rng), u(rng), u(rng));
    const Dense d = dense_oracle(p, r);
    CHECK(std::abs(omega_hf(p, r) - d.omega) < 1e-10);
    const OrderParameters op = order_parameters(p, r);
    CHECK(std::abs(op.n[0] - d.n0) < 1e-12);
    CHECK(std::abs(op.n[1] - d.n1) < 1e-12);
    CHECK(std::abs(op.n_tilde[0] - d.nt0) < 1e-12);

    VariationalAnsatz full;
    full.restricted = false;
    for (int j = 0; j < 5; ++j) {
      full.q[j] = u(rng);
      full.m[j] = u(rng);
    }
    CHECK(std::abs(omega_hf(p, full) - dense_oracle(p, full).omega) < 1e-10);
  }
  // low temperature
  const TtpvParams cold = params(-0.1, 4, 3.7, 4, 1e5);
  const VariationalAnsatz r = VariationalAnsatz::restricted_form(3.9, -0.3, 1.7);
  CHECK(std::abs(omega_hf(cold, r) - dense_oracle(cold, r).omega) < 1e-10);
}

TEST_CASE("free fermion limit") {
  for (double mu : {-3.0, -0.5, 0.0, 1.2}) {
    const TtpvParams p = params(0.15, 0, mu, 40, 20.0);
    CHECK(std::abs(omega_hf(p, {}) - free_fermion_omega(p)) < 1e-12);
    const auto r = gap_residuals(p, VariationalAnsatz::restricted_form(0.3, 0.2, 0.1));
    CHECK(r[0] == doctest::Approx(0.3));
    CHECK(r[1] == doctest::Approx(0.2));
    CHECK(r[5] == doctest::Approx(0.1));
  }
  for (double mu : {-2.0, 1.0}) {
    const TtpvParams p = params(0.1, 0, mu, 40);
    const MfSolution n = solve_branch(p, Branch::N);
    const MfSolution c = solve_branch(p, Branch::CDW);
    CHECK(n.converged);
    CHECK(c.status == SolveStatus::collapsed);
    for (int j = 0; j < 5; ++j) {
      CHECK(n.ansatz.q[j] == 0.0);
      CHECK(c.ansatz.q[j] == 0.0);
    }
    CHECK(c.ansatz.m[0] == 0.0);
  }
}

TEST_CASE("particle-hole sign in the free limit") {
  // Omega(-t', -mu) = Omega(t', mu) + mu exactly at V = 0
  for (double mu : {-1.3, 0.4, 2.2}) {
    const TtpvParams a = params(0.2, 0, mu, 20, 5.0);
    const TtpvParams b = params(-0.2, 0, -mu, 20, 5.0);
    CHECK((free_fermion_omega(b) - free_fermion_omega(a)) == doctest::Approx(mu).epsilon(1e-12));
  }
}

TEST_CASE("half-filled CDW solution") {
  const TtpvModel m(params(0, 4, 4));
  const MfSolution c = m.solve_branch(Branch::CDW);
  const MfSolution n = m.solve_branch(Branch::N);
  REQUIRE(c.converged);
  REQUIRE(n.converged);
  CHECK(c.residual_norm < 1e-8);
  CHECK(c.gap > 0);
  CHECK(c.omega_per_site < n.omega_per_site);
  CHECK(std::abs(c.nu - 0.5) < 1e-6);
  CHECK(n.ansatz.m[0] == 0.0);

  SUBCASE("gradient vanishes at the stationary point") {
    std::mt19937 rng(77);
    std::normal_distribution<double> g;
    const double h = 1e-5;
    for (int dir = 0; dir < 10; ++dir) {
      VariationalAnsatz up = c.ansatz, dn = c.ansatz;
      up.restricted = dn.restricted = false;
      for (int j = 0; j < 5; ++j) {
        const double dq = g(rng), dm = g(rng);
        up.q[j] += h * dq;
        dn.q[j] -= h * dq;
        up.m[j] += h * dm;
        dn.m[j] -= h * dm;
      }
      const double dd = (m.omega_hf(up) - m.omega_hf(dn)) / (2 * h);
      CHECK(std::abs(dd) < 1e-7);
    }
  }

  SUBCASE("filling is minus the mu derivative") {
    const double dmu = 1e-4;
    for (double mu : {2.5, 4.0, 5.5}) {
      const TtpvModel mm(params(0, 4, mu));
      const MfSolution s = mm.solve_branch(Branch::CDW);
      const MfSolution sp = mm.with_mu(mu + dmu).solve_branch(Branch::CDW, s.ansatz);
      const MfSolution sm = mm.with_mu(mu - dmu).solve_branch(Branch::CDW, s.ansatz);
      const double fd = -(sp.omega_per_site - sm.omega_per_site) / (2 * dmu);
      CHECK(std::abs(fd - s.nu) < 1e-5);
    }
    for (double mu : {-1.0, 1.5}) {
      const TtpvModel mm(params(-0.2, 2, mu));
      const MfSolution s = mm.solve_branch(Branch::N);
      const MfSolution sp = mm.with_mu(mu + dmu).solve_branch(Branch::N, s.ansatz);
      const MfSolution sm = mm.with_mu(mu - dmu).solve_branch(Branch::N, s.ansatz);
      CHECK(std::abs(-(sp.omega_per_site - sm.omega_per_site) / (2 * dmu) - s.nu) < 1e-5);
    }
  }
}

TEST_CASE("normal phase beyond the upper crossing") {
  const TtpvModel m(params(0, 4, 9));
  const MfSolution n = m.solve_branch(Branch::N);
  const MfSolution c = m.solve_branch(Branch::CDW);
  REQUIRE(n.converged);
  CHECK((!c.converged || c.omega_per_site >= n.omega_per_site - 1e-12));
}

TEST_CASE("filling saturates") {
  CHECK(filling(params(0.2, 4, -50), {}) < 1e-12);
  CHECK(filling(params(0.2, 4, 50), {}) > 1 - 1e-12);
  const MfSolution lo = solve_branch(params(0, 4, -20), Branch::N);
  const MfSolution hi = solve_branch(params(0, 4, 28), Branch::N);
  CHECK(lo.nu < 1e-12);
  CHECK(hi.nu > 1 - 1e-12);
}

TEST_CASE("particle-hole covariance of the global minimum") {
  for (const auto& [tp, V, mu] : std::vector<std::tuple<double, double, double>>{
           {0.0, 4.0, 1.0}, {-0.2, 4.0, 2.5}, {0.1, 2.0, 0.3}, {-0.15, 3.0, 4.4}, {0.2, 1.0, -1.0}}) {
    const CheckItem c = check_particle_hole(params(tp, V, mu));
    INFO(c.detail);
    CHECK(c.passed);
    CHECK(c.measured < 1e-6);
  }
}

TEST_CASE("normal branch is concave and decreasing in mu") {
  std::vector<double> om;
  std::optional<VariationalAnsatz> warm;
  for (int i = 0; i <= 40; ++i) {
    const double mu = -3.0 + 0.3 * i;
    const MfSolution s = solve_branch(params(-0.2, 4, mu), Branch::N, warm);
    REQUIRE(s.converged);
    warm = s.ansatz;
    om.push_back(s.omega_per_site);
  }
  for (std::size_t i = 1; i < om.size(); ++i) CHECK(om[i] < om[i - 1]);
  for (std::size_t i = 1; i + 1 < om.size(); ++i) CHECK(om[i + 1] - 2 * om[i] + om[i - 1] <= 1e-12);
}

TEST_CASE("half-filling gap grows with V") {
  double prev = 0;
  for (double V : {1.0, 2.0, 3.0, 4.0}) {
    const MfSolution s = solve_branch(params(0, V, V), Branch::CDW);
    REQUIRE(s.converged);
    CHECK(std::abs(s.ansatz.m[0]) >= prev);
    prev = std::abs(s.ansatz.m[0]);
  }
}

TEST_CASE("restricted minimum in the full ansatz") {
  const RestrictedCheckReport r = verify_restricted_minimum(params(0, 4, 4), {4.0});
  REQUIRE(r.entries.size() == 1);
  const RestrictedCheckEntry& e = r.entries[0];
  CHECK(e.satisfied);
  CHECK(e.violation < 1e-6);
  CHECK(std::abs(e.best.m[1]) < 1e-6);
  CHECK(e.omega_best == doctest::Approx(e.omega_restricted_cdw).epsilon(1e-10));
  CHECK(!e.ddw_below_cdw);
  CHECK(e.omega_ddw_seed >= e.omega_restricted_cdw - 1e-10);

  const RestrictedCheckReport z = verify_restricted_minimum(params(0, 0, 1.0, 40), {1.0});
  for (int j = 0; j < 5; ++j) {
    CHECK(std::abs(z.entries[0].best.q[j]) < 1e-8);
    CHECK(std::abs(z.entries[0].best.m[j]) < 1e-8);
  }
}
