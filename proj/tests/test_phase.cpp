#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "doctest.h"

#include "cdwmf/lattice.hpp"
#include "cdwmf/phase.hpp"

using namespace cdwmf;

namespace {

constexpr double pi = std::numbers::pi;

TtpvParams tparams(double tp, double V, int L = 100, double beta = 1e5) {
  TtpvParams p;
  p.t_prime = tp;
  p.V = V;
  p.L = L;
  p.beta = beta;
  return p;
}

LuttParams lparams(double tp, double V, double kappa, double Q_pi) {
  LuttParams p;
  p.t_prime = tp;
  p.V = V;
  p.kappa = kappa;
  p.Q = Q_pi * pi;
  return p;
}

double free_omega(const TtpvParams& p, double mu) {
  double s = 0;
  for (const auto& k : build_bz(p.L).points) {
    const double x = p.beta * (eps(k, p.t, p.t_prime) - mu);
    s -= (x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x))) / p.beta;
  }
  return s / (double(p.L) * p.L);
}

struct Run {
  MuScan scan;
  BoundarySet b;
};

Run ttpv_run(const TtpvParams& p, double lo, double hi, int n) {
  const TtpvBranchModel m(p);
  Run r;
  r.scan = scan_mu(m, lo, hi, n);
  r.b = find_crossings(m, r.scan);
  return r;
}

const Run& half_filled_run() {
  static const Run r = ttpv_run(tparams(0.0, 4.0), 0.0, 8.0, 81);
  return r;
}

Crossing synthetic(double mu, bool above, double nu_cdw, double nu_n) {
  Crossing c;
  c.mu = mu;
  c.cdw_above = above;
  c.nu_cdw = nu_cdw;
  c.nu_n = nu_n;
  return c;
}

}  // namespace

TEST_SUITE("phase scans") {
  TEST_CASE("half-filled CDW interval") {
    const Run& r = half_filled_run();
    const MuScan& s = r.scan;
    for (std::size_t i = 0; i < s.mu.size(); ++i) {
      CAPTURE(s.mu[i]);
      REQUIRE(s.normal[i].converged());
      if (i > 0) {
        CHECK(s.mu[i] > s.mu[i - 1]);
        CHECK(s.normal[i].nu >= s.normal[i - 1].nu - 1e-12);
        CHECK(s.normal[i].omega <= s.normal[i - 1].omega + 1e-12);
      }
    }
    const std::size_t mid = s.mu.size() / 2;
    REQUIRE(s.mu[mid] == doctest::Approx(4.0));
    CHECK(s.cdw[mid].converged());
    CHECK(s.cdw[mid].gap > 1.0);
    CHECK(s.cdw[mid].omega < s.normal[mid].omega);
    CHECK(s.cdw.front().omega >= s.normal.front().omega - 1e-12);
    CHECK(s.cdw.back().omega >= s.normal.back().omega - 1e-12);
    REQUIRE(r.b.crossings.size() == 2);
    CHECK(r.b.below == PhaseLabel::N);
    CHECK(r.b.lower()->mu < 4.0);
    CHECK(r.b.upper()->mu > 4.0);
    CHECK(r.b.ordering_holds());
  }

  TEST_CASE("V = 0 has no CDW and free-fermion normal potential") {
    const TtpvParams p = tparams(-0.1, 0.0, 40);
    const Run r = ttpv_run(p, -5.0, 5.0, 21);
    for (std::size_t i = 0; i < r.scan.mu.size(); ++i) {
      CAPTURE(r.scan.mu[i]);
      CHECK(r.scan.cdw[i].gap < 1e-6);
      CHECK(r.scan.normal[i].omega == doctest::Approx(free_omega(p, r.scan.mu[i])).epsilon(1e-12));
    }
    CHECK(r.b.n_everywhere);
    CHECK(r.b.crossings.empty());
  }

  TEST_CASE("scan arguments") {
    const TtpvBranchModel m(tparams(0.0, 4.0, 10));
    CHECK_THROWS_AS(scan_mu(m, 0.0, 1.0, 15), std::invalid_argument);
    CHECK_THROWS_AS(scan_mu(m, 1.0, 1.0, 20), std::invalid_argument);
  }

  TEST_CASE("boundary ordering with next-nearest hopping") {
    const Run r = ttpv_run(tparams(-0.2, 4.0), -1.0, 9.0, 61);
    REQUIRE(r.b.lower());
    REQUIRE(r.b.upper());
    CHECK(r.b.ordering_holds());
    CHECK(r.b.lower()->mu <= r.b.upper()->mu);
    for (const Crossing& c : r.b.crossings) {
      CHECK(std::abs(c.omega_diff) < 1e-9);
      CHECK(c.bracket_width < 1e-6);
    }
  }

  TEST_CASE("bisection is deterministic") {
    const Run a = ttpv_run(tparams(-0.2, 3.0, 40), -1.0, 7.0, 33);
    const Run b = ttpv_run(tparams(-0.2, 3.0, 40), -1.0, 7.0, 33);
    REQUIRE(a.b.crossings.size() == b.b.crossings.size());
    for (std::size_t i = 0; i < a.b.crossings.size(); ++i) {
      const Crossing &x = a.b.crossings[i], &y = b.b.crossings[i];
      CHECK(std::memcmp(&x.mu, &y.mu, sizeof(double)) == 0);
      CHECK(std::memcmp(&x.nu_cdw, &y.nu_cdw, sizeof(double)) == 0);
      CHECK(std::memcmp(&x.nu_n, &y.nu_n, sizeof(double)) == 0);
    }
  }

  TEST_CASE("crossing_near agrees with the scan") {
    const Run& r = half_filled_run();
    const TtpvBranchModel m(tparams(0.0, 4.0));
    for (const Crossing& c : r.b.crossings) {
      const auto near = crossing_near(m, c.mu + (c.cdw_above ? -0.15 : 0.15), c.cdw_above, 0.05);
      REQUIRE(near);
      CHECK(near->mu == doctest::Approx(c.mu).epsilon(1e-8));
      CHECK(near->nu_n == doctest::Approx(c.nu_n).epsilon(1e-6));
    }
  }
}

TEST_SUITE("phase classification") {
  TEST_CASE("fillings at t' = 0, V = 4") {
    const BoundarySet& b = half_filled_run().b;
    const Classification half = classify(0.5, b);
    CHECK(half.label == PhaseLabel::CDW);
    CHECK(half.lambda == 1.0);
    const Classification mixed = classify(0.4, b);
    CHECK(mixed.label == PhaseLabel::MIXED);
    CHECK(std::abs(mixed.lambda - 0.5) < 0.1);
    CHECK(classify(0.1, b).label == PhaseLabel::N);
    CHECK(classify(0.9, b).label == PhaseLabel::N);
    CHECK(classify(0.6, b).label == PhaseLabel::MIXED);
    CHECK_THROWS_AS(classify(-0.01, b), std::invalid_argument);
    CHECK_THROWS_AS(classify(1.01, b), std::invalid_argument);
  }

  TEST_CASE("lever rule on synthetic boundaries") {
    BoundarySet b;
    b.crossings = {synthetic(1.0, true, 0.45, 0.3), synthetic(2.0, false, 0.55, 0.7)};
    CHECK(classify(0.2, b).label == PhaseLabel::N);
    CHECK(classify(0.3, b).label == PhaseLabel::N);
    const Classification m = classify(0.36, b);
    CHECK(m.label == PhaseLabel::MIXED);
    CHECK(m.lambda == doctest::Approx(0.4));
    CHECK(classify(0.5, b).label == PhaseLabel::CDW);
    CHECK(classify(0.45, b).label == PhaseLabel::CDW);
    CHECK(classify(0.6, b).lambda == doctest::Approx(2.0 / 3.0));
    CHECK(classify(1.0, b).label == PhaseLabel::N);
    for (double nu = 0.301; nu < 0.45; nu += 0.01) {
      const Classification c = classify(nu, b);
      CHECK(c.lambda > 0.0);
      CHECK(c.lambda < 1.0);
    }
    BoundarySet none;
    CHECK(classify(0.5, none).label == PhaseLabel::N);
    none.below = PhaseLabel::CDW;
    CHECK(classify(0.5, none).label == PhaseLabel::CDW);
  }

  TEST_CASE("ordering predicate and mixed width") {
    BoundarySet b;
    b.crossings = {synthetic(1.0, true, 0.45, 0.3), synthetic(2.0, false, 0.55, 0.7)};
    CHECK(b.ordering_holds());
    b.crossings[1].nu_n = 0.5;
    CHECK_FALSE(b.ordering_holds());
    Crossing c = synthetic(1.0, true, 0.45, 0.3);
    CHECK(mixed_width(c) == doctest::Approx(0.15));
    c.kind = TransitionKind::continuous;
    CHECK(mixed_width(c) == 0.0);
  }
}

TEST_SUITE("phase diagrams") {
  TEST_CASE("t' = 0 diagram is symmetric under nu -> 1 - nu") {
    std::vector<double> nu;
    for (int i = 0; i <= 80; ++i) nu.push_back(i / 80.0);
    const AxisSpec axis{"V", {1.0, 2.5, 4.0, 6.0}};
    auto factory = [](double V) {
      return std::unique_ptr<BranchModel>(new TtpvBranchModel(tparams(0.0, V)));
    };
    const PhaseDiagram d = sweep2d(axis, nu, standard_column(factory, 41, std::pair{-5.0, 2 * 6.0 + 5.0}));
    for (const ColumnResult& c : d.columns) {
      REQUIRE(c.ok);
      CHECK(c.boundaries.ordering_holds());
      CAPTURE(c.axis_value);
      CHECK(c.labels[40] == PhaseLabel::CDW);
      int mismatch = 0;
      for (std::size_t i = 0; i < nu.size(); ++i) {
        const std::size_t j = nu.size() - 1 - i;
        if (c.labels[i] == c.labels[j]) continue;
        // only allowed next to a label change
        const bool edge = (i > 0 && c.labels[i - 1] != c.labels[i]) ||
                          (i + 1 < nu.size() && c.labels[i + 1] != c.labels[i]);
        CHECK(edge);
        ++mismatch;
      }
      CHECK(mismatch <= 4);
      for (std::size_t i = 0; i < nu.size(); ++i) {
        if (c.labels[i] == PhaseLabel::MIXED) {
          CHECK(c.lambda[i] > 0.0);
          CHECK(c.lambda[i] < 1.0);
        }
      }
    }
    // mixed lobes widen with V
    auto n_mixed = [&](const ColumnResult& c) {
      return std::count(c.labels.begin(), c.labels.end(), PhaseLabel::MIXED);
    };
    CHECK(n_mixed(d.columns[0]) < n_mixed(d.columns[2]));
    CHECK(n_mixed(d.columns[2]) < n_mixed(d.columns[3]));
  }

  TEST_CASE("failed columns become NONE cells") {
    const AxisSpec axis{"V", {1.0, 2.0, 3.0}};
    auto column = [](double v) -> BoundarySet {
      if (v == 2.0) throw std::runtime_error("boom");
      BoundarySet b;
      b.crossings = {synthetic(1.0, true, 0.5, 0.4), synthetic(2.0, false, 0.5, 0.6)};
      return b;
    };
    SweepOptions o;
    o.workers = 3;
    const PhaseDiagram d = sweep2d(axis, {0.1, 0.45, 0.5, 0.9}, column, o);
    REQUIRE(d.columns.size() == 3);
    CHECK(d.columns[0].ok);
    CHECK_FALSE(d.columns[1].ok);
    CHECK(d.columns[1].error == "boom");
    for (PhaseLabel l : d.columns[1].labels) CHECK(l == PhaseLabel::NONE);
    CHECK(d.columns[2].labels[1] == PhaseLabel::MIXED);
    CHECK(d.columns[2].labels[2] == PhaseLabel::CDW);
    for (const Polyline& line : d.boundaries) CHECK(line.points.size() == 2);
  }

  TEST_CASE("threshold bisection") {
    const ThresholdResult r = bisect_threshold([](double x) { return x > 0.8123; }, 0.0, 2.0, 1e-9);
    REQUIRE(r.found);
    CHECK(r.value == doctest::Approx(0.8123).epsilon(1e-8));
    CHECK_FALSE(bisect_threshold([](double) { return true; }, 0.0, 1.0, 1e-6).found);
  }

  TEST_CASE("Q-policy insensitivity of the Luttinger boundaries") {
    for (double kappa : {0.7, 0.8}) {
      const LuttParams base = lparams(0.0, 4.0, kappa, 0.5);
      const LuttBranchModel m(base);
      const auto range = m.default_mu_range();
      const BoundarySet fixed = find_crossings(m, scan_mu(m, range.first, range.second, 41));
      const BoundarySet self = q_fixed_boundaries(base, 41, 0.45 * pi, false);
      REQUIRE(fixed.crossings.size() == 2);
      REQUIRE(self.crossings.size() == 2);
      CAPTURE(kappa);
      for (std::size_t i = 0; i < 2; ++i) {
        CHECK(std::abs(fixed.crossings[i].nu_cdw - self.crossings[i].nu_cdw) < 0.005);
        CHECK(std::abs(fixed.crossings[i].nu_n - self.crossings[i].nu_n) < 0.005);
        CHECK(self.crossings[i].Q == doctest::Approx(self.crossings[i].tQ_cdw).epsilon(1e-6));
      }
    }
  }
}
