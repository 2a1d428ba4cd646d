#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cdwmf/phase.hpp"
#include "cdwmf/selfcheck.hpp"
#include "dense_oracle.hpp"

using namespace cdwmf;
using std::numbers::pi;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  if (!ok) ++failures;
  std::printf("criterion %d %-4s %s: %s\n", id, ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool within(double x, double target, double tol) { return std::isfinite(x) && std::abs(x - target) <= tol; }

TtpvParams ttpv(double tp, double V, int L = 100) {
  TtpvParams p;
  p.t_prime = tp;
  p.V = V;
  p.L = L;
  return p;
}

LuttParams lutt(double tp, double V, double kappa, double Q_pi, double beta = 1e5) {
  LuttParams p;
  p.t_prime = tp;
  p.V = V;
  p.kappa = kappa;
  p.Q = Q_pi * pi;
  p.beta = beta;
  return p;
}

BoundarySet ttpv_boundaries(const TtpvParams& p, int n_mu, std::optional<std::pair<double, double>> range = {}) {
  const TtpvBranchModel m(p);
  const auto r = range.value_or(m.default_mu_range());
  return find_crossings(m, scan_mu(m, r.first, r.second, n_mu));
}

// nu extent of the CDW and mixed cells: N filling at the end of each CDW
// interval minus N filling at its start.
double doped_extent(const BoundarySet& b) {
  double w = 0.0;
  for (std::size_t i = 0; i + 1 < b.crossings.size(); ++i) {
    const Crossing& a = b.crossings[i];
    const Crossing& c = b.crossings[i + 1];
    if (a.cdw_above && !c.cdw_above) w += c.nu_n - a.nu_n;
  }
  return w;
}

std::vector<double> nu_grid(int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(double(i) / (n - 1));
  return g;
}

int count(const std::vector<PhaseLabel>& l, PhaseLabel x, std::size_t from = 0, std::size_t to = ~std::size_t(0)) {
  int n = 0;
  for (std::size_t i = from; i < l.size() && i < to; ++i) n += l[i] == x;
  return n;
}

// N+ MIXED+ CDW MIXED+ N+ with CDW only in the middle cell.
bool lobe_topology(const std::vector<PhaseLabel>& l) {
  const std::size_t mid = l.size() / 2;
  if (l[mid] != PhaseLabel::CDW || count(l, PhaseLabel::CDW) != 1) return false;
  if (l.front() != PhaseLabel::N || l.back() != PhaseLabel::N) return false;
  if (l[mid - 1] != PhaseLabel::MIXED || l[mid + 1] != PhaseLabel::MIXED) return false;
  auto monotone = [&](std::size_t a, std::size_t b, int dir) {
    // moving outward from the centre: MIXED cells then N cells, never back
    bool in_n = false;
    for (std::size_t i = a; i != b; i += dir) {
      if (l[i] == PhaseLabel::N) in_n = true;
      else if (l[i] != PhaseLabel::MIXED || in_n) return false;
    }
    return true;
  };
  return monotone(mid + 1, l.size(), 1) && monotone(mid - 1, std::size_t(-1), -1);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void criteria_1_to_3() {
  const BoundarySet b = ttpv_boundaries(ttpv(0.0, 4.0), 201);
  const Crossing* lo = b.lower();
  const Crossing* hi = b.upper();
  if (!lo || !hi || lo == hi) {
    report(1, "half-filled CDW interval", false, "crossings not found");
    report(2, "boundary fillings", false, "crossings not found");
  } else {
    const double d2 = hi->mu - 4.0, d1 = 4.0 - lo->mu;
    report(1, "half-filled CDW interval", within(d2, 3.01, 0.03) && within(d1, 3.01, 0.03),
           fmt("mu2 - V = %.5f, V - mu1 = %.5f (target 3.01 +- 0.03)", d2, d1));
    const bool ok = within(lo->nu_cdw, 0.5, 0.002) && within(hi->nu_cdw, 0.5, 0.002) &&
                    within(lo->nu_n, 0.30, 0.01) && within(hi->nu_n, 0.70, 0.01);
    report(2, "boundary fillings", ok,
           fmt("nu_CDW = %.5f / %.5f (0.500 +- 0.002), nu_N = %.5f / %.5f (0.30 / 0.70 +- 0.01)",
               lo->nu_cdw, hi->nu_cdw, lo->nu_n, hi->nu_n));
  }
  const BoundarySet c = ttpv_boundaries(ttpv(-0.2, 4.0), 201);
  if (!c.lower() || !c.upper() || c.lower() == c.upper()) {
    report(3, "doped CDW at t' = -0.2", false, "crossings not found");
    return;
  }
  const double up = c.upper()->nu_cdw, down = c.lower()->nu_cdw;
  report(3, "doped CDW at t' = -0.2", within(up, 0.53, 0.01) && within(down, 0.5, 0.002),
         fmt("particle side nu_CDW = %.5f (0.53 +- 0.01), hole side %.5f (0.500 +- 0.002)", up, down));
}

void criterion_4() {
  // The CDW phase counts as present once the CDW and mixed cells it occupies
  // span one cell of an 81-point filling grid.
  const double cell = 1.0 / 80.0;
  std::vector<std::pair<double, double>> seen;
  auto pred = [&](double V) {
    const double w = doped_extent(ttpv_boundaries(ttpv(-0.2, V), 121, std::pair{-1.0, 2.0}));
    seen.push_back({V, w});
    return w >= cell;
  };
  const ThresholdResult r = bisect_threshold(pred, 0.5, 1.2, 0.01);
  std::string trace;
  for (const auto& [V, w] : seen) trace += fmt(" %.4f:%.5f", V, w);
  report(4, "critical coupling", r.found && within(r.value, 0.8, 0.1),
         fmt("V_c = %.4f (0.8 +- 0.1); V:extent%s", r.value, trace.c_str()));
}

void criterion_5() {
  std::string trace;
  auto ttpv_first_order = [&](double T) {
    TtpvParams p = ttpv(0.0, 4.0);
    p.beta = 1.0 / T;
    const BoundarySet b = ttpv_boundaries(p, 51, std::pair{-1.0, 4.0});
    const Crossing* lo = b.lower();
    const bool fo = lo && lo->kind == TransitionKind::first_order;
    trace += fmt(" %.4f:%.4f", T, lo ? mixed_width(*lo) : 0.0);
    return !fo;
  };
  const ThresholdResult a = bisect_threshold(ttpv_first_order, 0.3, 0.6, 0.005);
  report(5, "t-t'-V mixed region closing temperature", a.found && within(a.value, 0.50, 0.03),
         fmt("1/beta = %.4f (0.50 +- 0.03); T:width%s", a.value, trace.c_str()));

  trace.clear();
  auto lutt_first_order = [&](double T) {
    try {
      const BoundarySet b = q_fixed_boundaries(lutt(0.0, 4.0, 0.8, 0.45, 1.0 / T), 41, 0.45 * pi,
                                               false, std::pair{1.0, 3.5});
      const Crossing* lo = b.lower();
      const bool fo = lo && lo->kind == TransitionKind::first_order;
      trace += fmt(" %.4f:%.4f", T, lo ? mixed_width(*lo) : 0.0);
      return !fo;
    } catch (const std::exception& e) {
      trace += fmt(" %.4f:error(%s)", T, e.what());
      return true;
    }
  };
  const ThresholdResult b = bisect_threshold(lutt_first_order, 0.15, 0.35, 0.005);
  report(5, "Luttinger mixed region closing temperature", b.found && within(b.value, 0.25, 0.03),
         fmt("1/beta = %.4f (0.25 +- 0.03); T:width%s", b.value, trace.c_str()));
}

void criterion_6() {
  const LuttParams p = lutt(0.0, 4.0, 0.8, 0.45);
  const BoundarySet c = q_fixed_boundaries(p, 51, 0.45 * pi, false, std::pair{1.0, 3.5});
  const BoundarySet n = q_fixed_boundaries(p, 51, 0.45 * pi, true, std::pair{1.0, 3.5});
  if (!c.lower() || !n.lower()) {
    report(6, "Luttinger boundary nodal points", false, "hole-side crossing not found");
    return;
  }
  const double tc = c.lower()->tQ_cdw / pi, tn = n.lower()->tQ_n / pi;
  report(6, "Luttinger boundary nodal points", within(tc, 0.38, 0.02) && within(tn, 0.44, 0.02),
         fmt("tQ/pi = %.5f CDW-mixed (0.38 +- 0.02), %.5f N-mixed (0.44 +- 0.02)", tc, tn));
}

void criterion_7() {
  const std::vector<CannedSet> sets = canned_sets();
  double worst_c = 0, worst_ph = 0, worst_kin = 0, worst_dense = 0, worst_cond = 0, worst_kernel = 0;
  bool ok_c = true, ok_ph = true, ok_kin = true, ok_kernel = true;
  for (const CannedSet& s : sets) {
    const CheckItem c = check_energy_consistency(s.lutt, mu_for_tQ(s.lutt, s.lutt_tQ, 0.5), s.lutt_branch,
                                                 1e-5, 1e-4);
    ok_c &= c.passed;
    worst_c = std::max(worst_c, c.measured);
    const CheckItem ph = check_particle_hole(s.ttpv, 1e-6);
    ok_ph &= ph.passed;
    worst_ph = std::max(worst_ph, ph.measured);
  }
  std::vector<std::pair<LuttParams, double>> kin;
  for (const CannedSet& s : sets) kin.push_back({s.lutt, s.lutt_tQ});
  kin.push_back({lutt(0.0, 4.0, 0.5, 0.50), 0.30 * pi});
  kin.push_back({lutt(-0.3, 2.0, 0.8, 0.40), 0.52 * pi});
  kin.push_back({lutt(0.25, 1.0, 0.6, 0.60), 0.66 * pi});
  kin.push_back({lutt(-0.15, 5.0, 0.95, 0.45), 0.10 * pi});
  kin.push_back({lutt(0.1, 3.0, 0.3, 0.48), 0.45 * pi});
  for (const auto& [p, tQ] : kin) {
    const CheckItem k = check_kinetic_quadrature(p, tQ, 1e-8);
    ok_kin &= k.passed;
    worst_kin = std::max(worst_kin, k.measured);
  }
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 10; ++trial) {
    TtpvParams p = ttpv(0.3 * u(rng), 2 + u(rng), 4);
    p.mu = 2 * u(rng);
    p.beta = trial % 2 ? 1e5 : 2.0 + trial;
    VariationalAnsatz a;
    a.restricted = trial % 3 == 0;
    for (int j = 0; j < 5; ++j) {
      if (!a.restricted || j < 2) a.q[j] = u(rng);
      if (!a.restricted || j == 0) a.m[j] = u(rng);
    }
    worst_dense = std::max(worst_dense, std::abs(omega_hf(p, a) - testing::dense_oracle(p, a).omega));
  }
  bool ok_cond = true;
  for (const CannedSet& s : {sets[0], sets[1], sets[2]}) {
    const RestrictedCheckReport r = verify_restricted_minimum(s.ttpv, {s.ttpv.mu}, 1e-6);
    ok_cond &= r.all_satisfied;
    for (const auto& e : r.entries) {
      worst_cond = std::max({worst_cond, e.violation, std::abs(e.best.m[1])});
    }
  }
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const CheckItem k = check_kernel_invariants(seed, 200, 1e-12);
    ok_kernel &= k.passed;
    worst_kernel = std::max(worst_kernel, k.measured);
  }
  ok_cond &= worst_cond < 1e-6;
  const bool ok_dense = worst_dense < 1e-10;
  report(7, "property suite", ok_c && ok_ph && ok_kin && ok_dense && ok_cond && ok_kernel,
         fmt("consistency %.2e (<1e-4, %zu pts) %s; particle-hole %.2e (<1e-6, %zu pts) %s; "
             "kinetic %.2e (<1e-8, %zu pts) %s; dense L=4 %.2e (<1e-10, 10 ansatz) %s; "
             "restricted minima %.2e (<1e-6, 3 pts) %s; kernel %.2e (<1e-12, 5 x 200 blocks) %s",
             worst_c, sets.size(), ok_c ? "ok" : "bad", worst_ph, sets.size(), ok_ph ? "ok" : "bad",
             worst_kin, kin.size(), ok_kin ? "ok" : "bad", worst_dense, ok_dense ? "ok" : "bad",
             worst_cond, ok_cond ? "ok" : "bad", worst_kernel, ok_kernel ? "ok" : "bad"));
}

void criterion_8() {
  const std::vector<double> nu = nu_grid(81);
  const std::size_t mid = 40;
  SweepOptions so;
  so.workers = 1;

  // half-filled line with lobes growing in V
  {
    const AxisSpec axis{"V", {2.0, 4.0, 6.0, 8.0, 10.0}};
    const PhaseDiagram d = sweep2d(
        axis, nu,
        standard_column([](double V) { return std::make_unique<TtpvBranchModel>(ttpv(0.0, V)); }, 81), so);
    bool ok = true;
    std::string trace;
    int prev = -1;
    for (const ColumnResult& c : d.columns) {
      const int mixed = count(c.labels, PhaseLabel::MIXED);
      ok &= c.ok && lobe_topology(c.labels) && mixed >= prev;
      prev = mixed;
      trace += fmt(" V=%g:%s/mixed=%d", c.axis_value, c.ok && lobe_topology(c.labels) ? "lobe" : "broken", mixed);
    }
    ok &= count(d.columns.back().labels, PhaseLabel::MIXED) > count(d.columns.front().labels, PhaseLabel::MIXED);
    report(8, "t' = 0 diagram topology", ok, fmt("CDW cell at 1/2 only, mixed lobes, N outside;%s", trace.c_str()));
  }

  // particle-side doping onset in -t' at V = 4
  {
    const AxisSpec axis{"tp", {-0.10, -0.15, -0.21, -0.25}};
    const PhaseDiagram d = sweep2d(
        axis, nu,
        standard_column([](double tp) { return std::make_unique<TtpvBranchModel>(ttpv(tp, 4.0)); }, 101), so);
    bool cells = true;
    std::string trace;
    for (const ColumnResult& c : d.columns) {
      const int above = count(c.labels, PhaseLabel::CDW, mid + 1);
      const int below = count(c.labels, PhaseLabel::CDW, 0, mid);
      const double mtp = -c.axis_value;
      cells &= c.ok && c.labels[mid] == PhaseLabel::CDW;
      cells &= mtp <= 0.15 + 1e-12 ? above == 0 : above > 0;
      if (mtp <= 0.21 + 1e-12) cells &= below == 0;
      trace += fmt(" -t'=%.2f:cdw_above=%d/below=%d", mtp, above, below);
    }
    std::string onset_trace;
    auto doped = [&](double mtp) {
      const BoundarySet b = ttpv_boundaries(ttpv(-mtp, 4.0), 101);
      const double nu2 = b.upper() ? b.upper()->nu_cdw : nan_value;
      onset_trace += fmt(" %.4f:%.5f", mtp, nu2);
      return nu2 > 0.5 + 0.002;
    };
    const ThresholdResult r = bisect_threshold(doped, 0.0, 0.3, 0.005);
    const bool onset = r.found && r.value > 0.15 && r.value < 0.21;
    report(8, "particle-side doping onset", cells && onset,
           fmt("onset -t' = %.4f (between 0.15 and 0.21); cells%s; -t':nu_CDW2%s", r.value, trace.c_str(),
               onset_trace.c_str()));
  }

  // Luttinger lobes shrink with kappa
  {
    const AxisSpec axis{"kappa", {0.5, 0.65, 0.8}};
    const PhaseDiagram d = sweep2d(
        axis, nu, q_fixed_luttinger_column([](double k) { return lutt(0.0, 4.0, k, 0.45); }, 41, 0.45 * pi), so);
    bool ok = true;
    std::string trace;
    double prev_w = -1;
    int prev_mixed = -1;
    for (const ColumnResult& c : d.columns) {
      const Crossing* lo = c.ok ? c.boundaries.lower() : nullptr;
      const double w = lo ? mixed_width(*lo) : nan_value;
      const int mixed = c.ok ? count(c.labels, PhaseLabel::MIXED) : -1;
      ok &= c.ok && lo && c.labels[mid] == PhaseLabel::CDW && c.labels.front() == PhaseLabel::N &&
            c.labels.back() == PhaseLabel::N && w > prev_w && mixed >= prev_mixed;
      prev_w = w;
      prev_mixed = mixed;
      trace += fmt(" kappa=%.2f:width=%.5f/mixed=%d%s", c.axis_value, w, mixed,
                   c.ok ? "" : (" error " + c.error).c_str());
    }
    report(8, "Luttinger lobe shrinkage with kappa", ok, fmt("hole-side mixed width increasing in kappa;%s", trace.c_str()));
  }
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  auto timed = [&](const char* what, const std::function<void()>& f) {
    const auto t = std::chrono::steady_clock::now();
    f();
    std::printf("  (%s: %.1f s)\n", what, seconds_since(t));
  };
  timed("criteria 1-3", criteria_1_to_3);
  timed("criterion 4", criterion_4);
  timed("criterion 5", criterion_5);
  timed("criterion 6", criterion_6);
  timed("criterion 7", criterion_7);
  timed("criterion 8", criterion_8);
  std::printf("%d criterion line(s) failed, %.1f s total\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
