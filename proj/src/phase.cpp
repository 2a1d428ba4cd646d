#include "cdwmf/phase.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "cdwmf/io.hpp"

namespace cdwmf {

namespace {

constexpr double pi = std::numbers::pi;

BranchPoint from_mf(double mu, const MfSolution& s) {
  BranchPoint p;
  p.mu = mu;
  p.branch = s.branch;
  p.status = s.status;
  p.omega = s.omega_per_site;
  p.nu = s.nu;
  p.gap = s.gap;
  p.residual = s.residual_norm;
  p.state = {s.ansatz.q[0], s.ansatz.q[1], s.ansatz.m[0]};
  return p;
}

BranchPoint from_lutt(double mu, const LuttSolution& s) {
  BranchPoint p;
  p.mu = mu;
  p.branch = s.branch;
  p.status = s.status;
  p.omega = s.omega_total_per_site;
  p.nu = s.nu_total;
  p.gap = s.gap;
  p.nu_a = s.nu_a;
  p.tQ = s.nodal.tQ;
  p.residual = s.residual_norm;
  p.state = {s.ansatz.q0, s.ansatz.q1, s.ansatz.delta};
  return p;
}

}  // namespace

std::string to_string(PhaseLabel p) {
  switch (p) {
    case PhaseLabel::CDW: return "CDW";
    case PhaseLabel::N: return "N";
    case PhaseLabel::MIXED: return "MIXED";
    case PhaseLabel::NONE: return "NONE";
  }
  return "NONE";
}

std::string to_string(TransitionKind k) {
  return k == TransitionKind::first_order ? "first_order" : "continuous";
}

TtpvBranchModel::TtpvBranchModel(const TtpvParams& p, SolveOptions options)
    : model_(p), options_(options) {}

std::pair<double, double> TtpvBranchModel::default_mu_range() const {
  const auto& p = model_.params();
  const double w = 4.0 * p.t + 4.0 * std::abs(p.t_prime) + 0.5;
  return {-w, 2.0 * p.V + w};
}

BranchPoint TtpvBranchModel::solve(double mu, Branch branch, const BranchPoint* warm,
                                   bool multistart) const {
  SolveOptions o = options_;
  o.multistart = multistart || warm == nullptr;
  std::optional<VariationalAnsatz> seed;
  if (warm) seed = VariationalAnsatz::restricted_form(warm->state[0], warm->state[1], warm->state[2]);
  return from_mf(mu, model_.with_mu(mu).solve_branch(branch, seed, o));
}

LuttBranchModel::LuttBranchModel(const LuttParams& p, LuttSolveOptions options)
    : model_(p), options_(options) {}

std::pair<double, double> LuttBranchModel::default_mu_range() const {
  const LuttParams& p = model_.params();
  // mu range over which tQ stays inside its window for any nu_a
  const double lo_t = (1.0 - p.kappa) * pi / 2.0, hi_t = (1.0 + p.kappa) * pi / 2.0;
  const double slope = (solve_tQ(p, 1.0, 0.5).tQ - solve_tQ(p, 0.0, 0.5).tQ);
  auto mu_for = [&](double tq, double nu_a) { return (tq - solve_tQ(p, 0.0, nu_a).tQ) / slope; };
  const double margin = 0.02 * (hi_t - lo_t);
  double a = mu_for(lo_t + margin, 0.0), b = mu_for(hi_t - margin, 1.0);
  double c = mu_for(lo_t + margin, 1.0), d = mu_for(hi_t - margin, 0.0);
  return {std::max(std::min(a, b), std::min(c, d)), std::min(std::max(a, b), std::max(c, d))};
}

BranchPoint LuttBranchModel::solve(double mu, Branch branch, const BranchPoint* warm,
                                   bool multistart) const {
  LuttSolveOptions o = options_;
  o.multistart = multistart || warm == nullptr;
  if (warm) {
    o.seed = AntinodalAnsatz{warm->state[0], warm->state[1], warm->state[2]};
    if (std::isfinite(warm->nu_a)) o.nu_a_seed = warm->nu_a;
  }
  return from_lutt(mu, model_.self_consistent_point(mu, branch, o));
}

MuScan scan_mu(const BranchModel& model, double mu_min, double mu_max, int n_points,
               const ScanOptions& options) {
  if (n_points < 16) throw std::invalid_argument("scan_mu needs at least 16 points");
  if (!(mu_min < mu_max)) throw std::invalid_argument("scan_mu needs mu_min < mu_max");
  MuScan scan;
  for (int i = 0; i < n_points; ++i) {
    const double mu = mu_min + (mu_max - mu_min) * double(i) / double(n_points - 1);
    scan.mu.push_back(mu);
    const bool cold = options.cold_every > 0 && i % options.cold_every == 0;
    const BranchPoint* wn = i > 0 && scan.normal.back().converged() ? &scan.normal.back() : nullptr;
    scan.normal.push_back(model.solve(mu, Branch::N, wn, cold));
    const BranchPoint* wc = i > 0 && scan.cdw.back().converged() ? &scan.cdw.back() : nullptr;
    scan.cdw.push_back(model.solve(mu, Branch::CDW, wc, cold));
  }
  return scan;
}

bool cdw_stable(const BranchPoint& cdw, const BranchPoint& n, double t, const CrossingOptions& o) {
  return cdw.converged() && cdw.gap >= o.gap_min_rel * t && n.converged() &&
         cdw.omega - n.omega < o.accept;
}

const Crossing* BoundarySet::lower() const {
  for (const auto& c : crossings) {
    if (c.cdw_above) return &c;
  }
  return nullptr;
}

const Crossing* BoundarySet::upper() const {
  for (auto it = crossings.rbegin(); it != crossings.rend(); ++it) {
    if (!it->cdw_above) return &*it;
  }
  return nullptr;
}

bool BoundarySet::ordering_holds(double tol) const {
  const Crossing* lo = lower();
  const Crossing* hi = upper();
  if (!lo || !hi) return true;
  return lo->nu_n <= lo->nu_cdw + tol && lo->nu_cdw <= hi->nu_cdw + tol &&
         hi->nu_cdw <= hi->nu_n + tol;
}

namespace {

struct End {
  double mu = 0.0;
  BranchPoint c, n;
  bool stable = false;
};

// A warm start from a nearly gapless state can fall into the collapsed
// solution; a gapless result is confirmed by a cold multistart.
BranchPoint solve_cdw(const BranchModel& model, double mu, const BranchPoint* warm,
                      const CrossingOptions& o) {
  const bool usable = warm && warm->converged();
  BranchPoint c = model.solve(mu, Branch::CDW, usable ? warm : nullptr, !usable);
  if (usable && !(c.converged() && c.gap >= o.gap_min_rel * model.energy_scale())) {
    const BranchPoint cold = model.solve(mu, Branch::CDW, nullptr, true);
    if (cold.converged() && (!c.converged() || cold.omega < c.omega)) c = cold;
  }
  return c;
}

End evaluate_end(const BranchModel& model, double mu, const BranchPoint& warm_c,
                 const BranchPoint& warm_n, const CrossingOptions& o) {
  End e;
  e.mu = mu;
  e.n = model.solve(mu, Branch::N, warm_n.converged() ? &warm_n : nullptr, false);
  e.c = solve_cdw(model, mu, &warm_c, o);
  e.stable = cdw_stable(e.c, e.n, model.energy_scale(), o);
  return e;
}

Crossing bisect(const BranchModel& model, End a, End b, const CrossingOptions& o) {
  // a.stable != b.stable
  End& t_end = a.stable ? a : b;
  End& f_end = a.stable ? b : a;
  Crossing cr;
  cr.cdw_above = t_end.mu > f_end.mu;
  int steps = 0;
  for (; steps < o.max_steps; ++steps) {
    const double width = std::abs(t_end.mu - f_end.mu);
    const double d = t_end.c.omega - t_end.n.omega;
    if (width < o.mu_tol) break;
    if (std::abs(d) < o.omega_tol && width < 1e-9 * std::max(1.0, std::abs(t_end.mu))) break;
    const double mid = 0.5 * (t_end.mu + f_end.mu);
    End m = evaluate_end(model, mid, t_end.c, t_end.n, o);
    if (m.stable) {
      t_end = m;
    } else {
      f_end = m;
    }
  }
  cr.mu = 0.5 * (t_end.mu + f_end.mu);
  cr.bracket_width = std::abs(t_end.mu - f_end.mu);
  cr.bisection_steps = steps;
  cr.cdw_point = t_end.c;
  cr.n_point = t_end.n;
  cr.nu_cdw = t_end.c.nu;
  cr.nu_n = t_end.n.nu;
  cr.gap_cdw = t_end.c.gap;
  cr.omega_diff = t_end.c.omega - t_end.n.omega;
  cr.nu_a_cdw = t_end.c.nu_a;
  cr.nu_a_n = t_end.n.nu_a;
  cr.tQ_cdw = t_end.c.tQ;
  cr.tQ_n = t_end.n.tQ;
  // metastable CDW on the other side means a jump in the filling
  const bool metastable = f_end.c.converged() && f_end.c.gap >= o.gap_min_rel * model.energy_scale();
  cr.kind = metastable ? TransitionKind::first_order : TransitionKind::continuous;
  if (cr.kind == TransitionKind::continuous) cr.nu_cdw = cr.nu_n;
  return cr;
}

}  // namespace

BoundarySet find_crossings(const BranchModel& model, const MuScan& scan,
                           const CrossingOptions& options) {
  BoundarySet bs;
  const double t = model.energy_scale();
  const std::size_t n = scan.mu.size();
  std::vector<BranchPoint> cdw = scan.cdw;
  std::vector<bool> stable(n);
  for (std::size_t i = 0; i < n; ++i) stable[i] = cdw_stable(cdw[i], scan.normal[i], t, options);
  // Follow the CDW branch into unconverged neighbours, forward then backward.
  auto extend = [&](std::size_t from, std::size_t to) {
    if (!stable[from] || stable[to] || cdw[to].converged()) return;
    const BranchPoint retry = model.solve(scan.mu[to], Branch::CDW, &cdw[from], false);
    if (retry.converged()) {
      cdw[to] = retry;
      stable[to] = cdw_stable(cdw[to], scan.normal[to], t, options);
    }
  };
  for (std::size_t i = 0; i + 1 < n; ++i) extend(i, i + 1);
  for (std::size_t i = n; i-- > 1;) extend(i, i - 1);

  bool any = false, all = n > 0;
  for (std::size_t i = 0; i < n; ++i) {
    any = any || stable[i];
    all = all && stable[i];
  }
  bs.n_everywhere = !any;
  bs.cdw_everywhere = all;
  bs.below = n > 0 && stable[0] ? PhaseLabel::CDW : PhaseLabel::N;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (stable[i] == stable[i + 1]) continue;
    End a{scan.mu[i], cdw[i], scan.normal[i], stable[i]};
    End b{scan.mu[i + 1], cdw[i + 1], scan.normal[i + 1], stable[i + 1]};
    bs.crossings.push_back(bisect(model, a, b, options));
  }
  return bs;
}

std::optional<Crossing> crossing_near(const BranchModel& model, double mu_guess, bool cdw_above,
                                     double step, const CrossingOptions& options, int max_expand) {
  const double t = model.energy_scale();
  auto eval_cold = [&](double mu, const End* warm) {
    End e;
    e.mu = mu;
    e.n = model.solve(mu, Branch::N, warm ? &warm->n : nullptr, warm == nullptr);
    e.c = solve_cdw(model, mu, warm ? &warm->c : nullptr, options);
    e.stable = cdw_stable(e.c, e.n, t, options);
    return e;
  };
  End start = eval_cold(mu_guess, nullptr);
  // Move toward the side where the stability flag should change.
  const double dir = (start.stable == cdw_above) ? -1.0 : 1.0;
  End prev = start;
  double h = step;
  for (int i = 0; i < max_expand; ++i) {
    End next = eval_cold(prev.mu + dir * h, &prev);
    if (next.stable != prev.stable) {
      End& lo = dir > 0 ? prev : next;
      End& hi = dir > 0 ? next : prev;
      if (lo.stable != !cdw_above) return std::nullopt;
      return bisect(model, lo, hi, options);
    }
    prev = next;
    if (i >= 8) h *= 1.5;
  }
  return std::nullopt;
}

Classification classify(double nu, const BoundarySet& b, double tol) {
  if (!(nu >= 0.0 && nu <= 1.0)) throw std::invalid_argument("filling must lie in [0, 1]");
  PhaseLabel seg = b.below;
  for (const Crossing& c : b.crossings) {
    const double lo = c.cdw_above ? c.nu_n : c.nu_cdw;
    const double hi = c.cdw_above ? c.nu_cdw : c.nu_n;
    if (nu <= lo + tol) return {seg, seg == PhaseLabel::CDW ? 1.0 : 0.0};
    if (nu < hi - tol) {
      double lambda = (nu - c.nu_n) / (c.nu_cdw - c.nu_n);
      lambda = std::clamp(lambda, std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0));
      return {PhaseLabel::MIXED, lambda};
    }
    seg = c.cdw_above ? PhaseLabel::CDW : PhaseLabel::N;
  }
  return {seg, seg == PhaseLabel::CDW ? 1.0 : 0.0};
}

double mixed_width(const Crossing& c) {
  return c.kind == TransitionKind::first_order ? std::abs(c.nu_cdw - c.nu_n) : 0.0;
}

ColumnFn standard_column(std::function<std::unique_ptr<BranchModel>(double)> factory, int n_mu,
                         std::optional<std::pair<double, double>> mu_range,
                         CrossingOptions options) {
  return [=](double v) {
    const std::unique_ptr<BranchModel> model = factory(v);
    const auto range = mu_range.value_or(model->default_mu_range());
    const MuScan scan = scan_mu(*model, range.first, range.second, n_mu);
    return find_crossings(*model, scan, options);
  };
}

BoundarySet q_fixed_boundaries(const LuttParams& base, int n_mu, double Q0, bool use_n_side,
                               std::optional<std::pair<double, double>> mu_range,
                               const CrossingOptions& options) {
  LuttParams p0 = base;
  p0.Q = Q0;
  const LuttBranchModel model0(p0);
  const auto range = mu_range.value_or(model0.default_mu_range());
  const MuScan scan = scan_mu(model0, range.first, range.second, n_mu);
  BoundarySet bs = find_crossings(model0, scan, options);
  const double lo_w = (1.0 - base.kappa) * pi / 2.0, hi_w = (1.0 + base.kappa) * pi / 2.0;
  for (Crossing& c : bs.crossings) {
    double mu_guess = c.mu;
    std::optional<Crossing> last;
    auto map = [&](double Q) {
      LuttParams pq = base;
      pq.Q = Q;
      const LuttBranchModel m(pq);
      last = crossing_near(m, mu_guess, c.cdw_above, 0.02 * base.t, options);
      if (!last) throw std::runtime_error("boundary lost while fixing Q");
      last->Q = Q;
      mu_guess = last->mu;
      const double tq = use_n_side ? last->tQ_n : last->tQ_cdw;
      return tq;
    };
    double start = use_n_side ? c.tQ_n : c.tQ_cdw;
    if (!(start > lo_w && start < hi_w)) start = Q0;
    const FixQResult fq = fix_Q(base, map, start, 1e-6, 100);
    if (!fq.converged || !last) {
      throw std::runtime_error("Q = tQ iteration failed: " + fq.failure);
    }
    c = *last;
  }
  return bs;
}

ColumnFn q_fixed_luttinger_column(std::function<LuttParams(double)> params_of, int n_mu,
                                  double Q0, bool use_n_side,
                                  std::optional<std::pair<double, double>> mu_range,
                                  CrossingOptions options) {
  return [=](double v) {
    return q_fixed_boundaries(params_of(v), n_mu, Q0, use_n_side, mu_range, options);
  };
}

int default_workers() {
  if (const char* env = std::getenv("CDWMF_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? int(hw) : 1;
}

PhaseDiagram sweep2d(const AxisSpec& axis, const std::vector<double>& nu_grid,
                     const ColumnFn& column, const SweepOptions& options) {
  PhaseDiagram d;
  d.axis = axis;
  d.nu = nu_grid;
  d.provenance_json = options.provenance_json;
  const std::size_t ncol = axis.values.size();
  d.columns.resize(ncol);
  namespace fs = std::filesystem;
  if (!options.persist_dir.empty()) fs::create_directories(options.persist_dir);

  auto column_path = [&](std::size_t i) {
    return (fs::path(options.persist_dir) / ("column_" + std::to_string(i) + ".json")).string();
  };
  auto compute = [&](std::size_t i) {
    if (!options.persist_dir.empty() && options.resume) {
      if (auto prev = read_column(column_path(i), options.provenance_json, axis.values[i])) {
        d.columns[i] = *prev;
        d.columns[i].index = int(i);
        return;
      }
    }
    ColumnResult col;
    col.index = int(i);
    col.axis_value = axis.values[i];
    try {
      col.boundaries = column(axis.values[i]);
      col.ok = true;
      for (double nu : nu_grid) {
        const Classification c = classify(nu, col.boundaries);
        col.labels.push_back(c.label);
        col.lambda.push_back(c.lambda);
      }
    } catch (const std::exception& e) {
      col.ok = false;
      col.error = e.what();
      col.labels.assign(nu_grid.size(), PhaseLabel::NONE);
      col.lambda.assign(nu_grid.size(), 0.0);
    }
    if (!options.persist_dir.empty()) {
      write_column(column_path(i), col, options.provenance_json);
    }
    d.columns[i] = std::move(col);
  };

  const int workers = std::max(1, std::min<int>(options.workers > 0 ? options.workers
                                                                    : default_workers(),
                                                int(std::max<std::size_t>(ncol, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < ncol; ++i) compute(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < ncol; i = next++) compute(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  std::map<std::string, Polyline> lines;
  for (const ColumnResult& col : d.columns) {
    if (!col.ok) continue;
    for (std::size_t k = 0; k < col.boundaries.crossings.size(); ++k) {
      const Crossing& c = col.boundaries.crossings[k];
      const std::string base = "crossing" + std::to_string(k);
      lines[base + "_cdw"].points.push_back({c.nu_cdw, col.axis_value});
      lines[base + "_n"].points.push_back({c.nu_n, col.axis_value});
    }
  }
  for (auto& [name, line] : lines) {
    line.name = name;
    d.boundaries.push_back(line);
  }
  return d;
}

ThresholdResult bisect_threshold(const std::function<bool(double)>& pred, double lo, double hi,
                                 double tol) {
  ThresholdResult r;
  const bool plo = pred(lo);
  const bool phi = pred(hi);
  r.trace.push_back({lo, plo});
  r.trace.push_back({hi, phi});
  if (plo == phi) return r;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const bool pm = pred(mid);
    r.trace.push_back({mid, pm});
    if (pm == plo) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  r.value = 0.5 * (lo + hi);
  r.found = true;
  return r;
}

}  // namespace cdwmf
