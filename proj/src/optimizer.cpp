#include "cdwmf/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>

#include <boost/math/tools/toms748_solve.hpp>

namespace cdwmf {

std::string to_string(MinStatus s) {
  switch (s) {
    case MinStatus::converged: return "converged";
    case MinStatus::collapsed: return "collapsed";
    case MinStatus::not_converged: return "not_converged";
  }
  return "unknown";
}

void MinimizeSpec::validate() const {
  if (dimension <= 0) throw std::invalid_argument("minimize: dimension must be positive");
  if (seeds.empty()) throw std::invalid_argument("minimize: at least one seed required");
  for (const auto& s : seeds) {
    if (int(s.size()) != dimension) throw std::invalid_argument("minimize: seed size mismatch");
  }
  if (!lower.empty() && int(lower.size()) != dimension) {
    throw std::invalid_argument("minimize: lower bound size mismatch");
  }
  if (!upper.empty() && int(upper.size()) != dimension) {
    throw std::invalid_argument("minimize: upper bound size mismatch");
  }
  if (!frozen.empty() && int(frozen.size()) != dimension) {
    throw std::invalid_argument("minimize: frozen mask size mismatch");
  }
  if (pinned >= dimension || tracked >= dimension) {
    throw std::invalid_argument("minimize: coordinate index out of range");
  }
  if (pinned >= 0 && !(pinned_lo <= pinned_hi)) {
    throw std::invalid_argument("minimize: pinned bracket must satisfy lo <= hi");
  }
  if (max_iterations <= 0 || polish_max_evaluations < 0 || collapse_confirm <= 0) {
    throw std::invalid_argument("minimize: iteration caps must be positive");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("minimize: alpha in (0, 1]");
}

double residual_norm(const std::vector<double>& r, const std::vector<bool>& frozen) {
  double n = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!frozen.empty() && frozen[i]) continue;
    if (!std::isfinite(r[i])) return std::numeric_limits<double>::infinity();
    n = std::max(n, std::abs(r[i]));
  }
  return n;
}

namespace {

bool is_frozen(const MinimizeSpec& s, int i) { return !s.frozen.empty() && s.frozen[i]; }

void clamp(const MinimizeSpec& s, std::vector<double>& x) {
  for (int i = 0; i < s.dimension; ++i) {
    if (!s.lower.empty()) x[i] = std::max(x[i], s.lower[i]);
    if (!s.upper.empty()) x[i] = std::min(x[i], s.upper[i]);
  }
}

// Solves r_p(x with x[p] = v) = 0 for v. Returns false when no sign change
// could be bracketed.
bool solve_pinned(const ResidualFn& residuals, const MinimizeSpec& s, std::vector<double>& x) {
  const int p = s.pinned;
  auto g = [&](double v) {
    std::vector<double> y = x;
    y[p] = v;
    return residuals(y)[p];
  };
  double lo = s.pinned_lo, hi = s.pinned_hi;
  if (lo == hi) {
    x[p] = lo;
    return true;
  }
  double flo = g(lo), fhi = g(hi);
  for (int grow = 0; grow < 12 && flo * fhi > 0.0; ++grow) {
    const double w = hi - lo;
    if (flo > 0.0) {
      lo -= w;
      flo = g(lo);
    } else {
      hi += w;
      fhi = g(hi);
    }
  }
  if (flo == 0.0) {
    x[p] = lo;
    return true;
  }
  if (fhi == 0.0) {
    x[p] = hi;
    return true;
  }
  if (flo * fhi > 0.0 || !std::isfinite(flo) || !std::isfinite(fhi)) return false;
  std::uintmax_t iters = 200;
  auto tol = [](double a, double b) {
    return std::abs(b - a) <= 4e-16 * std::max({1.0, std::abs(a), std::abs(b)});
  };
  const auto bracket = boost::math::tools::toms748_solve(g, lo, hi, flo, fhi, tol, iters);
  const double glo = g(bracket.first);
  const double ghi = g(bracket.second);
  x[p] = std::abs(glo) <= std::abs(ghi) ? bracket.first : bracket.second;
  return true;
}

// Least-squares gamma = argmin |f - dF gamma| via regularized normal equations.
std::vector<double> anderson_coefficients(const std::vector<std::vector<double>>& dF,
                                          const std::vector<double>& f) {
  const std::size_t m = dF.size();
  std::vector<double> A(m * m), rhs(m);
  double trace = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      A[i * m + j] = std::inner_product(dF[i].begin(), dF[i].end(), dF[j].begin(), 0.0);
    }
    rhs[i] = std::inner_product(dF[i].begin(), dF[i].end(), f.begin(), 0.0);
    trace += A[i * m + i];
  }
  const double reg = 1e-12 * (trace > 0.0 ? trace : 1.0);
  for (std::size_t i = 0; i < m; ++i) A[i * m + i] += reg;
  // Gaussian elimination with partial pivoting.
  std::vector<double> g = rhs;
  for (std::size_t c = 0; c < m; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < m; ++r) {
      if (std::abs(A[r * m + c]) > std::abs(A[piv * m + c])) piv = r;
    }
    if (A[piv * m + c] == 0.0) return std::vector<double>(m, 0.0);
    if (piv != c) {
      for (std::size_t k = 0; k < m; ++k) std::swap(A[c * m + k], A[piv * m + k]);
      std::swap(g[c], g[piv]);
    }
    for (std::size_t r = c + 1; r < m; ++r) {
      const double factor = A[r * m + c] / A[c * m + c];
      for (std::size_t k = c; k < m; ++k) A[r * m + k] -= factor * A[c * m + k];
      g[r] -= factor * g[c];
    }
  }
  for (std::size_t c = m; c-- > 0;) {
    for (std::size_t k = c + 1; k < m; ++k) g[c] -= A[c * m + k] * g[k];
    g[c] /= A[c * m + c];
  }
  return g;
}

struct StageOne {
  std::vector<double> x;
  double value = std::numeric_limits<double>::quiet_NaN();
  double norm = std::numeric_limits<double>::infinity();
  MinStatus status = MinStatus::not_converged;
  int iterations = 0;
};

StageOne fixed_point(const ObjectiveFn& objective, const ResidualFn& residuals,
                     const MinimizeSpec& s, std::vector<double> x) {
  StageOne out;
  std::vector<int> soft;
  for (int i = 0; i < s.dimension; ++i) {
    if (!is_frozen(s, i) && i != s.pinned) soft.push_back(i);
  }
  const std::size_t ns = soft.size();
  std::vector<std::vector<double>> dX, dF;
  std::vector<double> x_prev, f_prev;
  double alpha = s.alpha;
  double best_norm = std::numeric_limits<double>::infinity();
  std::vector<double> best_x = x;
  int since_best = 0;
  int collapse_count = 0;
  double prev_value = std::numeric_limits<double>::quiet_NaN();
  bool pinned_ok = true;

  for (int it = 1; it <= s.max_iterations; ++it) {
    clamp(s, x);
    if (s.pinned >= 0) pinned_ok = solve_pinned(residuals, s, x);
    const std::vector<double> r = residuals(x);
    std::vector<bool> mask(s.dimension, false);
    for (int i = 0; i < s.dimension; ++i) mask[i] = is_frozen(s, i);
    const double norm = residual_norm(r, mask);
    out.iterations = it;

    if (!std::isfinite(norm) || (std::isfinite(best_norm) && norm > 1e3 * best_norm + 1.0)) {
      x = best_x;
      dX.clear();
      dF.clear();
      x_prev.clear();
      alpha = std::max(alpha * 0.5, s.alpha / 64.0);
      continue;
    }
    if (norm < best_norm) {
      best_norm = norm;
      best_x = x;
      since_best = 0;
    } else if (++since_best > 60) {
      dX.clear();
      dF.clear();
      x_prev.clear();
      alpha = std::max(alpha * 0.5, s.alpha / 64.0);
      since_best = 0;
    }

    if (s.tracked >= 0) {
      collapse_count = std::abs(x[s.tracked]) < s.collapse_threshold ? collapse_count + 1 : 0;
      if (collapse_count >= s.collapse_confirm) {
        out.x = x;
        out.norm = norm;
        out.value = objective(x);
        out.status = MinStatus::collapsed;
        return out;
      }
    }

    if (norm < 10.0 * s.residual_tol) {
      const double value = objective(x);
      if (norm < s.residual_tol && std::isfinite(prev_value) &&
          std::abs(value - prev_value) < s.objective_tol &&
          (s.tracked < 0 || collapse_count == 0)) {
        out.x = x;
        out.norm = norm;
        out.value = value;
        out.status = MinStatus::converged;
        return out;
      }
      prev_value = value;
    } else {
      prev_value = std::numeric_limits<double>::quiet_NaN();
    }

    std::vector<double> f(ns);
    for (std::size_t j = 0; j < ns; ++j) f[j] = -r[soft[j]];
    if (!pinned_ok && s.pinned >= 0) {
      x[s.pinned] -= alpha * r[s.pinned];
    }
    if (ns == 0) continue;

    std::vector<double> xs(ns);
    for (std::size_t j = 0; j < ns; ++j) xs[j] = x[soft[j]];
    if (!x_prev.empty()) {
      std::vector<double> dx(ns), df(ns);
      for (std::size_t j = 0; j < ns; ++j) {
        dx[j] = xs[j] - x_prev[j];
        df[j] = f[j] - f_prev[j];
      }
      dX.push_back(dx);
      dF.push_back(df);
      if (int(dX.size()) > s.anderson_depth) {
        dX.erase(dX.begin());
        dF.erase(dF.begin());
      }
    }
    x_prev = xs;
    f_prev = f;
    std::vector<double> next(ns);
    for (std::size_t j = 0; j < ns; ++j) next[j] = xs[j] + alpha * f[j];
    if (!dX.empty()) {
      const std::vector<double> gamma = anderson_coefficients(dF, f);
      for (std::size_t h = 0; h < dX.size(); ++h) {
        for (std::size_t j = 0; j < ns; ++j) next[j] -= gamma[h] * (dX[h][j] + alpha * dF[h][j]);
      }
    }
    for (std::size_t j = 0; j < ns; ++j) x[soft[j]] = next[j];
  }
  out.x = best_x;
  out.norm = best_norm;
  out.value = objective(best_x);
  out.status = MinStatus::not_converged;
  return out;
}

}  // namespace

NelderMeadResult nelder_mead(const ObjectiveFn& f, const std::vector<double>& x0,
                             const std::vector<int>& active, double step, int max_evaluations,
                             double ftol) {
  NelderMeadResult res;
  const std::size_t n = active.size();
  res.x = x0;
  res.value = f(x0);
  res.evaluations = 1;
  if (n == 0 || max_evaluations <= 1) return res;

  std::vector<std::vector<double>> simplex(n + 1, x0);
  std::vector<double> values(n + 1, res.value);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = active[i];
    simplex[i + 1][c] += step * std::max(1.0, std::abs(x0[c]));
    values[i + 1] = f(simplex[i + 1]);
    ++res.evaluations;
  }
  std::vector<std::size_t> order(n + 1);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  };
  auto along = [&](const std::vector<double>& centroid, const std::vector<double>& worst,
                   double coef) {
    std::vector<double> p = x0;
    for (int c : active) p[c] = centroid[c] + coef * (worst[c] - centroid[c]);
    return p;
  };

  while (res.evaluations < max_evaluations) {
    sort_simplex();
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
    if (values[worst] - values[best] <= ftol * (std::abs(values[best]) + 1e-30)) break;
    std::vector<double> centroid = x0;
    for (int c : active) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) sum += simplex[order[i]][c];
      centroid[c] = sum / double(n);
    }
    const std::vector<double> xr = along(centroid, simplex[worst], -1.0);
    const double fr = f(xr);
    ++res.evaluations;
    if (fr < values[best]) {
      const std::vector<double> xe = along(centroid, simplex[worst], -2.0);
      const double fe = f(xe);
      ++res.evaluations;
      if (fe < fr) {
        simplex[worst] = xe;
        values[worst] = fe;
      } else {
        simplex[worst] = xr;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = xr;
      values[worst] = fr;
      continue;
    }
    const bool outside = fr < values[worst];
    const std::vector<double> xc = along(centroid, outside ? xr : simplex[worst], 0.5);
    const double fc = f(xc);
    ++res.evaluations;
    if (fc < (outside ? fr : values[worst])) {
      simplex[worst] = xc;
      values[worst] = fc;
      continue;
    }
    for (std::size_t i = 1; i <= n; ++i) {
      const std::size_t k = order[i];
      for (int c : active) simplex[k][c] = simplex[best][c] + 0.5 * (simplex[k][c] - simplex[best][c]);
      values[k] = f(simplex[k]);
      ++res.evaluations;
    }
  }
  sort_simplex();
  if (values[order.front()] < res.value) {
    res.x = simplex[order.front()];
    res.value = values[order.front()];
  }
  return res;
}

MinimizeResult minimize(const ObjectiveFn& objective, const ResidualFn& residuals,
                        const MinimizeSpec& spec) {
  spec.validate();
  MinimizeResult result;
  std::vector<int> active;
  for (int i = 0; i < spec.dimension; ++i) {
    if (!is_frozen(spec, i)) active.push_back(i);
  }
  for (const auto& seed : spec.seeds) {
    StageOne stage = fixed_point(objective, residuals, spec, seed);
    SeedOutcome outcome;
    for (int round = 0; spec.polish && round < spec.polish_rounds &&
                        stage.status == MinStatus::converged;
         ++round) {
      const NelderMeadResult nm = nelder_mead(objective, stage.x, active, spec.polish_step,
                                              spec.polish_max_evaluations);
      if (!(nm.value < stage.value - spec.polish_improvement)) break;
      outcome.polish_moved = true;
      StageOne again = fixed_point(objective, residuals, spec, nm.x);
      if (again.status == MinStatus::collapsed ||
          (again.status == MinStatus::converged && again.value < stage.value)) {
        stage = again;
      } else {
        break;
      }
    }
    outcome.x = stage.x;
    outcome.value = stage.value;
    outcome.residual_norm = stage.norm;
    outcome.status = stage.status;
    outcome.iterations = stage.iterations;
    result.seeds.push_back(outcome);
  }

  auto pick = [&](MinStatus wanted, bool by_norm) {
    int best = -1;
    for (std::size_t i = 0; i < result.seeds.size(); ++i) {
      const SeedOutcome& s = result.seeds[i];
      if (s.status != wanted) continue;
      if (best < 0) {
        best = int(i);
        continue;
      }
      const SeedOutcome& b = result.seeds[best];
      const bool better = by_norm ? s.residual_norm < b.residual_norm : s.value < b.value;
      if (better) best = int(i);
    }
    return best;
  };
  int best = pick(MinStatus::converged, false);
  if (best < 0) best = pick(MinStatus::collapsed, false);
  if (best < 0) best = pick(MinStatus::not_converged, true);
  if (best < 0) best = 0;
  const SeedOutcome& chosen = result.seeds[best];
  result.best_seed = best;
  result.x = chosen.x;
  result.value = chosen.value;
  result.residual_norm = chosen.residual_norm;
  result.status = chosen.status;
  return result;
}

}  // namespace cdwmf
