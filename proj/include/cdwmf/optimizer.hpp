#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace cdwmf {

/// r(x) = x - G(x) where G is the self-consistency map. Stationary points of
/// the objective are exactly the zeros of r.
using ResidualFn = std::function<std::vector<double>(const std::vector<double>&)>;
using ObjectiveFn = std::function<double(const std::vector<double>&)>;

struct MinimizeSpec {
  int dimension = 0;
  std::vector<double> lower;  ///< box bounds, empty means unbounded
  std::vector<double> upper;
  /// Frozen coordinates keep their seed value (e.g. Delta = 0 for the N branch).
  std::vector<bool> frozen;

  /// Optional stiff coordinate solved exactly by a bracketed root of its own
  /// residual in every sweep. The residual must change sign on the bracket.
  int pinned = -1;
  double pinned_lo = 0.0;
  double pinned_hi = 0.0;

  /// Optional coordinate whose collapse to zero ends the seed.
  int tracked = -1;
  double collapse_threshold = 1e-6;
  int collapse_confirm = 10;

  std::vector<std::vector<double>> seeds;

  double alpha = 0.5;
  int anderson_depth = 5;
  double residual_tol = 1e-8;
  double objective_tol = 1e-10;
  int max_iterations = 3000;

  bool polish = true;
  int polish_max_evaluations = 400;
  double polish_step = 1e-3;
  double polish_improvement = 1e-12;
  int polish_rounds = 2;

  /// Throws std::invalid_argument when inconsistent.
  void validate() const;
};

enum class MinStatus { converged, collapsed, not_converged };

std::string to_string(MinStatus s);

struct SeedOutcome {
  std::vector<double> x;
  double value = std::numeric_limits<double>::quiet_NaN();
  double residual_norm = std::numeric_limits<double>::infinity();
  MinStatus status = MinStatus::not_converged;
  int iterations = 0;
  bool polish_moved = false;
};

struct MinimizeResult {
  std::vector<double> x;
  double value = std::numeric_limits<double>::quiet_NaN();
  double residual_norm = std::numeric_limits<double>::infinity();
  MinStatus status = MinStatus::not_converged;
  int best_seed = -1;
  std::vector<SeedOutcome> seeds;
};

/// Two stages per seed: damped Anderson-accelerated fixed-point iteration on
/// the self-consistency map, then a Nelder-Mead polish of the objective. A
/// polish that lowers the objective restarts the fixed-point stage from the
/// polished point. The result is the converged seed with the lowest value,
/// ties broken by seed index.
MinimizeResult minimize(const ObjectiveFn& objective, const ResidualFn& residuals,
                        const MinimizeSpec& spec);

/// Max-abs norm of r over the non-frozen coordinates.
double residual_norm(const std::vector<double>& r, const std::vector<bool>& frozen);

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
};

/// Plain Nelder-Mead over the coordinates listed in `active`. Never returns a
/// value above f(x0).
NelderMeadResult nelder_mead(const ObjectiveFn& f, const std::vector<double>& x0,
                             const std::vector<int>& active, double step, int max_evaluations,
                             double ftol = 1e-15);

}  // namespace cdwmf
