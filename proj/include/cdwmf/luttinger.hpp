#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdwmf/lattice.hpp"
#include "cdwmf/optimizer.hpp"
#include "cdwmf/ttpv.hpp"

namespace cdwmf {

/// Raised when the linear equation for the nodal Fermi point has a
/// vanishing coefficient.
struct DegenerateGeometry : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LuttParams {
  double t = 1.0;
  double t_prime = 0.0;
  double V = 4.0;
  double beta = 1e5;
  double kappa = 0.8;
  double Q = 0.45 * 3.14159265358979323846;
  BandChoice band = BandChoice::taylor;
  int antinodal_count = 6400;

  /// Throws std::invalid_argument naming the failed clause.
  void validate() const;
  /// Q = pi/2, where extra back-scattering terms are not modeled.
  bool q_in_warning_zone() const;
};

struct DerivedCouplings {
  double g_eff = 0.0;
  double g_a = 0.0;
  double v_F = 0.0;
};

DerivedCouplings derived_couplings(const LuttParams& p);

struct NodalState {
  double tQ = 0.0;  ///< nodal Fermi point, in radians
  double C = 0.0;
  double nu = 0.0;  ///< total filling
  double mu = 0.0;
  double mu_a = 0.0;
  bool tQ_in_window = true;
};

/// Closed-form solve of the nodal Fermi-point condition at given mu and
/// antinodal filling. Throws DegenerateGeometry if the equation is singular.
NodalState solve_tQ(const LuttParams& p, double mu, double nu_a);

/// Energy constants per site. The nodal constant is left out (set to 0).
struct EnergyConstants {
  double e_kin = 0.0;
  double e_1 = 0.0;
  double e_int = 0.0;
  double total() const { return e_kin + e_1 + e_int; }
};

EnergyConstants energy_constants(const LuttParams& p, double mu, double tQ, double nu_a, double nu);

/// Antinodal order parameters, all normalized by L^2. n0 = kappa^2 nu_a.
struct AntinodalOrder {
  double n0 = 0.0;
  double n1 = 0.0;
  double nt0 = 0.0;
};

/// Restricted antinodal ansatz (q0, q1, Delta).
struct AntinodalAnsatz {
  double q0 = 0.0;
  double q1 = 0.0;
  double delta = 0.0;
};

enum class OuterLoop {
  joint,   ///< nu_a solved together with the gap equations
  damped,  ///< nested loop with damped nu_a updates
};

struct LuttSolveOptions {
  OuterLoop loop = OuterLoop::joint;
  std::optional<AntinodalAnsatz> seed;
  std::optional<double> nu_a_seed;
  bool multistart = true;
  int extra_seeds = 7;
  unsigned rng_seed = 20152;
  double residual_tol = 1e-8;
  double objective_tol = 1e-10;
  double nu_a_tol = 1e-8;
  int max_iterations = 3000;
  int max_outer = 500;
  double outer_alpha = 0.5;
  bool polish = true;
};

struct LuttSolution {
  AntinodalAnsatz ansatz;
  Branch branch = Branch::N;
  SolveStatus status = SolveStatus::not_converged;
  bool converged = false;
  double omega_antinodal_per_site = 0.0;
  double omega_total_per_site = 0.0;
  double nu_a = 0.0;
  double nu_total = 0.0;
  double gap = 0.0;  ///< 2|Delta|
  double residual_norm = 0.0;
  double nu_a_change = 0.0;  ///< |nu_a' - nu_a| at exit
  int iterations = 0;
  int outer_iterations = 0;
  NodalState nodal;
  EnergyConstants constants;
  DerivedCouplings couplings;
};

struct AntinodalGrid {
  double L = 0.0;
  int per_axis = 0;
  double weight = 0.0;
  MomentumGrid grid;
  std::vector<double> e_plus, e_minus;
  // Points with identical (E+, E-) merged with a multiplicity.
  std::vector<double> g_plus, g_minus, g_mult;
};

std::shared_ptr<const AntinodalGrid> antinodal_bands(const LuttParams& p);

class LuttingerModel {
 public:
  explicit LuttingerModel(const LuttParams& params);

  const LuttParams& params() const { return params_; }
  const DerivedCouplings& couplings() const { return couplings_; }
  const AntinodalGrid& grid() const { return *grid_; }
  double kappa2() const { return params_.kappa * params_.kappa; }
  LuttingerModel with_Q(double Q) const;
  LuttingerModel with_beta(double beta) const;

  Block2 assemble_block(std::size_t i, double mu_a, const AntinodalAnsatz& a) const;
  AntinodalOrder order_parameters(double mu_a, const AntinodalAnsatz& a) const;
  /// Antinodal grand potential per site, without the energy constants.
  double omega_antinodal(double mu_a, const AntinodalAnsatz& a) const;
  /// nu_a = n0 / kappa^2.
  double antinodal_filling(double mu_a, const AntinodalAnsatz& a) const;

  /// Minimizes the antinodal potential at fixed mu_a.
  MfSolution solve_inner(double mu_a, Branch branch, const std::optional<AntinodalAnsatz>& seed,
                         const LuttSolveOptions& options) const;

  LuttSolution self_consistent_point(double mu, Branch branch,
                                     const LuttSolveOptions& options = {}) const;

  /// Total potential and filling for an ansatz and nu_a, without solving.
  LuttSolution assemble(double mu, Branch branch, const AntinodalAnsatz& a, double nu_a) const;

 private:
  struct Sums {
    AntinodalOrder op;
    double e_hfg = 0.0;
  };
  Sums evaluate(double mu_a, const AntinodalAnsatz& a, bool with_energy) const;

  LuttParams params_;
  DerivedCouplings couplings_;
  std::shared_ptr<const AntinodalGrid> grid_;
};

double omega_antinodal(const LuttParams& p, double mu_a, const AntinodalAnsatz& a);
LuttSolution self_consistent_point(const LuttParams& p, double mu, Branch branch,
                                   const LuttSolveOptions& options = {});

struct FixQStep {
  double Q = 0.0;
  double tQ = 0.0;
};

struct FixQResult {
  double Q = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string failure;  ///< empty on success
  std::vector<FixQStep> trace;
};

/// Iterates Q <- tQ(Q) until |Q_{n+1} - Q_n| < tol. The map is supplied by
/// the caller so it can run a single point or a full boundary search.
FixQResult fix_Q(const LuttParams& p, const std::function<double(double Q)>& tq_of_Q, double Q0,
                 double tol = 1e-8, int max_steps = 200);

/// Fixed-mu variant: tQ comes from the self-consistent point of `branch`.
FixQResult fix_Q(const LuttParams& p, double mu, Branch branch, double Q0, double tol = 1e-8,
                 int max_steps = 200);

}  // namespace cdwmf
