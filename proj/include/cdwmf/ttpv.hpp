#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cdwmf/hf_kernel.hpp"
#include "cdwmf/lattice.hpp"
#include "cdwmf/optimizer.hpp"

namespace cdwmf {

/// Couplings of the t-t'-V model. Validated on construction of a TtpvModel.
struct TtpvParams {
  double t = 1.0;
  double t_prime = 0.0;
  double V = 4.0;
  double mu = 0.0;
  double beta = 1e5;
  int L = 100;

  /// Throws std::invalid_argument naming the violated range.
  void validate() const;
};

/// HF potential parameters q_0..q_4, m_0..m_4. The restricted form keeps
/// only q_0, q_1 and Delta = m_0.
struct VariationalAnsatz {
  std::array<double, 5> q{};
  std::array<double, 5> m{};
  bool restricted = true;

  static VariationalAnsatz restricted_form(double q0, double q1, double delta);
  double delta() const { return m[0]; }
  /// max(|q2|, |q3|, |q4|, |m1|, ..., |m4|).
  double restriction_violation() const;
};

struct OrderParameters {
  std::array<double, 5> n{};
  std::array<double, 5> n_tilde{};
};

enum class Branch { N, CDW };
enum class SolveStatus { converged, collapsed, not_converged };

std::string to_string(Branch b);
std::string to_string(SolveStatus s);

struct MfSolution {
  VariationalAnsatz ansatz;
  double omega_per_site = 0.0;
  double nu = 0.0;
  double gap = 0.0;  ///< 2|Delta|
  Branch branch = Branch::N;
  double residual_norm = 0.0;
  bool converged = false;
  SolveStatus status = SolveStatus::not_converged;
  int iterations = 0;
};

struct SolveOptions {
  /// Add the default seed set to a caller-supplied seed.
  bool multistart = true;
  int extra_seeds = 7;
  unsigned rng_seed = 20151;
  double residual_tol = 1e-8;
  double objective_tol = 1e-10;
  int max_iterations = 3000;
  bool polish = true;
};

/// Band data on the half zone for one (L, t, t') triple, shared between
/// models that differ only in V, mu or beta.
struct TtpvBands {
  int L = 0;
  double t = 0.0;
  double t_prime = 0.0;
  double weight = 0.0;  ///< 1/L^2
  MomentumGrid half;
  std::vector<double> eps;    ///< eps(k)
  std::vector<double> eps_q;  ///< eps(k + (pi, pi))
  std::vector<std::array<double, 4>> u;
  // Points with identical (eps, eps_q, u_1) merged with a multiplicity; the
  // restricted ansatz sees the k-dependence only through these.
  std::vector<double> g_eps, g_eps_q, g_u1, g_mult;
};

std::shared_ptr<const TtpvBands> ttpv_bands(int L, double t, double t_prime);

class TtpvModel {
 public:
  explicit TtpvModel(const TtpvParams& params);

  const TtpvParams& params() const { return params_; }
  const TtpvBands& bands() const { return *bands_; }
  /// Same lattice and couplings at another chemical potential or temperature.
  TtpvModel with_mu(double mu) const;
  TtpvModel with_beta(double beta) const;

  Block2 assemble_block(const Momentum& k, const VariationalAnsatz& a) const;
  OrderParameters order_parameters(const VariationalAnsatz& a) const;
  double omega_hf(const VariationalAnsatz& a) const;
  /// (q0 - 2V n0, q1..4 + V/2 n1..4, m0 + 2V nt0, m1..4 + V/2 nt1..4).
  std::array<double, 10> gap_residuals(const VariationalAnsatz& a) const;
  double filling(const VariationalAnsatz& a) const;

  MfSolution solve_branch(Branch branch, const std::optional<VariationalAnsatz>& seed = {},
                          const SolveOptions& options = {}) const;

  /// Multistart minimization over all ten parameters.
  MinimizeResult minimize_full(const std::vector<VariationalAnsatz>& seeds,
                               const SolveOptions& options = {}) const;

 private:
  struct Sums {
    OrderParameters op;
    double e_hfg = 0.0;
  };
  Sums evaluate(const VariationalAnsatz& a, bool with_energy) const;
  double omega_from(const VariationalAnsatz& a, const Sums& s) const;

  TtpvParams params_;
  std::shared_ptr<const TtpvBands> bands_;
};

Block2 assemble_block(const Momentum& k, const TtpvParams& p, const VariationalAnsatz& a);
OrderParameters order_parameters(const TtpvParams& p, const VariationalAnsatz& a);
double omega_hf(const TtpvParams& p, const VariationalAnsatz& a);
std::array<double, 10> gap_residuals(const TtpvParams& p, const VariationalAnsatz& a);
double filling(const TtpvParams& p, const VariationalAnsatz& a);
MfSolution solve_branch(const TtpvParams& p, Branch branch,
                        const std::optional<VariationalAnsatz>& seed = {},
                        const SolveOptions& options = {});

struct RestrictedCheckEntry {
  double mu = 0.0;
  VariationalAnsatz best;
  double omega_best = 0.0;
  double omega_restricted_cdw = 0.0;
  double omega_restricted_n = 0.0;
  double violation = 0.0;  ///< restriction_violation() of the best minimum
  bool satisfied = false;
  /// Lowest stationary point reached from a DDW-type seed (m_2 large).
  double omega_ddw_seed = 0.0;
  bool ddw_below_cdw = false;
};

struct RestrictedCheckReport {
  std::vector<RestrictedCheckEntry> entries;
  bool all_satisfied = true;
};

/// Multistart over the full ansatz at each mu; a best minimum that leaves the
/// restricted subspace is reported, not thrown.
RestrictedCheckReport verify_restricted_minimum(const TtpvParams& p, const std::vector<double>& mus,
                                                double tol = 1e-6);

}  // namespace cdwmf
