#pragma once

#include <string>
#include <vector>

#include "cdwmf/luttinger.hpp"
#include "cdwmf/ttpv.hpp"

namespace cdwmf {

struct CheckItem {
  std::string suite;
  std::string name;
  double measured = 0.0;  ///< worst error seen
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

struct CheckReport {
  std::vector<CheckItem> items;
  bool passed() const;
  int failures() const;
};

/// One parameter set for each model, used by the selfcheck command.
struct CannedSet {
  std::string name;
  TtpvParams ttpv;          ///< mu included
  LuttParams lutt;
  double lutt_tQ = 0.0;     ///< nodal point used to place mu for the Luttinger checks
  Branch lutt_branch = Branch::CDW;
};

std::vector<CannedSet> canned_sets();

/// mu at which solve_tQ gives the requested tQ for a given nu_a.
double mu_for_tQ(const LuttParams& p, double tQ, double nu_a);

/// Central-difference check of d(E_a/L^2)/dmu = -nu + kappa^2 nu_a dmu_a/dmu
/// along the self-consistent nu_a(mu). Relative error.
CheckItem check_energy_consistency(const LuttParams& p, double mu, Branch branch,
                                   double delta_mu = 1e-5, double tol = 1e-4);

/// Omega(t, -t', V, 2V - mu) - Omega(t, t', V, mu) = mu - V per site and the
/// fillings add to 1, both for the lower of the two branches. At V = 0 this is
/// the free-fermion identity Omega(-t', -mu) = Omega(t', mu) + mu.
CheckItem check_particle_hole(const TtpvParams& p, double tol = 1e-6);

/// Closed-form E_kin against two-dimensional Gauss-Kronrod quadrature of the
/// filled nodal and fully occupied s = 2 regions.
CheckItem check_kinetic_quadrature(const LuttParams& p, double tQ, double tol = 1e-8);

/// Randomized 2x2 blocks: occupations in [0, 1], trace and determinant of
/// the density matrix against Fermi factors, idempotency as beta grows.
CheckItem check_kernel_invariants(unsigned seed, int n_blocks = 200, double tol = 1e-12);

/// Kinetic quadrature integrals on their own, for reuse in tests.
double kinetic_quadrature(const LuttParams& p, double tQ);

CheckReport run_selfcheck(const std::vector<CannedSet>& sets);

}  // namespace cdwmf
