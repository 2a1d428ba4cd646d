#pragma once

#include <cmath>
#include <complex>

namespace cdwmf {

/// Hermitian 2x2 block [[a_plus, b], [conj(b), a_minus]].
struct Block2 {
  double a_plus = 0.0;
  double a_minus = 0.0;
  std::complex<double> b{};
};

struct BlockSpectrum {
  double e_plus = 0.0;
  double e_minus = 0.0;
  double a0 = 0.0;
  double a1 = 0.0;
  double W = 0.0;
};

/// Thermal one-particle density matrix of a block. theta is the diagonal
/// entry for the a_plus state, theta_bar for a_minus, theta_tilde the
/// off-diagonal entry.
struct BlockOccupation {
  double theta = 0.0;
  double theta_bar = 0.0;
  std::complex<double> theta_tilde{};
};

/// Below this W the eigenvalues are treated as degenerate.
inline constexpr double degenerate_W = 1e-14;

/// 1/(exp(beta x) + 1). Throws std::invalid_argument for beta <= 0.
double fermi(double x, double beta);

/// (1/beta) ln(1 + exp(-beta x)), evaluated without overflow.
double grand_term(double x, double beta);

BlockSpectrum spectrum(const Block2& block);

BlockOccupation occupation(const Block2& block, double beta);

namespace detail {

// Unchecked variants used in the hot k-sums; beta is validated once per solve.
inline double fermi_fast(double x, double beta) {
  const double y = beta * x;
  if (y > 700.0) return 0.0;
  if (y < -700.0) return 1.0;
  if (y >= 0.0) {
    const double e = std::exp(-y);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(y));
}

inline double grand_term_fast(double x, double beta) {
  const double y = beta * x;
  if (y > 700.0) return 0.0;
  if (y >= 0.0) return std::log1p(std::exp(-y)) / beta;
  if (y < -700.0) return -x;
  return -x + std::log1p(std::exp(y)) / beta;
}

// (f(e+) - f(e-)) / (2W), zero in the degenerate limit.
inline double split_ratio(double fp, double fm, double W) {
  return W < degenerate_W ? 0.0 : (fp - fm) / (2.0 * W);
}

}  // namespace detail

}  // namespace cdwmf
