#include "cdwmf/hf_kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace cdwmf {

namespace {

void check_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("inverse temperature beta must be positive and finite");
  }
}

}  // namespace

double fermi(double x, double beta) {
  check_beta(beta);
  return detail::fermi_fast(x, beta);
}

double grand_term(double x, double beta) {
  check_beta(beta);
  return detail::grand_term_fast(x, beta);
}

BlockSpectrum spectrum(const Block2& block) {
  BlockSpectrum s;
  s.a0 = 0.5 * (block.a_plus + block.a_minus);
  s.a1 = 0.5 * (block.a_plus - block.a_minus);
  s.W = std::hypot(s.a1, std::abs(block.b));
  s.e_plus = s.a0 + s.W;
  s.e_minus = s.a0 - s.W;
  return s;
}

BlockOccupation occupation(const Block2& block, double beta) {
  check_beta(beta);
  const BlockSpectrum s = spectrum(block);
  const double fp = detail::fermi_fast(s.e_plus, beta);
  const double fm = detail::fermi_fast(s.e_minus, beta);
  const double r = detail::split_ratio(fp, fm, s.W);
  BlockOccupation o;
  o.theta = 0.5 * (fp + fm) + s.a1 * r;
  o.theta_bar = 0.5 * (fp + fm) - s.a1 * r;
  o.theta_tilde = block.b * r;
  return o;
}

}  // namespace cdwmf
