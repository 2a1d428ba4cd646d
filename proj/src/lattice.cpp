#include "cdwmf/lattice.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cdwmf {

namespace {

constexpr double pi = std::numbers::pi;

void require_even_size(int L) {
  if (L < 2 || L % 2 != 0) {
    throw std::invalid_argument("lattice size L must be a positive even integer, got " +
                                std::to_string(L));
  }
}

}  // namespace

MomentumGrid build_bz(int L) {
  require_even_size(L);
  MomentumGrid grid;
  grid.kind = GridKind::full_bz;
  grid.L = L;
  grid.weight = 1.0 / (double(L) * L);
  grid.points.reserve(std::size_t(L) * L);
  grid.labels.reserve(std::size_t(L) * L);
  const double dk = 2.0 * pi / L;
  const int half = L / 2;
  for (int n1 = -half; n1 < half; ++n1) {
    for (int n2 = -half; n2 < half; ++n2) {
      grid.points.push_back({dk * (n1 + 0.5), dk * (n2 + 0.5)});
      grid.labels.push_back({n1, n2});
    }
  }
  return grid;
}

MomentumGrid build_half_bz(int L) {
  require_even_size(L);
  MomentumGrid grid;
  grid.kind = GridKind::half_bz;
  grid.L = L;
  grid.weight = 1.0 / (double(L) * L);
  grid.points.reserve(std::size_t(L) * L / 2);
  grid.labels.reserve(std::size_t(L) * L / 2);
  const double dk = 2.0 * pi / L;
  const int half = L / 2;
  for (int n1 = 0; n1 < half; ++n1) {
    for (int n2 = -half; n2 < half; ++n2) {
      grid.points.push_back({dk * (n1 + 0.5), dk * (n2 + 0.5)});
      grid.labels.push_back({n1, n2});
    }
  }
  return grid;
}

MomentumGrid build_antinodal_grid(double L, double kappa) {
  if (!(kappa > 0.0 && kappa <= 1.0)) {
    throw std::invalid_argument("kappa must lie in (0, 1], got " + std::to_string(kappa));
  }
  if (!(L > 0.0)) throw std::invalid_argument("antinodal grid needs L > 0");
  const double per_axis_real = kappa * L / std::numbers::sqrt2;
  const long per_axis = std::lround(per_axis_real);
  if (std::abs(per_axis_real - double(per_axis)) > 1e-9 * std::max(1.0, per_axis_real) ||
      per_axis < 2 || per_axis % 2 != 0) {
    throw std::invalid_argument("kappa L / sqrt2 must be an even integer, got " +
                                std::to_string(per_axis_real));
  }
  MomentumGrid grid;
  grid.kind = GridKind::antinodal;
  grid.L = L;
  grid.weight = 1.0 / (L * L);
  const int m = int(per_axis);
  grid.points.reserve(std::size_t(m) * m);
  grid.labels.reserve(std::size_t(m) * m);
  // k+- = (k1 +- k2)/sqrt2 = 2pi/L (n+- + 1/2)
  const double dk = 2.0 * pi / L;
  for (int np = -m / 2; np < m / 2; ++np) {
    for (int nm = -m / 2; nm < m / 2; ++nm) {
      const double kp = dk * (np + 0.5);
      const double km = dk * (nm + 0.5);
      grid.points.push_back({(kp + km) / std::numbers::sqrt2, (kp - km) / std::numbers::sqrt2});
      grid.labels.push_back({np, nm});
    }
  }
  return grid;
}

AntinodalSize antinodal_size_for_count(int target_count, double kappa) {
  if (target_count < 4) throw std::invalid_argument("antinodal count must be >= 4");
  if (!(kappa > 0.0 && kappa <= 1.0)) {
    throw std::invalid_argument("kappa must lie in (0, 1], got " + std::to_string(kappa));
  }
  const double root = std::sqrt(double(target_count));
  int per_axis = 2 * int(std::lround(root / 2.0));
  if (per_axis < 2) per_axis = 2;
  return {per_axis, std::numbers::sqrt2 * per_axis / kappa};
}

double eps(const Momentum& k, double t, double t_prime) {
  const double c1 = std::cos(k.k1);
  const double c2 = std::cos(k.k2);
  return -2.0 * t * (c1 + c2) - 4.0 * t_prime * c1 * c2;
}

double band_antinodal(Flavor r, const Momentum& k, double t, double t_prime, BandChoice choice) {
  const double sign = static_cast<int>(r);
  if (choice == BandChoice::taylor) {
    const double a = k.k1 * k.k1;
    const double b = k.k2 * k.k2;
    return sign * t * (a - b) - 2.0 * t_prime * (a + b);
  }
  const Momentum saddle = r == Flavor::plus ? Momentum{0.0, pi} : Momentum{pi, 0.0};
  return eps({saddle.k1 + k.k1, saddle.k2 + k.k2}, t, t_prime) - eps(saddle, t, t_prime);
}

double vertex(const Momentum& p) { return std::cos(p.k1) + std::cos(p.k2); }

std::array<double, 4> vertex_basis(const Momentum& k) {
  const double c1 = std::cos(k.k1), c2 = std::cos(k.k2);
  const double s1 = std::sin(k.k1), s2 = std::sin(k.k2);
  return {c1 + c2, c1 - c2, s1 + s2, s1 - s2};
}

Momentum shift_by_nesting(const Momentum& k) {
  auto fold = [](double x) {
    x += pi;
    if (x > pi) x -= 2.0 * pi;
    return x;
  };
  return {fold(k.k1), fold(k.k2)};
}

}  // namespace cdwmf
