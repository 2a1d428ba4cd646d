#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace cdwmf {

/// Dimensionless momentum (lattice constant 1).
struct Momentum {
  double k1 = 0.0;
  double k2 = 0.0;
};

enum class GridKind { full_bz, half_bz, antinodal };

/// Taylor-expanded saddle bands or the exact tight-binding band shifted to
/// the saddle point. One choice is used consistently within a solve.
enum class BandChoice { taylor, full };

/// Antinodal flavor. The numeric value is the sign r in the band relation.
enum class Flavor : int { plus = 1, minus = -1 };

/// Finite set of momenta with a uniform weight.
///
/// Ordering is row-major in the integer labels and is part of the contract:
/// every k-sum in the library walks `points` front to back, which makes
/// results bit-reproducible.
struct MomentumGrid {
  GridKind kind = GridKind::full_bz;
  std::vector<Momentum> points;
  /// Integer labels: (n1, n2) for lattice grids, (n+, n-) for antinodal grids.
  std::vector<std::array<int, 2>> labels;
  /// Linear system size. Not an integer for antinodal grids.
  double L = 0.0;
  /// 1/L^2.
  double weight = 0.0;

  std::size_t size() const { return points.size(); }
};

/// Full Brillouin zone, k_j = 2pi/L (n_j + 1/2) in (-pi, pi). Requires L even and >= 2.
MomentumGrid build_bz(int L);

/// The half zone k1 > 0. Each point k pairs with k + (pi, pi) (mod 2pi) in
/// the other half.
MomentumGrid build_half_bz(int L);

/// Antinodal region in rotated coordinates: k1 +- k2 = (2 sqrt2 pi / L)(n+- + 1/2)
/// with |k1 +- k2| <= kappa pi. Holds (kappa L)^2 / 2 points. The per-axis
/// count kappa L / sqrt2 must be an even integer.
MomentumGrid build_antinodal_grid(double L, double kappa);

/// Per-axis count and system size for a target number of antinodal momenta.
struct AntinodalSize {
  int per_axis = 0;  ///< even integer closest to sqrt(target)
  double L = 0.0;    ///< sqrt2 * per_axis / kappa
  int count() const { return per_axis * per_axis; }
  double effective_kappa_L() const { return 1.4142135623730951 * per_axis; }
};

/// Resolves the system size from a momentum-count target (6400 by default in
/// the tools). The per-axis count is rounded to the nearest even integer.
AntinodalSize antinodal_size_for_count(int target_count, double kappa);

/// Tight-binding band -2t(cos k1 + cos k2) - 4t' cos k1 cos k2.
double eps(const Momentum& k, double t, double t_prime);

/// Antinodal band measured from its saddle point, E_r(0) = 0.
///
/// Taylor: r t (k1^2 - k2^2) - 2t'(k1^2 + k2^2).
/// Full:   eps(S_r + k) - eps(S_r), where S_+ = (0, pi) and S_- = (pi, 0) are
///         the saddle points whose expansion reproduces the Taylor form.
double band_antinodal(Flavor r, const Momentum& k, double t, double t_prime, BandChoice choice);

/// Interaction vertex u(p) = cos p1 + cos p2.
double vertex(const Momentum& p);

/// u_{1,2} = cos k1 +- cos k2, u_{3,4} = sin k1 +- sin k2.
/// u(k - k') = 1/2 sum_j u_j(k) u_j(k'), and u_j(k + (pi,pi)) = -u_j(k).
std::array<double, 4> vertex_basis(const Momentum& k);

/// k + (pi, pi) folded back into (-pi, pi].
Momentum shift_by_nesting(const Momentum& k);

}  // namespace cdwmf
