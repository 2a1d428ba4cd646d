#pragma once

#include <array>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cdwmf/luttinger.hpp"
#include "cdwmf/ttpv.hpp"

namespace cdwmf {

enum class PhaseLabel { CDW, N, MIXED, NONE };
std::string to_string(PhaseLabel p);

inline constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

/// One branch solve reduced to what the phase analysis needs.
struct BranchPoint {
  double mu = 0.0;
  Branch branch = Branch::N;
  SolveStatus status = SolveStatus::not_converged;
  double omega = nan_value;
  double nu = nan_value;
  double gap = 0.0;
  double nu_a = nan_value;
  double tQ = nan_value;
  double residual = 0.0;
  std::array<double, 3> state{};  ///< (q0, q1, Delta), used for warm starts
  bool converged() const { return status == SolveStatus::converged; }
};

/// Uniform view of the two solvers.
class BranchModel {
 public:
  virtual ~BranchModel() = default;
  virtual std::string kind() const = 0;
  virtual double energy_scale() const = 0;
  virtual std::pair<double, double> default_mu_range() const = 0;
  virtual BranchPoint solve(double mu, Branch branch, const BranchPoint* warm,
                            bool multistart) const = 0;
};

class TtpvBranchModel : public BranchModel {
 public:
  explicit TtpvBranchModel(const TtpvParams& p, SolveOptions options = {});
  std::string kind() const override { return "ttpv"; }
  double energy_scale() const override { return model_.params().t; }
  std::pair<double, double> default_mu_range() const override;
  BranchPoint solve(double mu, Branch branch, const BranchPoint* warm,
                    bool multistart) const override;
  const TtpvModel& model() const { return model_; }

 private:
  TtpvModel model_;
  SolveOptions options_;
};

class LuttBranchModel : public BranchModel {
 public:
  explicit LuttBranchModel(const LuttParams& p, LuttSolveOptions options = {});
  std::string kind() const override { return "luttinger"; }
  double energy_scale() const override { return model_.params().t; }
  std::pair<double, double> default_mu_range() const override;
  BranchPoint solve(double mu, Branch branch, const BranchPoint* warm,
                    bool multistart) const override;
  const LuttingerModel& model() const { return model_; }

 private:
  LuttingerModel model_;
  LuttSolveOptions options_;
};

struct MuScan {
  std::vector<double> mu;
  std::vector<BranchPoint> normal;
  std::vector<BranchPoint> cdw;
};

struct ScanOptions {
  int cold_every = 10;
};

/// Both branches on a uniform mu grid with warm-start continuation and a
/// cold multistart every `cold_every` points.
MuScan scan_mu(const BranchModel& model, double mu_min, double mu_max, int n_points,
               const ScanOptions& options = {});

enum class TransitionKind { first_order, continuous };
std::string to_string(TransitionKind k);

struct Crossing {
  double mu = 0.0;
  TransitionKind kind = TransitionKind::first_order;
  bool cdw_above = true;  ///< CDW is the stable phase just above mu
  double nu_cdw = nan_value;
  double nu_n = nan_value;
  double gap_cdw = 0.0;
  double omega_diff = 0.0;  ///< Omega_CDW - Omega_N at the CDW end of the final bracket
  double nu_a_cdw = nan_value;
  double nu_a_n = nan_value;
  double tQ_cdw = nan_value;
  double tQ_n = nan_value;
  double Q = nan_value;  ///< Luttinger nodal point used, when fixed per boundary
  double bracket_width = 0.0;
  int bisection_steps = 0;
  BranchPoint cdw_point;
  BranchPoint n_point;
};

/// Crossings ordered by mu. A crossing with cdw_above = true starts a CDW
/// interval (mu_1 type), one with cdw_above = false ends it (mu_2 type).
struct BoundarySet {
  std::vector<Crossing> crossings;
  PhaseLabel below = PhaseLabel::N;  ///< stable phase at the low-mu end of the scan
  bool n_everywhere = false;
  bool cdw_everywhere = false;

  const Crossing* lower() const;  ///< first crossing into CDW
  const Crossing* upper() const;  ///< last crossing out of CDW
  /// Ordering nu_N1 <= nu_CDW1 <= nu_CDW2 <= nu_N2 (tolerance tol).
  bool ordering_holds(double tol = 1e-9) const;
};

struct CrossingOptions {
  double gap_min_rel = 1e-4;  ///< CDW counts as present when gap >= this * t
  double omega_tol = 1e-9;
  double mu_tol = 1e-10;
  double accept = 1e-12;  ///< CDW accepted when Omega_CDW - Omega_N < accept
  int max_steps = 100;
};

/// CDW is the stable phase at a scan point.
bool cdw_stable(const BranchPoint& cdw, const BranchPoint& n, double t,
                const CrossingOptions& o = {});

BoundarySet find_crossings(const BranchModel& model, const MuScan& scan,
                           const CrossingOptions& options = {});

/// Locates the crossing closest to mu_guess by bracketing outward, then bisects.
std::optional<Crossing> crossing_near(const BranchModel& model, double mu_guess, bool cdw_above,
                                     double step, const CrossingOptions& options = {},
                                     int max_expand = 60);

struct Classification {
  PhaseLabel label = PhaseLabel::NONE;
  double lambda = 0.0;  ///< CDW weight, 1 for CDW, 0 for N
};

/// Throws std::invalid_argument for nu outside [0, 1].
Classification classify(double nu, const BoundarySet& boundaries, double tol = 1e-9);

/// Width nu_CDW - nu_N of the mixed region at a crossing, 0 for continuous ones.
double mixed_width(const Crossing& c);

struct AxisSpec {
  std::string name;  ///< V, tp, kappa, Q, T
  std::vector<double> values;
};

struct ColumnResult {
  int index = 0;
  double axis_value = 0.0;
  bool ok = false;
  std::string error;
  BoundarySet boundaries;
  std::vector<PhaseLabel> labels;
  std::vector<double> lambda;
};

struct Polyline {
  std::string name;
  std::vector<std::pair<double, double>> points;  ///< (nu, axis value)
};

struct PhaseDiagram {
  AxisSpec axis;
  std::vector<double> nu;
  std::vector<ColumnResult> columns;
  std::vector<Polyline> boundaries;
  std::string provenance_json;  ///< serialized run configuration
};

using ColumnFn = std::function<BoundarySet(double axis_value)>;

/// Scan plus crossing search for models built per axis value.
ColumnFn standard_column(std::function<std::unique_ptr<BranchModel>(double)> factory, int n_mu,
                         std::optional<std::pair<double, double>> mu_range = {},
                         CrossingOptions options = {});

/// Luttinger columns where every boundary uses its own Q = tQ, with tQ
/// taken from the CDW side (or the N side when use_n_side is set).
ColumnFn q_fixed_luttinger_column(std::function<LuttParams(double)> params_of, int n_mu,
                                  double Q0, bool use_n_side = false,
                                  std::optional<std::pair<double, double>> mu_range = {},
                                  CrossingOptions options = {});

/// All crossings of one Luttinger parameter set with Q fixed per boundary.
BoundarySet q_fixed_boundaries(const LuttParams& base, int n_mu, double Q0, bool use_n_side,
                               std::optional<std::pair<double, double>> mu_range = {},
                               const CrossingOptions& options = {});

struct SweepOptions {
  std::string persist_dir;  ///< one JSON file per column when non-empty
  bool resume = false;
  int workers = 0;  ///< 0 reads CDWMF_WORKERS, then hardware concurrency
  std::string provenance_json = "{}";
};

PhaseDiagram sweep2d(const AxisSpec& axis, const std::vector<double>& nu_grid,
                     const ColumnFn& column, const SweepOptions& options = {});

/// Worker count from CDWMF_WORKERS or the hardware.
int default_workers();

struct ThresholdResult {
  double value = nan_value;
  bool found = false;
  std::vector<std::pair<double, bool>> trace;
};

/// Bisection for the switch point of a predicate with pred(lo) != pred(hi).
ThresholdResult bisect_threshold(const std::function<bool(double)>& pred, double lo, double hi,
                                 double tol);

}  // namespace cdwmf
