#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace zoge {

struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

/// Mean over t in [f T, T] with a standard error inflated by the integrated
/// autocorrelation time of the series. Throws std::invalid_argument when the
/// series spans less than `min_span` (use 3 N / J) or the window holds < 2 points.
Estimate time_average_equilibrium(const Eigen::VectorXd& t, const Eigen::VectorXd& value, double window_fraction = 0.5,
                                  double min_span = 0.0);

struct EnsembleCurve {
  Eigen::VectorXd x;
  Eigen::VectorXd mean;
  Eigen::VectorXd error;
  int n_realizations = 0;
  std::string meta;
  Eigen::MatrixXd samples;  // one row per realization
};

/// Pointwise mean and standard error over realizations (>= 2, all on grid x).
EnsembleCurve disorder_average(const Eigen::VectorXd& x, const std::vector<Eigen::VectorXd>& values,
                               std::string meta = {});

/// Seeds inside realizations: values[r][s] is realization r, seed s. The seed mean
/// of each realization enters the realization-level statistics.
EnsembleCurve nested_average(const Eigen::VectorXd& x, const std::vector<std::vector<Eigen::VectorXd>>& values,
                             std::string meta = {});

/// Finite-difference weights for derivative `order` at x0 over arbitrary nodes.
Eigen::VectorXd fd_weights(double x0, const Eigen::VectorXd& nodes, int order);

/// Central differences in the interior, one-sided at the edges, both exact on
/// quadratics. `smoothing` > 0 first applies a moving quadratic of that odd width.
Eigen::VectorXd numeric_derivative(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int order, int smoothing = 0);

/// Moving least-squares quadratic smoothing with an odd window.
Eigen::VectorXd smooth_quadratic(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int window);

using PearsonParams = std::array<double, 6>;

/// Split Pearson VII: a0 / [1 + ((x - a1)/a2)^2 (2^{1/a3} - 1)]^{a3} left of a1,
/// the same with (a4, a5) on the right.
double split_pearson7(double x, const PearsonParams& a);

struct PearsonFit {
  PearsonParams a{};
  PearsonParams sigma{};
  double residual_norm = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Levenberg-Marquardt fit. Widths and shapes are kept in range through
/// a2 = e^{p2}, a3 = 1/2 + e^{p3} (same for a4, a5).
PearsonFit fit_split_pearson7(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                              std::optional<PearsonParams> init = std::nullopt, int max_iterations = 500);

/// a0 = max y, a1 = argmax, widths from the half-maximum crossings, shapes 1.
PearsonParams default_pearson_init(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct PeakEstimate {
  bool found = false;
  double center = 0.0;
  double err = 0.0;
  double raw_argmax = 0.0;
  PearsonFit fit;
};

/// Pearson center of the peak at the global maximum of y, fitted over the
/// contiguous positive run around it.
PeakEstimate locate_peak(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct CriticalBounds {
  bool found = false;  // false: no transition found in the grid
  double w_lower = 0.0, err_lower = 0.0, raw_lower = 0.0;
  double w_upper = 0.0, err_upper = 0.0, raw_upper = 0.0;
};

/// w_upper from the peak of d<Q>/dW, w_lower from the peak of d^2<Q>/dW^2.
CriticalBounds critical_bounds(const EnsembleCurve& curve, int smoothing = 0);
CriticalBounds critical_bounds(const Eigen::VectorXd& w, const Eigen::VectorXd& q, int smoothing = 0);

struct PowerLawFit {
  double alpha = 0.0;
  double error = 0.0;
  double t_min = 0.0, t_max = 0.0;
  double r_squared = 0.0;
  int n_points = 0;
  int n_excluded = 0;
  bool negative = false;  // alpha < 0, usually noise around a plateau
};

/// log v = c - alpha log t over t in [t_min, t_max]. Nonpositive values are
/// dropped and counted; refused (std::invalid_argument) if more than half are
/// dropped or fewer than 10 points remain in the window.
PowerLawFit fit_power_law(const Eigen::VectorXd& t, const Eigen::VectorXd& v, double t_min = 10.0, double t_max = 500.0);

/// Largest |alpha' - alpha| over windows with either end moved by a factor of 2
/// (clipped to the data); windows that cannot be fitted are skipped.
double power_law_window_sensitivity(const Eigen::VectorXd& t, const Eigen::VectorXd& v, double t_min = 10.0,
                                    double t_max = 500.0);

struct PhaseDiagram {
  Eigen::VectorXd w, u;
  Eigen::MatrixXd s2, s2_err;  // rows u, cols w; NaN marks a missing cell
  std::vector<CriticalBounds> bounds;  // per u row
  double level = 0.0;                  // S^2(W = 1, U = 0)
  Eigen::VectorXd contour;             // W on the level line per u, NaN if not crossed
  bool partial = false;
};

/// Per-U critical bounds and the iso-line through S^2(W = 1, U = u_min).
/// Level and crossings are read off by linear interpolation between grid nodes.
PhaseDiagram phase_diagram(const Eigen::VectorXd& w, const Eigen::VectorXd& u, const Eigen::MatrixXd& s2,
                           const Eigen::MatrixXd& s2_err, double w_ref = 1.0);

}  // namespace zoge
