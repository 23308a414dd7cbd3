#include "zoge/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace zoge {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

void require_same_length(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const char* what) {
  if (a.size() != b.size()) throw std::invalid_argument(std::string(what) + ": length mismatch");
}

}  // namespace

Estimate time_average_equilibrium(const Eigen::VectorXd& t, const Eigen::VectorXd& value, double window_fraction,
                                  double min_span) {
  require_same_length(t, value, "time_average_equilibrium");
  if (!(window_fraction >= 0.0 && window_fraction < 1.0)) throw std::invalid_argument("window_fraction: must lie in [0, 1)");
  if (t.size() < 2 || t[t.size() - 1] - t[0] < min_span)
    throw std::invalid_argument("series too short: need a time span of at least " + std::to_string(min_span));
  const double start = window_fraction * t[t.size() - 1];
  std::vector<double> w;
  for (Eigen::Index i = 0; i < t.size(); ++i)
    if (t[i] >= start) w.push_back(value[i]);
  if (w.size() < 2) throw std::invalid_argument("series too short: fewer than 2 samples in the averaging window");
  const Eigen::Map<const Eigen::VectorXd> v(w.data(), static_cast<Eigen::Index>(w.size()));
  const auto n = v.size();
  const double mean = v.mean();
  const Eigen::VectorXd d = v.array() - mean;
  const double c0 = d.squaredNorm() / static_cast<double>(n);
  if (c0 == 0.0) return {mean, 0.0};
  // Integrated autocorrelation time, summed until the first nonpositive lag.
  double tau = 1.0;
  for (Eigen::Index k = 1; k < n; ++k) {
    const double rho = d.head(n - k).dot(d.tail(n - k)) / (static_cast<double>(n) * c0);
    if (rho <= 0.0) break;
    tau += 2.0 * rho;
  }
  return {mean, std::sqrt(c0 * tau / static_cast<double>(n - 1))};
}

EnsembleCurve disorder_average(const Eigen::VectorXd& x, const std::vector<Eigen::VectorXd>& values, std::string meta) {
  if (values.size() < 2) throw std::invalid_argument("disorder_average: need at least 2 realizations");
  const auto r = static_cast<Eigen::Index>(values.size());
  EnsembleCurve c;
  c.x = x;
  c.samples.resize(r, x.size());
  for (Eigen::Index i = 0; i < r; ++i) {
    if (values[static_cast<std::size_t>(i)].size() != x.size())
      throw std::invalid_argument("disorder_average: realization " + std::to_string(i) + " is on a different grid");
    c.samples.row(i) = values[static_cast<std::size_t>(i)].transpose();
  }
  c.mean = c.samples.colwise().mean().transpose();
  const Eigen::MatrixXd d = c.samples.rowwise() - c.mean.transpose();
  c.error = (d.array().square().colwise().sum() / static_cast<double>((r - 1) * r)).sqrt().transpose();
  c.n_realizations = static_cast<int>(r);
  c.meta = std::move(meta);
  return c;
}

EnsembleCurve nested_average(const Eigen::VectorXd& x, const std::vector<std::vector<Eigen::VectorXd>>& values,
                             std::string meta) {
  std::vector<Eigen::VectorXd> per_realization;
  per_realization.reserve(values.size());
  for (const auto& seeds : values) {
    if (seeds.empty()) throw std::invalid_argument("nested_average: realization without seeds");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(x.size());
    for (const auto& s : seeds) {
      if (s.size() != x.size()) throw std::invalid_argument("nested_average: seed curve is on a different grid");
      acc += s;
    }
    per_realization.push_back(acc / static_cast<double>(seeds.size()));
  }
  return disorder_average(x, per_realization, std::move(meta));
}

// Fornberg's recursion.
Eigen::VectorXd fd_weights(double x0, const Eigen::VectorXd& nodes, int order) {
  const auto n = nodes.size();
  if (order < 0 || order >= n) throw std::invalid_argument("fd_weights: need more nodes than the derivative order");
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, order + 1);
  double c1 = 1.0, c4 = nodes[0] - x0;
  c(0, 0) = 1.0;
  for (Eigen::Index i = 1; i < n; ++i) {
    const int mn = static_cast<int>(std::min<Eigen::Index>(i, order));
    double c2 = 1.0;
    const double c5 = c4;
    c4 = nodes[i] - x0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double c3 = nodes[i] - nodes[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c(i, k) = c1 * (k * c(i - 1, k - 1) - c5 * c(i - 1, k)) / c2;
        c(i, 0) = -c1 * c5 * c(i - 1, 0) / c2;
      }
      for (int k = mn; k >= 1; --k) c(j, k) = (c4 * c(j, k) - k * c(j, k - 1)) / c3;
      c(j, 0) = c4 * c(j, 0) / c3;
    }
    c1 = c2;
  }
  return c.col(order);
}

Eigen::VectorXd smooth_quadratic(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int window) {
  require_same_length(x, y, "smooth_quadratic");
  if (window < 3 || window % 2 == 0) throw std::invalid_argument("smoothing window: must be odd and >= 3");
  const auto n = x.size();
  if (n < window) throw std::invalid_argument("smoothing window longer than the series");
  Eigen::VectorXd out(n);
  const int half = window / 2;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index lo = std::clamp<Eigen::Index>(i - half, 0, n - window);
    Eigen::MatrixXd a(window, 3);
    for (int k = 0; k < window; ++k) {
      const double dx = x[lo + k] - x[i];
      a.row(k) << 1.0, dx, dx * dx;
    }
    out[i] = a.colPivHouseholderQr().solve(y.segment(lo, window))[0];
  }
  return out;
}

Eigen::VectorXd numeric_derivative(const Eigen::VectorXd& x, const Eigen::VectorXd& y_in, int order, int smoothing) {
  require_same_length(x, y_in, "numeric_derivative");
  if (order != 1 && order != 2) throw std::invalid_argument("numeric_derivative: order must be 1 or 2");
  const auto n = x.size();
  if (n < 5) throw std::invalid_argument("numeric_derivative: need at least 5 points, got " + std::to_string(n));
  const Eigen::VectorXd y = smoothing > 0 ? smooth_quadratic(x, y_in, smoothing) : y_in;
  // Three-point stencils; the edge second derivative uses four points to stay second order.
  const Eigen::Index edge = order == 1 ? 3 : 4;
  Eigen::VectorXd d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index lo = i - 1, len = 3;
    if (i == 0) lo = 0, len = edge;
    if (i == n - 1) lo = n - edge, len = edge;
    d[i] = fd_weights(x[i], x.segment(lo, len), order).dot(y.segment(lo, len));
  }
  return d;
}

double split_pearson7(double x, const PearsonParams& a) {
  const bool left = x < a[1];
  const double width = left ? a[2] : a[4];
  const double shape = left ? a[3] : a[5];
  const double z = (x - a[1]) / width;
  return a[0] / std::pow(1.0 + z * z * (std::exp2(1.0 / shape) - 1.0), shape);
}

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;

constexpr double max_log_shape = 9.0;  // shapes beyond ~8000 are Gaussian for all purposes

PearsonParams to_params(const Vec6& p) {
  return {p[0], p[1], std::exp(p[2]), 0.5 + std::exp(std::min(p[3], max_log_shape)), std::exp(p[4]),
          0.5 + std::exp(std::min(p[5], max_log_shape))};
}

Vec6 to_internal(const PearsonParams& a) {
  if (!(a[2] > 0.0 && a[4] > 0.0 && a[3] > 0.5 && a[5] > 0.5))
    throw std::invalid_argument("Pearson init: widths must be > 0 and shapes > 1/2");
  Vec6 p;
  p << a[0], a[1], std::log(a[2]), std::log(a[3] - 0.5), std::log(a[4]), std::log(a[5] - 0.5);
  return p;
}

Eigen::VectorXd residual(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const PearsonParams& a) {
  Eigen::VectorXd r(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) r[i] = split_pearson7(x[i], a) - y[i];
  return r;
}

template <class Map>
Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Vec6& p, Map to_a) {
  Eigen::MatrixXd jac(x.size(), 6);
  for (int k = 0; k < 6; ++k) {
    const double h = 1e-7 * std::max(1.0, std::abs(p[k]));
    Vec6 up = p, dn = p;
    up[k] += h;
    dn[k] -= h;
    jac.col(k) = (residual(x, y, to_a(up)) - residual(x, y, to_a(dn))) / (2.0 * h);
  }
  return jac;
}

}  // namespace

PearsonParams default_pearson_init(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  require_same_length(x, y, "default_pearson_init");
  if (x.size() < 2) throw std::invalid_argument("Pearson init: need at least 2 points");
  Eigen::Index k;
  const double top = y.maxCoeff(&k);
  const double span = x[x.size() - 1] - x[0];
  auto crossing = [&](int dir) {
    for (Eigen::Index i = k; i + dir >= 0 && i + dir < x.size(); i += dir) {
      const Eigen::Index j = i + dir;
      if (y[j] < 0.5 * top) {
        const double f = (y[i] - 0.5 * top) / (y[i] - y[j]);
        return std::abs(x[i] + f * (x[j] - x[i]) - x[k]);
      }
    }
    return std::max(std::abs((dir < 0 ? x[0] : x[x.size() - 1]) - x[k]), 0.25 * std::abs(span));
  };
  PearsonParams a{top, x[k], crossing(-1), 1.0, crossing(+1), 1.0};
  if (!(a[2] > 0.0)) a[2] = 0.25 * std::abs(span);
  if (!(a[4] > 0.0)) a[4] = 0.25 * std::abs(span);
  return a;
}

PearsonFit fit_split_pearson7(const Eigen::VectorXd& x, const Eigen::VectorXd& y, std::optional<PearsonParams> init,
                              int max_iterations) {
  require_same_length(x, y, "fit_split_pearson7");
  if (x.size() < 6) throw std::invalid_argument("fit_split_pearson7: need at least 6 points");
  Vec6 p = to_internal(init ? *init : default_pearson_init(x, y));
  double cost = residual(x, y, to_params(p)).squaredNorm();
  double lambda = -1.0;
  PearsonFit fit;
  int it = 0;
  for (; it < max_iterations && !fit.converged; ++it) {
    const Eigen::MatrixXd jac = jacobian(x, y, p, to_params);
    const Eigen::VectorXd r = residual(x, y, to_params(p));
    const Eigen::Matrix<double, 6, 6> jtj = jac.transpose() * jac;
    const Vec6 grad = jac.transpose() * r;
    if (lambda < 0.0) lambda = 1e-3 * jtj.diagonal().maxCoeff();
    bool stepped = false;
    while (!stepped && lambda < 1e300) {
      Eigen::Matrix<double, 6, 6> a = jtj;
      a.diagonal() += lambda * (jtj.diagonal().array().max(1e-300)).matrix();
      const Vec6 delta = a.ldlt().solve(-grad);
      const Vec6 trial = p + delta;
      const double trial_cost = residual(x, y, to_params(trial)).squaredNorm();
      if (std::isfinite(trial_cost) && trial_cost <= cost) {
        const double drop = cost - trial_cost;
        const bool small_step = delta.norm() <= 1e-12 * (p.norm() + 1e-12);
        p = trial;
        stepped = true;
        lambda = std::max(lambda / 3.0, 1e-300);
        if (small_step || drop <= 1e-15 * cost || trial_cost < 1e-30) fit.converged = true;
        cost = trial_cost;
      } else {
        lambda *= 4.0;
      }
    }
    if (!stepped) {  // no descent direction left: at a minimum to machine precision
      fit.converged = true;
    }
  }
  fit.iterations = it;
  fit.a = to_params(p);
  fit.residual_norm = std::sqrt(cost);
  // Covariance in the natural parameters.
  const Vec6 natural = Eigen::Map<const Vec6>(fit.a.data());
  const Eigen::MatrixXd jac = jacobian(x, y, natural, [](const Vec6& q) {
    PearsonParams a;
    for (int k = 0; k < 6; ++k) a[static_cast<std::size_t>(k)] = q[k];
    return a;
  });
  const double dof = std::max<double>(1.0, static_cast<double>(x.size() - 6));
  const Eigen::MatrixXd cov = (jac.transpose() * jac).completeOrthogonalDecomposition().pseudoInverse() * (cost / dof);
  for (int k = 0; k < 6; ++k) fit.sigma[static_cast<std::size_t>(k)] = std::sqrt(std::max(0.0, cov(k, k)));
  return fit;
}

PeakEstimate locate_peak(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  require_same_length(x, y, "locate_peak");
  PeakEstimate est;
  Eigen::Index k;
  if (x.size() < 7 || !(y.maxCoeff(&k) > 0.0)) return est;
  est.raw_argmax = x[k];
  Eigen::Index lo = k, hi = k;
  while (lo > 0 && y[lo - 1] > 0.0) --lo;
  while (hi + 1 < x.size() && y[hi + 1] > 0.0) ++hi;
  while (hi - lo + 1 < 7) {  // too narrow to pin six parameters: widen evenly
    if (lo > 0) --lo;
    if (hi - lo + 1 < 7 && hi + 1 < x.size()) ++hi;
  }
  const Eigen::VectorXd xs = x.segment(lo, hi - lo + 1), ys = y.segment(lo, hi - lo + 1);
  est.found = true;
  est.fit = fit_split_pearson7(xs, ys);
  const double step = (x[x.size() - 1] - x[0]) / static_cast<double>(x.size() - 1);
  if (est.fit.converged && est.fit.a[1] >= xs[0] && est.fit.a[1] <= xs[xs.size() - 1] && est.fit.a[0] > 0.0) {
    est.center = est.fit.a[1];
    est.err = est.fit.sigma[1];
  } else {
    est.center = est.raw_argmax;
    est.err = step;
  }
  return est;
}

CriticalBounds critical_bounds(const Eigen::VectorXd& w, const Eigen::VectorXd& q, int smoothing) {
  CriticalBounds b;
  const PeakEstimate upper = locate_peak(w, numeric_derivative(w, q, 1, smoothing));
  const PeakEstimate lower = locate_peak(w, numeric_derivative(w, q, 2, smoothing));
  b.found = upper.found && lower.found;
  if (!b.found) return b;
  b.w_upper = upper.center, b.err_upper = upper.err, b.raw_upper = upper.raw_argmax;
  b.w_lower = lower.center, b.err_lower = lower.err, b.raw_lower = lower.raw_argmax;
  return b;
}

CriticalBounds critical_bounds(const EnsembleCurve& curve, int smoothing) {
  return critical_bounds(curve.x, curve.mean, smoothing);
}

PowerLawFit fit_power_law(const Eigen::VectorXd& t, const Eigen::VectorXd& v, double t_min, double t_max) {
  require_same_length(t, v, "fit_power_law");
  if (!(t_min > 0.0 && t_max > t_min)) throw std::invalid_argument("power-law window: need 0 < t_min < t_max");
  const double slack = 1e-9 * t_max;
  std::vector<double> lx, ly;
  int in_window = 0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (t[i] < t_min - slack || t[i] > t_max + slack) continue;
    ++in_window;
    if (v[i] > 0.0 && std::isfinite(v[i])) {
      lx.push_back(std::log(t[i]));
      ly.push_back(std::log(v[i]));
    }
  }
  if (in_window < 10)
    throw std::invalid_argument("power-law fit refused: " + std::to_string(in_window) + " points in window, need 10");
  PowerLawFit fit;
  fit.t_min = t_min, fit.t_max = t_max;
  fit.n_points = static_cast<int>(lx.size());
  fit.n_excluded = in_window - fit.n_points;
  if (2 * fit.n_excluded > in_window)
    throw std::invalid_argument("power-law fit refused: " + std::to_string(fit.n_excluded) + " of " +
                                std::to_string(in_window) + " points are nonpositive");
  const Eigen::Map<const Eigen::VectorXd> X(lx.data(), fit.n_points), Y(ly.data(), fit.n_points);
  const double mx = X.mean(), my = Y.mean();
  const Eigen::VectorXd dx = X.array() - mx, dy = Y.array() - my;
  const double sxx = dx.squaredNorm();
  const double slope = dx.dot(dy) / sxx;
  const double rss = (dy - slope * dx).squaredNorm();
  const double sst = dy.squaredNorm();
  fit.alpha = -slope;
  fit.error = fit.n_points > 2 ? std::sqrt(rss / (fit.n_points - 2) / sxx) : 0.0;
  fit.r_squared = sst > 0.0 ? 1.0 - rss / sst : 1.0;
  fit.negative = fit.alpha < 0.0;
  return fit;
}

double power_law_window_sensitivity(const Eigen::VectorXd& t, const Eigen::VectorXd& v, double t_min, double t_max) {
  const double base = fit_power_law(t, v, t_min, t_max).alpha;
  const double lo = t.minCoeff(), hi = t.maxCoeff();
  const double windows[][2] = {{t_min / 2, t_max}, {t_min * 2, t_max}, {t_min, t_max / 2}, {t_min, t_max * 2}};
  double worst = 0.0;
  for (const auto& win : windows) {
    const double a = std::max(win[0], lo), b = std::min(win[1], hi);
    if (a == t_min && b == t_max) continue;
    try {
      worst = std::max(worst, std::abs(fit_power_law(t, v, a, b).alpha - base));
    } catch (const std::invalid_argument&) {
    }
  }
  return worst;
}

PhaseDiagram phase_diagram(const Eigen::VectorXd& w, const Eigen::VectorXd& u, const Eigen::MatrixXd& s2,
                           const Eigen::MatrixXd& s2_err, double w_ref) {
  if (s2.rows() != u.size() || s2.cols() != w.size() || s2_err.rows() != s2.rows() || s2_err.cols() != s2.cols())
    throw std::invalid_argument("phase_diagram: grid shape does not match the W and U axes");
  if (w.size() < 2 || u.size() < 1) throw std::invalid_argument("phase_diagram: empty grid");
  PhaseDiagram pd{w, u, s2, s2_err, {}, nan, Eigen::VectorXd::Constant(u.size(), nan), false};
  pd.partial = s2.array().isNaN().any();

  Eigen::Index u0;
  u.minCoeff(&u0);
  for (Eigen::Index j = 0; j + 1 < w.size(); ++j) {
    if (w[j] <= w_ref && w_ref <= w[j + 1]) {
      const double f = (w_ref - w[j]) / (w[j + 1] - w[j]);
      pd.level = (1.0 - f) * s2(u0, j) + f * s2(u0, j + 1);
      break;
    }
  }
  if (std::isnan(pd.level)) pd.partial = true;

  for (Eigen::Index r = 0; r < u.size(); ++r) {
    std::vector<double> ws, vs;
    for (Eigen::Index j = 0; j < w.size(); ++j)
      if (!std::isnan(s2(r, j))) ws.push_back(w[j]), vs.push_back(s2(r, j));
    CriticalBounds b;
    if (ws.size() >= 7)
      b = critical_bounds(Eigen::Map<Eigen::VectorXd>(ws.data(), static_cast<Eigen::Index>(ws.size())),
                          Eigen::Map<Eigen::VectorXd>(vs.data(), static_cast<Eigen::Index>(vs.size())));
    pd.bounds.push_back(b);
    if (std::isnan(pd.level)) continue;
    for (Eigen::Index j = 0; j + 1 < w.size(); ++j) {
      const double a = s2(r, j) - pd.level, c = s2(r, j + 1) - pd.level;
      if (std::isnan(a) || std::isnan(c)) continue;
      if (a < 0.0 && c >= 0.0) {
        pd.contour[r] = w[j] + (w[j + 1] - w[j]) * (-a) / (c - a);
        break;
      }
      if (a == 0.0) {
        pd.contour[r] = w[j];
        break;
      }
    }
  }
  return pd;
}

}  // namespace zoge
