#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "zoge/analysis.hpp"

using namespace zoge;

namespace {
Eigen::VectorXd sample(const Eigen::VectorXd& x, const PearsonParams& a) {
  Eigen::VectorXd y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = split_pearson7(x[i], a);
  return y;
}
}  // namespace

TEST_CASE("equilibrium time average") {
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(101, 0.0, 100.0);
  const Estimate c = time_average_equilibrium(t, Eigen::VectorXd::Constant(101, 0.25), 0.5, 30.0);
  CHECK(c.value == 0.25);
  CHECK(c.error == 0.0);

  Eigen::VectorXd step = Eigen::VectorXd::Zero(101);
  step.tail(51).setConstant(2.0);
  CHECK(time_average_equilibrium(t, step).value == doctest::Approx(2.0));

  std::mt19937_64 gen(1);
  std::normal_distribution<double> noise;
  Eigen::VectorXd white(101), smooth(101);
  double prev = 0.0;
  for (int i = 0; i < 101; ++i) {
    white[i] = noise(gen);
    prev = 0.9 * prev + noise(gen);  // strongly correlated series
    smooth[i] = prev;
  }
  const double naive = std::sqrt((smooth.tail(51).array() - smooth.tail(51).mean()).square().sum() / 50.0 / 51.0);
  CHECK(time_average_equilibrium(t, smooth).error > 1.2 * naive);
  CHECK(time_average_equilibrium(t, white).error > 0.0);
  CHECK_THROWS_AS(time_average_equilibrium(t, white, 0.5, 200.0), std::invalid_argument);
}

TEST_CASE("disorder and nested averages") {
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(4, 0.0, 3.0);
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(4, 1.0, 2.0);
  const EnsembleCurve same = disorder_average(x, {v, v, v}, "phi");
  CHECK(same.error.maxCoeff() < 1e-15);
  CHECK((same.mean - v).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(same.n_realizations == 3);
  CHECK(same.samples.rows() == 3);

  const EnsembleCurve two = disorder_average(x, {Eigen::VectorXd::Zero(4), Eigen::VectorXd::Constant(4, 2.0)});
  CHECK(two.mean[0] == doctest::Approx(1.0));
  CHECK(two.error[0] == doctest::Approx(1.0));

  CHECK_THROWS_AS(disorder_average(x, {v}), std::invalid_argument);
  CHECK_THROWS_AS(disorder_average(x, {v, Eigen::VectorXd::Zero(3)}), std::invalid_argument);

  const EnsembleCurve nested = nested_average(x, {{v, 3 * v}, {v, v}});
  CHECK(nested.mean[0] == doctest::Approx(1.5));
}

TEST_CASE("finite differences") {
  Eigen::VectorXd x(9);
  x << 0.0, 0.1, 0.22, 0.3, 0.41, 0.5, 0.6, 0.72, 0.8;  // near-uniform
  const Eigen::VectorXd lin = 3.0 * x.array() - 1.0;
  const Eigen::VectorXd quad = 2.0 * x.array().square() - x.array() + 4.0;
  CHECK((numeric_derivative(x, lin, 1).array() - 3.0).abs().maxCoeff() < 1e-12);
  CHECK((numeric_derivative(x, quad, 1) - (4.0 * x.array() - 1.0).matrix()).cwiseAbs().maxCoeff() < 1e-11);
  CHECK((numeric_derivative(x, quad, 2).array() - 4.0).abs().maxCoeff() < 1e-9);
  CHECK(numeric_derivative(x, Eigen::VectorXd::Constant(9, 7.0), 2).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((numeric_derivative(x, quad, 2, 5).array() - 4.0).abs().maxCoeff() < 1e-8);
  CHECK_THROWS_AS(numeric_derivative(x.head(4), lin.head(4), 1), std::invalid_argument);
  CHECK_THROWS_AS(numeric_derivative(x, lin, 3), std::invalid_argument);
}

TEST_CASE("split Pearson VII fits") {
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(161, -2.0, 3.0);
  const PearsonParams truth{1.7, 0.4, 0.35, 1.6, 0.8, 3.0};
  const PearsonFit exact = fit_split_pearson7(x, sample(x, truth));
  CHECK(exact.converged);
  for (std::size_t k = 0; k < 6; ++k) CHECK(exact.a[k] == doctest::Approx(truth[k]).epsilon(1e-6));

  std::mt19937_64 gen(5);
  std::normal_distribution<double> noise;
  Eigen::VectorXd y = sample(x, truth);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] *= 1.0 + 1e-3 * noise(gen);
  const PearsonFit noisy = fit_split_pearson7(x, y);
  for (std::size_t k = 0; k < 6; ++k) CHECK(noisy.a[k] == doctest::Approx(truth[k]).epsilon(0.02));
  CHECK(noisy.sigma[1] > 0.0);

  const PearsonParams lorentz{1.0, 0.5, 0.3, 1.0, 0.3, 1.0};
  Eigen::VectorXd yl = sample(x, lorentz);
  for (Eigen::Index i = 0; i < yl.size(); ++i) yl[i] *= 1.0 + 1e-3 * noise(gen);
  const PearsonFit sym = fit_split_pearson7(x, yl);
  CHECK(sym.a[2] == doctest::Approx(sym.a[4]).epsilon(0.02));

  const PearsonParams init = default_pearson_init(x, sample(x, truth));
  CHECK(init[0] == doctest::Approx(1.7).epsilon(1e-3));
  CHECK(init[1] == doctest::Approx(0.4).epsilon(0.05));
  CHECK(init[2] == doctest::Approx(0.35).epsilon(0.1));
  CHECK(init[4] == doctest::Approx(0.8).epsilon(0.1));
}

TEST_CASE("critical bounds") {
  const Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(41, 0.0, 2.5);
  const Eigen::VectorXd sig = (1.0 / (1.0 + (-(w.array() - 1.3) / 0.15).exp())).matrix();
  const CriticalBounds b = critical_bounds(w, sig);
  REQUIRE(b.found);
  CHECK(b.w_lower <= 1.3);
  CHECK(b.w_upper >= 1.3);
  CHECK(b.w_upper - b.w_lower < 0.3);
  CHECK(b.raw_upper == doctest::Approx(1.3).epsilon(0.05));

  CHECK_FALSE(critical_bounds(w, Eigen::VectorXd(-w)).found);
  EnsembleCurve curve;
  curve.x = w;
  curve.mean = sig;
  CHECK(critical_bounds(curve).w_upper == b.w_upper);
}

TEST_CASE("power-law fits") {
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(200, 1.0, 600.0);
  const PowerLawFit half = fit_power_law(t, t.array().pow(-0.5).matrix());
  CHECK(half.alpha == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(half.r_squared == doctest::Approx(1.0));
  CHECK(half.t_min == 10.0);
  const PowerLawFit flat = fit_power_law(t, Eigen::VectorXd::Constant(200, 0.3));
  CHECK(std::abs(flat.alpha) < 1e-12);
  CHECK(power_law_window_sensitivity(t, t.array().pow(-0.5).matrix()) < 1e-9);

  std::mt19937_64 gen(8);
  std::normal_distribution<double> noise;
  for (double alpha : {0.1, 0.5, 1.0}) {
    Eigen::VectorXd v(200);
    for (int i = 0; i < 200; ++i) v[i] = std::pow(t[i], -alpha) * (1.0 + 0.05 * noise(gen));
    CHECK(std::abs(fit_power_law(t, v).alpha - alpha) < 0.02);
  }

  Eigen::VectorXd holes = t.array().pow(-1.0);
  for (int i = 0; i < 200; i += 4) holes[i] = -1e-4;
  const PowerLawFit some = fit_power_law(t, holes);
  CHECK(some.n_excluded > 0);
  CHECK(some.alpha == doctest::Approx(1.0).epsilon(1e-6));
  Eigen::VectorXd mostly = -holes;
  CHECK_THROWS_AS(fit_power_law(t, mostly), std::invalid_argument);
  CHECK_THROWS_AS(fit_power_law(t, holes, 10.0, 20.0), std::invalid_argument);

  const PowerLawFit rising = fit_power_law(t, t.array().pow(0.01).matrix());
  CHECK(rising.negative);
}

TEST_CASE("phase diagram contour") {
  const Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(61, 0.5, 2.0);
  const Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(6, 0.0, 0.5);
  Eigen::MatrixXd s2(6, 61);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 61; ++c) s2(r, c) = 1.0 / (1.0 + std::exp(-(w[c] - 1.0 - u[r]) / 0.1));
  const Eigen::MatrixXd err = Eigen::MatrixXd::Zero(6, 61);
  const PhaseDiagram pd = phase_diagram(w, u, s2, err);
  CHECK(pd.level == doctest::Approx(0.5));
  CHECK_FALSE(pd.partial);
  for (int r = 0; r < 6; ++r) {
    CHECK(pd.contour[r] == doctest::Approx(1.0 + u[r]).epsilon(0.01));
    REQUIRE(pd.bounds[static_cast<std::size_t>(r)].found);
    CHECK(pd.bounds[static_cast<std::size_t>(r)].w_lower <= pd.bounds[static_cast<std::size_t>(r)].w_upper);
  }
  const PhaseDiagram again = phase_diagram(w, u, s2, err);
  CHECK((again.contour.array() == pd.contour.array()).all());
  CHECK(again.level == pd.level);

  Eigen::MatrixXd holes = s2;
  holes(3, 20) = std::numeric_limits<double>::quiet_NaN();
  CHECK(phase_diagram(w, u, holes, err).partial);
  CHECK_THROWS_AS(phase_diagram(w, u, s2.leftCols(10), err), std::invalid_argument);
}
