#include <cmath>
#include <numbers>

#include "doctest.h"
#include "zoge/analysis.hpp"
#include "zoge/onebody.hpp"

using namespace zoge;

namespace {
ChainSpec chain(int n, double w, double phi = 0.0) {
  ChainSpec s;
  s.n_sites = n;
  s.w = w;
  s.phi = phi;
  return s;
}
OneBodySolution solve(const ChainSpec& s) { return diagonalize(build_onebody_hamiltonian(s)); }
}  // namespace

TEST_CASE("small clean chains") {
  const auto two = solve(chain(2, 0.0));
  CHECK(two.energies[0] == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(two.energies[1] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(std::abs(two.vectors(0, 0)) == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(std::abs(two.vectors(1, 1)) == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(two.vectors(0, 1) * two.vectors(1, 1) == doctest::Approx(-0.5));
  CHECK(two.vectors(0, 0) * two.vectors(1, 0) == doctest::Approx(0.5));  // bonding state lowest

  const auto three = solve(chain(3, 0.0));
  CHECK(three.energies[0] == doctest::Approx(-1 / std::sqrt(2.0)));
  CHECK(std::abs(three.energies[1]) < 1e-14);
  CHECK(three.energies[2] == doctest::Approx(1 / std::sqrt(2.0)));
}

TEST_CASE("clean spectrum follows the open-chain cosine band") {
  const int n = 60;
  const auto sol = solve(chain(n, 0.0));
  for (int k = 1; k <= n; ++k) CHECK(std::abs(sol.energies[k - 1] + std::cos(k * std::numbers::pi / (n + 1))) < 1e-10);
  CHECK(sol.energies.maxCoeff() <= 1.0);
  CHECK(sol.energies.minCoeff() >= -1.0);
}

TEST_CASE("nonzero U only warns") {
  ChainSpec s = chain(5, 0.3);
  s.u = 0.2;
  bool warned = false;
  build_onebody_hamiltonian(s, &warned);
  CHECK(warned);
  s.u = 0.0;
  build_onebody_hamiltonian(s, &warned);
  CHECK_FALSE(warned);
}

TEST_CASE("orthonormal eigenvectors and Gershgorin bound") {
  const auto sol = solve(chain(500, 0.5));
  const Eigen::MatrixXd gram = sol.vectors.transpose() * sol.vectors;
  CHECK((gram - Eigen::MatrixXd::Identity(500, 500)).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(sol.energies.minCoeff() >= -1.5);
  CHECK(sol.energies.maxCoeff() <= 1.5);
  for (int k = 1; k < 500; ++k) CHECK(sol.energies[k] >= sol.energies[k - 1]);
  // Parseval: each site is fully resolved by the eigenbasis.
  CHECK((sol.vectors.rowwise().squaredNorm().array() - 1.0).abs().maxCoeff() < 1e-10);
}

TEST_CASE("propagation: identity at t = 0, unitarity, Bessel law") {
  const int n = 201, n0 = 100;
  const auto sol = solve(chain(n, 0.0));
  const auto start = propagate_amplitudes(sol, n0, 0.0);
  CHECK(std::abs(start.c[n0] - 1.0) < 1e-12);
  CHECK(ipr_t(start) == doctest::Approx(1.0).epsilon(1e-12));

  const auto p = propagate_amplitudes(sol, n0, 5.0);
  CHECK(std::abs(p.c.squaredNorm() - 1.0) < 1e-10);
  for (int m = -30; m <= 30; ++m) {
    const double bessel = std::cyl_bessel_j(std::abs(m), 5.0);
    CHECK(std::abs(std::norm(p.c[n0 + m]) - bessel * bessel) < 1e-8);
  }
}

TEST_CASE("strong potential keeps the excitation contained") {
  const int n = 201, n0 = 100;
  const auto sol = solve(chain(n, 2.0, 0.7));
  for (double t : {10.0, 100.0, 1000.0}) {
    const auto p = propagate_amplitudes(sol, n0, t);
    double far = 0.0;
    for (int k = 0; k < n; ++k)
      if (std::abs(k - n0) > n / 4) far += std::norm(p.c[k]);
    CHECK(far < 1e-2);
    CHECK(std::abs(p.c.squaredNorm() - 1.0) < 1e-10);
  }
}

TEST_CASE("participation ratios") {
  Eigen::VectorXd uniform = Eigen::VectorXd::Constant(40, 1.0 / std::sqrt(40.0));
  CHECK(ipr(uniform) == doctest::Approx(1.0 / 40));

  const int n = 500;
  const auto clean = solve(chain(n, 0.0));
  const Eigen::VectorXd ik = ipr_eigenstates(clean);
  CHECK((ik.array() - 1.5 / (n + 1)).abs().maxCoeff() < 1e-10);

  const Eigen::VectorXd strong = ipr_eigenstates(solve(chain(n, 2.0)));
  CHECK(strong.minCoeff() > 0.05);

  const Eigen::VectorXd in = ipr_sites(solve(chain(n, 0.5)));
  CHECK(in.minCoeff() > 0.0);
  CHECK(in.maxCoeff() <= 1.0);

  // J -> 0 limit: the eigenbasis is the site basis.
  ChainSpec frozen = chain(12, 1.0);
  frozen.j = 1e-12;
  CHECK(ipr_eigenstates(solve(frozen)).minCoeff() == doctest::Approx(1.0));
}

TEST_CASE("ipr series matches direct propagation") {
  const auto sol = solve(chain(31, 0.7, 0.3));
  Eigen::VectorXd times(3);
  times << 0.0, 2.5, 40.0;
  const Eigen::VectorXd series = ipr_series(sol, 9, times);
  for (int i = 0; i < 3; ++i) CHECK(series[i] == doctest::Approx(ipr_t(propagate_amplitudes(sol, 9, times[i]))).epsilon(1e-12));
}

TEST_CASE("equilibrium IPR scales as 1/N in the extended phase") {
  const double q = equilibrium_ipr(chain(201, 0.5, 0.4), 100);
  CHECK(q * 201 > 1.0);
  CHECK(q * 201 < 5.0);
  CHECK(equilibrium_ipr(chain(201, 1.5, 0.4), 100) > 0.05);
}

TEST_CASE("LDOS by decimation") {
  const ChainSpec s = chain(40, 0.3);
  Eigen::VectorXd e(1);
  e << 0.1;
  CHECK_THROWS_AS(ldos_decimation(s, 3, e, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(ldos_decimation(s, 40, e, 0.1), std::out_of_range);

  // Clean long chain, mid site: 1 / (pi sqrt(J^2 - E^2)).
  const ChainSpec clean = chain(4001, 0.0);
  Eigen::VectorXd grid(3);
  grid << 0.0, 0.4, -0.7;
  const Eigen::VectorXd rho = ldos_decimation(clean, 2000, grid, 2e-3);
  for (int i = 0; i < 3; ++i) {
    const double exact = 1.0 / (std::numbers::pi * std::sqrt(1.0 - grid[i] * grid[i]));
    CHECK(rho[i] == doctest::Approx(exact).epsilon(0.02));
  }

  // Normalization and positivity; gaps in the fractal spectrum.
  const ChainSpec aa = chain(300, 0.5, 0.4);
  const LdosGrid g = default_ldos_grid(aa, 6001);
  const Eigen::VectorXd r = ldos_decimation(aa, 150, g.energies, g.eta);
  CHECK(r.minCoeff() >= 0.0);
  const double de = g.energies[1] - g.energies[0];
  CHECK(r.sum() * de == doctest::Approx(1.0).epsilon(0.03));
  double inner_min = 1e9;
  for (Eigen::Index i = 0; i < r.size(); ++i)
    if (std::abs(g.energies[i]) < 1.0) inner_min = std::min(inner_min, r[i]);
  CHECK(inner_min < 1e-2 * r.maxCoeff());
}

TEST_CASE("edge-state report") {
  CHECK(edge_state_report(solve(chain(500, 0.0)), 3e-3 + 1.5 / 501).empty());
  const auto sol0 = solve(chain(500, 0.5, 0.0));
  CHECK_THROWS_AS(edge_state_report(sol0, 0.0), std::invalid_argument);

  const auto one_end = edge_state_report(sol0);
  REQUIRE_FALSE(one_end.empty());
  for (const auto& e : one_end) {
    CHECK(e.edge);
    CHECK(e.center > 250);
  }

  const auto both = edge_state_report(solve(chain(500, 0.5, 7 * std::numbers::pi / 20)));
  bool left = false, right = false;
  for (const auto& e : both) {
    left = left || (e.edge && e.center < 250);
    right = right || (e.edge && e.center > 250);
  }
  CHECK(left);
  CHECK(right);
}

TEST_CASE("derivative bracket of the one-body curve contains W = J") {
  const int n = 101;
  const auto phases = make_realizations(chain(n, 0.0), 10, 3).phases;
  Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(41, 0.0, 2.0), q(41);
  for (int i = 0; i < 41; ++i) {
    double acc = 0.0;
    for (double phi : phases) acc += equilibrium_ipr(chain(n, w[i], phi), n / 2);
    q[i] = acc / static_cast<double>(phases.size());
  }
  const CriticalBounds b = critical_bounds(w, q);
  REQUIRE(b.found);
  CHECK(b.w_lower <= 1.0);
  CHECK(b.w_upper >= 1.0);
}
