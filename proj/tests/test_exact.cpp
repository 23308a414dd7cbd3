#include <cmath>
#include <numeric>

#include "doctest.h"
#include "zoge/echo.hpp"
#include "zoge/exact.hpp"
#include "zoge/onebody.hpp"
#include "zoge/random.hpp"

using namespace zoge;

namespace {
ChainSpec chain(int n, double w, double u, double phi = 0.6) {
  ChainSpec s;
  s.n_sites = n;
  s.w = w;
  s.u = u;
  s.phi = phi;
  return s;
}
}  // namespace

TEST_CASE("sector bases and Hamiltonian blocks") {
  const auto b = make_sector_basis(8, 3);
  CHECK(b.size() == 56);
  CHECK(b.index[b.masks[10]] == 10);
  const Eigen::MatrixXd h = sector_hamiltonian(chain(8, 0.7, 0.4), b);
  CHECK((h - h.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(ExactSpectrum(chain(15, 0.5, 0.0)), std::invalid_argument);
}

TEST_CASE("exact evolution") {
  const ChainSpec spec = chain(7, 0.8, 0.3);
  const ExactSpectrum ex(spec);
  Rng rng = make_stream(2);
  const ManyBodyState s = random_full_state(7, rng);
  CHECK((ex.evolve(s, 0.0).amp - s.amp).cwiseAbs().maxCoeff() < 1e-12);
  const ManyBodyState a = ex.evolve(ex.evolve(s, 1.5), 2.0), b = ex.evolve(s, 3.5);
  CHECK((a.amp - b.amp).cwiseAbs().maxCoeff() < 1e-12);
  const int only[] = {2};
  CHECK_THROWS_AS(ExactSpectrum(spec, only).evolve(s, 1.0), std::out_of_range);
}

TEST_CASE("sector-averaged polarization") {
  const ChainSpec spec = chain(9, 0.9, 0.0);
  const int ups = 5, site = 4;
  const int sectors[] = {ups};
  const ExactSpectrum ex(spec, sectors);
  const Eigen::VectorXd p0 = ex.sector_polarization(ups, site, 0.0);
  CHECK(p0[site] == doctest::Approx(1.0));
  CHECK(p0.sum() == doctest::Approx(1.0));
  for (int n = 0; n < 9; ++n)
    if (n != site) CHECK(std::abs(p0[n]) < 1e-12);

  // Free fermions: magnetization transport follows the one-body kernel.
  const auto sol = diagonalize(build_onebody_hamiltonian(spec));
  for (double t : {0.7, 3.0, 11.0}) {
    const Eigen::VectorXd p = ex.sector_polarization(ups, site, t);
    const Eigen::VectorXd c2 = propagate_amplitudes(sol, site, t).c.cwiseAbs2();
    CHECK((p - c2).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("infinite-temperature echo weights") {
  const ChainSpec spec = chain(7, 0.8, 0.0);
  const ExactSpectrum ex(spec);
  const auto sol = diagonalize(build_onebody_hamiltonian(spec));
  const int site = 3;
  const Eigen::VectorXd h0 = ex.echo_weights(site, 0.0);
  CHECK(h0[ex.max_shift()] == doctest::Approx(1.0));
  CHECK(h0.sum() == doctest::Approx(1.0));

  for (double t : {0.5, 2.0, 9.0}) {
    const Eigen::VectorXd h = ex.echo_weights(site, t);
    CHECK(h.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(h.minCoeff() >= -1e-14);
    const Eigen::VectorXd p = propagate_amplitudes(sol, site, t).c.cwiseAbs2();
    CHECK(std::abs(h[ex.max_shift()] - ipr(propagate_amplitudes(sol, site, t).c)) < 1e-10);
    // Weight at shift n is sum_i P_i P_{i+n}, so the second moment is twice the variance of P.
    double second = 0.0;
    for (int n = -ex.max_shift(); n <= ex.max_shift(); ++n) second += double(n) * n * h[n + ex.max_shift()];
    CHECK(second == doctest::Approx(2.0 * spatial_variance(p)).epsilon(1e-9));
    for (int n = 0; n < 7; ++n) {
      double corr = 0.0;
      for (int i = 0; i + n < 7; ++i) corr += p[i] * p[i + n];
      CHECK(h[n + ex.max_shift()] == doctest::Approx(corr).epsilon(1e-9));
    }
  }
}

TEST_CASE("echo from weights is Hermitian in phi") {
  const ExactSpectrum ex(chain(6, 0.5, 0.7));
  const Eigen::VectorXd h = ex.echo_weights(2, 4.0);
  const double phases[] = {0.4, -0.4, 0.0};
  const auto m = echo_from_weights(h, phases);
  CHECK(std::abs(m[0] - std::conj(m[1])) < 1e-13);
  CHECK(std::abs(m[2] - 1.0) < 1e-12);
}
