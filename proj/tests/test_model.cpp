#include <cmath>
#include <numbers>
#include <set>

#include "doctest.h"
#include "zoge/model.hpp"

using namespace zoge;

namespace {
ChainSpec zero_based(double w, double phi = 0.0, int n = 10) {
  ChainSpec s;
  s.n_sites = n;
  s.w = w;
  s.phi = phi;
  s.origin = 0.0;
  return s;
}
}  // namespace

TEST_CASE("onsite potential values") {
  CHECK(onsite_potential(zero_based(1.0), 0) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(onsite_potential(zero_based(0.0, 2.3), 7) == 0.0);
  // -cos(2 pi * 1.618...) with the golden-ratio wavenumber.
  CHECK(onsite_potential(zero_based(1.0), 1) == doctest::Approx(0.7374).epsilon(1e-4));
  CHECK(onsite_potential(zero_based(1.0), 1) == -std::cos(two_pi * std::numbers::phi));
  CHECK_THROWS_AS(onsite_potential(zero_based(1.0), 10), std::out_of_range);
  CHECK_THROWS_AS(onsite_potential(zero_based(1.0), -1), std::out_of_range);
}

TEST_CASE("default labeling starts at one") {
  ChainSpec s;
  s.w = 1.0;
  CHECK(onsite_potential(s, 0) == -std::cos(two_pi * golden_ratio));
  CHECK(ChainSpec{}.q == std::numbers::phi);
}

TEST_CASE("potential is 2 pi periodic in phi and bounded by W") {
  ChainSpec a = zero_based(0.8, 0.4, 200), b = a;
  b.phi += two_pi;
  const auto ea = site_fields(a).eps, eb = site_fields(b).eps;
  CHECK((ea - eb).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(ea.cwiseAbs().maxCoeff() <= 0.8);
  CHECK(std::abs(ea.mean()) < 2 * 0.8 / std::sqrt(200.0));
  CHECK((site_fields(a).eps.array() == ea.array()).all());
}

TEST_CASE("spec validation") {
  ChainSpec s;
  s.n_sites = 1;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = ChainSpec{};
  s.j = 0.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = ChainSpec{};
  s.w = -0.1;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = ChainSpec{};
  s.phi = -1.0;
  CHECK(normalized(s).phi == doctest::Approx(two_pi - 1.0));
  CHECK(wrap_phase(two_pi) == 0.0);
}

TEST_CASE("realizations") {
  const ChainSpec base;
  const double explicit_phases[] = {0.0, 7 * std::numbers::pi / 20};
  const auto fixed = make_realizations(base, explicit_phases);
  REQUIRE(fixed.size() == 2);
  CHECK(fixed.phases[0] == 0.0);
  CHECK(fixed.phases[1] == 7 * std::numbers::pi / 20);
  CHECK(fixed.realization(1).phi == fixed.phases[1]);

  CHECK(make_realizations(base, 1, 42).phases == make_realizations(base, 1, 42).phases);
  const auto ten = make_realizations(base, 10, 7);
  CHECK(std::set<double>(ten.phases.begin(), ten.phases.end()).size() == 10);
  for (double p : ten.phases) CHECK((p >= 0.0 && p < two_pi));
  CHECK(make_realizations(base, 10, 8).phases != ten.phases);

  CHECK_THROWS_AS(make_realizations(base, 0, 1), std::invalid_argument);
  const double dup[] = {1.0, 1.0};
  CHECK_THROWS_AS(make_realizations(base, dup), std::invalid_argument);
}

TEST_CASE("key-value round trip") {
  ChainSpec s;
  s.n_sites = 21;
  s.w = 0.35;
  s.u = 0.08;
  s.phi = 1.1;
  const auto kv = to_key_values(s, 99);
  for (const char* key : {"n_sites", "j", "w", "u", "q", "phi", "seed"}) CHECK(kv.count(key) == 1);
  const ChainSection back = chain_from_key_values(kv);
  CHECK(back.seed == 99);
  CHECK(back.spec.n_sites == 21);
  CHECK(back.spec.w == s.w);
  CHECK(back.spec.u == s.u);
  CHECK(back.spec.phi == s.phi);
  CHECK(back.spec.q == s.q);

  auto bad = kv;
  bad["colour"] = "red";
  CHECK_THROWS_AS(chain_from_key_values(bad), std::invalid_argument);
  bad = kv;
  bad["w"] = "half";
  CHECK_THROWS_AS(chain_from_key_values(bad), std::invalid_argument);
}
