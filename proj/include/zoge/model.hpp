#pragma once

#include <cstdint>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace zoge {

inline constexpr double golden_ratio = std::numbers::phi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Wraps an angle into [0, 2pi).
double wrap_phase(double phi);

/// Physical parameters of one disorder realization of the interacting
/// Harper-Hofstadter-Aubry-Andre chain
///
///   H = -(J/2) sum_n (S+_n S-_{n+1} + h.c.) + U sum_n Sz_n Sz_{n+1}
///       - W sum_n cos(2 pi q x_n + phi) Sz_n
///
/// Energies are in units of J when J = 1; the lattice constant is 1.
/// Storage index n = 0..N-1 sits at lattice coordinate x_n = n + origin.
/// The default origin of 1 labels the sites 1..N along the chain; this is
/// the labeling under which phi = 0 carries edge states on one end only.
struct ChainSpec {
  int n_sites = 13;
  double j = 1.0;
  double w = 0.0;
  double u = 0.0;
  double q = golden_ratio;
  double phi = 0.0;
  double origin = 1.0;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Copy of `spec` with phi wrapped into [0, 2pi).
ChainSpec normalized(ChainSpec spec);

/// -W cos(2 pi q (n + origin) + phi). Throws std::out_of_range for n outside [0, N).
double onsite_potential(const ChainSpec& spec, int n);

/// On-site energies of every site.
struct SiteFieldTable {
  Eigen::VectorXd eps;
};

SiteFieldTable site_fields(const ChainSpec& spec);

/// A family of realizations sharing every parameter except phi.
struct RealizationSet {
  ChainSpec base;
  std::vector<double> phases;
  std::uint64_t seed = 0;

  std::size_t size() const { return phases.size(); }
  ChainSpec realization(std::size_t i) const;
};

/// `count` phases drawn uniformly from [0, 2pi), fully determined by `seed`.
RealizationSet make_realizations(const ChainSpec& spec, int count, std::uint64_t seed);

/// Explicit phase list (e.g. {0, 7pi/20}); duplicates are rejected.
RealizationSet make_realizations(const ChainSpec& spec, std::span<const double> phases);

// Flat key-value section: n_sites, j, w, u, q, phi, origin, seed.
using KeyValues = std::map<std::string, std::string>;

KeyValues to_key_values(const ChainSpec& spec, std::uint64_t seed);

struct ChainSection {
  ChainSpec spec;
  std::uint64_t seed = 0;
};

/// Missing keys keep their defaults; unknown keys and malformed numbers throw.
ChainSection chain_from_key_values(const KeyValues& kv);

}  // namespace zoge
