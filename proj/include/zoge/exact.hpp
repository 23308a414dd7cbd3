#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "zoge/manybody.hpp"
#include "zoge/model.hpp"

namespace zoge {

/// Basis masks with a fixed number of up spins, in increasing mask order.
struct SectorBasis {
  int n_sites = 0;
  int ups = 0;
  std::vector<std::uint32_t> masks;
  std::vector<std::int32_t> index;  // mask -> position, -1 outside the sector

  Eigen::Index size() const { return static_cast<Eigen::Index>(masks.size()); }
};

SectorBasis make_sector_basis(int n_sites, int ups);

/// Dense H restricted to one magnetization sector (same Hamiltonian as `evolve`).
Eigen::MatrixXd sector_hamiltonian(const ChainSpec& spec, const SectorBasis& basis);

inline constexpr int max_exact_sites = 14;

/// Exact spectral decomposition of H, one dense block per magnetization
/// sector ([H, sum Sz] = 0). Used as the reference for the Trotter kernel and
/// for exact infinite-temperature traces.
class ExactSpectrum {
 public:
  struct Block {
    SectorBasis basis;
    Eigen::VectorXd energies;
    Eigen::MatrixXd vectors;
  };

  /// Diagonalizes every sector. Throws std::invalid_argument above max_exact_sites.
  explicit ExactSpectrum(const ChainSpec& spec);
  /// Diagonalizes only the listed sectors.
  ExactSpectrum(const ChainSpec& spec, std::span<const int> sectors);

  const ChainSpec& spec() const { return spec_; }
  bool has_sector(int ups) const;
  const Block& block(int ups) const;

  /// exp(-iHt) applied exactly. Every sector the state touches must be present.
  ManyBodyState evolve(const ManyBodyState& state, double t) const;

  /// Exact 2<Sz_n(t)> for the uniform mixture of sector basis states with `site` up
  /// (the ensemble the random-phase state of random_sector_state samples).
  Eigen::VectorXd sector_polarization(int ups, int site, double t) const;

  /// Weights h_n of the infinite-temperature echo
  ///   M(t, phi) = Tr[Phi^dag Sz_site Phi Sz_site] / Tr[Sz_site^2] = sum_n h_n e^{i n phi},
  /// with Phi = e^{iHt} e^{-i phi H_g} e^{-iHt}. Index n runs over [-max_shift, max_shift];
  /// entry i of the result holds n = i - max_shift. Requires all sectors.
  Eigen::VectorXd echo_weights(int site, double t) const;

  /// Largest |g_i - g_j| between two states of one sector.
  int max_shift() const;

 private:
  void build(std::span<const int> sectors);

  ChainSpec spec_;
  std::vector<Block> blocks_;
  std::vector<int> block_of_;  // ups -> position in blocks_, -1 if absent
};

/// M(t, phi_j) from echo weights on the given phases.
std::vector<std::complex<double>> echo_from_weights(const Eigen::VectorXd& weights, std::span<const double> phases);

/// Exact exp(-iHt)|state>; test oracle for the Trotter kernel, N <= max_exact_sites.
ManyBodyState exact_evolve_reference(const ChainSpec& spec, const ManyBodyState& state, double t);

}  // namespace zoge
