#pragma once

#include <vector>

#include <Eigen/Core>

#include "zoge/model.hpp"

namespace zoge {

/// Single-excitation Hamiltonian: real symmetric tridiagonal with on-site
/// energies on the diagonal and the flip-flop hopping -J/2 off the diagonal.
/// With hopping J/2 the Aubry-Andre self-dual point W = 2|hopping| sits at W = J.
struct OneBodyHamiltonian {
  Eigen::VectorXd diag;
  Eigen::VectorXd offdiag;

  int size() const { return static_cast<int>(diag.size()); }
  Eigen::MatrixXd dense() const;
};

/// Eigenpairs sorted by ascending energy; column k of `vectors` holds a_{k n}.
struct OneBodySolution {
  Eigen::VectorXd energies;
  Eigen::MatrixXd vectors;

  int size() const { return static_cast<int>(energies.size()); }
};

/// c_{n|0}(t) for an excitation created at `source` at t = 0.
struct AmplitudeProfile {
  double t = 0.0;
  Eigen::VectorXcd c;
  int source = 0;
};

/// Open boundaries. A nonzero U is ignored (the single-excitation mapping
/// only holds for U = 0) and reported through `warn_on_interaction`.
OneBodyHamiltonian build_onebody_hamiltonian(const ChainSpec& spec, bool* warn_on_interaction = nullptr);

OneBodySolution diagonalize(const OneBodyHamiltonian& h);

AmplitudeProfile propagate_amplitudes(const OneBodySolution& sol, int source, double t);

/// Dynamical inverse participation ratio sum_n |c_n|^4.
template <typename Derived>
double ipr(const Eigen::MatrixBase<Derived>& amplitudes) {
  return amplitudes.cwiseAbs2().cwiseAbs2().sum();
}

double ipr_t(const AmplitudeProfile& profile);

/// IPR_k = sum_n |a_kn|^4 for every eigenvector.
Eigen::VectorXd ipr_eigenstates(const OneBodySolution& sol);

/// IPR_n = sum_k |a_kn|^4 for every site.
Eigen::VectorXd ipr_sites(const OneBodySolution& sol);

/// Q0(t) = IPR_t sampled on `times`; one eigen-solve, O(N^2) per time.
Eigen::VectorXd ipr_series(const OneBodySolution& sol, int source, const Eigen::VectorXd& times);

/// Equilibrium window: `samples` uniform times in [T/2, T] with T = traversal_factor * N / J.
struct EquilibriumWindow {
  double traversal_factor = 10.0;
  int samples = 200;
};

Eigen::VectorXd equilibrium_times(const ChainSpec& spec, const EquilibriumWindow& window = {});

/// Time-averaged Q0 over the equilibrium window.
double equilibrium_ipr(const ChainSpec& spec, int source, const EquilibriumWindow& window = {});

/// -(1/pi) Im G_{site,site}(E + i eta) by recursive decimation of the chain
/// to the left and right of `site`. Requires eta > 0.
Eigen::VectorXd ldos_decimation(const ChainSpec& spec, int site, const Eigen::VectorXd& energies, double eta);

/// Default broadening 4*bandwidth/points on [-J-W-5eta, J+W+5eta].
struct LdosGrid {
  Eigen::VectorXd energies;
  double eta = 0.0;
};

LdosGrid default_ldos_grid(const ChainSpec& spec, int points = 2001);

struct EdgeState {
  int k = 0;
  double energy = 0.0;
  double ipr = 0.0;
  double center = 0.0;  // sum_n n a_kn^2
  bool edge = false;    // center within N/10 of either end
};

/// Eigenstates whose IPR_k exceeds `threshold`; the threshold must exceed the median IPR_k.
std::vector<EdgeState> edge_state_report(const OneBodySolution& sol, double threshold);

/// Same with the default threshold of 5x the median IPR_k.
std::vector<EdgeState> edge_state_report(const OneBodySolution& sol);

double median(Eigen::VectorXd values);

}  // namespace zoge
