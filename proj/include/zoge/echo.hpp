#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "zoge/manybody.hpp"
#include "zoge/model.hpp"

namespace zoge {

/// Kick angles phi_j = 2 pi j / n_phi, j = 0..n_phi-1. n_phi must be odd.
std::vector<double> kick_phases(int n_phi);

/// Smallest odd count >= 4N + 1.
int default_phase_count(int n_sites);

/// Gradient-kicked Loschmidt echo
///
///   M(t, phi) = <psi| Phi^dag Sz_site Phi Sz_site |psi> / <psi| Sz_site^2 |psi>,
///   Phi = e^{iHt} e^{-i phi H_g} e^{-iHt},  H_g = sum_n n Sz_n,
///
/// evaluated as <w|v> with v = Phi Sz|psi> and w = Sz Phi|psi>. A random-phase
/// `psi` over all 2^N states estimates the infinite-temperature trace, for
/// which the zeroth Fourier mode equals sum_n |c_{n|0}(t)|^4 when U = 0.
/// M(t, 0) = 1 up to rounding because backward gates invert forward gates exactly.
std::complex<double> loschmidt_echo(const ChainSpec& spec, double t, double phi_g, const ManyBodyState& psi,
                                    int site, const TrotterPlan& plan);

/// M(t, phi_j) for every phase; shares the two forward evolutions.
std::vector<std::complex<double>> loschmidt_echo_scan(const ChainSpec& spec, double t, std::span<const double> phases,
                                                      const ManyBodyState& psi, int site, const TrotterPlan& plan);

/// Gradient entanglement amplitudes at one time.
struct ZogeRecord {
  double t = 0.0;
  std::vector<double> phases;
  std::vector<std::complex<double>> echo;
  Eigen::VectorXd q;            // Q_n for n = -half..half, half = (n_phi - 1) / 2
  double imag_residual = 0.0;   // max |Im M(t, phi_j)|
  double aliasing = 0.0;        // |Q| at the two outermost indices
  bool aliased = false;         // aliasing > 1e-3

  int half() const { return static_cast<int>(q.size() - 1) / 2; }
  /// Q_n; zero outside the resolved range.
  double at(int n) const;
  /// The zeroth-order gradient entanglement Q_0.
  double zoge() const { return at(0); }
  /// sum_n Q_n (equals M(t, 0)).
  double total() const { return q.sum(); }
};

/// Q_n = Re (1/n_phi) sum_j M(t, phi_j) e^{-i n phi_j} on the uniform grid phi_j = 2 pi j / n_phi.
ZogeRecord zoge_spectrum(std::span<const std::complex<double>> echo, double t = 0.0);

/// Second moment sum_n n^2 Q_n of the spectrum.
double spectrum_variance(const ZogeRecord& record);

/// Normalized polarization p_n = 2<Sz_n(t)> measured on the excited state.
struct PolarizationProfile {
  double t = 0.0;
  Eigen::VectorXd p;
  double s2 = 0.0;   // sum_n p_n^2
  double p00 = 0.0;  // p at the excitation site
};

PolarizationProfile make_profile(double t, Eigen::VectorXd p, int site);

/// Spatial variance of a polarization profile, sum p n^2 - (sum p n)^2.
double spatial_variance(const Eigen::VectorXd& p);

/// Forward-only evolution of `psi0` with snapshots at each (ascending) time.
std::vector<PolarizationProfile> polarization_trace(const ChainSpec& spec, ManyBodyState psi0, int site,
                                                    std::span<const double> times, const TrotterPlan& plan);

/// Sparse log-spaced echo grid (default 24 points on [0.5, 500]/J).
std::vector<double> log_time_grid(double t_min, double t_max, int points);

}  // namespace zoge
