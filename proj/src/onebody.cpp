#include "zoge/onebody.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace zoge {

Eigen::MatrixXd OneBodyHamiltonian::dense() const {
  const int n = size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  h.diagonal() = diag;
  for (int i = 0; i + 1 < n; ++i) h(i, i + 1) = h(i + 1, i) = offdiag[i];
  return h;
}

OneBodyHamiltonian build_onebody_hamiltonian(const ChainSpec& spec, bool* warn_on_interaction) {
  spec.validate();
  if (warn_on_interaction) *warn_on_interaction = spec.u != 0.0;
  return {site_fields(spec).eps, Eigen::VectorXd::Constant(spec.n_sites - 1, -0.5 * spec.j)};
}

OneBodySolution diagonalize(const OneBodyHamiltonian& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(h.diag, h.offdiag, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw std::runtime_error("tridiagonal eigensolver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

AmplitudeProfile propagate_amplitudes(const OneBodySolution& sol, int source, double t) {
  if (source < 0 || source >= sol.size()) throw std::out_of_range("source site outside the chain");
  const Eigen::VectorXcd weights =
      sol.vectors.row(source).transpose().cast<std::complex<double>>().cwiseProduct(
          (std::complex<double>(0.0, -t) * sol.energies.cast<std::complex<double>>()).array().exp().matrix());
  return {t, sol.vectors.cast<std::complex<double>>() * weights, source};
}

double ipr_t(const AmplitudeProfile& profile) { return ipr(profile.c); }

Eigen::VectorXd ipr_eigenstates(const OneBodySolution& sol) {
  return sol.vectors.array().pow(4).colwise().sum().transpose();
}

Eigen::VectorXd ipr_sites(const OneBodySolution& sol) { return sol.vectors.array().pow(4).rowwise().sum(); }

Eigen::VectorXd ipr_series(const OneBodySolution& sol, int source, const Eigen::VectorXd& times) {
  if (source < 0 || source >= sol.size()) throw std::out_of_range("source site outside the chain");
  // B(n,k) = a_kn a_k0, so c(t) = B * exp(-i eps t).
  const Eigen::MatrixXd b = sol.vectors.array().rowwise() * sol.vectors.row(source).array();
  const Eigen::ArrayXXd phase = sol.energies * times.transpose();
  const Eigen::MatrixXd re = b * phase.cos().matrix();
  const Eigen::MatrixXd im = b * phase.sin().matrix();
  const Eigen::ArrayXXd prob = re.array().square() + im.array().square();
  return prob.square().colwise().sum().transpose();
}

Eigen::VectorXd equilibrium_times(const ChainSpec& spec, const EquilibriumWindow& window) {
  const double horizon = window.traversal_factor * spec.n_sites / spec.j;
  return Eigen::VectorXd::LinSpaced(window.samples, 0.5 * horizon, horizon);
}

double equilibrium_ipr(const ChainSpec& spec, int source, const EquilibriumWindow& window) {
  const auto sol = diagonalize(build_onebody_hamiltonian(spec));
  return ipr_series(sol, source, equilibrium_times(spec, window)).mean();
}

Eigen::VectorXd ldos_decimation(const ChainSpec& spec, int site, const Eigen::VectorXd& energies, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("eta: broadening must be > 0");
  if (site < 0 || site >= spec.n_sites) throw std::out_of_range("site outside the chain");
  const Eigen::VectorXd eps = site_fields(spec).eps;
  const double v2 = 0.25 * spec.j * spec.j;
  Eigen::VectorXd out(energies.size());
  for (Eigen::Index e = 0; e < energies.size(); ++e) {
    const std::complex<double> z(energies[e], eta);
    std::complex<double> left = 0.0;
    for (int m = 0; m < site; ++m) left = v2 / (z - eps[m] - left);
    std::complex<double> right = 0.0;
    for (int m = spec.n_sites - 1; m > site; --m) right = v2 / (z - eps[m] - right);
    const std::complex<double> g = 1.0 / (z - eps[site] - left - right);
    out[e] = -g.imag() / std::numbers::pi;
  }
  return out;
}

LdosGrid default_ldos_grid(const ChainSpec& spec, int points) {
  if (points < 2) throw std::invalid_argument("ldos grid needs at least 2 points");
  const double half = spec.j + spec.w;
  const double eta = 4.0 * (2.0 * half) / points;
  return {Eigen::VectorXd::LinSpaced(points, -half - 5.0 * eta, half + 5.0 * eta), eta};
}

double median(Eigen::VectorXd values) {
  if (values.size() == 0) throw std::invalid_argument("median of an empty array");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<EdgeState> edge_state_report(const OneBodySolution& sol, double threshold) {
  const Eigen::VectorXd iprs = ipr_eigenstates(sol);
  if (!(threshold > median(iprs))) throw std::invalid_argument("threshold must exceed the median IPR_k");
  const int n = sol.size();
  const Eigen::VectorXd sites = Eigen::VectorXd::LinSpaced(n, 0, n - 1);
  const double margin = n / 10.0;
  std::vector<EdgeState> report;
  for (int k = 0; k < n; ++k) {
    if (iprs[k] <= threshold) continue;
    const double center = sol.vectors.col(k).cwiseAbs2().dot(sites);
    report.push_back({k, sol.energies[k], iprs[k], center, center <= margin || center >= (n - 1) - margin});
  }
  return report;
}

std::vector<EdgeState> edge_state_report(const OneBodySolution& sol) {
  return edge_state_report(sol, 5.0 * median(ipr_eigenstates(sol)));
}

}  // namespace zoge
