#include "zoge/echo.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace zoge {

std::vector<double> kick_phases(int n_phi) {
  if (n_phi < 1 || n_phi % 2 == 0) throw std::invalid_argument("n_phi: must be a positive odd number");
  std::vector<double> phases(static_cast<std::size_t>(n_phi));
  for (int j = 0; j < n_phi; ++j) phases[static_cast<std::size_t>(j)] = two_pi * j / n_phi;
  return phases;
}

int default_phase_count(int n_sites) {
  const int n = 4 * n_sites + 1;
  return n % 2 ? n : n + 1;
}

std::vector<std::complex<double>> loschmidt_echo_scan(const ChainSpec& spec, double t, std::span<const double> phases,
                                                      const ManyBodyState& psi, int site, const TrotterPlan& plan) {
  if (t < 0.0) throw std::invalid_argument("t: must be >= 0");
  if (site < 0 || site >= psi.n_sites) throw std::out_of_range("excitation site outside the chain");
  ManyBodyState excited = psi;
  apply_sz(excited, site);
  const double norm = excited.norm2();
  if (norm == 0.0) throw std::invalid_argument("psi has no weight on Sz_site");
  ManyBodyState plain = psi;
  evolve(excited, spec, t, plan, Direction::forward);
  evolve(plain, spec, t, plan, Direction::forward);
  std::vector<std::complex<double>> out;
  out.reserve(phases.size());
  for (double phi : phases) {
    ManyBodyState v = excited;
    apply_gradient_kick(v, phi);
    evolve(v, spec, t, plan, Direction::backward);
    ManyBodyState w = plain;
    apply_gradient_kick(w, phi);
    evolve(w, spec, t, plan, Direction::backward);
    apply_sz(w, site);
    out.push_back(w.amp.dot(v.amp) / norm);
  }
  return out;
}

std::complex<double> loschmidt_echo(const ChainSpec& spec, double t, double phi_g, const ManyBodyState& psi,
                                    int site, const TrotterPlan& plan) {
  const double phases[] = {phi_g};
  return loschmidt_echo_scan(spec, t, phases, psi, site, plan).front();
}

double ZogeRecord::at(int n) const {
  const int h = half();
  return (n < -h || n > h) ? 0.0 : q[n + h];
}

ZogeRecord zoge_spectrum(std::span<const std::complex<double>> echo, double t) {
  const int n_phi = static_cast<int>(echo.size());
  if (n_phi < 1 || n_phi % 2 == 0)
    throw std::invalid_argument("echo must be sampled on an odd number of phases, got " + std::to_string(n_phi));
  ZogeRecord rec;
  rec.t = t;
  rec.phases = kick_phases(n_phi);
  rec.echo.assign(echo.begin(), echo.end());
  const int half = (n_phi - 1) / 2;
  rec.q.resize(n_phi);
  for (int n = -half; n <= half; ++n) {
    double acc = 0.0;
    for (int j = 0; j < n_phi; ++j) {
      const double arg = -two_pi * static_cast<double>(static_cast<long>(n) * j % n_phi) / n_phi;
      acc += echo[static_cast<std::size_t>(j)].real() * std::cos(arg) - echo[static_cast<std::size_t>(j)].imag() * std::sin(arg);
    }
    rec.q[n + half] = acc / n_phi;
  }
  for (const auto& m : echo) rec.imag_residual = std::max(rec.imag_residual, std::abs(m.imag()));
  rec.aliasing = n_phi > 1 ? std::abs(rec.q[0]) + std::abs(rec.q[n_phi - 1]) : 0.0;
  rec.aliased = rec.aliasing > 1e-3;
  return rec;
}

double spectrum_variance(const ZogeRecord& record) {
  const int h = record.half();
  double acc = 0.0;
  for (int n = -h; n <= h; ++n) acc += static_cast<double>(n) * n * record.q[n + h];
  return acc;
}

PolarizationProfile make_profile(double t, Eigen::VectorXd p, int site) {
  PolarizationProfile prof;
  prof.t = t;
  prof.s2 = p.squaredNorm();
  prof.p00 = p[site];
  prof.p = std::move(p);
  return prof;
}

double spatial_variance(const Eigen::VectorXd& p) {
  const Eigen::VectorXd n = Eigen::VectorXd::LinSpaced(p.size(), 0, static_cast<double>(p.size() - 1));
  const double mean = p.dot(n);
  return p.dot(n.cwiseProduct(n)) - mean * mean;
}

std::vector<PolarizationProfile> polarization_trace(const ChainSpec& spec, ManyBodyState psi0, int site,
                                                    std::span<const double> times, const TrotterPlan& plan) {
  if (site < 0 || site >= psi0.n_sites) throw std::out_of_range("excitation site outside the chain");
  std::vector<PolarizationProfile> out;
  out.reserve(times.size());
  double now = 0.0;
  for (double t : times) {
    if (t < now) throw std::invalid_argument("polarization_trace: times must be ascending and >= 0");
    evolve(psi0, spec, t - now, plan, Direction::forward);
    now = t;
    out.push_back(make_profile(t, 2.0 * local_magnetization(psi0), site));
  }
  return out;
}

std::vector<double> log_time_grid(double t_min, double t_max, int points) {
  if (!(t_min > 0.0) || !(t_max > t_min) || points < 2) throw std::invalid_argument("log grid needs 0 < t_min < t_max, points >= 2");
  std::vector<double> grid(static_cast<std::size_t>(points));
  const double ratio = std::log(t_max / t_min) / (points - 1);
  for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = t_min * std::exp(ratio * i);
  grid.back() = t_max;
  return grid;
}

}  // namespace zoge
