#include "zoge/exact.hpp"

#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace zoge {

SectorBasis make_sector_basis(int n_sites, int ups) {
  if (n_sites < 1 || n_sites > max_state_sites) throw std::invalid_argument("n_sites outside the supported range");
  if (ups < 0 || ups > n_sites) throw std::invalid_argument("ups outside [0, N]");
  SectorBasis basis{n_sites, ups, {}, std::vector<std::int32_t>(std::size_t{1} << n_sites, -1)};
  for (std::uint32_t mask = 0; mask < (1u << n_sites); ++mask) {
    if (std::popcount(mask) != ups) continue;
    basis.index[mask] = static_cast<std::int32_t>(basis.masks.size());
    basis.masks.push_back(mask);
  }
  return basis;
}

Eigen::MatrixXd sector_hamiltonian(const ChainSpec& spec, const SectorBasis& basis) {
  if (spec.n_sites != basis.n_sites) throw std::invalid_argument("spec and basis disagree on n_sites");
  const Eigen::VectorXd eps = site_fields(spec).eps;
  const int n = spec.n_sites;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(basis.size(), basis.size());
  for (Eigen::Index i = 0; i < basis.size(); ++i) {
    const std::uint32_t m = basis.masks[static_cast<std::size_t>(i)];
    auto sz = [m](int site) { return ((m >> site) & 1u) ? 0.5 : -0.5; };
    double diag = 0.0;
    for (int s = 0; s < n; ++s) diag += eps[s] * sz(s);
    for (int b = 0; b + 1 < n; ++b) {
      diag += spec.u * sz(b) * sz(b + 1);
      const std::uint32_t pair = 3u << b;
      const std::uint32_t bits = m & pair;
      if (bits != 0 && bits != pair) h(basis.index[m ^ pair], i) = -0.5 * spec.j;
    }
    h(i, i) = diag;
  }
  return h;
}

ExactSpectrum::ExactSpectrum(const ChainSpec& spec) : spec_(spec) {
  std::vector<int> all(static_cast<std::size_t>(spec.n_sites) + 1);
  std::iota(all.begin(), all.end(), 0);
  build(all);
}

ExactSpectrum::ExactSpectrum(const ChainSpec& spec, std::span<const int> sectors) : spec_(spec) { build(sectors); }

void ExactSpectrum::build(std::span<const int> sectors) {
  spec_.validate();
  if (spec_.n_sites > max_exact_sites)
    throw std::invalid_argument("exact reference refused: N = " + std::to_string(spec_.n_sites) + " exceeds " +
                                std::to_string(max_exact_sites));
  block_of_.assign(static_cast<std::size_t>(spec_.n_sites) + 1, -1);
  for (int ups : sectors) {
    if (ups < 0 || ups > spec_.n_sites) throw std::invalid_argument("sector outside [0, N]");
    if (block_of_[static_cast<std::size_t>(ups)] >= 0) continue;
    Block b{make_sector_basis(spec_.n_sites, ups), {}, {}};
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sector_hamiltonian(spec_, b.basis));
    if (solver.info() != Eigen::Success) throw std::runtime_error("sector eigensolver did not converge");
    b.energies = solver.eigenvalues();
    b.vectors = solver.eigenvectors();
    block_of_[static_cast<std::size_t>(ups)] = static_cast<int>(blocks_.size());
    blocks_.push_back(std::move(b));
  }
}

bool ExactSpectrum::has_sector(int ups) const {
  return ups >= 0 && ups <= spec_.n_sites && block_of_[static_cast<std::size_t>(ups)] >= 0;
}

const ExactSpectrum::Block& ExactSpectrum::block(int ups) const {
  if (!has_sector(ups)) throw std::out_of_range("sector " + std::to_string(ups) + " was not diagonalized");
  return blocks_[static_cast<std::size_t>(block_of_[static_cast<std::size_t>(ups)])];
}

ManyBodyState ExactSpectrum::evolve(const ManyBodyState& state, double t) const {
  if (state.n_sites != spec_.n_sites) throw std::invalid_argument("state and spectrum disagree on n_sites");
  ManyBodyState out{state.n_sites, Eigen::VectorXcd::Zero(state.amp.size()), state.sector};
  for (int ups = 0; ups <= spec_.n_sites; ++ups) {
    const SectorBasis basis = has_sector(ups) ? block(ups).basis : make_sector_basis(spec_.n_sites, ups);
    Eigen::VectorXcd local(basis.size());
    for (Eigen::Index i = 0; i < basis.size(); ++i) local[i] = state.amp[basis.masks[static_cast<std::size_t>(i)]];
    if (local.squaredNorm() == 0.0) continue;
    const Block& b = block(ups);
    Eigen::VectorXcd coeff = b.vectors.transpose() * local;
    for (Eigen::Index k = 0; k < coeff.size(); ++k) coeff[k] *= std::polar(1.0, -b.energies[k] * t);
    local = b.vectors * coeff;
    for (Eigen::Index i = 0; i < basis.size(); ++i) out.amp[basis.masks[static_cast<std::size_t>(i)]] = local[i];
  }
  return out;
}

Eigen::VectorXd ExactSpectrum::sector_polarization(int ups, int site, double t) const {
  if (site < 0 || site >= spec_.n_sites) throw std::out_of_range("site outside the chain");
  const Block& b = block(ups);
  const auto& masks = b.basis.masks;
  Eigen::VectorXd weights(b.basis.size());
  for (Eigen::Index i = 0; i < weights.size(); ++i) weights[i] = (masks[static_cast<std::size_t>(i)] >> site) & 1u;
  const double count = weights.sum();
  if (count == 0.0) throw std::invalid_argument("sector has no state with the excitation site up");
  weights /= count;
  // rho(t)_mm = sum_ab V_ma V_mb X_ab cos((E_a - E_b) t) with X = V^T diag(w) V.
  const Eigen::MatrixXd x = b.vectors.transpose() * weights.asDiagonal() * b.vectors;
  const Eigen::ArrayXd phase = b.energies * t;
  const Eigen::ArrayXd c = phase.cos(), s = phase.sin();
  const Eigen::MatrixXd kernel = x.array() * (c.matrix() * c.matrix().transpose() + s.matrix() * s.matrix().transpose()).array();
  const Eigen::VectorXd rho = ((b.vectors * kernel).array() * b.vectors.array()).rowwise().sum();
  Eigen::VectorXd p = Eigen::VectorXd::Zero(spec_.n_sites);
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    const std::uint32_t m = masks[static_cast<std::size_t>(i)];
    for (int n = 0; n < spec_.n_sites; ++n) p[n] += rho[i] * (((m >> n) & 1u) ? 1.0 : -1.0);
  }
  return p;
}

int ExactSpectrum::max_shift() const {
  const int n = spec_.n_sites;
  return (n / 2) * (n - n / 2);
}

Eigen::VectorXd ExactSpectrum::echo_weights(int site, double t) const {
  if (site < 0 || site >= spec_.n_sites) throw std::out_of_range("site outside the chain");
  for (int ups = 0; ups <= spec_.n_sites; ++ups)
    if (!has_sector(ups)) throw std::invalid_argument("echo trace needs every magnetization sector");
  const int shift = max_shift();
  Eigen::VectorXd hist = Eigen::VectorXd::Zero(2 * shift + 1);
  for (const Block& b : blocks_) {
    const auto& masks = b.basis.masks;
    const Eigen::Index d = b.basis.size();
    Eigen::VectorXd sz(d);
    std::vector<int> moment(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) {
      const std::uint32_t m = masks[static_cast<std::size_t>(i)];
      sz[i] = ((m >> site) & 1u) ? 0.5 : -0.5;
      int s = 0;
      for (std::uint32_t r = m; r; r &= r - 1) s += std::countr_zero(r);
      moment[static_cast<std::size_t>(i)] = s;
    }
    // B = e^{-iHt} Sz e^{iHt} = V (X o e^{-i(E_a - E_b)t}) V^T with X = V^T Sz V.
    const Eigen::MatrixXd x = b.vectors.transpose() * sz.asDiagonal() * b.vectors;
    const Eigen::ArrayXd phase = b.energies * t;
    const Eigen::VectorXd c = phase.cos().matrix(), s = phase.sin().matrix();
    const Eigen::MatrixXd cos_diff = c * c.transpose() + s * s.transpose();
    const Eigen::MatrixXd sin_diff = s * c.transpose() - c * s.transpose();
    const Eigen::MatrixXd re = b.vectors * (x.array() * cos_diff.array()).matrix() * b.vectors.transpose();
    const Eigen::MatrixXd im = b.vectors * (x.array() * sin_diff.array()).matrix() * b.vectors.transpose();
    for (Eigen::Index j = 0; j < d; ++j) {
      const int gj = moment[static_cast<std::size_t>(j)];
      for (Eigen::Index i = 0; i < d; ++i) {
        const double w = re(i, j) * re(i, j) + im(i, j) * im(i, j);
        hist[moment[static_cast<std::size_t>(i)] - gj + shift] += w;
      }
    }
  }
  // Tr[Sz^2] = 2^N / 4.
  return hist / std::ldexp(0.25, spec_.n_sites);
}

std::vector<std::complex<double>> echo_from_weights(const Eigen::VectorXd& weights, std::span<const double> phases) {
  const Eigen::Index shift = (weights.size() - 1) / 2;
  std::vector<std::complex<double>> m(phases.size());
  for (std::size_t j = 0; j < phases.size(); ++j) {
    std::complex<double> acc = 0.0;
    for (Eigen::Index i = 0; i < weights.size(); ++i)
      if (weights[i] != 0.0) acc += weights[i] * std::polar(1.0, static_cast<double>(i - shift) * phases[j]);
    m[j] = acc;
  }
  return m;
}

ManyBodyState exact_evolve_reference(const ChainSpec& spec, const ManyBodyState& state, double t) {
  if (spec.n_sites > max_exact_sites)
    throw std::invalid_argument("exact reference refused: N = " + std::to_string(spec.n_sites) + " exceeds " +
                                std::to_string(max_exact_sites));
  if (state.sector) {
    const int ups[] = {*state.sector};
    return ExactSpectrum(spec, ups).evolve(state, t);
  }
  return ExactSpectrum(spec).evolve(state, t);
}

}  // namespace zoge
