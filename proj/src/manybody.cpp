#include "zoge/manybody.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

namespace zoge {

int popcount(std::uint64_t mask) { return std::popcount(mask); }

namespace {

void check_sites(int n_sites) {
  if (n_sites < 1 || n_sites > max_state_sites)
    throw std::invalid_argument("n_sites: state vectors support 1.." + std::to_string(max_state_sites) + " sites");
}

}  // namespace

ManyBodyState random_sector_state(int n_sites, int ups, int excitation_site, Rng& rng) {
  check_sites(n_sites);
  if (excitation_site < 0 || excitation_site >= n_sites) throw std::invalid_argument("excitation_site outside the chain");
  if (ups < 1 || ups > n_sites) throw std::invalid_argument("ups: sector needs 1 <= ups <= N with the excited spin up");
  const std::uint64_t dim = 1ull << n_sites;
  const std::uint64_t excited = 1ull << excitation_site;
  ManyBodyState state{n_sites, Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dim)), ups};
  std::uint64_t count = 0;
  for (std::uint64_t mask = 0; mask < dim; ++mask) {
    if (!(mask & excited) || std::popcount(mask) != ups) continue;
    state.amp[static_cast<Eigen::Index>(mask)] = std::polar(1.0, two_pi * uniform01(rng));
    ++count;
  }
  state.amp /= std::sqrt(static_cast<double>(count));
  return state;
}

ManyBodyState random_full_state(int n_sites, Rng& rng) {
  check_sites(n_sites);
  const std::uint64_t dim = 1ull << n_sites;
  ManyBodyState state{n_sites, Eigen::VectorXcd(static_cast<Eigen::Index>(dim)), std::nullopt};
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (std::uint64_t mask = 0; mask < dim; ++mask)
    state.amp[static_cast<Eigen::Index>(mask)] = std::polar(scale, two_pi * uniform01(rng));
  return state;
}

ManyBodyState basis_state(int n_sites, std::uint64_t mask) {
  check_sites(n_sites);
  const std::uint64_t dim = 1ull << n_sites;
  if (mask >= dim) throw std::invalid_argument("mask outside the 2^N basis");
  ManyBodyState state{n_sites, Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dim)), std::popcount(mask)};
  state.amp[static_cast<Eigen::Index>(mask)] = 1.0;
  return state;
}

void TrotterPlan::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("dt: must be > 0");
  if (order != 2) throw std::invalid_argument("order: only the symmetric second-order splitting is implemented");
  if (dt > dt_cap && !allow_large_dt)
    throw std::invalid_argument("dt: " + std::to_string(dt) + " exceeds the cap " + std::to_string(dt_cap) +
                                " (set allow_large_dt to override)");
}

long TrotterPlan::steps_for(double t) const {
  if (t <= 0.0) return 0;
  return std::max(1L, static_cast<long>(std::ceil(t / dt - 1e-9)));
}

namespace {

// exp(-i tau h) for one bond, h = -(J/2)(S+S- + h.c.) + U SzSz + f_lo Sz_lo + f_hi Sz_hi.
// Local pattern p = bit_lo + 2 bit_hi; the flip-flop block acts on p = 1, 2.
struct BondGate {
  int bond = 0;
  cplx d00, d11;
  cplx m11, m12, m21, m22;
};

BondGate make_gate(int bond, double j, double u, double f_lo, double f_hi, double tau) {
  const double e00 = 0.25 * u - 0.5 * (f_lo + f_hi);
  const double e11 = 0.25 * u + 0.5 * (f_lo + f_hi);
  const double mean = -0.25 * u;
  const double delta = 0.5 * (f_lo - f_hi);
  const double off = -0.5 * j;
  const double omega = std::hypot(delta, off);
  const double c = std::cos(omega * tau);
  const double s_over = omega > 0.0 ? std::sin(omega * tau) / omega : tau;
  const cplx global = std::polar(1.0, -tau * mean);
  const cplx minus_i(0.0, -1.0);
  BondGate g;
  g.bond = bond;
  g.d00 = std::polar(1.0, -tau * e00);
  g.d11 = std::polar(1.0, -tau * e11);
  g.m11 = global * (c + minus_i * s_over * delta);
  g.m22 = global * (c - minus_i * s_over * delta);
  g.m12 = g.m21 = global * (minus_i * s_over * off);
  return g;
}

struct GateLayers {
  std::vector<BondGate> even_half, even_full, odd_full;
};

GateLayers build_layers(const ChainSpec& spec, double tau) {
  const int n = spec.n_sites;
  const Eigen::VectorXd eps = site_fields(spec).eps;
  auto weight = [n](int site) { return (site == 0 || site == n - 1) ? 1.0 : 0.5; };
  GateLayers layers;
  for (int b = 0; b + 1 < n; ++b) {
    const double f_lo = weight(b) * eps[b];
    const double f_hi = weight(b + 1) * eps[b + 1];
    if (b % 2 == 0) {
      layers.even_half.push_back(make_gate(b, spec.j, spec.u, f_lo, f_hi, 0.5 * tau));
      layers.even_full.push_back(make_gate(b, spec.j, spec.u, f_lo, f_hi, tau));
    } else {
      layers.odd_full.push_back(make_gate(b, spec.j, spec.u, f_lo, f_hi, tau));
    }
  }
  return layers;
}

void apply_gate(cplx* amp, std::size_t dim, const BondGate& g) {
  const std::size_t lo = std::size_t{1} << g.bond;
  const std::size_t hi = lo << 1;
  const std::size_t block = hi << 1;
  for (std::size_t outer = 0; outer < dim; outer += block) {
    for (std::size_t inner = 0; inner < lo; ++inner) {
      const std::size_t i00 = outer | inner;
      const std::size_t i01 = i00 | lo;
      const std::size_t i10 = i00 | hi;
      const std::size_t i11 = i01 | hi;
      const cplx x = amp[i01];
      const cplx y = amp[i10];
      amp[i00] *= g.d00;
      amp[i11] *= g.d11;
      amp[i01] = g.m11 * x + g.m12 * y;
      amp[i10] = g.m21 * x + g.m22 * y;
    }
  }
}

void apply_layer(cplx* amp, std::size_t dim, const std::vector<BondGate>& layer) {
  for (const auto& g : layer) apply_gate(amp, dim, g);
}

// Packed representation of one magnetization sector: per bond, the packed
// indices whose local pattern is 00 or 11, and the flip-flop pairs (01, 10).
struct SectorTables {
  std::vector<std::uint32_t> masks;
  std::vector<std::vector<std::uint32_t>> idx00, idx11;
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> pairs;
};

SectorTables build_sector_tables(int n_sites, int ups) {
  SectorTables t;
  const std::uint64_t dim = 1ull << n_sites;
  std::vector<std::int32_t> index(dim, -1);
  for (std::uint64_t mask = 0; mask < dim; ++mask) {
    if (std::popcount(mask) != ups) continue;
    index[mask] = static_cast<std::int32_t>(t.masks.size());
    t.masks.push_back(static_cast<std::uint32_t>(mask));
  }
  const int bonds = n_sites - 1;
  t.idx00.resize(bonds);
  t.idx11.resize(bonds);
  t.pairs.resize(bonds);
  for (int b = 0; b < bonds; ++b) {
    const std::uint32_t lo = 1u << b, hi = lo << 1;
    for (std::uint32_t i = 0; i < t.masks.size(); ++i) {
      const std::uint32_t m = t.masks[i];
      const bool l = m & lo, h = m & hi;
      if (!l && !h) t.idx00[b].push_back(i);
      else if (l && h) t.idx11[b].push_back(i);
      else if (l) t.pairs[b].emplace_back(i, static_cast<std::uint32_t>(index[(m ^ lo) | hi]));
    }
  }
  return t;
}

void apply_packed_layer(cplx* amp, const SectorTables& t, const std::vector<BondGate>& layer) {
  for (const auto& g : layer) {
    for (std::uint32_t i : t.idx00[g.bond]) amp[i] *= g.d00;
    for (std::uint32_t i : t.idx11[g.bond]) amp[i] *= g.d11;
    for (const auto& [a, b] : t.pairs[g.bond]) {
      const cplx x = amp[a];
      const cplx y = amp[b];
      amp[a] = g.m11 * x + g.m12 * y;
      amp[b] = g.m21 * x + g.m22 * y;
    }
  }
}

template <typename LayerFn>
void run_steps(long steps, const GateLayers& layers, LayerFn&& apply) {
  // A/2 B A B ... A B A/2: interior even half steps are merged.
  apply(layers.even_half);
  for (long s = 0; s < steps; ++s) {
    apply(layers.odd_full);
    apply(s + 1 < steps ? layers.even_full : layers.even_half);
  }
}

}  // namespace

void evolve(ManyBodyState& state, const ChainSpec& spec, double t, const TrotterPlan& plan, Direction direction) {
  plan.validate();
  if (t < 0.0) throw std::invalid_argument("t: evolution time must be >= 0");
  if (spec.n_sites != state.n_sites) throw std::invalid_argument("spec and state disagree on n_sites");
  const long steps = plan.steps_for(t);
  if (steps == 0) return;
  const double tau = (direction == Direction::forward ? 1.0 : -1.0) * t / static_cast<double>(steps);
  const GateLayers layers = build_layers(spec, tau);
  if (state.sector && state.n_sites > 2) {
    // Sector states are evolved in packed form; amplitudes outside stay exactly zero.
    const SectorTables tables = build_sector_tables(state.n_sites, *state.sector);
    std::vector<cplx> packed(tables.masks.size());
    for (std::size_t i = 0; i < packed.size(); ++i) packed[i] = state.amp[tables.masks[i]];
    run_steps(steps, layers, [&](const std::vector<BondGate>& layer) { apply_packed_layer(packed.data(), tables, layer); });
    for (std::size_t i = 0; i < packed.size(); ++i) state.amp[tables.masks[i]] = packed[i];
    return;
  }
  cplx* amp = state.amp.data();
  const std::size_t dim = state.dim();
  run_steps(steps, layers, [&](const std::vector<BondGate>& layer) { apply_layer(amp, dim, layer); });
}

double gradient_moment(std::uint64_t mask, int n_sites) {
  double g = 0.0;
  for (int n = 0; n < n_sites; ++n) g += n * (((mask >> n) & 1u) ? 0.5 : -0.5);
  return g;
}

void apply_gradient_kick(ManyBodyState& state, double phi_g) {
  const int n = state.n_sites;
  // g(mask) = s(mask) - N(N-1)/4 with s the sum of the up positions.
  const int max_s = n * (n - 1) / 2;
  std::vector<cplx> table(static_cast<std::size_t>(max_s) + 1);
  const double offset = 0.25 * n * (n - 1);
  for (int s = 0; s <= max_s; ++s) table[static_cast<std::size_t>(s)] = std::polar(1.0, -phi_g * (s - offset));
  const std::uint64_t dim = state.dim();
  for (std::uint64_t mask = 0; mask < dim; ++mask) {
    int s = 0;
    for (std::uint64_t m = mask; m; m &= m - 1) s += std::countr_zero(m);
    state.amp[static_cast<Eigen::Index>(mask)] *= table[static_cast<std::size_t>(s)];
  }
}

Eigen::VectorXd local_magnetization(const ManyBodyState& state) {
  const int n = state.n_sites;
  Eigen::VectorXd up = Eigen::VectorXd::Zero(n);
  double total = 0.0;
  const std::uint64_t dim = state.dim();
  for (std::uint64_t mask = 0; mask < dim; ++mask) {
    const double p = std::norm(state.amp[static_cast<Eigen::Index>(mask)]);
    if (p == 0.0) continue;
    total += p;
    for (std::uint64_t m = mask; m; m &= m - 1) up[std::countr_zero(m)] += p;
  }
  return up.array() - 0.5 * total;
}

void apply_sz(ManyBodyState& state, int site) {
  if (site < 0 || site >= state.n_sites) throw std::out_of_range("site outside the chain");
  const std::uint64_t bit = 1ull << site;
  const std::uint64_t dim = state.dim();
  for (std::uint64_t mask = 0; mask < dim; ++mask)
    state.amp[static_cast<Eigen::Index>(mask)] *= (mask & bit) ? 0.5 : -0.5;
}

namespace {

constexpr char checkpoint_magic[8] = {'Z', 'O', 'G', 'E', 'C', 'K', 'P', '1'};
constexpr std::uint32_t checkpoint_version = 1;

template <typename T>
void write_le(std::ostream& os, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  is.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ManyBodyState& state, const SeedLineage& lineage) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path.string());
  os.write(checkpoint_magic, sizeof checkpoint_magic);
  write_le<std::uint32_t>(os, checkpoint_version);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(state.n_sites));
  write_le<std::int32_t>(os, state.sector.value_or(-1));
  write_le<std::uint64_t>(os, lineage.seed);
  write_le<std::uint64_t>(os, lineage.realization);
  write_le<std::uint64_t>(os, lineage.branch);
  for (Eigen::Index i = 0; i < state.amp.size(); ++i) {
    write_le<float>(os, static_cast<float>(state.amp[i].real()));
    write_le<float>(os, static_cast<float>(state.amp[i].imag()));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, checkpoint_magic, sizeof magic) != 0) throw std::runtime_error("checkpoint: bad magic");
  if (read_le<std::uint32_t>(is) != checkpoint_version) throw std::runtime_error("checkpoint: unsupported version");
  Checkpoint cp;
  const auto n = static_cast<int>(read_le<std::uint32_t>(is));
  check_sites(n);
  const auto sector = read_le<std::int32_t>(is);
  cp.lineage.seed = read_le<std::uint64_t>(is);
  cp.lineage.realization = read_le<std::uint64_t>(is);
  cp.lineage.branch = read_le<std::uint64_t>(is);
  cp.state.n_sites = n;
  if (sector >= 0) cp.state.sector = sector;
  cp.state.amp.resize(Eigen::Index{1} << n);
  for (Eigen::Index i = 0; i < cp.state.amp.size(); ++i) {
    const float re = read_le<float>(is);
    const float im = read_le<float>(is);
    cp.state.amp[i] = cplx(re, im);
  }
  return cp;
}

}  // namespace zoge
