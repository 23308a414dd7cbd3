#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "zoge/model.hpp"
#include "zoge/random.hpp"

namespace zoge {

using cplx = std::complex<double>;

/// Amplitudes over the 2^N computational basis; bit n of the index is spin n (1 = up).
/// When `sector` is set every amplitude outside that popcount is exactly zero.
struct ManyBodyState {
  int n_sites = 0;
  Eigen::VectorXcd amp;
  std::optional<int> sector;

  std::size_t dim() const { return static_cast<std::size_t>(amp.size()); }
  double norm2() const { return amp.squaredNorm(); }
};

inline constexpr int max_state_sites = 20;

/// Up-spin count of the working sector: (N+1)/2 for odd N, N/2+1 for even N.
inline int default_up_count(int n_sites) { return n_sites / 2 + 1; }

/// Number of up spins in a basis mask.
int popcount(std::uint64_t mask);

/// sum_r exp(i phi_r) D^{-1/2} |up_site> (x) |beta_r>, where beta_r runs over the
/// D configurations of the other N-1 spins holding ups-1 up spins.
ManyBodyState random_sector_state(int n_sites, int ups, int excitation_site, Rng& rng);

/// Random-phase superposition of all 2^N basis states (infinite-temperature typical state).
ManyBodyState random_full_state(int n_sites, Rng& rng);

/// Product state from a bitmask.
ManyBodyState basis_state(int n_sites, std::uint64_t mask);

enum class Direction { forward, backward };

/// Symmetric second-order Trotter splitting: half step of the even bonds,
/// full step of the odd bonds, half step of the even bonds. Each bond gate is
/// the exact exponential of the two-site term, with the on-site field split
/// evenly between the two bonds touching a site (full weight at chain ends).
struct TrotterPlan {
  double dt = 0.02;
  int order = 2;
  double dt_cap = 0.05;
  bool allow_large_dt = false;

  /// Throws std::invalid_argument if dt <= 0, order != 2, or dt above the cap without override.
  void validate() const;
  /// Number of steps used for a duration t (the step is shrunk to t/steps).
  long steps_for(double t) const;
};

/// Applies exp(-iHt) (forward) or exp(+iHt) (backward) in place. Backward
/// uses the same gate sequence with the Hamiltonian negated, which is the
/// exact inverse of forward evolution gate by gate.
void evolve(ManyBodyState& state, const ChainSpec& spec, double t, const TrotterPlan& plan,
            Direction direction = Direction::forward);

/// Gradient moment g(mask) = sum_n n m_n with m_n = +-1/2 (0-based positions).
double gradient_moment(std::uint64_t mask, int n_sites);

/// Multiplies every amplitude by exp(-i phi_g g(mask)).
void apply_gradient_kick(ManyBodyState& state, double phi_g);

/// <Sz_n> for every site.
Eigen::VectorXd local_magnetization(const ManyBodyState& state);

/// Multiplies amplitudes by (bit_site - 1/2), i.e. applies Sz_site.
void apply_sz(ManyBodyState& state, int site);

/// Provenance stored in a checkpoint header.
struct SeedLineage {
  std::uint64_t seed = 0;
  std::uint64_t realization = 0;
  std::uint64_t branch = 0;
};

/// Binary checkpoint: "ZOGECKP1", u32 version, u32 N, i32 sector (-1 = none),
/// u64 seed, u64 realization, u64 branch, then 2^N little-endian float32 (re, im) pairs.
void save_checkpoint(const std::filesystem::path& path, const ManyBodyState& state, const SeedLineage& lineage);

struct Checkpoint {
  ManyBodyState state;
  SeedLineage lineage;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace zoge
