#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "zoge/manybody.hpp"
#include "zoge/model.hpp"

namespace zoge {

/// A configuration problem tied to one field; maps to exit code 2.
struct ConfigError : std::invalid_argument {
  ConfigError(std::string field_, const std::string& what)
      : std::invalid_argument(field_ + ": " + what), field(std::move(field_)) {}
  std::string field;
};

/// "start:stop:step" (stop inclusive), "a,b,c" or a single number.
std::vector<double> parse_grid(std::string_view text, const std::string& field);

struct RunConfig {
  std::string command;  // onebody-sweep | zoge | s2-dynamics | phase-diagram | fit-critical | fit-alpha | ldos
  int n_sites = 13;
  double j = 1.0;
  double origin = 1.0;
  std::vector<double> w{0.5};
  std::vector<double> u{0.0};
  std::vector<double> phases;  // explicit realizations; empty: draw `realizations` from `seed`
  int realizations = 1;
  std::uint64_t seed = 1;
  int seeds = 1;               // random states per realization
  std::string excite = "middle";
  int ups = 0;                 // 0: N/2 + 1
  TrotterPlan plan;
  double t_max = 500.0;        // many-body horizon
  int samples = 200;           // s2 trace samples
  bool log_times = false;      // s2 trace samples log-spaced on [t_min, t_max] instead of uniform
  int n_times = 24;            // echo grid points on [t_min, t_max]
  double t_min = 0.5;
  int n_phi = 0;               // 0: 4N + 1
  double window_fraction = 0.5;
  double traversal = 10.0;     // one-body horizon in units of N/J
  int onebody_samples = 200;
  bool with_zoge = false;
  std::vector<std::string> inputs;  // fit commands
  std::string column;               // fit-critical value column
  double fit_t_min = 10.0, fit_t_max = 500.0;
  int smoothing = 0;
  int ldos_points = 2001;
  std::filesystem::path output_root = "runs";
  int threads = 0;  // 0: hardware concurrency

  int excitation_site() const;
  int up_count() const { return ups > 0 ? ups : default_up_count(n_sites); }
  int phase_count() const;
  /// Realization phases (explicit list or seeded draw).
  std::vector<double> realization_phases() const;
  ChainSpec spec(double w_value, double u_value, double phi) const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// Canonical key = value lines; the run id hashes these.
  std::vector<std::pair<std::string, std::string>> canonical() const;
};

/// "<command>-<16 hex digits>" from a 64-bit FNV-1a hash of the canonical config.
std::string run_id(const RunConfig& config);

struct CostEstimate {
  long tasks = 0;
  long evolutions = 0;          // kicked echo evolutions or forward traces
  long forward_evolutions = 0;  // echo forward branches
  double seconds = 0.0;
  std::string detail;
};

/// Task decomposition plus a time estimate calibrated on a short timed run.
CostEstimate estimate_cost(const RunConfig& config);

struct RunResult {
  int exit_code = 0;  // 0 ok, 1 task failures, 2 config error
  std::filesystem::path directory;
  std::vector<std::string> errors;
};

/// Executes the configured experiment into <output_root>/<run id>/. Completed
/// task results found there are reused; finished runs are left untouched.
RunResult run(const RunConfig& config, std::ostream& log);

// Experiment kernels (one task each).

/// Echo samples at each time: row t holds M(t, phi_j), j = 0..n_phi-1.
Eigen::MatrixXcd zoge_task(const ChainSpec& spec, int site, std::span<const double> times, int n_phi,
                           std::uint64_t seed, std::uint64_t realization, std::uint64_t branch, const TrotterPlan& plan);

/// Polarization p_n(t) (rows t) of one random sector state.
Eigen::MatrixXd polarization_task(const ChainSpec& spec, int ups, int site, std::span<const double> times,
                                  std::uint64_t seed, std::uint64_t realization, std::uint64_t branch,
                                  const TrotterPlan& plan);

/// Sample times of an s2 trace: uniform on (0, t_max] or log-spaced on [t_min, t_max].
std::vector<double> trace_times(const RunConfig& config);

/// Minimal CSV table: header plus numeric rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  int column(std::string_view name) const;  // -1 if absent
};
CsvTable read_csv(const std::filesystem::path& path);

/// Entry point shared by the zoge-sim binary and the tests.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace zoge
