#include <cstdlib>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "zoge/runner.hpp"

namespace zoge {

namespace {

struct GridText {
  std::string w = "0.5", u = "0", phi;
};

void add_run_options(CLI::App* sub, RunConfig& c, GridText& g) {
  sub->add_option("--n", c.n_sites, "Number of sites N");
  sub->add_option("--j", c.j, "Exchange J (energy unit)");
  sub->add_option("--w", g.w, "Disorder grid W: start:stop:step, a,b,c or one value");
  sub->add_option("--u", g.u, "Interaction grid U");
  sub->add_option("--phi", g.phi, "Explicit realization phases (overrides --realizations)");
  sub->add_option("--origin", c.origin, "Site label of the first site in the potential");
  sub->add_option("--realizations", c.realizations, "Number of random phases phi");
  sub->add_option("--seed", c.seed, "Master seed");
  sub->add_option("--seeds", c.seeds, "Random states per realization");
  sub->add_option("--excite", c.excite, "Excitation site: middle, start, end or an index");
  sub->add_option("--ups", c.ups, "Up spins in the working sector (0: N/2 + 1)");
  sub->add_option("--dt", c.plan.dt, "Trotter step");
  sub->add_flag("--allow-large-dt", c.plan.allow_large_dt, "Permit dt above the 0.05/J cap");
  sub->add_option("--t-max", c.t_max, "Many-body time horizon");
  sub->add_option("--t-min", c.t_min, "First time of log grids");
  sub->add_option("--samples", c.samples, "Samples of s2 traces");
  sub->add_flag("--log-times", c.log_times, "Log-spaced s2 samples on [t-min, t-max]");
  sub->add_option("--times", c.n_times, "Echo grid points");
  sub->add_option("--n-phi", c.n_phi, "Kick phases (odd; 0: 4N + 1)");
  sub->add_option("--window", c.window_fraction, "Equilibrium window starts at this fraction of T");
  sub->add_option("--traversal", c.traversal, "One-body horizon in units of N/J");
  sub->add_option("--onebody-samples", c.onebody_samples, "Samples in the one-body window");
  sub->add_flag("--with-zoge", c.with_zoge, "Also run the echo on the same cells");
  sub->add_option("--input", c.inputs, "Input CSV file or run directory");
  sub->add_option("--column", c.column, "Value column for fit-critical");
  sub->add_option("--fit-tmin", c.fit_t_min, "Power-law window start");
  sub->add_option("--fit-tmax", c.fit_t_max, "Power-law window end");
  sub->add_option("--smoothing", c.smoothing, "Moving-quadratic width before differentiation (0: off)");
  sub->add_option("--points", c.ldos_points, "LDOS energy points");
  sub->add_option("--output", c.output_root, "Output root")->envname("ZOGE_OUTPUT_ROOT");
  sub->add_option("--threads", c.threads, "Worker threads (0: all cores)");
}

void apply_grids(RunConfig& c, const GridText& g) {
  c.w = parse_grid(g.w, "w");
  c.u = parse_grid(g.u, "u");
  c.phases = g.phi.empty() ? std::vector<double>{} : parse_grid(g.phi, "phi");
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gradient-kicked echo and localization sweeps on the interacting Aubry-Andre chain"};
  app.set_config("--config", "", "INI file, one [section] per subcommand");
  app.set_version_flag("--version", std::string(ZOGE_VERSION));
  app.require_subcommand(1);

  RunConfig c;
  GridText g;
  const std::vector<std::pair<std::string, std::string>> experiments = {
      {"onebody-sweep", "Time-averaged one-body IPR versus W"},
      {"zoge", "Echo spectra Q_n(t) from random-state traces"},
      {"s2-dynamics", "S2(t), P00(t) and p_n(t) in the working sector"},
      {"phase-diagram", "Equilibrium S2 over a (W, U) grid with bounds and contour"},
      {"fit-critical", "Critical bounds from a Q0 or S2 curve"},
      {"fit-alpha", "Power-law exponents from s2 runs"},
      {"ldos", "Local density of states, eigenstate and site IPRs"}};
  for (const auto& [name, help] : experiments) add_run_options(app.add_subcommand(name, help), c, g);
  std::string experiment;
  CLI::App* cost = app.add_subcommand("estimate-cost", "Task count and predicted wall time");
  cost->add_option("--experiment", experiment, "Experiment to cost")->required();
  add_run_options(cost, c, g);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << ZOGE_VERSION << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return 2;
  }

  try {
    apply_grids(c, g);
    if (cost->parsed()) {
      c.command = experiment;
      const CostEstimate e = estimate_cost(c);
      out << "tasks: " << e.tasks << "\n";
      if (e.evolutions) out << "evolutions: " << e.evolutions << "\n";
      if (e.forward_evolutions) out << "forward evolutions: " << e.forward_evolutions << "\n";
      out << "predicted seconds (single worker): " << e.seconds << "\n" << e.detail << "\n";
      return 0;
    }
    c.command = app.get_subcommands().front()->get_name();
    return run(c, err).exit_code;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace zoge
