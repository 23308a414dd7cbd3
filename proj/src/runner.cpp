#include "zoge/runner.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "zoge/analysis.hpp"
#include "zoge/echo.hpp"
#include "zoge/onebody.hpp"
#include "zoge/random.hpp"

#ifndef ZOGE_VERSION
#define ZOGE_VERSION "dev"
#endif

namespace zoge {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string exact_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view s, const std::string& field) {
  s = trim(s);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || end != s.data() + s.size() || !std::isfinite(v))
    throw ConfigError(field, "'" + std::string(s) + "' is not a number");
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    out.push_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + exact_num(v[i]);
  return s;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) f << (i ? "," : "") << header[i];
  f << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << num(row[i]);
    f << '\n';
  }
}

/// Finished task payloads, one text file each, written atomically.
class TaskStore {
 public:
  explicit TaskStore(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  bool load(long i, std::vector<double>& out) const {
    std::ifstream f(file(i));
    if (!f) return false;
    std::string line;
    std::vector<double> v;
    if (!std::getline(f, line)) return false;
    const long count = std::strtol(line.c_str(), nullptr, 10);
    v.reserve(static_cast<std::size_t>(std::max(0L, count)));
    while (std::getline(f, line)) v.push_back(std::strtod(line.c_str(), nullptr));
    if (static_cast<long>(v.size()) != count) return false;
    out = std::move(v);
    return true;
  }

  void save(long i, const std::vector<double>& v) const {
    const fs::path tmp = file(i).string() + ".tmp";
    {
      std::ofstream f(tmp);
      f << v.size() << '\n';
      for (double x : v) f << exact_num(x) << '\n';
      if (!f) throw std::runtime_error("cannot write task file " + tmp.string());
    }
    fs::rename(tmp, file(i));
  }

 private:
  fs::path file(long i) const { return dir_ / ("task_" + std::to_string(i) + ".txt"); }
  fs::path dir_;
};

struct PoolOutcome {
  std::vector<std::vector<double>> results;
  std::vector<std::string> errors;  // per task, empty on success
  double task_seconds = 0.0;
  long reused = 0;

  bool ok() const {
    for (const auto& e : errors)
      if (!e.empty()) return false;
    return true;
  }
};

// Workers pull task indices from a shared counter and own their slot of the
// result array; reduction happens afterwards in index order.
PoolOutcome run_pool(long n, int threads, const TaskStore& store, const std::function<std::vector<double>(long)>& task,
                     std::ostream& log, const std::string& label) {
  PoolOutcome out;
  out.results.resize(static_cast<std::size_t>(n));
  out.errors.resize(static_cast<std::size_t>(n));
  std::atomic<long> next{0}, done{0}, reused{0};
  std::atomic<long long> nanos{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (long i = next++; i < n; i = next++) {
      auto& slot = out.results[static_cast<std::size_t>(i)];
      if (store.load(i, slot)) {
        ++reused;
      } else {
        const auto t0 = std::chrono::steady_clock::now();
        try {
          slot = task(i);
          store.save(i, slot);
        } catch (const std::exception& e) {
          out.errors[static_cast<std::size_t>(i)] = e.what();
        }
        nanos += std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();
      }
      const long d = ++done;
      if (n >= 10 && d % std::max(1L, n / 10) == 0) {
        std::lock_guard lock(log_mutex);
        log << label << ": " << d << "/" << n << " tasks\n" << std::flush;
      }
    }
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(std::min<long>(n, 1 << 20))));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  out.task_seconds = static_cast<double>(nanos.load()) * 1e-9;
  out.reused = reused.load();
  return out;
}

int worker_count(const RunConfig& c) {
  return c.threads > 0 ? c.threads : std::max(1u, std::thread::hardware_concurrency());
}

void collect_errors(const PoolOutcome& pool, RunResult& res, const std::string& label) {
  for (std::size_t i = 0; i < pool.errors.size(); ++i)
    if (!pool.errors[i].empty()) res.errors.push_back(label + " task " + std::to_string(i) + ": " + pool.errors[i]);
}

void note_pool(json& manifest, const std::string& label, const PoolOutcome& pool) {
  manifest["timings"][label] = {{"task_seconds", pool.task_seconds},
                                {"tasks", pool.results.size()},
                                {"reused", pool.reused}};
}

struct MeanErr {
  Eigen::VectorXd mean, err;
};

// Realization mean and standard error; a single realization gets zero error.
MeanErr ensemble(const std::vector<Eigen::VectorXd>& values) {
  if (values.size() == 1) return {values.front(), Eigen::VectorXd::Zero(values.front().size())};
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(values.front().size());
  const EnsembleCurve c = disorder_average(x, values);
  return {c.mean, c.error};
}

std::string cell_suffix(const RunConfig& c, double w, double u) {
  if (c.w.size() * c.u.size() == 1) return "";
  return "_W" + num(w) + "_U" + num(u);
}

std::vector<double> bounds_row(double u, const CriticalBounds& b) {
  return {u, b.w_lower, b.err_lower, b.w_upper, b.err_upper, b.raw_lower, b.raw_upper, b.found ? 1.0 : 0.0};
}

const std::vector<std::string> bounds_header = {"U", "w_lower", "err_lower", "w_upper", "err_upper",
                                                "raw_lower", "raw_upper", "found"};

// ---------------------------------------------------------------------------

void run_onebody(const RunConfig& c, const fs::path& dir, json& manifest, RunResult& res, std::ostream& log) {
  const auto phases = c.realization_phases();
  const long r_count = static_cast<long>(phases.size());
  const int site = c.excitation_site();
  const EquilibriumWindow window{c.traversal, c.onebody_samples};
  for (double u : c.u)
    if (u != 0.0) log << "note: the one-body sweep ignores U = " << u << "\n";
  const TaskStore store(dir / "tasks");
  const long n = static_cast<long>(c.w.size()) * r_count;
  const PoolOutcome pool = run_pool(
      n, worker_count(c), store,
      [&](long i) {
        const ChainSpec spec = c.spec(c.w[static_cast<std::size_t>(i / r_count)], 0.0,
                                      phases[static_cast<std::size_t>(i % r_count)]);
        return std::vector<double>{equilibrium_ipr(spec, site, window)};
      },
      log, "onebody-sweep");
  note_pool(manifest, "onebody-sweep", pool);
  collect_errors(pool, res, "onebody-sweep");
  if (!pool.ok()) return;

  std::vector<std::vector<double>> sweep;
  std::vector<Eigen::VectorXd> per_realization(static_cast<std::size_t>(r_count), Eigen::VectorXd(c.w.size()));
  for (long i = 0; i < n; ++i) {
    const auto wi = static_cast<std::size_t>(i / r_count), r = static_cast<std::size_t>(i % r_count);
    const double q0 = pool.results[static_cast<std::size_t>(i)].at(0);
    sweep.push_back({c.w[wi], static_cast<double>(r), phases[r], q0});
    per_realization[r][static_cast<Eigen::Index>(wi)] = q0;
  }
  write_csv(dir / "onebody_sweep.csv", {"W", "realization", "phi", "time_averaged_Q0"}, sweep);
  const MeanErr me = ensemble(per_realization);
  std::vector<std::vector<double>> curve;
  for (std::size_t wi = 0; wi < c.w.size(); ++wi)
    curve.push_back({c.w[wi], me.mean[static_cast<Eigen::Index>(wi)], me.err[static_cast<Eigen::Index>(wi)]});
  write_csv(dir / "onebody_curve.csv", {"W", "Q0_mean", "Q0_err"}, curve);
  manifest["outputs"] = {"onebody_sweep.csv", "onebody_curve.csv"};
  if (c.w.size() >= 7) {
    const Eigen::Map<const Eigen::VectorXd> w(c.w.data(), static_cast<Eigen::Index>(c.w.size()));
    const CriticalBounds b = critical_bounds(w, me.mean, c.smoothing);
    write_csv(dir / "critical_bounds.csv", bounds_header, {bounds_row(0.0, b)});
    manifest["outputs"].push_back("critical_bounds.csv");
  }
}

void run_zoge(const RunConfig& c, const fs::path& dir, json& manifest, RunResult& res, std::ostream& log) {
  const auto phases = c.realization_phases();
  const long r_count = static_cast<long>(phases.size()), s_count = c.seeds;
  const int site = c.excitation_site();
  const int n_phi = c.phase_count();
  const std::vector<double> times = log_time_grid(c.t_min, c.t_max, c.n_times);
  const long per_cell = r_count * s_count;
  const long cells = static_cast<long>(c.w.size() * c.u.size());
  const TaskStore store(dir / "tasks_zoge");
  const PoolOutcome pool = run_pool(
      cells * per_cell, worker_count(c), store,
      [&](long i) {
        const long cell = i / per_cell, r = (i % per_cell) / s_count, s = i % s_count;
        const double w = c.w[static_cast<std::size_t>(cell) / c.u.size()], u = c.u[static_cast<std::size_t>(cell) % c.u.size()];
        const Eigen::MatrixXcd m = zoge_task(c.spec(w, u, phases[static_cast<std::size_t>(r)]), site, times, n_phi, c.seed,
                                             static_cast<std::uint64_t>(r), 1000 + static_cast<std::uint64_t>(s), c.plan);
        std::vector<double> flat;
        flat.reserve(static_cast<std::size_t>(2 * m.size()));
        for (Eigen::Index t = 0; t < m.rows(); ++t)
          for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(t, j).real()), flat.push_back(m(t, j).imag());
        return flat;
      },
      log, "zoge");
  note_pool(manifest, "zoge", pool);
  collect_errors(pool, res, "zoge");
  if (!pool.ok()) return;

  const auto nt = static_cast<Eigen::Index>(times.size());
  std::vector<std::vector<double>> summary;
  for (long cell = 0; cell < cells; ++cell) {
    const double w = c.w[static_cast<std::size_t>(cell) / c.u.size()], u = c.u[static_cast<std::size_t>(cell) % c.u.size()];
    Eigen::MatrixXcd mean = Eigen::MatrixXcd::Zero(nt, n_phi);
    Eigen::MatrixXd q0 = Eigen::MatrixXd::Zero(per_cell, nt);
    for (long k = 0; k < per_cell; ++k) {
      const auto& flat = pool.results[static_cast<std::size_t>(cell * per_cell + k)];
      for (Eigen::Index t = 0; t < nt; ++t)
        for (Eigen::Index j = 0; j < n_phi; ++j) {
          const std::size_t at = static_cast<std::size_t>(2 * (t * n_phi + j));
          const std::complex<double> m(flat[at], flat[at + 1]);
          mean(t, j) += m;
          q0(k, t) += m.real() / n_phi;
        }
    }
    mean /= static_cast<double>(per_cell);
    const std::string file = "zoge_" + run_id(c) + cell_suffix(c, w, u) + ".csv";
    std::vector<std::vector<double>> rows;
    for (Eigen::Index t = 0; t < nt; ++t) {
      const Eigen::VectorXcd row = mean.row(t).transpose();
      const ZogeRecord rec = zoge_spectrum(std::span<const std::complex<double>>(row.data(), row.size()),
                                           times[static_cast<std::size_t>(t)]);
      for (int q = -rec.half(); q <= rec.half(); ++q) rows.push_back({rec.t, static_cast<double>(q), rec.at(q), rec.imag_residual});
      double err = 0.0;
      if (per_cell > 1) {
        const double m = q0.col(t).mean();
        err = std::sqrt((q0.col(t).array() - m).square().sum() / static_cast<double>((per_cell - 1) * per_cell));
      }
      summary.push_back({w, u, rec.t, rec.zoge(), err, rec.total(), spectrum_variance(rec), rec.aliasing,
                         rec.aliased ? 1.0 : 0.0});
    }
    write_csv(dir / file, {"t", "n", "Q_n", "imag_residual"}, rows);
    manifest["outputs"].push_back(file);
    manifest["zoge_cells"].push_back({{"w", w}, {"u", u}, {"file", file}});
  }
  const std::string summary_file = "zoge_summary_" + run_id(c) + ".csv";
  write_csv(dir / summary_file, {"W", "U", "t", "Q0", "Q0_err", "sum_Q", "variance", "aliasing", "aliased"}, summary);
  manifest["outputs"].push_back(summary_file);
}

struct CellTraces {
  double w = 0.0, u = 0.0;
  Eigen::MatrixXd p_mean;                 // disorder-averaged p (rows t)
  std::vector<Eigen::VectorXd> s2, p00;   // per realization
};

std::vector<CellTraces> s2_cells(const RunConfig& c, const fs::path& dir, json& manifest, RunResult& res,
                                 std::ostream& log, const std::vector<double>& times) {
  const auto phases = c.realization_phases();
  const long r_count = static_cast<long>(phases.size());
  const int site = c.excitation_site(), ups = c.up_count(), n = c.n_sites;
  const long cells = static_cast<long>(c.w.size() * c.u.size());
  const auto nt = static_cast<Eigen::Index>(times.size());
  const TaskStore store(dir / "tasks_s2");
  const PoolOutcome pool = run_pool(
      cells * r_count, worker_count(c), store,
      [&](long i) {
        const long cell = i / r_count, r = i % r_count;
        const double w = c.w[static_cast<std::size_t>(cell) / c.u.size()], u = c.u[static_cast<std::size_t>(cell) % c.u.size()];
        const ChainSpec spec = c.spec(w, u, phases[static_cast<std::size_t>(r)]);
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(nt, n);
        for (int s = 0; s < c.seeds; ++s)
          acc += polarization_task(spec, ups, site, times, c.seed, static_cast<std::uint64_t>(r),
                                   1 + static_cast<std::uint64_t>(s), c.plan);
        acc /= c.seeds;
        std::vector<double> flat(static_cast<std::size_t>(acc.size()));
        Eigen::Map<Eigen::MatrixXd>(flat.data(), nt, n) = acc;
        return flat;
      },
      log, c.command);
  note_pool(manifest, c.command, pool);
  collect_errors(pool, res, c.command);
  if (!pool.ok()) return {};

  std::vector<CellTraces> out;
  for (long cell = 0; cell < cells; ++cell) {
    CellTraces ct;
    ct.w = c.w[static_cast<std::size_t>(cell) / c.u.size()];
    ct.u = c.u[static_cast<std::size_t>(cell) % c.u.size()];
    ct.p_mean = Eigen::MatrixXd::Zero(nt, n);
    for (long r = 0; r < r_count; ++r) {
      const auto& flat = pool.results[static_cast<std::size_t>(cell * r_count + r)];
      const Eigen::Map<const Eigen::MatrixXd> p(flat.data(), nt, n);
      ct.p_mean += p / static_cast<double>(r_count);
      ct.s2.push_back(p.rowwise().squaredNorm());
      ct.p00.push_back(p.col(site));
    }
    out.push_back(std::move(ct));
  }
  return out;
}

// Per-realization time average over the latter part of the trace, then the realization mean.
std::array<double, 4> equilibrium_of(const RunConfig& c, const std::vector<double>& times, const CellTraces& ct) {
  const Eigen::Map<const Eigen::VectorXd> t(times.data(), static_cast<Eigen::Index>(times.size()));
  const double min_span = 3.0 * c.n_sites / c.j;
  std::vector<Eigen::VectorXd> s2(ct.s2.size(), Eigen::VectorXd(1)), p00(ct.p00.size(), Eigen::VectorXd(1));
  for (std::size_t r = 0; r < ct.s2.size(); ++r) {
    s2[r][0] = time_average_equilibrium(t, ct.s2[r], c.window_fraction, min_span).value;
    p00[r][0] = time_average_equilibrium(t, ct.p00[r], c.window_fraction, min_span).value;
  }
  const MeanErr a = ensemble(s2), b = ensemble(p00);
  return {a.mean[0], a.err[0], b.mean[0], b.err[0]};
}

void run_s2_dynamics(const RunConfig& c, const fs::path& dir, json& manifest, RunResult& res, std::ostream& log) {
  const std::vector<double> times = trace_times(c);
  const auto cells = s2_cells(c, dir, manifest, res, log, times);
  if (!res.errors.empty()) return;
  const bool long_enough = times.back() - times.front() >= 3.0 * c.n_sites / c.j;
  if (!long_enough) log << "note: trace shorter than 3 N/J, no equilibrium values written\n";
  std::vector<std::vector<double>> eq_rows;
  for (const CellTraces& ct : cells) {
    const MeanErr s2 = ensemble(ct.s2), p00 = ensemble(ct.p00);
    std::vector<std::vector<double>> rows, stats;
    for (std::size_t k = 0; k < times.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      std::vector<double> row{times[k], s2.mean[i], p00.mean[i]};
      for (int site = 0; site < c.n_sites; ++site) row.push_back(ct.p_mean(i, site));
      rows.push_back(std::move(row));
      stats.push_back({times[k], s2.mean[i], s2.err[i], p00.mean[i], p00.err[i]});
    }
    std::vector<std::string> header{"t", "S2", "P00"};
    for (int site = 0; site < c.n_sites; ++site) header.push_back("p_" + std::to_string(site));
    const std::string suffix = run_id(c) + cell_suffix(c, ct.w, ct.u) + ".csv";
    write_csv(dir / ("s2_" + suffix), header, rows);
    write_csv(dir / ("s2_stats_" + suffix), {"t", "S2", "S2_err", "P00", "P00_err"}, stats);
    manifest["outputs"].push_back("s2_" + suffix);
    manifest["outputs"].push_back("s2_stats_" + suffix);
    manifest["cells"].push_back({{"w", ct.w}, {"u", ct.u}, {"s2", "s2_" + suffix}, {"stats", "s2_stats_" + suffix}});
    if (long_enough) {
      const auto eq = equilibrium_of(c, times, ct);
      eq_rows.push_back({ct.w, ct.u, eq[0], eq[1], eq[2], eq[3]});
    }
  }
  if (long_enough) {
    write_csv(dir / "s2_equilibrium.csv", {"W", "U", "S2_eq", "S2_eq_err", "P00_eq", "P00_eq_err"}, eq_rows);
    manifest["outputs"].push_back("s2_equilibrium.csv");
  }
  if (c.with_zoge) run_zoge(c, dir, manifest, res, log);
}

void run_phase_diagram(const RunConfig& c, const fs::path& dir, json& manifest, RunResult& res, std::ostream& log) {
  const std::vector<double> times = trace_times(c);
  const auto cells = s2_cells(c, dir, manifest, res, log, times);
  if (!res.errors.empty()) return;
  const auto nw = static_cast<Eigen::Index>(c.w.size()), nu = static_cast<Eigen::Index>(c.u.size());
  Eigen::MatrixXd s2(nu, nw), err(nu, nw);
  std::vector<std::vector<double>> grid_rows;
  for (const CellTraces& ct : cells) {
    const auto wi = static_cast<Eigen::Index>(&ct - cells.data()) / nu, ui = static_cast<Eigen::Index>(&ct - cells.data()) % nu;
    const auto eq = equilibrium_of(c, times, ct);
    s2(ui, wi) = eq[0];
    err(ui, wi) = eq[1];
  }
  for (Eigen::Index ui = 0; ui < nu; ++ui)
    for (Eigen::Index wi = 0; wi < nw; ++wi) grid_rows.push_back({c.w[static_cast<std::size_t>(wi)], c.u[static_cast<std::size_t>(ui)], s2(ui, wi), err(ui, wi)});
  write_csv(dir / "phase_diagram.csv", {"W", "U", "S2_mean", "S2_err"}, grid_rows);
  const Eigen::Map<const Eigen::VectorXd> w(c.w.data(), nw), u(c.u.data(), nu);
  const PhaseDiagram pd = phase_diagram(w, u, s2, err);
  std::vector<std::vector<double>> bounds, contour;
  for (Eigen::Index ui = 0; ui < nu; ++ui) {
    bounds.push_back(bounds_row(u[ui], pd.bounds[static_cast<std::size_t>(ui)]));
    contour.push_back({u[ui], pd.contour[ui]});
  }
  write_csv(dir / "critical_bounds.csv", bounds_header, bounds);
  write_csv(dir / "contour.csv", {"U", "W_contour"}, contour);
  manifest["outputs"] = {"phase_diagram.csv", "critical_bounds.csv", "contour.csv"};
  manifest["contour"] = {{"level", pd.level}, {"partial", pd.partial}};
}

void run_fit_critical(const RunConfig& c, const fs::path& dir, json& manifest, RunResult& res, std::ostream&) {
  const CsvTable table = read_csv(c.inputs.front());
  const int wc = table.column("W");
  int yc = c.column.empty() ? -1 : table.column(c.column);
  if (c.column.empty())
    for (const char* name : {"Q0_mean", "S2_mean", "S2_eq"})
      if (yc < 0) yc = table.column(name);
  if (wc < 0 || yc < 0) throw ConfigError("input", "needs a W column and a value column (Q0_mean, S2_mean or --column)");
  const int uc = table.column("U");
  std::vector<double> order;
  std::map<double, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& row : table.rows) {
    const double u = uc >= 0 ? row[static_cast<std::size_t>(uc)] : 0.0;
    if (!groups.count(u)) order.push_back(u);
    auto& g = groups[u];
    if (!g.first.empty() && row[static_cast<std::size_t>(wc)] <= g.first.back())
      throw ConfigError("input", "W must increase within each U group (pass a disorder-averaged curve)");
    g.first.push_back(row[static_cast<std::size_t>(wc)]);
    g.second.push_back(row[static_cast<std::size_t>(yc)]);
  }
  std::vector<std::vector<double>> rows;
  for (double u : order) {
    auto& [ws, ys] = groups[u];
    if (ws.size() < 7) {
      res.errors.push_back("fit-critical: U = " + num(u) + " has fewer than 7 W points");
      continue;
    }
    const CriticalBounds b = critical_bounds(Eigen::Map<Eigen::VectorXd>(ws.data(), static_cast<Eigen::Index>(ws.size())),
                                             Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size())),
                                             c.smoothing);
    rows.push_back(bounds_row(u, b));
  }
  write_csv(dir / "critical_bounds.csv", bounds_header, rows);
  manifest["outputs"] = {"critical_bounds.csv"};
}

void run_fit_alpha(const RunConfig& c, const fs::path& dir, json& manifest, RunResult& res, std::ostream&) {
  struct Source {
    double u, w;
    fs::path stats;
  };
  std::vector<Source> sources;
  for (const auto& in : c.inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::ifstream f(p / "manifest.json");
      if (!f) throw ConfigError("input", p.string() + " has no manifest.json");
      const json m = json::parse(f);
      if (!m.contains("cells")) throw ConfigError("input", p.string() + " is not an s2-dynamics run");
      for (const auto& cell : m["cells"]) sources.push_back({cell["u"], cell["w"], p / cell["stats"].get<std::string>()});
    } else {
      sources.push_back({std::nan(""), std::nan(""), p});
    }
  }
  std::vector<std::vector<double>> rows;
  for (const Source& src : sources) {
    const CsvTable t = read_csv(src.stats);
    const int tc = t.column("t"), sc = t.column("S2"), pc = t.column("P00");
    if (tc < 0 || sc < 0 || pc < 0) throw ConfigError("input", src.stats.string() + " needs t, S2 and P00 columns");
    Eigen::VectorXd tt(static_cast<Eigen::Index>(t.rows.size())), s2(tt.size()), p00(tt.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      tt[static_cast<Eigen::Index>(i)] = t.rows[i][static_cast<std::size_t>(tc)];
      s2[static_cast<Eigen::Index>(i)] = t.rows[i][static_cast<std::size_t>(sc)];
      p00[static_cast<Eigen::Index>(i)] = t.rows[i][static_cast<std::size_t>(pc)];
    }
    try {
      const PowerLawFit a = fit_power_law(tt, s2, c.fit_t_min, c.fit_t_max);
      const PowerLawFit b = fit_power_law(tt, p00, c.fit_t_min, c.fit_t_max);
      rows.push_back({src.u, src.w, a.alpha, a.error, b.alpha, b.error,
                      power_law_window_sensitivity(tt, s2, c.fit_t_min, c.fit_t_max),
                      power_law_window_sensitivity(tt, p00, c.fit_t_min, c.fit_t_max),
                      static_cast<double>(a.n_excluded), static_cast<double>(b.n_excluded)});
    } catch (const std::invalid_argument& e) {
      res.errors.push_back("fit-alpha " + src.stats.string() + ": " + e.what());
    }
  }
  write_csv(dir / "alpha.csv",
            {"U", "W", "alpha_S2", "err_S2", "alpha_P00", "err_P00", "window_shift_S2", "window_shift_P00",
             "excluded_S2", "excluded_P00"},
            rows);
  manifest["outputs"] = {"alpha.csv"};
}

void run_ldos(const RunConfig& c, const fs::path& dir, json& manifest, RunResult&, std::ostream&) {
  const ChainSpec spec = c.spec(c.w.front(), 0.0, c.realization_phases().front());
  const int site = c.excitation_site();
  const LdosGrid grid = default_ldos_grid(spec, c.ldos_points);
  const Eigen::VectorXd rho = ldos_decimation(spec, site, grid.energies, grid.eta);
  std::vector<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < rho.size(); ++i) rows.push_back({grid.energies[i], rho[i]});
  write_csv(dir / "ldos.csv", {"E", "ldos"}, rows);

  const OneBodySolution sol = diagonalize(build_onebody_hamiltonian(spec));
  const Eigen::VectorXd ipr_k = ipr_eigenstates(sol), ipr_n = ipr_sites(sol);
  std::vector<bool> edge(static_cast<std::size_t>(sol.size()), false);
  for (const EdgeState& e : edge_state_report(sol)) edge[static_cast<std::size_t>(e.k)] = e.edge;
  const Eigen::VectorXd sites = Eigen::VectorXd::LinSpaced(sol.size(), 0, sol.size() - 1);
  rows.clear();
  for (int k = 0; k < sol.size(); ++k)
    rows.push_back({static_cast<double>(k), sol.energies[k], ipr_k[k], sol.vectors.col(k).cwiseAbs2().dot(sites),
                    edge[static_cast<std::size_t>(k)] ? 1.0 : 0.0});
  write_csv(dir / "eigen_report.csv", {"k", "energy", "ipr_k", "center", "edge_flag"}, rows);
  rows.clear();
  for (int n = 0; n < sol.size(); ++n) rows.push_back({static_cast<double>(n), ipr_n[n]});
  write_csv(dir / "ipr_sites.csv", {"n", "ipr_n"}, rows);
  manifest["outputs"] = {"ldos.csv", "eigen_report.csv", "ipr_sites.csv"};
  manifest["ldos"] = {{"eta", grid.eta}, {"site", site}};
}

bool is_many_body(const std::string& command) {
  return command == "zoge" || command == "s2-dynamics" || command == "phase-diagram";
}

const std::vector<std::string> commands = {"onebody-sweep", "zoge",    "s2-dynamics", "phase-diagram",
                                           "fit-critical",  "fit-alpha", "ldos"};

}  // namespace

// ---------------------------------------------------------------------------

std::vector<double> parse_grid(std::string_view text, const std::string& field) {
  text = trim(text);
  if (text.empty()) throw ConfigError(field, "grid is empty");
  std::vector<double> out;
  if (text.find(':') != std::string_view::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw ConfigError(field, "expected start:stop:step");
    const double start = parse_number(parts[0], field), stop = parse_number(parts[1], field),
                 step = parse_number(parts[2], field);
    if (!(step > 0.0) || stop < start) throw ConfigError(field, "need step > 0 and stop >= start");
    const double count = std::floor((stop - start) / step + 1e-9) + 1.0;
    if (count > 1e6) throw ConfigError(field, "grid has more than 10^6 points");
    for (long i = 0; i < static_cast<long>(count); ++i) {
      const double v = start + static_cast<double>(i) * step;
      out.push_back(std::round(v * 1e12) / 1e12);  // 0.1 * 3 -> 0.3
    }
  } else {
    for (auto part : split(text, ',')) out.push_back(parse_number(part, field));
  }
  return out;
}

int RunConfig::excitation_site() const {
  if (excite == "middle" || excite == "mid") return n_sites / 2;
  if (excite == "start" || excite == "first" || excite == "left") return 0;
  if (excite == "end" || excite == "last" || excite == "right") return n_sites - 1;
  int site = -1;
  const auto [end, ec] = std::from_chars(excite.data(), excite.data() + excite.size(), site);
  if (ec != std::errc() || end != excite.data() + excite.size())
    throw ConfigError("excite", "expected middle, start, end or a site index, got '" + excite + "'");
  if (site < 0 || site >= n_sites)
    throw ConfigError("excite", "site " + excite + " outside [0, " + std::to_string(n_sites - 1) + "]");
  return site;
}

int RunConfig::phase_count() const { return n_phi > 0 ? n_phi : default_phase_count(n_sites); }

std::vector<double> RunConfig::realization_phases() const {
  if (!phases.empty()) return make_realizations(spec(w.front(), u.front(), 0.0), phases).phases;
  return make_realizations(spec(w.front(), u.front(), 0.0), realizations, seed).phases;
}

ChainSpec RunConfig::spec(double w_value, double u_value, double phi) const {
  ChainSpec s;
  s.n_sites = n_sites;
  s.j = j;
  s.w = w_value;
  s.u = u_value;
  s.phi = phi;
  s.origin = origin;
  return s;
}

void RunConfig::validate() const {
  if (std::find(commands.begin(), commands.end(), command) == commands.end())
    throw ConfigError("command", "unknown experiment '" + command + "'");
  if (w.empty()) throw ConfigError("w", "grid is empty");
  if (u.empty()) throw ConfigError("u", "grid is empty");
  if (threads < 0) throw ConfigError("threads", "must be >= 0");
  const bool fit = command == "fit-critical" || command == "fit-alpha";
  if (fit) {
    if (inputs.empty()) throw ConfigError("input", "no input given");
    if (!(fit_t_min > 0.0 && fit_t_max > fit_t_min)) throw ConfigError("fit-tmin", "need 0 < fit-tmin < fit-tmax");
    return;
  }
  if (n_sites < 2) throw ConfigError("n", "need at least 2 sites");
  if (is_many_body(command) && n_sites > max_state_sites)
    throw ConfigError("n", "state vectors are limited to " + std::to_string(max_state_sites) + " sites");
  if (!(j > 0.0)) throw ConfigError("j", "must be > 0");
  if (realizations < 1) throw ConfigError("realizations", "must be >= 1");
  if (seeds < 1) throw ConfigError("seeds", "must be >= 1");
  for (double v : w)
    if (!(v >= 0.0)) throw ConfigError("w", "disorder strengths must be >= 0");
  for (std::size_t a = 0; a < phases.size(); ++a)
    for (std::size_t b = 0; b < a; ++b)
      if (wrap_phase(phases[a]) == wrap_phase(phases[b])) throw ConfigError("phi", "duplicate realization phase");
  excitation_site();
  if (is_many_body(command)) {
    if (up_count() < 1 || up_count() > n_sites) throw ConfigError("ups", "must lie in [1, N]");
    try {
      plan.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("dt", e.what());
    }
    if (!(t_max > 0.0)) throw ConfigError("t-max", "must be > 0");
    if (samples < 2) throw ConfigError("samples", "must be >= 2");
    if (n_times < 2) throw ConfigError("times", "must be >= 2");
    if (!(t_min > 0.0 && t_min < t_max)) throw ConfigError("t-min", "need 0 < t-min < t-max");
    if (n_phi < 0 || (n_phi > 0 && n_phi % 2 == 0)) throw ConfigError("n-phi", "must be odd");
    if (!(window_fraction >= 0.0 && window_fraction < 1.0)) throw ConfigError("window", "must lie in [0, 1)");
  }
  if (command == "phase-diagram") {
    if (w.size() < 2) throw ConfigError("w", "phase diagram needs at least 2 W values");
    if (t_max < 3.0 * n_sites / j) throw ConfigError("t-max", "must cover 3 traversal times N/J");
  }
  if (command == "onebody-sweep" && (!(traversal > 0.0) || onebody_samples < 2))
    throw ConfigError("traversal", "need traversal > 0 and at least 2 samples");
  if (command == "ldos" && ldos_points < 2) throw ConfigError("points", "must be >= 2");
}

std::vector<std::pair<std::string, std::string>> RunConfig::canonical() const {
  std::string in;
  for (const auto& s : inputs) in += (in.empty() ? "" : ",") + s;
  return {{"command", command},
          {"n_sites", std::to_string(n_sites)},
          {"j", exact_num(j)},
          {"origin", exact_num(origin)},
          {"w", join(w)},
          {"u", join(u)},
          {"phases", join(phases)},
          {"realizations", std::to_string(realizations)},
          {"seed", std::to_string(seed)},
          {"seeds", std::to_string(seeds)},
          {"excite", excite},
          {"ups", std::to_string(ups)},
          {"dt", exact_num(plan.dt)},
          {"order", std::to_string(plan.order)},
          {"t_max", exact_num(t_max)},
          {"samples", std::to_string(samples)},
          {"log_times", log_times ? "1" : "0"},
          {"n_times", std::to_string(n_times)},
          {"t_min", exact_num(t_min)},
          {"n_phi", std::to_string(n_phi)},
          {"window_fraction", exact_num(window_fraction)},
          {"traversal", exact_num(traversal)},
          {"onebody_samples", std::to_string(onebody_samples)},
          {"with_zoge", with_zoge ? "1" : "0"},
          {"inputs", in},
          {"column", column},
          {"fit_t_min", exact_num(fit_t_min)},
          {"fit_t_max", exact_num(fit_t_max)},
          {"smoothing", std::to_string(smoothing)},
          {"ldos_points", std::to_string(ldos_points)}};
}

std::string run_id(const RunConfig& config) {
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& [k, v] : config.canonical())
    for (char ch : k + "=" + v + "\n") h = (h ^ static_cast<unsigned char>(ch)) * 1099511628211ull;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return config.command + "-" + buf;
}

std::vector<double> trace_times(const RunConfig& c) {
  if (c.log_times) return log_time_grid(c.t_min, c.t_max, c.samples);
  std::vector<double> t(static_cast<std::size_t>(c.samples));
  for (int i = 0; i < c.samples; ++i) t[static_cast<std::size_t>(i)] = c.t_max * (i + 1) / c.samples;
  return t;
}

Eigen::MatrixXcd zoge_task(const ChainSpec& spec, int site, std::span<const double> times, int n_phi,
                           std::uint64_t seed, std::uint64_t realization, std::uint64_t branch, const TrotterPlan& plan) {
  Rng rng = make_stream(seed, realization, branch);
  const ManyBodyState psi = random_full_state(spec.n_sites, rng);
  const std::vector<double> phases = kick_phases(n_phi);
  Eigen::MatrixXcd m(static_cast<Eigen::Index>(times.size()), n_phi);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const auto row = loschmidt_echo_scan(spec, times[k], phases, psi, site, plan);
    for (int j = 0; j < n_phi; ++j) m(static_cast<Eigen::Index>(k), j) = row[static_cast<std::size_t>(j)];
  }
  return m;
}

Eigen::MatrixXd polarization_task(const ChainSpec& spec, int ups, int site, std::span<const double> times,
                                  std::uint64_t seed, std::uint64_t realization, std::uint64_t branch,
                                  const TrotterPlan& plan) {
  Rng rng = make_stream(seed, realization, branch);
  const auto trace = polarization_trace(spec, random_sector_state(spec.n_sites, ups, site, rng), site, times, plan);
  Eigen::MatrixXd p(static_cast<Eigen::Index>(times.size()), spec.n_sites);
  for (std::size_t k = 0; k < trace.size(); ++k) p.row(static_cast<Eigen::Index>(k)) = trace[k].p.transpose();
  return p;
}

int CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("input", "cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(f, line)) throw ConfigError("input", path.string() + " is empty");
  for (auto h : split(line, ',')) t.header.emplace_back(trim(h));
  while (std::getline(f, line)) {
    if (trim(line).empty()) continue;
    std::vector<double> row;
    for (auto cell : split(line, ',')) row.push_back(std::strtod(std::string(trim(cell)).c_str(), nullptr));
    if (row.size() != t.header.size()) throw ConfigError("input", path.string() + ": ragged row");
    t.rows.push_back(std::move(row));
  }
  return t;
}

CostEstimate estimate_cost(const RunConfig& c) {
  c.validate();
  CostEstimate est;
  const auto phases = c.realization_phases();
  const long r_count = static_cast<long>(phases.size());
  const long cells = static_cast<long>(c.w.size() * c.u.size());
  std::ostringstream detail;
  using clock = std::chrono::steady_clock;
  auto seconds_since = [](clock::time_point t0) { return std::chrono::duration<double>(clock::now() - t0).count(); };
  if (c.command == "onebody-sweep") {
    est.tasks = static_cast<long>(c.w.size()) * r_count;
    const auto t0 = clock::now();
    equilibrium_ipr(c.spec(c.w.front(), 0.0, phases.front()), c.excitation_site(), {c.traversal, c.onebody_samples});
    est.seconds = seconds_since(t0) * static_cast<double>(est.tasks);
    detail << est.tasks << " tasks = " << c.w.size() << " W x " << r_count << " realizations";
  } else if (c.command == "zoge") {
    const int n_phi = c.phase_count();
    const auto times = log_time_grid(c.t_min, c.t_max, c.n_times);
    est.tasks = cells * r_count * c.seeds;
    est.evolutions = static_cast<long>(times.size()) * n_phi * c.seeds * 2 * r_count * cells;
    est.forward_evolutions = static_cast<long>(times.size()) * c.seeds * 2 * r_count * cells;
    double units = 0.0;
    for (double t : times) units += t;
    units *= 2.0 * (n_phi + 1) * static_cast<double>(est.tasks);
    Rng rng = make_stream(c.seed);
    ManyBodyState psi = random_full_state(c.n_sites, rng);
    const auto t0 = clock::now();
    evolve(psi, c.spec(c.w.front(), c.u.front(), phases.front()), 1.0, c.plan);
    est.seconds = seconds_since(t0) * units;
    detail << est.tasks << " tasks = " << cells << " cells x " << r_count << " realizations x " << c.seeds
           << " seeds; kicked evolutions = " << times.size() << " times x " << n_phi << " phases x " << c.seeds
           << " seeds x 2 x " << r_count * cells << " (cells x realizations) = " << est.evolutions
           << "; forward evolutions = " << est.forward_evolutions;
  } else if (c.command == "s2-dynamics" || c.command == "phase-diagram") {
    est.tasks = cells * r_count;
    est.evolutions = est.tasks * c.seeds;
    Rng rng = make_stream(c.seed);
    ManyBodyState psi = random_sector_state(c.n_sites, c.up_count(), c.excitation_site(), rng);
    const auto t0 = clock::now();
    evolve(psi, c.spec(c.w.front(), c.u.front(), phases.front()), 1.0, c.plan);
    est.seconds = seconds_since(t0) * c.t_max * static_cast<double>(est.evolutions);
    if (c.with_zoge) detail << "(zoge part not included) ";
    detail << est.tasks << " tasks = " << c.w.size() << " W x " << c.u.size() << " U x " << r_count
           << " realizations; each runs " << c.seeds << " seeds to t = " << c.t_max;
  } else {
    est.tasks = 1;
    detail << "single task";
  }
  est.detail = detail.str();
  return est;
}

RunResult run(const RunConfig& c, std::ostream& log) {
  RunResult res;
  try {
    c.validate();
  } catch (const ConfigError& e) {
    res.exit_code = 2;
    res.errors.push_back(e.what());
    log << "config error: " << e.what() << "\n";
    return res;
  }
  const std::string id = run_id(c);
  res.directory = c.output_root / id;
  const fs::path manifest_path = res.directory / "manifest.json";
  if (std::ifstream existing(manifest_path); existing) {
    try {
      if (json::parse(existing).value("complete", false)) {
        log << "run " << id << " is already complete in " << res.directory.string() << "\n";
        return res;
      }
    } catch (const json::exception&) {
    }
  }
  try {
    fs::create_directories(res.directory);
  } catch (const fs::filesystem_error& e) {
    res.exit_code = 2;
    res.errors.push_back(std::string("output: ") + e.what());
    log << "config error: output: " << e.what() << "\n";
    return res;
  }

  json manifest;
  manifest["run_id"] = id;
  manifest["command"] = c.command;
  manifest["code_version"] = ZOGE_VERSION;
  for (const auto& [k, v] : c.canonical()) manifest["config"][k] = v;
  manifest["grid"] = {{"w", c.w}, {"u", c.u}};
  manifest["outputs"] = json::array();
  if (c.command != "fit-critical" && c.command != "fit-alpha") {
    const auto phases = c.realization_phases();
    const auto kv = to_key_values(c.spec(c.w.front(), c.u.front(), phases.front()), c.seed);
    manifest["spec"] = kv;
    manifest["phases"] = phases;
    manifest["seeds"] = {{"seed", c.seed}, {"per_realization", c.seeds}};
    manifest["excitation_site"] = c.excitation_site();
    if (is_many_body(c.command)) {
      manifest["plan"] = {{"dt", c.plan.dt}, {"order", c.plan.order}};
      manifest["ups"] = c.up_count();
      manifest["n_phi"] = c.phase_count();
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (c.command == "onebody-sweep") run_onebody(c, res.directory, manifest, res, log);
    else if (c.command == "zoge") run_zoge(c, res.directory, manifest, res, log);
    else if (c.command == "s2-dynamics") run_s2_dynamics(c, res.directory, manifest, res, log);
    else if (c.command == "phase-diagram") run_phase_diagram(c, res.directory, manifest, res, log);
    else if (c.command == "fit-critical") run_fit_critical(c, res.directory, manifest, res, log);
    else if (c.command == "fit-alpha") run_fit_alpha(c, res.directory, manifest, res, log);
    else if (c.command == "ldos") run_ldos(c, res.directory, manifest, res, log);
  } catch (const ConfigError& e) {
    res.exit_code = 2;
    res.errors.push_back(e.what());
    log << "config error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    res.errors.push_back(e.what());
  }
  manifest["timings"]["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest["complete"] = res.errors.empty();
  manifest["errors"] = res.errors;
  if (!res.errors.empty()) {
    std::ofstream errlog(res.directory / "errors.log");
    for (const auto& e : res.errors) errlog << e << "\n";
    if (res.exit_code == 0) res.exit_code = 1;
    for (const auto& e : res.errors) log << "error: " << e << "\n";
  }
  std::ofstream(manifest_path) << manifest.dump(2) << "\n";
  log << "run " << id << " -> " << res.directory.string() << (res.errors.empty() ? "" : " (with errors)") << "\n";
  return res;
}

}  // namespace zoge
