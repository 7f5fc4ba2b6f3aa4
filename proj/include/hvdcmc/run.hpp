#ifndef HVDCMC_RUN_HPP
#define HVDCMC_RUN_HPP

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hvdcmc/config.hpp"
#include "hvdcmc/csv.hpp"
#include "hvdcmc/mc_engine.hpp"
#include "hvdcmc/simulator.hpp"

namespace hvdcmc {

/// Process exit statuses of the hvdcmc tool.
enum ExitStatus : int {
  exit_ok = 0,
  exit_usage = 1,       // bad command line
  exit_config = 2,      // unreadable config, unknown key, invariant violation
  exit_data = 3,        // unreadable or malformed CSV, bad stream, unwritable output
  exit_computation = 4, // no operating point or tap solution for the configured link
};

class ComputationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct RunReport {
  std::vector<std::string> artifacts;
  std::optional<McResult> last_mc;
  std::optional<TheveninEstimate> last_te;
  std::optional<AllocationPlan> plan;
  std::size_t samples = 0;
  double n_r = 0.0;
  double i_d_start = 0.0;
};

namespace detail {

inline std::string out_path(const RunConfig &cfg, const char *name) {
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

inline std::vector<PmuRow> load_stream(const std::string &path, const std::string &terminal) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return read_pmu_csv(in, terminal);
  } catch (const CsvError &e) {
    throw DataError(path + ": " + e.what());
  }
}

/// Engine settings for the configured link: tap and starting current are resolved here.
inline EngineConfig engine_config(const RunConfig &cfg, RunReport &report) {
  EngineConfig ec;
  ec.hvdc = cfg.hvdc;
  ec.sweep = cfg.sweep;
  ec.boost_start = cfg.boost_start;
  const auto terminal = [&](const TerminalSpec &t) {
    return t.tracked ? TerminalModel{t.id, std::nullopt, cfg.estimator} : TerminalModel{t.id, t.fixed, std::nullopt};
  };
  ec.rectifier = terminal(cfg.rectifier);
  ec.inverter = terminal(cfg.inverter);

  try {
    if (cfg.auto_tap) {
      const auto tap = solve_rectifier_tap(cfg.hvdc, cfg.rectifier.fixed, cfg.inverter.fixed, cfg.initial_power_mw,
                                           deg_to_rad(cfg.tap_alpha_deg));
      ec.hvdc.n_r = tap.n_r;
    }
    ec.i_d_start = cfg.i_d_start ? *cfg.i_d_start
                                 : current_for_power(ec.hvdc, cfg.rectifier.fixed, cfg.inverter.fixed,
                                                     cfg.initial_power_mw, ConverterSide::rectifier,
                                                     cfg.sweep.fixed_point);
  } catch (const std::runtime_error &e) {
    throw ComputationError(e.what());
  }
  report.n_r = ec.hvdc.n_r;
  report.i_d_start = ec.i_d_start;
  return ec;
}

inline void estimate_stream(const RunConfig &cfg, const std::vector<PmuRow> &rows, RunReport &report) {
  const std::string te_path = out_path(cfg, "te.csv");
  auto te_out = open_output(te_path);
  write_te_header(te_out);
  TheveninEstimator est(cfg.estimator);
  for (const auto &row : rows) {
    const auto te = est.update(row.sample);
    write_te_row(te_out, row.sample.t, te);
  }
  report.last_te = est.latest();
  report.samples = rows.size();
  report.artifacts.push_back(te_path);
}

inline void mc_stream(const RunConfig &cfg, const std::vector<PmuRow> &rows, RunReport &report) {
  McEngine engine(engine_config(cfg, report));
  const std::string te_path = out_path(cfg, "te.csv");
  const std::string mc_path = out_path(cfg, "mc.csv");
  auto te_out = open_output(te_path);
  auto mc_out = open_output(mc_path);
  write_te_header(te_out);
  write_mc_header(mc_out);

  const bool tracks_rectifier = cfg.rectifier.tracked;
  for (const auto &row : rows) {
    const auto res = engine.step(row.sample, row.i_d);
    const auto &est = tracks_rectifier ? engine.rectifier_estimator() : engine.inverter_estimator();
    // The engine has already fed the sample; latest() is this step's estimate.
    write_te_row(te_out, row.sample.t, est->latest());
    if (res) {
      write_mc_row(mc_out, *res);
      report.last_mc = res;
    }
  }
  const auto &est = tracks_rectifier ? engine.rectifier_estimator() : engine.inverter_estimator();
  report.last_te = est->latest();
  report.samples = rows.size();
  report.artifacts.push_back(te_path);
  report.artifacts.push_back(mc_path);

  if (report.last_mc) {
    const std::string sweep_path = out_path(cfg, "sweep.csv");
    auto sweep_out = open_output(sweep_path);
    write_sweep_csv(sweep_out, *report.last_mc);
    report.artifacts.push_back(sweep_path);
  }
}

/// Last finite mc_power of an mc.csv file.
inline double final_capacity(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<McRow> rows;
  try {
    rows = read_mc_csv(in);
  } catch (const CsvError &e) {
    throw DataError(path + ": " + e.what());
  }
  for (auto it = rows.rbegin(); it != rows.rend(); ++it)
    if (std::isfinite(it->mc_power)) return it->mc_power;
  throw DataError(path + ": no finite mc_power row");
}

} // namespace detail

/// Executes one mode and writes its artifacts into cfg.out_dir. Validates first, so a bad
/// config never starts any computation.
inline RunReport run(const RunConfig &cfg) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw DataError("cannot create output directory '" + cfg.out_dir + "': " + ec.message());

  RunReport report;
  try {
    switch (cfg.mode) {
    case Mode::simulate: {
      const auto traj = generate(cfg.scenario);
      const std::string path = detail::out_path(cfg, "trajectory.csv");
      auto out = open_output(path);
      write_trajectory_csv(out, traj);
      report.samples = traj.size();
      report.artifacts.push_back(path);
      break;
    }
    case Mode::estimate:
      detail::estimate_stream(cfg, detail::load_stream(cfg.input, cfg.input_terminal), report);
      break;
    case Mode::mc:
      detail::mc_stream(cfg, detail::load_stream(cfg.input, cfg.input_terminal), report);
      break;
    case Mode::run: {
      const auto traj = generate(cfg.scenario);
      const std::string path = detail::out_path(cfg, "trajectory.csv");
      {
        auto out = open_output(path);
        write_trajectory_csv(out, traj);
      }
      report.artifacts.push_back(path);
      std::vector<PmuRow> rows;
      rows.reserve(traj.size());
      for (const auto &r : traj) rows.push_back({r.sample, std::nullopt});
      detail::mc_stream(cfg, rows, report);
      break;
    }
    case Mode::allocate: {
      std::vector<AllocationInput> inputs;
      const std::size_t n = cfg.allocate_initial_mw.size();
      for (std::size_t k = 0; k < n; ++k) {
        const double mc =
            cfg.allocate_inputs.empty() ? cfg.allocate_mc_mw[k] : detail::final_capacity(cfg.allocate_inputs[k]);
        inputs.push_back({cfg.allocate_initial_mw[k], mc});
      }
      AllocationPlan plan;
      try {
        plan = allocate(inputs, cfg.allocate_shortage_mw);
      } catch (const std::invalid_argument &e) {
        throw DataError(e.what());
      }
      const std::string path = detail::out_path(cfg, "allocation.csv");
      const std::string summary = detail::out_path(cfg, "allocation_summary.csv");
      auto out = open_output(path);
      write_allocation_csv(out, plan);
      auto sout = open_output(summary);
      write_allocation_summary_csv(sout, plan);
      report.artifacts.push_back(path);
      report.artifacts.push_back(summary);
      report.plan = plan;
      break;
    }
    }
  } catch (const CsvError &e) {
    throw DataError(e.what());
  } catch (const std::invalid_argument &e) {
    // Stream-level rejections from the estimator or engine (ordering, terminal ids).
    throw DataError(e.what());
  }
  return report;
}

/// run() with errors mapped to exit statuses and reported on `err`.
inline int run_with_status(const RunConfig &cfg, std::ostream &log, std::ostream &err) {
  try {
    const RunReport r = run(cfg);
    for (const auto &a : r.artifacts) log << "wrote " << a << '\n';
    if (r.last_mc)
      log << "final mc_power " << format_double(r.last_mc->mc_power) << " MW, binding "
          << to_string(r.last_mc->binding) << '\n';
    return exit_ok;
  } catch (const ConfigError &e) {
    err << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const DataError &e) {
    err << "data error: " << e.what() << '\n';
    return exit_data;
  } catch (const ComputationError &e) {
    err << "computation error: " << e.what() << '\n';
    return exit_computation;
  }
}

} // namespace hvdcmc

#endif // HVDCMC_RUN_HPP
