#ifndef HVDCMC_CONFIG_HPP
#define HVDCMC_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hvdcmc/csv.hpp"
#include "hvdcmc/mc_engine.hpp"
#include "hvdcmc/simulator.hpp"

namespace hvdcmc {

// Flat `key = value` configuration with dotted section keys. `#` starts a comment.
// Every key has a default; see README.md for the full list.

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class Mode { simulate, estimate, mc, run, allocate };

inline const char *to_string(Mode m) {
  switch (m) {
  case Mode::simulate: return "simulate";
  case Mode::estimate: return "estimate";
  case Mode::mc: return "mc";
  case Mode::run: return "run";
  case Mode::allocate: return "allocate";
  }
  return "?";
}

inline Mode parse_mode(std::string_view s) {
  for (Mode m : {Mode::simulate, Mode::estimate, Mode::mc, Mode::run, Mode::allocate})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown mode '" + std::string(s) + "'");
}

struct TerminalSpec {
  std::string id;
  bool tracked = false;
  AcSide fixed;
};

struct RunConfig {
  Mode mode = Mode::run;
  std::string input;
  std::string out_dir = ".";
  std::string input_terminal = "rectifier";

  PerUnitBase base;
  HvdcConfig hvdc;
  bool auto_tap = false;
  double tap_alpha_deg = 15.0;
  double initial_power_mw = 600.0;
  std::optional<double> i_d_start; // kA; derived from initial_power_mw when unset

  TerminalSpec rectifier{"rectifier", true, AcSide{{1.0, 0.0}, 0.2, 0.0}};
  TerminalSpec inverter{"inverter", false, AcSide{{1.0, 0.0}, 0.01, 0.0}};

  EstimatorConfig estimator;
  bool excitation_enabled = true;
  ExcitationParams excitation;

  SweepOptions sweep;
  std::optional<double> boost_start;

  ScenarioConfig scenario;
  bool scenario_dynamics = false;

  std::vector<std::string> allocate_inputs;
  std::vector<double> allocate_initial_mw;
  std::vector<double> allocate_mc_mw;
  double allocate_shortage_mw = 0.0;

  /// Copies shared settings (bases, excitation) into the owning structures.
  void finalize() {
    hvdc.base = base;
    scenario.base = base;
    estimator.excitation = excitation_enabled ? std::optional<ExcitationParams>(excitation) : std::nullopt;
    scenario.potential_dynamics = scenario_dynamics ? std::optional<ExcitationParams>(excitation) : std::nullopt;
  }

  void validate() const {
    try {
      base.validate();
      hvdc.validate();
      sweep.validate();
      rectifier.fixed.validate();
      inverter.fixed.validate();
      if (rectifier.id == inverter.id) throw std::invalid_argument("terminal ids must differ");
      if (!(initial_power_mw > 0)) throw std::invalid_argument("hvdc.initial_power_mw must be > 0");
      if (i_d_start && !(*i_d_start > 0)) throw std::invalid_argument("mc.i_d_start must be > 0");
      if (rectifier.tracked || inverter.tracked || mode == Mode::estimate) estimator.validate();
      if (mode == Mode::simulate || mode == Mode::run) scenario.validate();
    } catch (const std::invalid_argument &e) {
      throw ConfigError(e.what());
    }
    if ((mode == Mode::estimate || mode == Mode::mc)) {
      if (input.empty()) throw ConfigError("io.input is required for mode " + std::string(to_string(mode)));
      if (!std::filesystem::exists(input)) throw ConfigError("input file '" + input + "' does not exist");
    }
    if (mode == Mode::mc || mode == Mode::run) {
      if (!rectifier.tracked && !inverter.tracked) throw ConfigError("no terminal is tracked");
      const std::string &tracked_id = mode == Mode::run ? scenario.terminal_id : input_terminal;
      if (tracked_id != rectifier.id && tracked_id != inverter.id)
        throw ConfigError("stream terminal '" + tracked_id + "' matches neither converter");
      const bool is_rect = tracked_id == rectifier.id;
      if (!(is_rect ? rectifier.tracked : inverter.tracked))
        throw ConfigError("stream terminal '" + tracked_id + "' is not configured as tracked");
      if (rectifier.tracked && inverter.tracked)
        throw ConfigError("only one terminal can be tracked from a single PMU stream");
    }
    if (mode == Mode::allocate) {
      const std::size_t n = allocate_inputs.empty() ? allocate_mc_mw.size() : allocate_inputs.size();
      if (n == 0) throw ConfigError("allocate needs allocate.inputs or allocate.mc_mw");
      if (!allocate_inputs.empty() && !allocate_mc_mw.empty())
        throw ConfigError("give either allocate.inputs or allocate.mc_mw, not both");
      if (allocate_initial_mw.size() != n) throw ConfigError("allocate.initial_mw must list one value per HVDC");
      if (!(allocate_shortage_mw >= 0)) throw ConfigError("allocate.shortage_mw must be >= 0");
      for (const auto &p : allocate_inputs)
        if (!std::filesystem::exists(p)) throw ConfigError("allocation input '" + p + "' does not exist");
    }
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double to_number(std::string_view v, std::string_view key) {
  if (const auto d = parse_double(v)) return *d;
  throw ConfigError(std::string(key) + ": not a number '" + std::string(v) + "'");
}

inline bool to_bool(std::string_view v, std::string_view key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(std::string(key) + ": expected true/false, got '" + std::string(v) + "'");
}

inline std::vector<double> to_numbers(std::string_view v, std::string_view key) {
  std::vector<double> out;
  for (const auto &f : split_fields(v)) out.push_back(to_number(f, key));
  return out;
}

inline ConverterSide to_side(std::string_view v, std::string_view key) {
  if (v == "rectifier") return ConverterSide::rectifier;
  if (v == "inverter") return ConverterSide::inverter;
  throw ConfigError(std::string(key) + ": expected rectifier or inverter");
}

/// `kind key=value ...`, e.g. `fault_step t=0.2 depth=0.05 duration=0.08`.
inline ScenarioEvent parse_event(std::string_view text) {
  std::istringstream ss{std::string(text)};
  std::string kind;
  ss >> kind;
  std::map<std::string, double> kv;
  for (std::string tok; ss >> tok;) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw ConfigError("scenario.event: expected key=value, got '" + tok + "'");
    kv[tok.substr(0, eq)] = to_number(tok.substr(eq + 1), "scenario.event." + tok.substr(0, eq));
  }
  auto take = [&](const char *name, std::optional<double> def) -> double {
    auto it = kv.find(name);
    if (it == kv.end()) {
      if (!def) throw ConfigError("scenario.event " + kind + ": missing '" + name + "'");
      return *def;
    }
    const double v = it->second;
    kv.erase(it);
    return v;
  };
  auto take_opt = [&](const char *name) -> std::optional<double> {
    auto it = kv.find(name);
    if (it == kv.end()) return std::nullopt;
    const double v = it->second;
    kv.erase(it);
    return v;
  };

  ScenarioEvent ev;
  if (kind == "fault_step") {
    FaultStep f;
    f.t = take("t", std::nullopt);
    f.depth = take("depth", f.depth);
    f.duration = take("duration", f.duration);
    f.tau = take_opt("tau");
    ev = f;
  } else if (kind == "impedance_switch") {
    ImpedanceSwitch s;
    s.t = take("t", std::nullopt);
    s.z_new = {take("zd_re", std::nullopt), take("zd_im", std::nullopt)};
    s.residual = take("residual", s.residual);
    s.tau = take_opt("tau");
    ev = s;
  } else if (kind == "potential_ramp") {
    PotentialRamp r;
    r.t = take("t", std::nullopt);
    r.e_target = take("e_target", std::nullopt);
    r.rate = take("rate", r.rate);
    ev = r;
  } else if (kind == "compensator_trip") {
    CompensatorTrip c;
    c.t = take("t", std::nullopt);
    c.e_drop = take("e_drop", c.e_drop);
    ev = c;
  } else {
    throw ConfigError("scenario.event: unknown kind '" + kind + "'");
  }
  if (!kv.empty()) throw ConfigError("scenario.event " + kind + ": unknown parameter '" + kv.begin()->first + "'");
  return ev;
}

using Setter = std::function<void(RunConfig &, std::string_view value, std::string_view key)>;

inline const std::map<std::string, Setter, std::less<>> &setters() {
  auto num = [](double RunConfig::*field) {
    return Setter([field](RunConfig &c, std::string_view v, std::string_view k) { c.*field = to_number(v, k); });
  };
  auto num_in = [](auto accessor) {
    return Setter([accessor](RunConfig &c, std::string_view v, std::string_view k) { accessor(c) = to_number(v, k); });
  };
  auto deg_in = [](auto accessor) {
    return Setter(
        [accessor](RunConfig &c, std::string_view v, std::string_view k) { accessor(c) = deg_to_rad(to_number(v, k)); });
  };
  static const std::map<std::string, Setter, std::less<>> table = {
      {"mode", [](RunConfig &c, std::string_view v, std::string_view) { c.mode = parse_mode(v); }},
      {"seed", [](RunConfig &c, std::string_view v, std::string_view k) {
         c.scenario.seed = static_cast<std::uint64_t>(to_number(v, k));
       }},
      {"io.input", [](RunConfig &c, std::string_view v, std::string_view) { c.input = v; }},
      {"io.out", [](RunConfig &c, std::string_view v, std::string_view) { c.out_dir = v; }},
      {"io.terminal", [](RunConfig &c, std::string_view v, std::string_view) { c.input_terminal = v; }},

      {"base.s_base", num_in([](RunConfig &c) -> double & { return c.base.s_base; })},
      {"base.v_ac_base", num_in([](RunConfig &c) -> double & { return c.base.v_ac_base; })},
      {"base.v_dc_nom", num_in([](RunConfig &c) -> double & { return c.base.v_dc_nom; })},
      {"base.i_dc_nom", num_in([](RunConfig &c) -> double & { return c.base.i_dc_nom; })},
      {"base.f", num_in([](RunConfig &c) -> double & { return c.base.f; })},

      {"hvdc.b_r", num_in([](RunConfig &c) -> double & { return c.hvdc.b_r; })},
      {"hvdc.b_i", num_in([](RunConfig &c) -> double & { return c.hvdc.b_i; })},
      {"hvdc.n_r", [](RunConfig &c, std::string_view v, std::string_view k) {
         c.auto_tap = v == "auto";
         if (!c.auto_tap) c.hvdc.n_r = to_number(v, k);
       }},
      {"hvdc.n_i", num_in([](RunConfig &c) -> double & { return c.hvdc.n_i; })},
      {"hvdc.x_dr", num_in([](RunConfig &c) -> double & { return c.hvdc.x_dr; })},
      {"hvdc.x_di", num_in([](RunConfig &c) -> double & { return c.hvdc.x_di; })},
      {"hvdc.r_d", num_in([](RunConfig &c) -> double & { return c.hvdc.r_d; })},
      {"hvdc.alpha_min_deg", deg_in([](RunConfig &c) -> double & { return c.hvdc.alpha_min; })},
      {"hvdc.gamma_min_deg", deg_in([](RunConfig &c) -> double & { return c.hvdc.gamma_min; })},
      {"hvdc.e_min", num_in([](RunConfig &c) -> double & { return c.hvdc.e_min; })},
      {"hvdc.e_max", num_in([](RunConfig &c) -> double & { return c.hvdc.e_max; })},
      {"hvdc.i_margin", num_in([](RunConfig &c) -> double & { return c.hvdc.i_margin; })},
      {"hvdc.i_ra_short", num_in([](RunConfig &c) -> double & { return c.hvdc.i_ra_short; })},
      {"hvdc.i_ra_long", num_in([](RunConfig &c) -> double & { return c.hvdc.i_ra_long; })},
      {"hvdc.i_ra_window", num_in([](RunConfig &c) -> double & { return c.hvdc.i_ra_window; })},
      {"hvdc.q_acr_rated", num_in([](RunConfig &c) -> double & { return c.hvdc.q_acr_rated; })},
      {"hvdc.q_aci_rated", num_in([](RunConfig &c) -> double & { return c.hvdc.q_aci_rated; })},
      {"hvdc.initial_power_mw", num(&RunConfig::initial_power_mw)},
      {"hvdc.tap_alpha_deg", num(&RunConfig::tap_alpha_deg)},

      {"vdcol.v1", num_in([](RunConfig &c) -> double & { return c.hvdc.vdcol.v1; })},
      {"vdcol.v2", num_in([](RunConfig &c) -> double & { return c.hvdc.vdcol.v2; })},
      {"vdcol.i1", num_in([](RunConfig &c) -> double & { return c.hvdc.vdcol.i1; })},
      {"vdcol.i2", num_in([](RunConfig &c) -> double & { return c.hvdc.vdcol.i2; })},
      {"vdcol.k1", num_in([](RunConfig &c) -> double & { return c.hvdc.vdcol.k1; })},
      {"vdcol.k2", num_in([](RunConfig &c) -> double & { return c.hvdc.vdcol.k2; })},

      {"rectifier.id", [](RunConfig &c, std::string_view v, std::string_view) { c.rectifier.id = v; }},
      {"rectifier.tracked", [](RunConfig &c, std::string_view v, std::string_view k) { c.rectifier.tracked = to_bool(v, k); }},
      {"rectifier.e", [](RunConfig &c, std::string_view v, std::string_view k) { c.rectifier.fixed.e_th = to_number(v, k); }},
      {"rectifier.x", num_in([](RunConfig &c) -> double & { return c.rectifier.fixed.x_th; })},
      {"rectifier.r", num_in([](RunConfig &c) -> double & { return c.rectifier.fixed.r_th; })},
      {"inverter.id", [](RunConfig &c, std::string_view v, std::string_view) { c.inverter.id = v; }},
      {"inverter.tracked", [](RunConfig &c, std::string_view v, std::string_view k) { c.inverter.tracked = to_bool(v, k); }},
      {"inverter.e", [](RunConfig &c, std::string_view v, std::string_view k) { c.inverter.fixed.e_th = to_number(v, k); }},
      {"inverter.x", num_in([](RunConfig &c) -> double & { return c.inverter.fixed.x_th; })},
      {"inverter.r", num_in([](RunConfig &c) -> double & { return c.inverter.fixed.r_th; })},

      {"estimator.k", [](RunConfig &c, std::string_view v, std::string_view k) {
         const double w = to_number(v, k);
         if (!(w >= 1) || w != static_cast<double>(static_cast<std::size_t>(w)))
           throw ConfigError(std::string(k) + ": expected a positive integer");
         c.estimator.window = static_cast<std::size_t>(w);
       }},
      {"estimator.lambda", num_in([](RunConfig &c) -> double & { return c.estimator.lambda; })},
      {"estimator.coeff", num_in([](RunConfig &c) -> double & { return c.estimator.coeff; })},
      {"estimator.e_min_bound", num_in([](RunConfig &c) -> double & { return c.estimator.e_min_bound; })},
      {"estimator.gate_e_min", num_in([](RunConfig &c) -> double & { return c.estimator.e_gate_min; })},
      {"estimator.gate_e_max", num_in([](RunConfig &c) -> double & { return c.estimator.e_gate_max; })},

      {"excitation.enabled", [](RunConfig &c, std::string_view v, std::string_view k) { c.excitation_enabled = to_bool(v, k); }},
      {"excitation.t_ff", num_in([](RunConfig &c) -> double & { return c.excitation.t_ff; })},
      {"excitation.t_d0p", num_in([](RunConfig &c) -> double & { return c.excitation.t_d0p; })},
      {"excitation.du_max", num_in([](RunConfig &c) -> double & { return c.excitation.du_max; })},
      {"excitation.dt", num_in([](RunConfig &c) -> double & { return c.excitation.dt; })},

      {"mc.delta_id", num_in([](RunConfig &c) -> double & { return c.sweep.delta_id; })},
      {"mc.refine_tol", num_in([](RunConfig &c) -> double & { return c.sweep.refine_tol; })},
      {"mc.side", [](RunConfig &c, std::string_view v, std::string_view k) { c.sweep.side = to_side(v, k); }},
      {"mc.mu", num_in([](RunConfig &c) -> double & { return c.sweep.fixed_point.mu; })},
      {"mc.max_iter", [](RunConfig &c, std::string_view v, std::string_view k) {
         const double n = to_number(v, k);
         if (!(n >= 1)) throw ConfigError(std::string(k) + ": must be >= 1");
         c.sweep.fixed_point.max_iter = static_cast<std::size_t>(n);
       }},
      {"mc.boost_start", [](RunConfig &c, std::string_view v, std::string_view k) { c.boost_start = to_number(v, k); }},
      {"mc.i_d_start", [](RunConfig &c, std::string_view v, std::string_view k) { c.i_d_start = to_number(v, k); }},

      {"scenario.terminal", [](RunConfig &c, std::string_view v, std::string_view) { c.scenario.terminal_id = v; }},
      {"scenario.duration", num_in([](RunConfig &c) -> double & { return c.scenario.duration; })},
      {"scenario.dt", num_in([](RunConfig &c) -> double & { return c.scenario.dt; })},
      {"scenario.e", [](RunConfig &c, std::string_view v, std::string_view k) {
         c.scenario.te_true.e_th = std::polar(to_number(v, k), std::arg(c.scenario.te_true.e_th));
       }},
      {"scenario.e_angle_deg", [](RunConfig &c, std::string_view v, std::string_view k) {
         c.scenario.te_true.e_th = std::polar(std::abs(c.scenario.te_true.e_th), deg_to_rad(to_number(v, k)));
       }},
      {"scenario.r", num_in([](RunConfig &c) -> double & { return c.scenario.te_true.r_th; })},
      {"scenario.x", num_in([](RunConfig &c) -> double & { return c.scenario.te_true.x_th; })},
      {"scenario.zd_re", [](RunConfig &c, std::string_view v, std::string_view k) {
         c.scenario.z_d0.real(to_number(v, k));
       }},
      {"scenario.zd_im", [](RunConfig &c, std::string_view v, std::string_view k) {
         c.scenario.z_d0.imag(to_number(v, k));
       }},
      {"scenario.recovery_tau", num_in([](RunConfig &c) -> double & { return c.scenario.recovery_tau; })},
      {"scenario.noise_variance", num_in([](RunConfig &c) -> double & { return c.scenario.noise_variance; })},
      {"scenario.dynamics", [](RunConfig &c, std::string_view v, std::string_view k) { c.scenario_dynamics = to_bool(v, k); }},
      {"scenario.event", [](RunConfig &c, std::string_view v, std::string_view) { c.scenario.events.push_back(parse_event(v)); }},

      {"allocate.inputs", [](RunConfig &c, std::string_view v, std::string_view) { c.allocate_inputs = split_fields(v); }},
      {"allocate.initial_mw", [](RunConfig &c, std::string_view v, std::string_view k) { c.allocate_initial_mw = to_numbers(v, k); }},
      {"allocate.mc_mw", [](RunConfig &c, std::string_view v, std::string_view k) { c.allocate_mc_mw = to_numbers(v, k); }},
      {"allocate.shortage_mw", num(&RunConfig::allocate_shortage_mw)},
  };
  return table;
}

} // namespace detail

/// Applies one `key = value` assignment.
inline void apply_setting(RunConfig &cfg, std::string_view key, std::string_view value) {
  const auto &table = detail::setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown key '" + std::string(key) + "'");
  it->second(cfg, value, key);
}

/// Parses a config stream; errors carry `<source>:<line>`. The result is finalized but not validated.
inline RunConfig parse_config(std::istream &in, const std::string &source = "<config>") {
  RunConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = detail::trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    try {
      apply_setting(cfg, detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1)));
    } catch (const ConfigError &e) {
      throw ConfigError(where + e.what());
    }
  }
  cfg.finalize();
  return cfg;
}

inline RunConfig load_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse_config(in, path);
}

} // namespace hvdcmc

#endif // HVDCMC_CONFIG_HPP
