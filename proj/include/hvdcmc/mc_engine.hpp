#ifndef HVDCMC_MC_ENGINE_HPP
#define HVDCMC_MC_ENGINE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hvdcmc/acdc_model.hpp"
#include "hvdcmc/te_estimator.hpp"

namespace hvdcmc {

enum class Binding { none, alpha_min, vdcol, converter_rating, e_min, e_max, power_rollover, infeasible };

inline const char *to_string(Binding b) {
  switch (b) {
  case Binding::none: return "none";
  case Binding::alpha_min: return "alpha_min";
  case Binding::vdcol: return "vdcol";
  case Binding::converter_rating: return "converter_rating";
  case Binding::e_min: return "e_min";
  case Binding::e_max: return "e_max";
  case Binding::power_rollover: return "power_rollover";
  case Binding::infeasible: return "infeasible";
  }
  return "?";
}

inline Binding parse_binding(const std::string &s) {
  for (Binding b : {Binding::none, Binding::alpha_min, Binding::vdcol, Binding::converter_rating, Binding::e_min,
                    Binding::e_max, Binding::power_rollover, Binding::infeasible})
    if (s == to_string(b)) return b;
  throw std::invalid_argument("unknown binding '" + s + "'");
}

/// First constraint the operating point violates, in the order alpha, VDCOL, converter
/// rating, AC voltage floor, AC voltage ceiling. Binding::none when all hold.
inline Binding violated_constraint(const HvdcConfig &cfg, const DcOperatingPoint &op, double t_since_boost) {
  const auto &base = cfg.base;
  if (op.alpha < cfg.alpha_min) return Binding::alpha_min;
  const double v_mid = 0.5 * (op.v_dr + op.v_di) / base.v_dc_nom;
  if (op.i_d > vdcol_limit(cfg.vdcol, v_mid) * base.i_dc_nom) return Binding::vdcol;
  if (op.i_d > converter_rating_limit(t_since_boost, 1.0, cfg) * base.i_dc_nom) return Binding::converter_rating;
  const double e_lo = std::min(op.e_dr, op.e_di) / base.v_ac_base;
  const double e_hi = std::max(op.e_dr, op.e_di) / base.v_ac_base;
  if (e_lo < cfg.e_min) return Binding::e_min;
  if (e_hi > cfg.e_max) return Binding::e_max;
  return Binding::none;
}

struct SweepOptions {
  double delta_id = 0.01; // kA
  double refine_tol = 1e-4; // kA; 0 disables refinement
  ConverterSide side = ConverterSide::rectifier;
  double t_since_boost = 0.0; // s
  FixedPointOptions fixed_point{};
  double i_d_cap = 20.0; // kA; hard stop for the sweep
  std::optional<double> current_power_mw; ///< reported when nothing is feasible

  void validate() const {
    if (!(delta_id > 0)) throw std::invalid_argument("sweep: delta_id must be > 0");
    if (!(refine_tol >= 0)) throw std::invalid_argument("sweep: refine_tol must be >= 0");
    if (!(t_since_boost >= 0)) throw std::invalid_argument("sweep: t_since_boost must be >= 0");
    if (!(fixed_point.mu > 0)) throw std::invalid_argument("sweep: mu must be > 0");
  }
};

struct SweepPoint {
  double i_d = 0.0;
  DcOperatingPoint op;
};

struct McResult {
  double t = 0.0;
  double mc_power = 0.0; // MW on the configured side
  Binding binding = Binding::none;
  std::vector<SweepPoint> sweep;
  std::optional<TheveninEstimate> te;
  double i_d_at_mc = 0.0;
  bool other_side_rollover = false; ///< the unmonitored side's power fell first
};

namespace detail {

struct Evaluation {
  Binding failure = Binding::none; // none when feasible
  DcOperatingPoint op;
};

inline Evaluation evaluate(const HvdcConfig &cfg, const AcSide &ac_r, const AcSide &ac_i, double i_d,
                           const SweepOptions &opt) {
  Evaluation ev;
  const auto fp = acdc_fixed_point(cfg, ac_r, ac_i, i_d, opt.fixed_point);
  if (!fp.ok()) {
    ev.failure = Binding::infeasible;
    return ev;
  }
  ev.op = fp.op;
  ev.failure = violated_constraint(cfg, fp.op, opt.t_since_boost);
  return ev;
}

} // namespace detail

/// Raises I_d from i_d_start in steps of delta_id, solving the AC/DC fixed point at each
/// step, until a constraint is violated, the monitored power stops rising, or no
/// operating point exists. The crossing is then narrowed to refine_tol by bisection.
inline McResult capacity_sweep(const HvdcConfig &cfg, const AcSide &ac_r, const AcSide &ac_i, double i_d_start,
                               const SweepOptions &opt = {}) {
  cfg.validate();
  ac_r.validate();
  ac_i.validate();
  opt.validate();
  if (!(i_d_start > 0)) throw std::invalid_argument("capacity_sweep: i_d_start must be > 0");

  McResult res;
  const ConverterSide other =
      opt.side == ConverterSide::rectifier ? ConverterSide::inverter : ConverterSide::rectifier;
  auto eval = [&](double i_d) { return detail::evaluate(cfg, ac_r, ac_i, i_d, opt); };

  const detail::Evaluation start = eval(i_d_start);
  if (start.failure == Binding::infeasible) {
    res.binding = Binding::infeasible;
    res.mc_power = opt.current_power_mw.value_or(std::numeric_limits<double>::quiet_NaN());
    res.i_d_at_mc = i_d_start;
    return res;
  }
  if (start.failure != Binding::none) {
    // Already at or beyond a limit: no headroom above the present power.
    res.binding = start.failure;
    res.mc_power = start.op.power(opt.side);
    res.i_d_at_mc = i_d_start;
    return res;
  }
  res.sweep.push_back({i_d_start, start.op});

  auto finish = [&](Binding b) {
    res.binding = b;
    res.mc_power = res.sweep.back().op.power(opt.side);
    res.i_d_at_mc = res.sweep.back().i_d;
    return res;
  };

  for (std::size_t step = 1;; ++step) {
    const double i_next = i_d_start + static_cast<double>(step) * opt.delta_id;
    if (i_next > opt.i_d_cap) return finish(Binding::none);
    const detail::Evaluation ev = eval(i_next);
    const SweepPoint &last = res.sweep.back();

    if (ev.failure != Binding::none) {
      // Narrow the crossing between the last feasible current and i_next.
      double lo = last.i_d;
      double hi = i_next;
      Binding reason = ev.failure;
      std::optional<SweepPoint> best;
      while (opt.refine_tol > 0 && hi - lo > opt.refine_tol) {
        const double mid = 0.5 * (lo + hi);
        const detail::Evaluation m = eval(mid);
        if (m.failure == Binding::none && m.op.power(opt.side) >= last.op.power(opt.side)) {
          lo = mid;
          best = SweepPoint{mid, m.op};
        } else {
          hi = mid;
          reason = m.failure == Binding::none ? Binding::power_rollover : m.failure;
        }
      }
      if (best) res.sweep.push_back(*best);
      return finish(reason);
    }

    if (ev.op.power(opt.side) < last.op.power(opt.side)) {
      // The maximum lies within one step either side of the last point; golden-section it.
      if (opt.refine_tol > 0) {
        const double lo0 = res.sweep.size() > 1 ? res.sweep[res.sweep.size() - 2].i_d : last.i_d;
        double a = lo0;
        double b = i_next;
        const double g = (std::sqrt(5.0) - 1.0) / 2.0;
        auto power = [&](double i) {
          const auto m = eval(i);
          return m.failure == Binding::none ? m.op.power(opt.side) : -std::numeric_limits<double>::infinity();
        };
        while (b - a > opt.refine_tol) {
          const double c = b - g * (b - a);
          const double d = a + g * (b - a);
          if (power(c) >= power(d))
            b = d;
          else
            a = c;
        }
        const double peak = 0.5 * (a + b);
        const detail::Evaluation m = eval(peak);
        if (peak > last.i_d && m.failure == Binding::none && m.op.power(opt.side) > last.op.power(opt.side))
          res.sweep.push_back({peak, m.op});
      }
      return finish(Binding::power_rollover);
    }

    if (!res.other_side_rollover && ev.op.power(other) < last.op.power(other)) res.other_side_rollover = true;
    res.sweep.push_back({i_next, ev.op});
  }
}

/// I_d that carries p_mw on the given side (bisection; power must be increasing up to it).
inline double current_for_power(const HvdcConfig &cfg, const AcSide &ac_r, const AcSide &ac_i, double p_mw,
                                ConverterSide side = ConverterSide::rectifier, const FixedPointOptions &fp = {}) {
  if (!(p_mw > 0)) throw std::invalid_argument("current_for_power: power must be > 0");
  // The rectifier angle does not enter the powers, so a rectifier short of voltage is tolerated here.
  FixedPointOptions opt = fp;
  opt.require_alpha = false;
  auto power = [&](double i_d) {
    const auto r = acdc_fixed_point(cfg, ac_r, ac_i, i_d, opt);
    if (!r.ok()) throw std::runtime_error("current_for_power: no operating point at " + std::to_string(i_d) + " kA");
    return r.op.power(side);
  };
  double lo = 1e-4;
  double hi = 0.25 * cfg.base.i_dc_nom;
  while (power(hi) < p_mw) {
    lo = hi;
    hi *= 1.25;
    if (hi > 5.0 * cfg.base.i_dc_nom) throw std::runtime_error("current_for_power: power not reachable");
  }
  for (int k = 0; k < 60; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (power(mid) < p_mw)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Streaming engine
// ---------------------------------------------------------------------------

/// Grid model behind one converter: a tracked Thevenin estimate, a fixed equivalent, or both
/// (the fixed one then only matters until the estimator has produced something).
struct TerminalModel {
  std::string terminal_id;
  std::optional<AcSide> fixed;
  std::optional<EstimatorConfig> estimator;
};

struct EngineConfig {
  HvdcConfig hvdc;
  TerminalModel rectifier{"rectifier", std::nullopt, EstimatorConfig{}};
  TerminalModel inverter{"inverter", AcSide{{1.0, 0.0}, 0.01, 0.0}, std::nullopt};
  SweepOptions sweep;
  double i_d_start = 1.2;             // kA, present operating current
  std::optional<double> boost_start;  // s; converter-rating clock origin

  void validate() const {
    hvdc.validate();
    sweep.validate();
    if (!(i_d_start > 0)) throw std::invalid_argument("engine: i_d_start must be > 0");
    for (const auto *tm : {&rectifier, &inverter}) {
      if (!tm->fixed && !tm->estimator)
        throw std::invalid_argument("engine: terminal '" + tm->terminal_id + "' needs a fixed model or an estimator");
      if (tm->fixed) tm->fixed->validate();
      if (tm->estimator) tm->estimator->validate();
    }
    if (rectifier.terminal_id == inverter.terminal_id)
      throw std::invalid_argument("engine: terminal ids must differ");
  }
};

/// Runs the TE tracking and the capacity sweep for one HVDC link, sample by sample.
/// Single-consumer; engines for different links share nothing.
class McEngine {
public:
  explicit McEngine(EngineConfig cfg) : cfg_(std::move(cfg)), i_d_(cfg_.i_d_start) {
    cfg_.validate();
    if (cfg_.rectifier.estimator) est_r_.emplace(*cfg_.rectifier.estimator);
    if (cfg_.inverter.estimator) est_i_.emplace(*cfg_.inverter.estimator);
  }

  /// One Table-style step. nullopt while a tracked terminal has no estimate yet.
  std::optional<McResult> step(const PmuSample &sample, std::optional<double> measured_i_d = std::nullopt) {
    std::optional<TheveninEstimator> *est = nullptr;
    if (sample.terminal_id == cfg_.rectifier.terminal_id)
      est = &est_r_;
    else if (sample.terminal_id == cfg_.inverter.terminal_id)
      est = &est_i_;
    else
      throw std::invalid_argument("engine: unknown terminal '" + sample.terminal_id + "'");
    if (!*est) throw std::invalid_argument("engine: terminal '" + sample.terminal_id + "' is not tracked");

    if (measured_i_d) {
      if (!(*measured_i_d > 0)) throw std::invalid_argument("engine: measured i_d must be > 0");
      i_d_ = *measured_i_d;
    }
    const auto te = (*est)->update(sample);

    const auto ac_r = side_model(cfg_.rectifier, est_r_);
    const auto ac_i = side_model(cfg_.inverter, est_i_);
    if (!ac_r || !ac_i) return std::nullopt;

    SweepOptions opt = cfg_.sweep;
    opt.t_since_boost = cfg_.boost_start ? std::max(0.0, sample.t - *cfg_.boost_start) : 0.0;
    McResult res = capacity_sweep(cfg_.hvdc, *ac_r, *ac_i, i_d_, opt);
    res.t = sample.t;
    res.te = te;
    return res;
  }

  void set_operating_current(double i_d) {
    if (!(i_d > 0)) throw std::invalid_argument("engine: i_d must be > 0");
    i_d_ = i_d;
  }
  double operating_current() const { return i_d_; }
  const EngineConfig &config() const { return cfg_; }
  const std::optional<TheveninEstimator> &rectifier_estimator() const { return est_r_; }
  const std::optional<TheveninEstimator> &inverter_estimator() const { return est_i_; }

  static AcSide to_ac_side(const TheveninEstimate &te) { return AcSide{te.e, te.x, te.r}; }

private:
  static std::optional<AcSide> side_model(const TerminalModel &tm, const std::optional<TheveninEstimator> &est) {
    if (est && est->latest()) return to_ac_side(*est->latest());
    return tm.fixed;
  }

  EngineConfig cfg_;
  std::optional<TheveninEstimator> est_r_;
  std::optional<TheveninEstimator> est_i_;
  double i_d_;
};

// ---------------------------------------------------------------------------
// Multi-DC allocation
// ---------------------------------------------------------------------------

struct AllocationInput {
  double initial_mw = 0.0;
  double mc_mw = 0.0;
};

struct AllocationEntry {
  double initial_mw = 0.0;
  double mc_mw = 0.0;
  double margin_mw = 0.0;
  double target_mw = 0.0;
  double remaining_mw = 0.0;
};

struct AllocationPlan {
  std::vector<AllocationEntry> entries;
  double shortage_mw = 0.0;
  double allocated_mw = 0.0;
  double deficit_mw = 0.0;
  double remaining_margin_mw = 0.0; ///< common remaining margin of the links that take a share
};

/// Shares a power shortage so that every participating link keeps the same remaining margin
/// (water-filling from the top of the margins).
inline AllocationPlan allocate(const std::vector<AllocationInput> &inputs, double shortage_mw) {
  if (inputs.empty()) throw std::invalid_argument("allocate: no HVDC links");
  if (!(shortage_mw >= 0)) throw std::invalid_argument("allocate: shortage must be >= 0");
  std::vector<double> margins;
  for (const auto &in : inputs) {
    if (!(in.mc_mw >= in.initial_mw))
      throw std::invalid_argument("allocate: capacity below the initial power");
    margins.push_back(in.mc_mw - in.initial_mw);
  }
  const double total = std::accumulate(margins.begin(), margins.end(), 0.0);

  AllocationPlan plan;
  plan.shortage_mw = shortage_mw;
  double level = 0.0; // remaining margin kept by every link with margin above it
  if (shortage_mw >= total) {
    plan.deficit_mw = shortage_mw - total;
  } else {
    std::vector<double> sorted = margins;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double head = 0.0;
    for (std::size_t j = 0; j < sorted.size(); ++j) {
      head += sorted[j];
      const double r = (head - shortage_mw) / static_cast<double>(j + 1);
      const double next = j + 1 < sorted.size() ? sorted[j + 1] : 0.0;
      if (r >= next && r <= sorted[j]) {
        level = r;
        break;
      }
    }
  }

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    AllocationEntry e;
    e.initial_mw = inputs[k].initial_mw;
    e.mc_mw = inputs[k].mc_mw;
    e.margin_mw = margins[k];
    e.target_mw = e.initial_mw + std::max(margins[k] - level, 0.0);
    e.remaining_mw = e.mc_mw - e.target_mw;
    plan.allocated_mw += e.target_mw - e.initial_mw;
    plan.entries.push_back(e);
  }
  plan.remaining_margin_mw = level;
  return plan;
}

} // namespace hvdcmc

#endif // HVDCMC_MC_ENGINE_HPP
