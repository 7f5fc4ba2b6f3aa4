#ifndef HVDCMC_SIMULATOR_HPP
#define HVDCMC_SIMULATOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hvdcmc/acdc_model.hpp"
#include "hvdcmc/phasor.hpp"
#include "hvdcmc/te_estimator.hpp"

namespace hvdcmc {

// Synthetic PMU trajectories. The HVDC is seen from the grid as a series impedance Z_d,
// so every step solves I = E / (Z + Z_d), V = E - Z I in closed form.

/// HVDC impedance collapses to depth * Z_d for `duration`, then recovers exponentially.
struct FaultStep {
  double t = 0.0;
  double depth = 0.05;
  double duration = 0.08;
  std::optional<double> tau = std::nullopt; ///< recovery time constant; scenario default when unset
};

/// HVDC impedance moves to z_new: (1 - residual) of the change at once, the rest with tau.
struct ImpedanceSwitch {
  double t = 0.0;
  Phasor z_new;
  double residual = 0.3;
  std::optional<double> tau = std::nullopt;
};

/// |E| moves toward e_target at `rate` p.u./s.
struct PotentialRamp {
  double t = 0.0;
  double e_target = 1.0;
  double rate = 0.5;
};

/// Loss of reactive support: the |E| target drops by e_drop.
struct CompensatorTrip {
  double t = 0.0;
  double e_drop = 0.05;
};

using ScenarioEvent = std::variant<FaultStep, ImpedanceSwitch, PotentialRamp, CompensatorTrip>;

inline double event_time(const ScenarioEvent &ev) {
  return std::visit([](const auto &e) { return e.t; }, ev);
}

struct ScenarioConfig {
  std::string terminal_id = "rectifier";
  double duration = 1.0;
  double dt = 0.01;
  AcSide te_true{{1.0, 0.0}, 0.235, 0.01};
  Phasor z_d0{1.5, 0.5};      ///< pre-event HVDC equivalent impedance, p.u.
  double recovery_tau = 0.15; ///< s; default post-fault recovery time constant
  std::optional<ExcitationParams> potential_dynamics;
  std::vector<ScenarioEvent> events;
  double noise_variance = 0.0;
  std::uint64_t seed = 1;
  PerUnitBase base;

  void validate() const {
    if (!(dt > 0)) throw std::invalid_argument("scenario: dt must be > 0");
    if (!(duration >= 0)) throw std::invalid_argument("scenario: duration must be >= 0");
    if (!(noise_variance >= 0)) throw std::invalid_argument("scenario: noise_variance must be >= 0");
    if (!(recovery_tau > 0)) throw std::invalid_argument("scenario: recovery_tau must be > 0");
    te_true.validate();
    base.validate();
    if (potential_dynamics) potential_dynamics->validate();
    double prev = 0.0;
    for (const auto &ev : events) {
      const double t = event_time(ev);
      if (t < prev || t > duration) throw std::invalid_argument("scenario: events must be time-ordered within [0, duration]");
      prev = t;
      if (const auto *f = std::get_if<FaultStep>(&ev); f && !(f->depth > 0 && f->duration >= 0))
        throw std::invalid_argument("scenario: fault_step needs depth > 0 and duration >= 0");
      if (const auto *s = std::get_if<ImpedanceSwitch>(&ev); s && !(s->residual >= 0 && s->residual < 1))
        throw std::invalid_argument("scenario: impedance_switch residual must be in [0, 1)");
      if (const auto *r = std::get_if<PotentialRamp>(&ev); r && !(r->rate > 0 && r->e_target > 0))
        throw std::invalid_argument("scenario: potential_ramp needs rate > 0 and e_target > 0");
    }
  }
};

struct TrajectoryRecord {
  PmuSample sample; ///< what the PMU reports (noisy when noise is enabled)
  Phasor v_true;
  Phasor i_true;
  Phasor e_true;
  Impedance z_true;
  Phasor z_d_true;
  double i_d_true = 0.0; // kA
};

/// Adds independent N(0, variance) draws to the four rectangular channels.
template <class Rng>
PmuSample inject_noise(const TrajectoryRecord &rec, double variance, Rng &rng) {
  if (!(variance >= 0)) throw std::invalid_argument("inject_noise: variance must be >= 0");
  PmuSample s = rec.sample;
  s.v = rec.v_true;
  s.i = rec.i_true;
  if (variance == 0.0) return s;
  std::normal_distribution<double> n(0.0, std::sqrt(variance));
  const double vr = n(rng), vi = n(rng), ir = n(rng), ii = n(rng);
  s.v += Phasor{vr, vi};
  s.i += Phasor{ir, ii};
  return s;
}

inline PmuSample inject_noise(const TrajectoryRecord &rec, double variance, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return inject_noise(rec, variance, rng);
}

namespace detail {

/// Closed-form HVDC impedance trajectory driven by the impedance events.
class ImpedanceTrack {
public:
  ImpedanceTrack(Phasor z0, double default_tau) : target_(z0), start_(z0), tau_(default_tau), default_tau_(default_tau) {}

  Phasor at(double t) {
    if (fault_end_ && t >= *fault_end_) {
      start_ = fault_z_;
      t_start_ = *fault_end_;
      fault_end_.reset();
    }
    if (fault_end_) return fault_z_;
    return target_ + (start_ - target_) * std::exp(-(t - t_start_) / tau_);
  }

  void apply(const FaultStep &f) {
    // Recovery heads back to the current steady-state target.
    const Phasor pre = at(f.t);
    fault_z_ = f.depth * pre;
    fault_end_ = f.t + f.duration;
    tau_ = f.tau.value_or(default_tau_);
  }

  void apply(const ImpedanceSwitch &s) {
    const Phasor now = at(s.t);
    fault_end_.reset();
    target_ = s.z_new;
    start_ = s.z_new + s.residual * (now - s.z_new);
    t_start_ = s.t;
    tau_ = s.tau.value_or(default_tau_);
  }

private:
  Phasor target_;
  Phasor start_;
  double t_start_ = 0.0;
  double tau_;
  double default_tau_;
  Phasor fault_z_;
  std::optional<double> fault_end_;
};

} // namespace detail

/// Generates the trajectory sample by sample, events taking effect at the first sample at or
/// after their time.
inline std::vector<TrajectoryRecord> generate(const ScenarioConfig &cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const Phasor z = {cfg.te_true.r_th, cfg.te_true.x_th};
  const double e_angle = std::arg(cfg.te_true.e_th);
  double e_mag = std::abs(cfg.te_true.e_th);
  double e_target = e_mag;
  std::optional<double> ramp_rate;
  const double dynamics_step = cfg.potential_dynamics
                                   ? max_potential_rate(*cfg.potential_dynamics).rate * cfg.dt
                                   : std::numeric_limits<double>::infinity();

  detail::ImpedanceTrack track(cfg.z_d0, cfg.recovery_tau);
  std::size_t next_event = 0;
  const auto steps = static_cast<std::size_t>(std::floor(cfg.duration / cfg.dt + 1e-9)) + 1;

  std::vector<TrajectoryRecord> out;
  out.reserve(steps);
  for (std::size_t n = 0; n < steps; ++n) {
    const double t = static_cast<double>(n) * cfg.dt;
    while (next_event < cfg.events.size() && event_time(cfg.events[next_event]) <= t + 1e-12) {
      std::visit(
          [&](const auto &ev) {
            using T = std::decay_t<decltype(ev)>;
            if constexpr (std::is_same_v<T, FaultStep> || std::is_same_v<T, ImpedanceSwitch>) {
              track.apply(ev);
            } else if constexpr (std::is_same_v<T, PotentialRamp>) {
              e_target = ev.e_target;
              ramp_rate = ev.rate;
            } else {
              e_target -= ev.e_drop;
              ramp_rate.reset();
            }
          },
          cfg.events[next_event]);
      ++next_event;
    }

    if (n > 0 && e_mag != e_target) {
      const double limit = std::min(ramp_rate ? *ramp_rate * cfg.dt : std::numeric_limits<double>::infinity(),
                                    dynamics_step);
      e_mag += std::clamp(e_target - e_mag, -limit, limit);
    }

    TrajectoryRecord rec;
    rec.e_true = std::polar(e_mag, e_angle);
    rec.z_true = {cfg.te_true.r_th, cfg.te_true.x_th};
    rec.z_d_true = track.at(t);
    rec.i_true = rec.e_true / (z + rec.z_d_true);
    rec.v_true = rec.e_true - z * rec.i_true;
    rec.i_d_true = dot(rec.v_true, rec.i_true) * cfg.base.s_base / cfg.base.v_dc_nom;
    rec.sample.t = t;
    rec.sample.terminal_id = cfg.terminal_id;
    rec.sample = inject_noise(rec, cfg.noise_variance, rng);
    out.push_back(rec);
  }
  return out;
}

} // namespace hvdcmc

#endif // HVDCMC_SIMULATOR_HPP
