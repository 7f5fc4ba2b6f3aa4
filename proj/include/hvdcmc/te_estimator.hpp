#ifndef HVDCMC_TE_ESTIMATOR_HPP
#define HVDCMC_TE_ESTIMATOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "hvdcmc/phasor.hpp"

namespace hvdcmc {

/// Series impedance r + jx in per-unit.
struct Impedance {
  double r = 0.0;
  double x = 0.0;
  Phasor as_phasor() const { return {r, x}; }
};

/// Thevenin equivalent of the AC grid at one terminal.
struct TheveninEstimate {
  double r = 0.0;
  double x = 0.0;
  Phasor e;
  double t = 0.0;
  std::size_t n_window = 0;
  bool held_over = false; ///< impedance carried over from the previous step
};

// ---------------------------------------------------------------------------
// Two-point impedance and its error bound
// ---------------------------------------------------------------------------

/// Impedance from one pair of samples, ignoring the (unknown) potential change:
///   x = (dV x dI) / |dI|^2,  r = -(dV . dI) / |dI|^2
/// Exact when dV = -Z dI.
inline Impedance two_point_impedance(const PhasorDelta &d) {
  const double den = std::norm(d.di);
  if (!(den > 0.0)) throw std::domain_error("two_point_impedance: |dI| = 0, pair is degenerate");
  return {-dot(d.dv, d.di) / den, cross(d.dv, d.di) / den};
}

inline Impedance two_point_impedance(const PmuSample &a, const PmuSample &b) {
  return two_point_impedance(delta(a, b));
}

/// Upper bound |dE|/|dI| on the two-point error of both r and x.
inline double two_point_error_bound(Phasor de, Phasor di) { return std::abs(de) / std::abs(di); }

// ---------------------------------------------------------------------------
// Excitation-derived potential bound and screening floor
// ---------------------------------------------------------------------------

struct ExcitationParams {
  double t_ff = 0.53;   // exciter time constant, s
  double t_d0p = 5.0;   // d-axis transient open-circuit time constant, s
  double du_max = 10.0; // max exciter input step, p.u.
  double dt = 0.01;     // sampling interval, s

  void validate() const {
    if (!(t_ff > 0 && t_d0p > 0 && dt > 0 && du_max >= 0))
      throw std::invalid_argument("ExcitationParams: time constants and dt must be > 0, du_max >= 0");
    if (t_ff == t_d0p) throw std::invalid_argument("ExcitationParams: t_d0p == t_ff makes the response singular");
  }
};

/// Incremental q-axis transient potential after a step of du_max on the exciter input.
inline double potential_response(const ExcitationParams &p, double t) {
  p.validate();
  return p.du_max * (1.0 + std::exp(-t / p.t_ff) / (p.t_d0p / p.t_ff - 1.0) +
                     std::exp(-t / p.t_d0p) / (p.t_ff / p.t_d0p - 1.0));
}

/// Time derivative of potential_response.
inline double potential_response_rate(const ExcitationParams &p, double t) {
  p.validate();
  return p.du_max * (-std::exp(-t / p.t_ff) / (p.t_ff * (p.t_d0p / p.t_ff - 1.0)) -
                     std::exp(-t / p.t_d0p) / (p.t_d0p * (p.t_ff / p.t_d0p - 1.0)));
}

/// Instant of the steepest potential rise.
inline double peak_rate_time(const ExcitationParams &p) {
  p.validate();
  return p.t_d0p * p.t_ff / (p.t_d0p - p.t_ff) * std::log(p.t_d0p / p.t_ff);
}

struct PotentialBound {
  double rate = 0.0;   // p.u./s
  double de_max = 0.0; // p.u. per sampling interval
};

inline PotentialBound max_potential_rate(const ExcitationParams &p) {
  const double rate = potential_response_rate(p, peak_rate_time(p));
  return {rate, rate * p.dt};
}

/// Smallest coefficient c such that |dI| > c|I| screens out pairs dominated by dE.
inline double screening_floor(double de_max, double e_min) {
  if (!(e_min > 0)) throw std::invalid_argument("screening_floor: e_min must be > 0");
  return de_max / e_min;
}

// ---------------------------------------------------------------------------
// Adaptive screening
// ---------------------------------------------------------------------------

struct ScreeningState {
  double lambda = 0.8;
  double coeff = 0.15;
  std::size_t n0 = 0;
  bool triggered = false;

  void validate() const {
    if (!(lambda > 0 && lambda < 1)) throw std::invalid_argument("ScreeningState: lambda must be in (0,1)");
    if (!(coeff > 0 && coeff <= 0.2)) throw std::invalid_argument("ScreeningState: coeff must be in (0, 0.2]");
  }
};

/// sigma = coeff * |I_n| * (1 - lambda^(n - n0))
inline double adaptive_threshold(const ScreeningState &s, std::size_t n, double i_mag) {
  if (!s.triggered) throw std::logic_error("adaptive_threshold: screening not triggered");
  if (n < s.n0) throw std::invalid_argument("adaptive_threshold: n precedes the trigger index");
  return s.coeff * i_mag * (1.0 - std::pow(s.lambda, static_cast<double>(n - s.n0)));
}

/// Screens the pair ending at sample n. Any |dI| > coeff*|I| (re)arms the trigger at n;
/// the pair is accepted iff the screening is armed and |dI| > sigma(n).
inline bool screen_pair(ScreeningState &s, std::size_t n, Phasor di, Phasor i) {
  const double di_mag = std::abs(di);
  const double i_mag = std::abs(i);
  if (di_mag > s.coeff * i_mag) {
    s.n0 = n;
    s.triggered = true;
  }
  if (!s.triggered) return false;
  return di_mag > adaptive_threshold(s, n, i_mag);
}

// ---------------------------------------------------------------------------
// Windowed total least squares
// ---------------------------------------------------------------------------

/// FIFO of accepted (dI, dV) pairs, oldest evicted first.
class RegressionWindow {
public:
  explicit RegressionWindow(std::size_t capacity = 20) : capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("RegressionWindow: capacity must be > 0");
  }

  void push(const PhasorDelta &d) {
    rows_.push_back(d);
    if (rows_.size() > capacity_) rows_.pop_front();
  }
  void clear() { rows_.clear(); }

  std::size_t size() const { return rows_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return rows_.empty(); }
  auto begin() const { return rows_.begin(); }
  auto end() const { return rows_.end(); }
  const PhasorDelta &operator[](std::size_t i) const { return rows_[i]; }

private:
  std::size_t capacity_;
  std::deque<PhasorDelta> rows_;
};

enum class TlsStatus { ok, too_few_pairs, rank_deficient, nongeneric };

inline const char *to_string(TlsStatus s) {
  switch (s) {
  case TlsStatus::ok: return "ok";
  case TlsStatus::too_few_pairs: return "too_few_pairs";
  case TlsStatus::rank_deficient: return "rank_deficient";
  case TlsStatus::nongeneric: return "nongeneric";
  }
  return "?";
}

struct TlsSolution {
  TlsStatus status = TlsStatus::too_few_pairs;
  Impedance z;
  bool ok() const { return status == TlsStatus::ok; }
};

inline constexpr double kTlsNongenericTol = 1e-10;

/// Stacks A = -[dI blocks] (2k x 2) and B = [dV blocks] (2k x 1), takes the SVD of
/// [A B] and returns (r, x) = -U12 / U22 from the right singular vector of the
/// smallest singular value.
inline TlsSolution tls_update(const RegressionWindow &window) {
  TlsSolution out;
  if (window.size() < 2) return out;

  const auto rows = static_cast<Eigen::Index>(2 * window.size());
  Eigen::MatrixXd m(rows, 3);
  double a_norm2 = 0.0;
  Eigen::Index row = 0;
  for (const auto &d : window) {
    m(row, 0) = -d.di.real();
    m(row, 1) = d.di.imag();
    m(row, 2) = d.dv.real();
    m(row + 1, 0) = -d.di.imag();
    m(row + 1, 1) = -d.di.real();
    m(row + 1, 2) = d.dv.imag();
    a_norm2 += std::norm(d.di);
    row += 2;
  }

  // The two columns of A are orthogonal with equal norm, so A^T A = sum|dI|^2 * I.
  if (!(a_norm2 > 1e-24 * m.squaredNorm())) {
    out.status = TlsStatus::rank_deficient;
    return out;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
  const Eigen::MatrixXd &v = svd.matrixV();
  const double u22 = v(2, 2);
  if (std::abs(u22) < kTlsNongenericTol) {
    out.status = TlsStatus::nongeneric;
    return out;
  }
  out.status = TlsStatus::ok;
  out.z = {-v(0, 2) / u22, -v(1, 2) / u22};
  return out;
}

/// E = V + I (r + jx)
inline Phasor potential_from_estimate(const Impedance &z, const PmuSample &s) {
  if (!std::isfinite(z.r) || !std::isfinite(z.x))
    throw std::invalid_argument("potential_from_estimate: impedance not finite");
  return s.v + s.i * z.as_phasor();
}

// ---------------------------------------------------------------------------
// Multi-machine potential bound
// ---------------------------------------------------------------------------

struct MultimachineBound {
  Phasor de;
  bool bound_ok = false;
};

/// dE = sum(dE_Gi * jB_i) / (G0 + sum jB_i); bound_ok iff |dE| <= max |dE_Gi|.
inline MultimachineBound multimachine_bound_check(std::span<const double> branch_susceptances,
                                                  std::span<const Phasor> generator_deltas, double g0) {
  if (branch_susceptances.empty() || generator_deltas.empty())
    throw std::invalid_argument("multimachine_bound_check: empty input");
  if (branch_susceptances.size() != generator_deltas.size())
    throw std::invalid_argument("multimachine_bound_check: list lengths differ");

  Phasor num{0.0, 0.0};
  Phasor den{g0, 0.0};
  double largest = 0.0;
  for (std::size_t k = 0; k < branch_susceptances.size(); ++k) {
    const double b = branch_susceptances[k];
    if (b == 0.0) throw std::invalid_argument("multimachine_bound_check: zero branch susceptance");
    num += generator_deltas[k] * Phasor{0.0, b};
    den += Phasor{0.0, b};
    largest = std::max(largest, std::abs(generator_deltas[k]));
  }
  MultimachineBound out;
  out.de = num / den;
  out.bound_ok = std::abs(out.de) <= largest * (1.0 + 1e-12);
  return out;
}

// ---------------------------------------------------------------------------
// Streaming estimator
// ---------------------------------------------------------------------------

struct EstimatorConfig {
  std::size_t window = 20;
  double lambda = 0.8;
  double coeff = 0.15;
  double e_gate_min = 0.5; // fresh estimates need e_gate_min < |E| < e_gate_max
  double e_gate_max = 1.5;
  double e_min_bound = 0.5; // lower bound on |E| used for the screening floor
  std::optional<ExcitationParams> excitation = ExcitationParams{};

  /// Screening floor implied by the excitation bound (0 without excitation data).
  double floor() const {
    if (!excitation) return 0.0;
    return screening_floor(max_potential_rate(*excitation).de_max, e_min_bound);
  }

  void validate() const {
    if (window < 2) throw std::invalid_argument("estimator: window must hold at least 2 pairs");
    ScreeningState{lambda, coeff}.validate();
    if (!(e_gate_min < e_gate_max)) throw std::invalid_argument("estimator: e_gate_min must be < e_gate_max");
    const double f = floor();
    if (!(coeff > f))
      throw std::invalid_argument("estimator: coeff " + std::to_string(coeff) +
                                  " does not exceed the screening floor " + std::to_string(f));
  }
};

/// What happened to the last pair fed to the estimator.
struct EstimatorStep {
  bool pair_accepted = false; ///< passed the adaptive threshold
  bool gate_passed = false;   ///< two-point solution passed the r, x, |E| gate
  TlsStatus tls = TlsStatus::too_few_pairs;
  bool fresh = false;
};

/// Single-terminal tracker. Not thread-safe; one instance per terminal stream.
class TheveninEstimator {
public:
  explicit TheveninEstimator(EstimatorConfig cfg = {}) : cfg_(std::move(cfg)), window_(cfg_.window) {
    cfg_.validate();
    screening_.lambda = cfg_.lambda;
    screening_.coeff = cfg_.coeff;
  }

  /// Feeds one sample; returns the current estimate or nullopt before the first fresh one.
  std::optional<TheveninEstimate> update(const PmuSample &sample) {
    last_step_ = {};
    if (!prev_) {
      prev_ = sample;
      n_ = 1;
      return std::nullopt;
    }
    if (sample.terminal_id != prev_->terminal_id)
      throw std::invalid_argument("estimator: sample from terminal '" + sample.terminal_id +
                                  "', expected '" + prev_->terminal_id + "'");
    if (!(sample.t > prev_->t))
      throw std::invalid_argument("estimator: timestamps must be strictly increasing (t=" +
                                  std::to_string(sample.t) + ")");
    ++n_;
    const PhasorDelta d = delta(*prev_, sample);
    prev_ = sample;

    std::optional<Impedance> fresh;
    last_step_.pair_accepted = screen_pair(screening_, n_, d.di, sample.i);
    if (last_step_.pair_accepted) {
      const Impedance two_point = two_point_impedance(d);
      last_step_.gate_passed = passes_gate(two_point, sample);
      if (last_step_.gate_passed) {
        window_.push(d);
        const TlsSolution sol = tls_update(window_);
        last_step_.tls = sol.status;
        if (sol.ok() && passes_gate(sol.z, sample)) fresh = sol.z;
      }
    }

    if (fresh) {
      z_ = fresh;
      last_step_.fresh = true;
    }
    if (!z_) return std::nullopt;

    TheveninEstimate est;
    est.r = z_->r;
    est.x = z_->x;
    est.e = potential_from_estimate(*z_, sample);
    est.t = sample.t;
    est.n_window = window_.size();
    est.held_over = !fresh.has_value();
    latest_ = est;
    return est;
  }

  const std::optional<TheveninEstimate> &latest() const { return latest_; }
  const ScreeningState &screening() const { return screening_; }
  const RegressionWindow &window() const { return window_; }
  const EstimatorConfig &config() const { return cfg_; }
  const EstimatorStep &last_step() const { return last_step_; }
  std::size_t sample_index() const { return n_; }

private:
  bool passes_gate(const Impedance &z, const PmuSample &s) const {
    if (!(z.r > 0 && z.x > 0)) return false;
    const double e = std::abs(potential_from_estimate(z, s));
    return e > cfg_.e_gate_min && e < cfg_.e_gate_max;
  }

  EstimatorConfig cfg_;
  ScreeningState screening_;
  RegressionWindow window_;
  std::optional<PmuSample> prev_;
  std::optional<Impedance> z_;
  std::optional<TheveninEstimate> latest_;
  EstimatorStep last_step_;
  std::size_t n_ = 0;
};

} // namespace hvdcmc

#endif // HVDCMC_TE_ESTIMATOR_HPP
