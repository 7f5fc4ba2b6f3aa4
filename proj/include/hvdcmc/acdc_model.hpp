#ifndef HVDCMC_ACDC_MODEL_HPP
#define HVDCMC_ACDC_MODEL_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hvdcmc/phasor.hpp"

namespace hvdcmc {

// Steady-state LCC-HVDC model. AC-side interface quantities are per-unit; the
// converter equations run in kV, kA, MW, Mvar and ohm.

inline constexpr double kBridgeVoltageFactor = 1.35;
inline constexpr double kCommutationFactor = 3.0 / std::numbers::pi;

/// Voltage-dependent current order limit, all quantities per-unit.
struct VdcolCurve {
  double v1 = 0.4;
  double v2 = 0.9;
  double i1 = 0.55;
  double i2 = 1.0;
  double k1 = 0.9;
  double k2 = 1.0;

  /// True when the middle segment meets the upper one at v2.
  bool is_continuous(double tol = 1e-9) const { return std::abs(i1 + k1 * (v2 - v1) - i2) <= tol; }

  void validate() const {
    if (!(v1 < v2)) throw std::invalid_argument("VdcolCurve: v1 must be < v2");
    if (!(i1 < i2)) throw std::invalid_argument("VdcolCurve: i1 must be < i2");
    if (!(k1 >= 0 && k2 >= 0)) throw std::invalid_argument("VdcolCurve: slopes must be >= 0");
  }
};

inline double vdcol_limit(const VdcolCurve &c, double v_d_mid) {
  if (v_d_mid >= c.v2) return c.i2 + c.k2 * (v_d_mid - c.v2);
  if (v_d_mid > c.v1) return c.i1 + c.k1 * (v_d_mid - c.v1);
  return c.i1;
}

struct HvdcConfig {
  double b_r = 2.0;
  double b_i = 2.0;
  double n_r = 0.5738;
  double n_i = 0.5718;
  double x_dr = 8.3201; // ohm
  double x_di = 7.1949; // ohm
  double r_d = 5.79;    // ohm
  double alpha_min = deg_to_rad(5.0);
  double gamma_min = deg_to_rad(17.0);
  double e_min = 0.9; // p.u.
  double e_max = std::numeric_limits<double>::infinity();
  double i_margin = 0.1; // p.u. of I_dN
  VdcolCurve vdcol;
  double i_ra_short = 1.3;
  double i_ra_long = 1.1;
  double i_ra_window = 3.0; // s
  double q_acr_rated = 300.0; // Mvar at 1 p.u. voltage
  double q_aci_rated = 300.0;
  PerUnitBase base;

  void validate() const {
    base.validate();
    vdcol.validate();
    if (!(b_r > 0 && b_i > 0 && n_r > 0 && n_i > 0))
      throw std::invalid_argument("HvdcConfig: bridge counts and ratios must be > 0");
    if (!(x_dr > 0 && x_di > 0 && r_d > 0))
      throw std::invalid_argument("HvdcConfig: reactances and resistance must be > 0");
    if (!(alpha_min >= 0 && alpha_min < std::numbers::pi / 2))
      throw std::invalid_argument("HvdcConfig: alpha_min must be in [0, pi/2)");
    if (!(gamma_min > 0 && gamma_min < std::numbers::pi / 2))
      throw std::invalid_argument("HvdcConfig: gamma_min must be in (0, pi/2)");
    if (!(e_min < e_max)) throw std::invalid_argument("HvdcConfig: e_min must be < e_max");
    if (!(i_margin >= 0)) throw std::invalid_argument("HvdcConfig: i_margin must be >= 0");
    if (!(i_ra_short > 0 && i_ra_long > 0 && i_ra_window >= 0))
      throw std::invalid_argument("HvdcConfig: converter rating multipliers must be > 0");
    if (!(q_acr_rated >= 0 && q_aci_rated >= 0))
      throw std::invalid_argument("HvdcConfig: compensator ratings must be >= 0");
  }
};

/// AC grid behind one converter bus: E at angle 0 behind r_th + j x_th (per-unit).
struct AcSide {
  Phasor e_th{1.0, 0.0};
  double x_th = 0.1;
  double r_th = 0.0;

  void validate() const {
    if (!(x_th > 0)) throw std::invalid_argument("AcSide: x_th must be > 0");
    if (!(std::abs(e_th) > 0)) throw std::invalid_argument("AcSide: |e_th| must be > 0");
  }
};

enum class ConverterSide { rectifier, inverter };

inline const char *to_string(ConverterSide s) { return s == ConverterSide::rectifier ? "rectifier" : "inverter"; }

/// Steady-state operating point of the link.
struct DcOperatingPoint {
  double i_d = 0.0;  // kA
  double v_dr = 0.0; // kV
  double v_di = 0.0;
  double alpha = 0.0; // rad
  double gamma = 0.0;
  double p_dr = 0.0; // MW
  double p_di = 0.0;
  double q_dr = 0.0; // Mvar
  double q_di = 0.0;
  double e_dr = 0.0; // kV
  double e_di = 0.0;
  double phi_r = 0.0; // rad
  double phi_i = 0.0;
  double v_dor = 0.0; // kV
  double v_doi = 0.0;

  double power(ConverterSide s) const { return s == ConverterSide::rectifier ? p_dr : p_di; }
};

inline double ideal_no_load_voltage(double bridges, double ratio, double e_d_kv) {
  if (!(bridges > 0 && ratio > 0 && e_d_kv >= 0))
    throw std::invalid_argument("ideal_no_load_voltage: inputs must be positive");
  return kBridgeVoltageFactor * bridges * ratio * e_d_kv;
}

struct DcLineSolution {
  double v_dr = 0.0;
  double v_di = 0.0;
  double alpha = 0.0;
  double v_dor = 0.0;
  double v_doi = 0.0;
};

/// Solves the DC line with the inverter at extinction angle gamma. Returns nullopt when
/// the rectifier cannot reach the required voltage (cos alpha outside [-1, 1]), unless
/// require_alpha is false, in which case alpha is clamped to [0, pi].
inline std::optional<DcLineSolution> dc_line_solve(const HvdcConfig &cfg, double e_dr_kv, double e_di_kv,
                                                   double i_d, double gamma, bool require_alpha = true) {
  if (!(i_d >= 0)) throw std::invalid_argument("dc_line_solve: i_d must be >= 0");
  DcLineSolution s;
  s.v_dor = ideal_no_load_voltage(cfg.b_r, cfg.n_r, e_dr_kv);
  s.v_doi = ideal_no_load_voltage(cfg.b_i, cfg.n_i, e_di_kv);
  const double inv_drop = kCommutationFactor * cfg.b_i * cfg.x_di * i_d;
  s.v_dr = (cfg.r_d * i_d - inv_drop) + s.v_doi * std::cos(gamma);
  s.v_di = s.v_doi * std::cos(gamma) - inv_drop;
  if (!(s.v_dor > 0)) return std::nullopt;
  const double cos_alpha = (kCommutationFactor * cfg.b_r * cfg.x_dr * i_d + s.v_dr) / s.v_dor;
  if (!(cos_alpha >= -1.0 && cos_alpha <= 1.0)) {
    if (require_alpha || std::isnan(cos_alpha)) return std::nullopt;
  }
  s.alpha = std::acos(std::clamp(cos_alpha, -1.0, 1.0));
  return s;
}

struct ConverterPower {
  double p = 0.0;   // MW
  double q = 0.0;   // Mvar
  double phi = 0.0; // rad
};

/// p = v_d i_d, cos(phi) = v_d / v_do, q = p tan(phi)
inline ConverterPower converter_pq(double v_d, double v_do, double i_d) {
  if (!(v_d > 0 && v_d <= v_do)) throw std::invalid_argument("converter_pq: requires 0 < v_d <= v_do");
  ConverterPower out;
  out.phi = std::acos(v_d / v_do);
  out.p = v_d * i_d;
  out.q = out.p * std::tan(out.phi);
  return out;
}

/// Upper-voltage solution of the converter bus magnitude behind a Thevenin reactance.
/// Rectifier: (p_a, q_a) flow from the grid into the bus. Inverter: from the bus into the grid.
/// Returns nullopt when the discriminant is negative (no power-flow solution).
inline std::optional<double> ac_voltage_solve(double e_th, double x_th, double p_a, double q_a, ConverterSide side) {
  const double e2 = e_th * e_th;
  const double lead = side == ConverterSide::rectifier ? e2 - 2.0 * q_a * x_th : e2 + 2.0 * q_a * x_th;
  const double disc = lead * lead - 4.0 * x_th * x_th * (p_a * p_a + q_a * q_a);
  if (disc < 0.0) return std::nullopt;
  const double ed2 = 0.5 * (lead + std::sqrt(disc));
  if (!(ed2 > 0.0)) return std::nullopt;
  return std::sqrt(ed2);
}

/// Reactive output of a fixed shunt compensator rated q_rated at 1 p.u. voltage.
inline double compensator_q(double e_d_pu, double q_rated) {
  if (!(q_rated >= 0)) throw std::invalid_argument("compensator_q: q_rated must be >= 0");
  return q_rated * e_d_pu * e_d_pu;
}

/// Converter current ceiling (p.u. of I_dN) at t seconds after the power boost started.
inline double converter_rating_limit(double t_since_boost, double i_dn, const HvdcConfig &cfg) {
  if (!(t_since_boost >= 0)) throw std::invalid_argument("converter_rating_limit: t must be >= 0");
  return (t_since_boost <= cfg.i_ra_window ? cfg.i_ra_short : cfg.i_ra_long) * i_dn;
}

enum class ControlMode { CC_CEA, CIA_CD, CIA_CC, unknown };

inline const char *to_string(ControlMode m) {
  switch (m) {
  case ControlMode::CC_CEA: return "CC_CEA";
  case ControlMode::CIA_CD: return "CIA_CD";
  case ControlMode::CIA_CC: return "CIA_CC";
  case ControlMode::unknown: return "unknown";
  }
  return "?";
}

struct ModeTolerance {
  double angle = deg_to_rad(0.05); // rad
  double current = 1e-3;           // p.u.
};

/// Control-mode pair implied by the angles and currents (currents in p.u. of I_dN).
inline ControlMode classify_control_mode(double alpha, double gamma, double i_d, double i_ord, const HvdcConfig &cfg,
                                         ModeTolerance tol = {}) {
  const bool alpha_at_min = std::abs(alpha - cfg.alpha_min) <= tol.angle;
  const bool gamma_at_min = std::abs(gamma - cfg.gamma_min) <= tol.angle;
  if (alpha > cfg.alpha_min + tol.angle && gamma_at_min && std::abs(i_d - i_ord) <= tol.current)
    return ControlMode::CC_CEA;
  if (alpha_at_min) {
    if (std::abs(i_ord - i_d - cfg.i_margin) <= tol.current) return ControlMode::CIA_CC;
    if (gamma > cfg.gamma_min + tol.angle && i_d < i_ord - tol.current) return ControlMode::CIA_CD;
  }
  return ControlMode::unknown;
}

// ---------------------------------------------------------------------------
// Alternating AC/DC fixed point
// ---------------------------------------------------------------------------

enum class FixedPointStatus { converged, infeasible, diverged };

inline const char *to_string(FixedPointStatus s) {
  switch (s) {
  case FixedPointStatus::converged: return "converged";
  case FixedPointStatus::infeasible: return "infeasible";
  case FixedPointStatus::diverged: return "diverged";
  }
  return "?";
}

struct FixedPointOptions {
  double mu = 1e-4; ///< tolerance on (dE_dr)^2 + (dE_di)^2 in kV^2
  std::size_t max_iter = 100;
  std::optional<double> e_dr0_kv; ///< initial guesses; default open-circuit |E_th|
  std::optional<double> e_di0_kv;
  /// Off: a rectifier that cannot reach the voltage (cos alpha > 1) reports alpha = 0
  /// instead of failing. Intermediate iterates never require it.
  bool require_alpha = true;
};

struct FixedPointResult {
  FixedPointStatus status = FixedPointStatus::infeasible;
  DcOperatingPoint op;
  std::size_t iterations = 0;
  std::vector<double> distances; ///< d after each iteration, kV^2

  bool ok() const { return status == FixedPointStatus::converged; }
};

/// DC side of the link for fixed converter bus voltages, with gamma at gamma_min.
/// nullopt when the converters cannot support the current.
inline std::optional<DcOperatingPoint> dc_operating_point(const HvdcConfig &cfg, double e_dr_kv, double e_di_kv,
                                                          double i_d, bool require_alpha = true) {
  const auto line = dc_line_solve(cfg, e_dr_kv, e_di_kv, i_d, cfg.gamma_min, require_alpha);
  if (!line) return std::nullopt;
  if (!(line->v_di > 0 && line->v_dr > 0 && line->v_dr <= line->v_dor && line->v_di <= line->v_doi))
    return std::nullopt;
  const ConverterPower rect = converter_pq(line->v_dr, line->v_dor, i_d);
  const ConverterPower inv = converter_pq(line->v_di, line->v_doi, i_d);
  DcOperatingPoint op;
  op.i_d = i_d;
  op.v_dr = line->v_dr;
  op.v_di = line->v_di;
  op.alpha = line->alpha;
  op.gamma = cfg.gamma_min;
  op.p_dr = rect.p;
  op.q_dr = rect.q;
  op.phi_r = rect.phi;
  op.p_di = inv.p;
  op.q_di = inv.q;
  op.phi_i = inv.phi;
  op.e_dr = e_dr_kv;
  op.e_di = e_di_kv;
  op.v_dor = line->v_dor;
  op.v_doi = line->v_doi;
  return op;
}

struct BusVoltages {
  double e_dr_kv = 0.0;
  double e_di_kv = 0.0;
};

/// AC half-step: net converter-bus exchanges from the DC point, then both bus voltages.
inline std::optional<BusVoltages> ac_half_step(const HvdcConfig &cfg, const AcSide &ac_r, const AcSide &ac_i,
                                               const DcOperatingPoint &op) {
  const double vb = cfg.base.v_ac_base;
  const double sb = cfg.base.s_base;
  const double q_cr = compensator_q(op.e_dr / vb, cfg.q_acr_rated);
  const double q_ci = compensator_q(op.e_di / vb, cfg.q_aci_rated);
  const double p_ar = op.p_dr / sb;
  const double q_ar = (op.q_dr - q_cr) / sb;
  const double p_ai = op.p_di / sb;
  const double q_ai = (q_ci - op.q_di) / sb;
  const auto e_dr = ac_voltage_solve(std::abs(ac_r.e_th), ac_r.x_th, p_ar, q_ar, ConverterSide::rectifier);
  const auto e_di = ac_voltage_solve(std::abs(ac_i.e_th), ac_i.x_th, p_ai, q_ai, ConverterSide::inverter);
  if (!e_dr || !e_di) return std::nullopt;
  return BusVoltages{*e_dr * vb, *e_di * vb};
}

/// Alternates the DC solve (bus voltages fixed) and the AC solve (converter exchanges fixed)
/// until the squared change of both bus voltages drops to mu.
inline FixedPointResult acdc_fixed_point(const HvdcConfig &cfg, const AcSide &ac_r, const AcSide &ac_i, double i_d,
                                         const FixedPointOptions &opt = {}) {
  if (!(i_d > 0)) throw std::invalid_argument("acdc_fixed_point: i_d must be > 0");
  if (!(opt.mu > 0)) throw std::invalid_argument("acdc_fixed_point: mu must be > 0");

  FixedPointResult out;
  const double vb = cfg.base.v_ac_base;
  double e_dr = opt.e_dr0_kv.value_or(std::abs(ac_r.e_th) * vb);
  double e_di = opt.e_di0_kv.value_or(std::abs(ac_i.e_th) * vb);

  for (std::size_t it = 1; it <= opt.max_iter; ++it) {
    out.iterations = it;
    const auto op = dc_operating_point(cfg, e_dr, e_di, i_d, false);
    if (!op) return out;
    const auto next = ac_half_step(cfg, ac_r, ac_i, *op);
    if (!next) return out;
    const double d = (next->e_dr_kv - e_dr) * (next->e_dr_kv - e_dr) + (next->e_di_kv - e_di) * (next->e_di_kv - e_di);
    out.distances.push_back(d);
    e_dr = next->e_dr_kv;
    e_di = next->e_di_kv;
    if (d <= opt.mu) {
      const auto final_op = dc_operating_point(cfg, e_dr, e_di, i_d, opt.require_alpha);
      if (!final_op) return out;
      out.op = *final_op;
      out.status = FixedPointStatus::converged;
      return out;
    }
  }
  out.status = FixedPointStatus::diverged;
  return out;
}

/// Rectifier transformer ratio that puts alpha at alpha0 when the link carries p0 MW at the
/// rectifier. Returns the ratio and the DC current.
struct TapSolution {
  double n_r = 0.0;
  double i_d = 0.0;
};

inline TapSolution solve_rectifier_tap(HvdcConfig cfg, const AcSide &ac_r, const AcSide &ac_i, double p0_mw,
                                       double alpha0 = deg_to_rad(15.0), double mu = 1e-10) {
  if (!(p0_mw > 0)) throw std::invalid_argument("solve_rectifier_tap: p0 must be > 0");
  FixedPointOptions opt;
  opt.mu = mu;
  opt.require_alpha = false;

  // Below the right ratio the rectifier either cannot reach the line voltage or sits under
  // alpha0; scan up to the first ratio that reaches alpha0, then bisect.
  auto reaches = [&](double n, double i_d) {
    cfg.n_r = n;
    const auto r = acdc_fixed_point(cfg, ac_r, ac_i, i_d, opt);
    return r.ok() && r.op.alpha >= alpha0;
  };
  auto ratio_for = [&](double i_d) {
    double n_lo = 0.05;
    double n_hi = n_lo;
    while (!reaches(n_hi, i_d)) {
      n_lo = n_hi;
      n_hi *= 1.05;
      if (n_hi > 5.0)
        throw std::runtime_error("solve_rectifier_tap: no ratio gives the initial alpha at i_d=" + std::to_string(i_d));
    }
    for (int k = 0; k < 60; ++k) {
      const double mid = 0.5 * (n_lo + n_hi);
      if (reaches(mid, i_d))
        n_hi = mid;
      else
        n_lo = mid;
    }
    return n_hi;
  };
  // P_dr(I_d) depends on the inverter side only, as long as the rectifier can carry I_d.
  auto power_at = [&](double i_d) {
    cfg.n_r = ratio_for(i_d);
    const auto r = acdc_fixed_point(cfg, ac_r, ac_i, i_d, opt);
    if (!r.ok()) throw std::runtime_error("solve_rectifier_tap: no operating point at i_d=" + std::to_string(i_d));
    return r.op.p_dr;
  };
  double lo = 1e-3 * cfg.base.i_dc_nom;
  double hi = 0.25 * cfg.base.i_dc_nom;
  while (power_at(hi) < p0_mw) {
    lo = hi;
    hi *= 1.25;
    if (hi > 5 * cfg.base.i_dc_nom) throw std::runtime_error("solve_rectifier_tap: p0 not reachable");
  }
  for (int k = 0; k < 60; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (power_at(mid) < p0_mw)
      lo = mid;
    else
      hi = mid;
  }
  const double i_d = 0.5 * (lo + hi);
  return {ratio_for(i_d), i_d};
}

} // namespace hvdcmc

#endif // HVDCMC_ACDC_MODEL_HPP
