#ifndef HVDCMC_PHASOR_HPP
#define HVDCMC_PHASOR_HPP

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hvdcmc {

/// Rectangular phasor. The basis (per-unit or physical) is declared by the caller.
using Phasor = std::complex<double>;

/// 2-D cross product a x b = a.re*b.im - a.im*b.re.
inline double cross(Phasor a, Phasor b) { return a.real() * b.imag() - a.imag() * b.real(); }

inline double dot(Phasor a, Phasor b) { return a.real() * b.real() + a.imag() * b.imag(); }

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// One positive-sequence synchrophasor sample at a converter terminal (per-unit).
struct PmuSample {
  double t = 0.0;
  Phasor v;
  Phasor i;
  std::string terminal_id;
};

struct PhasorDelta {
  Phasor dv;
  Phasor di;
};

/// Componentwise difference b - a. Both samples must come from the same terminal.
inline PhasorDelta delta(const PmuSample &a, const PmuSample &b) {
  if (a.terminal_id != b.terminal_id)
    throw std::invalid_argument("delta: samples from different terminals ('" + a.terminal_id +
                                "' vs '" + b.terminal_id + "')");
  return {b.v - a.v, b.i - a.i};
}

/// System bases. AC quantities are per-unit on (s_base, v_ac_base); DC quantities on
/// (v_dc_nom, i_dc_nom).
struct PerUnitBase {
  double s_base = 1000.0;   // MVA
  double v_ac_base = 345.0; // kV line-to-line
  double v_dc_nom = 500.0;  // kV
  double i_dc_nom = 2.0;    // kA
  double f = 50.0;          // Hz

  void validate() const {
    if (!(s_base > 0 && v_ac_base > 0 && v_dc_nom > 0 && i_dc_nom > 0 && f > 0))
      throw std::invalid_argument("PerUnitBase: all bases must be strictly positive");
  }
};

enum class Quantity { ac_voltage, dc_voltage, dc_current, power };

inline Quantity parse_quantity(std::string_view name) {
  if (name == "ac_voltage") return Quantity::ac_voltage;
  if (name == "dc_voltage") return Quantity::dc_voltage;
  if (name == "dc_current") return Quantity::dc_current;
  if (name == "power") return Quantity::power;
  throw std::invalid_argument("unknown quantity kind '" + std::string(name) + "'");
}

inline double base_value(const PerUnitBase &base, Quantity kind) {
  base.validate();
  switch (kind) {
  case Quantity::ac_voltage: return base.v_ac_base;
  case Quantity::dc_voltage: return base.v_dc_nom;
  case Quantity::dc_current: return base.i_dc_nom;
  case Quantity::power: return base.s_base;
  }
  throw std::invalid_argument("unknown quantity kind");
}

inline double pu_to_physical(double x, const PerUnitBase &base, Quantity kind) {
  return x * base_value(base, kind);
}

inline double physical_to_pu(double x, const PerUnitBase &base, Quantity kind) {
  return x / base_value(base, kind);
}

} // namespace hvdcmc

#endif // HVDCMC_PHASOR_HPP
