#include <random>

#include <gtest/gtest.h>

#include "hvdcmc/phasor.hpp"

using namespace hvdcmc;

namespace {
PmuSample sample(double t, Phasor v, Phasor i, std::string id = "r") { return {t, v, i, std::move(id)}; }
} // namespace

TEST(Delta, IdenticalSamplesGiveZero) {
  const auto a = sample(0.0, {1.0, 0.1}, {0.5, -0.2});
  const auto d = delta(a, a);
  EXPECT_EQ(d.dv, Phasor(0.0, 0.0));
  EXPECT_EQ(d.di, Phasor(0.0, 0.0));
}

TEST(Delta, ComponentwiseSubtraction) {
  const auto d = delta(sample(0.0, {1.0, 0.0}, {0.3, 0.1}), sample(0.01, {0.98, 0.01}, {0.3, 0.1}));
  EXPECT_NEAR(d.dv.real(), -0.02, 1e-15);
  EXPECT_NEAR(d.dv.imag(), 0.01, 1e-15);
  EXPECT_EQ(d.di, Phasor(0.0, 0.0));
}

TEST(Delta, AntisymmetricAndLinear) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int k = 0; k < 1000; ++k) {
    const auto a = sample(0.0, {u(rng), u(rng)}, {u(rng), u(rng)});
    const auto b = sample(0.01, {u(rng), u(rng)}, {u(rng), u(rng)});
    const auto c = sample(0.02, {u(rng), u(rng)}, {u(rng), u(rng)});
    const auto ab = delta(a, b), ba = delta(b, a);
    EXPECT_EQ(ab.dv, -ba.dv);
    EXPECT_EQ(ab.di, -ba.di);
    const auto bc = delta(b, c), ac = delta(a, c);
    EXPECT_NEAR(std::abs(ab.dv + bc.dv - ac.dv), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(ab.di + bc.di - ac.di), 0.0, 1e-14);
  }
}

TEST(Delta, RejectsTerminalMismatch) {
  EXPECT_THROW(delta(sample(0, {1, 0}, {0, 0}, "a"), sample(0.01, {1, 0}, {0, 0}, "b")), std::invalid_argument);
}

TEST(PhasorOps, CrossAndDot) {
  EXPECT_DOUBLE_EQ(cross({1, 0}, {0, 1}), 1.0);
  EXPECT_DOUBLE_EQ(cross({0, 1}, {1, 0}), -1.0);
  EXPECT_DOUBLE_EQ(dot({1, 2}, {3, 4}), 11.0);
  EXPECT_NEAR(rad_to_deg(deg_to_rad(17.0)), 17.0, 1e-13);
}

TEST(PerUnit, Defaults) {
  const PerUnitBase b;
  EXPECT_EQ(b.s_base, 1000.0);
  EXPECT_EQ(b.v_ac_base, 345.0);
  EXPECT_EQ(b.v_dc_nom, 500.0);
  EXPECT_EQ(b.i_dc_nom, 2.0);
  EXPECT_EQ(b.f, 50.0);
  EXPECT_NO_THROW(b.validate());
}

TEST(PerUnit, Conversions) {
  const PerUnitBase b;
  EXPECT_DOUBLE_EQ(pu_to_physical(1.0, b, Quantity::ac_voltage), 345.0);
  EXPECT_NEAR(pu_to_physical(0.98174, b, Quantity::ac_voltage), 338.7, 0.01);
  EXPECT_DOUBLE_EQ(pu_to_physical(0.87, b, Quantity::dc_current), 1.74);
  EXPECT_DOUBLE_EQ(pu_to_physical(0.8618, b, Quantity::power), 861.8);
  EXPECT_DOUBLE_EQ(physical_to_pu(495.3, b, Quantity::dc_voltage), 495.3 / 500.0);
}

TEST(PerUnit, RoundTrip) {
  const PerUnitBase b;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (auto q : {Quantity::ac_voltage, Quantity::dc_voltage, Quantity::dc_current, Quantity::power})
    for (int k = 0; k < 1000; ++k) {
      const double x = u(rng);
      EXPECT_NEAR(physical_to_pu(pu_to_physical(x, b, q), b, q), x, 1e-12 * std::abs(x));
    }
}

TEST(PerUnit, RejectsUnknownKindAndBadBase) {
  EXPECT_THROW(parse_quantity("reactive"), std::invalid_argument);
  EXPECT_EQ(parse_quantity("dc_voltage"), Quantity::dc_voltage);
  PerUnitBase b;
  b.s_base = 0.0;
  EXPECT_THROW(b.validate(), std::invalid_argument);
  EXPECT_THROW(pu_to_physical(1.0, b, Quantity::power), std::invalid_argument);
}
