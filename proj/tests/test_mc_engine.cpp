#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hvdcmc/mc_engine.hpp"
#include "hvdcmc/simulator.hpp"

using namespace hvdcmc;

namespace {

struct Example {
  AcSide rect, inv;
  double n_r, n_i;
};

const Example kEx1{{{1, 0}, 0.2, 0}, {{1, 0}, 0.01, 0}, 0.5738, 0.5718};
const Example kEx2{{{1, 0}, 0.1, 0}, {{1, 0}, 0.2, 0}, 0.5732, 0.5718};
const Example kEx3{{{1, 0}, 0.1, 0}, {{1, 0}, 0.4, 0}, 0.5738, 0.5765};

McResult sweep_example(const Example &ex, SweepOptions opt = {}) {
  HvdcConfig cfg;
  cfg.n_r = ex.n_r;
  cfg.n_i = ex.n_i;
  return capacity_sweep(cfg, ex.rect, ex.inv, 1.2, opt);
}

void expect_sweep_feasible(const HvdcConfig &cfg, const McResult &r, double t_since_boost = 0.0) {
  ASSERT_FALSE(r.sweep.empty());
  for (std::size_t k = 0; k < r.sweep.size(); ++k) {
    if (k > 0) { EXPECT_GT(r.sweep[k].i_d, r.sweep[k - 1].i_d); }
    EXPECT_EQ(violated_constraint(cfg, r.sweep[k].op, t_since_boost), Binding::none);
  }
  EXPECT_EQ(r.mc_power, r.sweep.back().op.p_dr);
  EXPECT_EQ(r.i_d_at_mc, r.sweep.back().i_d);
}

} // namespace

TEST(Sweep, Example1BindsOnAlphaMin) {
  const auto r = sweep_example(kEx1);
  EXPECT_EQ(r.binding, Binding::alpha_min);
  EXPECT_NEAR(r.mc_power, 861.8, 0.01 * 861.8);
  const auto &op = r.sweep.back().op;
  EXPECT_NEAR(op.p_di, 844.3, 0.01 * 844.3);
  EXPECT_NEAR(op.v_dr, 495.3, 0.01 * 495.3);
  EXPECT_NEAR(op.i_d, 1.74, 0.01 * 1.74);
  EXPECT_NEAR(op.e_dr, 338.7, 0.01 * 338.7);
  EXPECT_NEAR(op.e_di, 344.7, 0.01 * 344.7);
  EXPECT_GE(rad_to_deg(op.alpha), 5.0);
  EXPECT_LE(rad_to_deg(op.alpha), 5.5);
  HvdcConfig cfg;
  cfg.n_r = kEx1.n_r;
  cfg.n_i = kEx1.n_i;
  expect_sweep_feasible(cfg, r);
}

TEST(Sweep, Example2BindsOnVdcol) {
  const auto r = sweep_example(kEx2);
  EXPECT_EQ(r.binding, Binding::vdcol);
  EXPECT_NEAR(r.mc_power, 937.9, 0.015 * 937.9);
}

TEST(Sweep, Example3BindsOnEmin) {
  const auto r = sweep_example(kEx3);
  EXPECT_EQ(r.binding, Binding::e_min);
  EXPECT_NEAR(r.mc_power, 758.8, 0.015 * 758.8);
  EXPECT_NEAR(std::min(r.sweep.back().op.e_dr, r.sweep.back().op.e_di) / 345.0, 0.9, 1e-3);
}

TEST(Sweep, StrongGridsBindOnConverterRating) {
  HvdcConfig cfg;
  cfg.n_r = 0.65;
  cfg.n_i = 0.6;
  const AcSide strong{{1, 0}, 0.01, 0};
  SweepOptions opt;
  opt.t_since_boost = 10.0;
  const auto r = capacity_sweep(cfg, strong, strong, 1.2, opt);
  EXPECT_EQ(r.binding, Binding::converter_rating);
  EXPECT_NEAR(r.i_d_at_mc, converter_rating_limit(10.0, 1.0, cfg) * cfg.base.i_dc_nom, 2 * opt.refine_tol);
  expect_sweep_feasible(cfg, r, 10.0);

  opt.t_since_boost = 1.0;
  cfg.n_i = 0.8;
  cfg.n_r = 0.9;
  const auto s = capacity_sweep(cfg, strong, strong, 1.2, opt);
  EXPECT_EQ(s.binding, Binding::converter_rating);
  EXPECT_NEAR(s.i_d_at_mc, 1.3 * cfg.base.i_dc_nom, 2 * opt.refine_tol);
}

TEST(Sweep, WeakRectifierPotentialBindsOnEmin) {
  // Bisect on the rectifier |E| for the point where the 0.9 p.u. bus floor takes over from VDCOL.
  HvdcConfig cfg;
  cfg.n_r = 0.65;
  const AcSide inv{{1, 0}, 0.01, 0};
  auto sweep = [&](double e) { return capacity_sweep(cfg, AcSide{{e, 0}, 0.2, 0}, inv, 0.5); };
  double lo = 0.95, hi = 1.0;
  ASSERT_EQ(sweep(lo).binding, Binding::e_min);
  ASSERT_EQ(sweep(hi).binding, Binding::vdcol);
  for (int k = 0; k < 30; ++k) {
    const double e = 0.5 * (lo + hi);
    if (sweep(e).binding == Binding::e_min)
      lo = e;
    else
      hi = e;
  }
  const auto r = sweep(lo);
  EXPECT_EQ(r.binding, Binding::e_min);
  EXPECT_NEAR(r.sweep.back().op.e_dr / 345.0, 0.9, 1e-3);
  expect_sweep_feasible(cfg, r);
}

TEST(Sweep, RolloverWhenNothingElseBinds) {
  HvdcConfig cfg;
  cfg.alpha_min = 0.0;
  cfg.e_min = 0.0;
  cfg.i_ra_short = 10;
  cfg.vdcol.i2 = 10;
  cfg.vdcol.i1 = 9.55;
  cfg.n_r = 0.9;
  const AcSide weak{{1, 0}, 0.6, 0};
  const auto r = capacity_sweep(cfg, AcSide{{1, 0}, 0.05, 0}, weak, 0.5);
  EXPECT_TRUE(r.binding == Binding::power_rollover || r.binding == Binding::infeasible);
  if (r.binding == Binding::power_rollover) {
    // The refined peak is at least as high as both grid neighbours.
    const double peak = r.mc_power;
    for (double d : {-0.01, 0.01}) {
      const auto fp = acdc_fixed_point(cfg, AcSide{{1, 0}, 0.05, 0}, weak, r.i_d_at_mc + d);
      if (fp.ok()) { EXPECT_LE(fp.op.p_dr, peak + 1e-6); }
    }
  }
}

TEST(Sweep, InfeasibleStartReportsCurrentPower) {
  HvdcConfig cfg;
  SweepOptions opt;
  opt.current_power_mw = 450.0;
  const auto r = capacity_sweep(cfg, AcSide{{1, 0}, 3.0, 0}, AcSide{{1, 0}, 0.01, 0}, 2.0, opt);
  EXPECT_EQ(r.binding, Binding::infeasible);
  EXPECT_EQ(r.mc_power, 450.0);
  EXPECT_TRUE(r.sweep.empty());
}

TEST(Sweep, NonincreasingInReactance) {
  HvdcConfig cfg;
  const AcSide inv{{1, 0}, 0.01, 0};
  double prev = std::numeric_limits<double>::infinity();
  for (double x = 0.05; x <= 0.5 + 1e-12; x += 0.025) {
    const auto r = capacity_sweep(cfg, AcSide{{1, 0}, x, 0}, inv, 0.5);
    if (r.binding == Binding::infeasible) continue;
    EXPECT_LE(r.mc_power, prev + 1e-6) << "x = " << x;
    prev = r.mc_power;
  }
}

TEST(Sweep, RejectsBadOptions) {
  SweepOptions opt;
  opt.delta_id = 0;
  EXPECT_THROW(sweep_example(kEx1, opt), std::invalid_argument);
  EXPECT_THROW(capacity_sweep(HvdcConfig{}, kEx1.rect, kEx1.inv, 0.0), std::invalid_argument);
}

TEST(Binding, NamesRoundTrip) {
  for (Binding b : {Binding::none, Binding::alpha_min, Binding::vdcol, Binding::converter_rating, Binding::e_min,
                    Binding::e_max, Binding::power_rollover, Binding::infeasible})
    EXPECT_EQ(parse_binding(to_string(b)), b);
  EXPECT_THROW(parse_binding("bogus"), std::invalid_argument);
}

TEST(Binding, EmaxWhenSet) {
  HvdcConfig cfg;
  cfg.e_max = 1.0;
  // Light load lifts the rectifier bus above 1 p.u. through its compensator.
  const auto r = capacity_sweep(cfg, kEx1.rect, kEx1.inv, 0.2);
  EXPECT_EQ(r.binding, Binding::e_max);
}

TEST(CurrentForPower, InvertsSweepPower) {
  HvdcConfig cfg;
  const double id = current_for_power(cfg, kEx1.rect, kEx1.inv, 600.0);
  const auto fp = acdc_fixed_point(cfg, kEx1.rect, kEx1.inv, id);
  ASSERT_TRUE(fp.ok());
  EXPECT_NEAR(fp.op.p_dr, 600.0, 1e-3);
}

// --- engine ----------------------------------------------------------------

namespace {

std::vector<PmuSample> fault_stream(std::uint64_t seed = 1, double noise = 0.0) {
  ScenarioConfig sc;
  sc.te_true = {{1.0, 0.0}, 0.2, 0.002};
  sc.z_d0 = {1.6, 0.4};
  sc.events.push_back(FaultStep{0.2});
  sc.noise_variance = noise;
  sc.seed = seed;
  std::vector<PmuSample> out;
  for (const auto &r : generate(sc)) out.push_back(r.sample);
  return out;
}

EngineConfig example1_engine() {
  EngineConfig ec;
  ec.hvdc.n_r = kEx1.n_r;
  ec.hvdc.n_i = kEx1.n_i;
  ec.inverter.fixed = kEx1.inv;
  return ec;
}

} // namespace

TEST(Engine, NoEstimateUntilDisturbance) {
  McEngine engine(example1_engine());
  const auto stream = fault_stream();
  for (const auto &s : stream) {
    const auto r = engine.step(s);
    if (s.t < 0.2 - 1e-9) { EXPECT_FALSE(r); }
  }
}

TEST(Engine, TrackedExample1) {
  McEngine engine(example1_engine());
  std::optional<McResult> last;
  std::vector<double> powers;
  for (const auto &s : fault_stream()) {
    if (auto r = engine.step(s)) {
      last = r;
      powers.push_back(r->mc_power);
    }
  }
  ASSERT_TRUE(last);
  ASSERT_TRUE(last->te);
  EXPECT_NEAR(last->te->x, 0.2, 1e-8);
  EXPECT_EQ(last->binding, Binding::alpha_min);
  EXPECT_NEAR(last->mc_power, 861.8, 0.01 * 861.8);
  // Constant TE after the fault: every later result is the same sweep.
  for (std::size_t k = powers.size() / 2; k < powers.size(); ++k) EXPECT_NEAR(powers[k], powers.back(), 1e-9);
}

TEST(Engine, Deterministic) {
  auto run = [] {
    McEngine engine(example1_engine());
    std::vector<double> out;
    for (const auto &s : fault_stream(5, 1e-5))
      if (auto r = engine.step(s)) out.push_back(r->mc_power);
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(Engine, RejectsUnknownOrUntrackedTerminal) {
  McEngine engine(example1_engine());
  EXPECT_THROW(engine.step({0.0, {1, 0}, {0.5, 0}, "elsewhere"}), std::invalid_argument);
  EXPECT_THROW(engine.step({0.0, {1, 0}, {0.5, 0}, "inverter"}), std::invalid_argument);
  EXPECT_THROW(engine.step({0.0, {1, 0}, {0.5, 0}, "rectifier"}, -1.0), std::invalid_argument);
}

TEST(Engine, ConfigValidation) {
  EngineConfig ec;
  ec.inverter.fixed.reset();
  EXPECT_THROW(McEngine{ec}, std::invalid_argument);
  ec = {};
  ec.inverter.terminal_id = ec.rectifier.terminal_id;
  EXPECT_THROW(McEngine{ec}, std::invalid_argument);
}

// --- allocation ------------------------------------------------------------

TEST(Allocate, TwoLinksShareShortage) {
  const auto plan = allocate({{600, 810}, {500, 856}}, 400);
  EXPECT_DOUBLE_EQ(plan.entries[0].target_mw, 727.0);
  EXPECT_DOUBLE_EQ(plan.entries[1].target_mw, 773.0);
  EXPECT_DOUBLE_EQ(plan.remaining_margin_mw, 83.0);
  EXPECT_DOUBLE_EQ(plan.entries[0].remaining_mw, 83.0);
  EXPECT_DOUBLE_EQ(plan.entries[1].remaining_mw, 83.0);
  EXPECT_DOUBLE_EQ(plan.deficit_mw, 0.0);
}

TEST(Allocate, ZeroShortage) {
  const auto plan = allocate({{600, 810}, {500, 856}}, 0);
  EXPECT_EQ(plan.entries[0].target_mw, 600.0);
  EXPECT_EQ(plan.entries[1].target_mw, 500.0);
}

TEST(Allocate, ShortageAboveMargins) {
  const auto plan = allocate({{600, 810}, {500, 856}}, 600);
  EXPECT_EQ(plan.entries[0].target_mw, 810.0);
  EXPECT_EQ(plan.entries[1].target_mw, 856.0);
  EXPECT_DOUBLE_EQ(plan.deficit_mw, 34.0);
}

TEST(Allocate, SmallMarginSitsOut) {
  // The 20 MW link has less margin than the common level, so it keeps its margin.
  const auto plan = allocate({{100, 120}, {300, 500}, {200, 400}}, 100);
  EXPECT_EQ(plan.entries[0].target_mw, 100.0);
  EXPECT_DOUBLE_EQ(plan.entries[1].target_mw + plan.entries[2].target_mw - 500.0, 100.0);
  EXPECT_DOUBLE_EQ(plan.entries[1].remaining_mw, plan.entries[2].remaining_mw);
}

TEST(Allocate, ConservesPowerOnRandomInputs) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> init(100, 900), margin(0, 400), shortage(0, 1500);
  std::uniform_int_distribution<int> count(1, 6);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<AllocationInput> in(count(rng));
    for (auto &x : in) {
      x.initial_mw = init(rng);
      x.mc_mw = x.initial_mw + margin(rng);
    }
    const double s = shortage(rng);
    const auto plan = allocate(in, s);
    EXPECT_NEAR(plan.allocated_mw + plan.deficit_mw, s, 1e-9 * (1 + s));
    double total_margin = 0;
    for (const auto &e : plan.entries) {
      EXPECT_LE(e.target_mw, e.mc_mw + 1e-9);
      EXPECT_GE(e.target_mw, e.initial_mw - 1e-9);
      total_margin += e.margin_mw;
      if (e.target_mw > e.initial_mw + 1e-9) { EXPECT_NEAR(e.remaining_mw, plan.remaining_margin_mw, 1e-9); }
    }
    EXPECT_NEAR(plan.allocated_mw, std::min(s, total_margin), 1e-9 * (1 + s));
  }
}

TEST(Allocate, RejectsBadInput) {
  EXPECT_THROW(allocate({}, 10), std::invalid_argument);
  EXPECT_THROW(allocate({{600, 810}}, -1), std::invalid_argument);
  EXPECT_THROW(allocate({{600, 500}}, 10), std::invalid_argument);
}
