#include <catch2/catch_amalgamated.hpp>

#include <capstep/calibration.hpp>

#include "oracles.hpp"

using namespace capstep;

namespace {
constexpr double kPeriod = 0.45;
constexpr double kWidth = 0.22;
}  // namespace

TEST_CASE("ideal-plant calibration matches the rocking-cycle fixed point") {
  const auto res = calibrate(ideal_plant_config(), {kPeriod, kWidth}, 40);

  // Independent fixed point: the step starts at y = W/2 moving inward and must
  // return to y = W/2 after exactly one period. Solve for the start velocity
  // with bisection over an RK4 integrator, then read the apex off a dense
  // sweep of the resulting orbit.
  const double c = ideal_plant_config().c_plant.c;
  const double half = kWidth / 2.0;
  const double v_star = oracle::bisect(
      [&](double v) {
        return oracle::rk4_propagate({half, v}, c, kPeriod, 1e-5).y - half;
      },
      -0.5, -0.1);
  const double alpha_star =
      oracle::min_abs_y({half, v_star}, PendulumConstant{c}, kPeriod, 400000);

  CHECK_THAT(res.gait.alpha, Catch::Matchers::WithinAbs(alpha_star, 1e-6));
  CHECK_THAT(res.gait.delta, Catch::Matchers::WithinAbs(half, 1e-6));
  CHECK_THAT(res.period, Catch::Matchers::WithinAbs(kPeriod, 1e-6));
  CHECK_THAT(res.width, Catch::Matchers::WithinAbs(kWidth, 1e-6));
  CHECK(res.gait.delta > res.gait.alpha);
  CHECK(res.gait.alpha > 0.0);
  CHECK(res.steps_used == 30);
}

TEST_CASE("short and long calibration runs agree") {
  const auto a = calibrate(ideal_plant_config(), {kPeriod, kWidth}, 20);
  const auto b = calibrate(ideal_plant_config(), {kPeriod, kWidth}, 200);
  CHECK_THAT(a.gait.alpha, Catch::Matchers::WithinAbs(b.gait.alpha, 1e-6));
  CHECK_THAT(a.gait.delta, Catch::Matchers::WithinAbs(b.gait.delta, 1e-6));
  CHECK_THAT(a.period, Catch::Matchers::WithinAbs(b.period, 1e-6));
  CHECK_THAT(a.width, Catch::Matchers::WithinAbs(b.width, 1e-6));
}

TEST_CASE("calibration is side-symmetric and seed-stable") {
  const auto right =
      calibrate(ideal_plant_config(), {kPeriod, kWidth}, 40, 1, Side::Right);
  const auto left =
      calibrate(ideal_plant_config(), {kPeriod, kWidth}, 40, 1, Side::Left);
  CHECK(right.gait.alpha == left.gait.alpha);
  CHECK(right.gait.delta == left.gait.delta);
  CHECK(right.period == left.period);
  CHECK(right.width == left.width);

  const auto rerun = calibrate(ideal_plant_config(), {kPeriod, kWidth}, 40);
  CHECK(right.gait.alpha == rerun.gait.alpha);
  CHECK(right.gait.delta == rerun.gait.delta);
}

TEST_CASE("mismatched actuation shifts the measured gait coherently") {
  const PlantConfig cfg;  // default: scaled + biased step execution
  const auto res = calibrate(cfg, {kPeriod, kWidth}, 60);

  const double f_exec = cfg.actuation_scale * kWidth + cfg.actuation_bias;
  CHECK_THAT(res.width, Catch::Matchers::WithinAbs(f_exec, 1e-9));
  // passive transfer splits the executed width evenly
  CHECK_THAT(res.gait.delta, Catch::Matchers::WithinAbs(f_exec / 2.0, 1e-9));
  // midpoint exchanges conserve orbital energy, so the apex set by the
  // starting stance persists
  const OpenLoopCycle cyc = open_loop_cycle(cfg.c_plant, kPeriod, kWidth);
  CHECK_THAT(res.gait.alpha, Catch::Matchers::WithinAbs(cyc.apex, 1e-9));
  CHECK(res.gait.delta > res.gait.alpha);
  CHECK(res.gait.alpha > 0.0);
}

TEST_CASE("calibration rejects bad arguments and non-walking plants") {
  CHECK_THROWS_AS(calibrate(ideal_plant_config(), {kPeriod, kWidth}, 10),
                  std::invalid_argument);
  CHECK_THROWS_AS(calibrate(ideal_plant_config(), {-1.0, kWidth}, 40),
                  std::invalid_argument);
  // a nominal width wider than the fall threshold tips over immediately
  CHECK_THROWS_AS(calibrate(ideal_plant_config(), {kPeriod, 0.9}, 40),
                  NoLimitCycle);
}

TEST_CASE("gait params survive a json round trip") {
  const auto res = calibrate(ideal_plant_config(), {kPeriod, kWidth}, 40);
  const auto j = gait_params_to_json(res);
  const auto back = gait_params_from_json(j);
  CHECK(back.gait.alpha == res.gait.alpha);
  CHECK(back.gait.delta == res.gait.delta);
  CHECK(back.gait.c.c == res.gait.c.c);
  CHECK(back.period == res.period);
  CHECK(back.width == res.width);
  CHECK(back.steps_used == res.steps_used);
}

TEST_CASE("gait param parsing reports the offending field") {
  nlohmann::json j{{"delta", 0.11}, {"c", 3.5}, {"period", 0.45},
                   {"width", 0.22}};
  try {
    gait_params_from_json(j);
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("alpha"));
  }

  nlohmann::json bad{{"alpha", 0.2}, {"delta", 0.1}, {"c", 3.5},
                     {"period", 0.45}, {"width", 0.22}};
  CHECK_THROWS_WITH(gait_params_from_json(bad),
                    Catch::Matchers::ContainsSubstring("delta > alpha"));
}
