#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include <capstep/calibration.hpp>
#include <capstep/experiment.hpp>
#include <capstep/log.hpp>

#include "oracles.hpp"

using namespace capstep;

namespace {

ExperimentConfig make_cfg(ControllerKind k, const PlantConfig& plant, int n,
                          double jmin, double jmax, std::uint64_t seed = 1) {
  ExperimentConfig cfg;
  cfg.controller = k;
  cfg.n_pushes = n;
  cfg.impulse_min = jmin;
  cfg.impulse_max = jmax;
  cfg.seed = seed;
  cfg.plant = plant;
  const auto cal =
      calibrate(plant, {cfg.nominal_period, cfg.nominal_width}, 40);
  cfg.gait = cal.gait;
  return cfg;
}

int fall_count(const RunLog& log) {
  int n = 0;
  for (const PushRecord& p : log.pushes)
    if (p.fell) ++n;
  return n;
}

}  // namespace

TEST_CASE("a single zero-impulse push leaves a clean record") {
  const auto cfg =
      make_cfg(ControllerKind::Timing, PlantConfig{}, 1, 0.0, 0.0);
  const RunLog log = run_experiment(cfg);

  REQUIRE(log.pushes.size() == 1);
  CHECK(log.pushes[0].impulse == 0.0);
  CHECK_FALSE(log.pushes[0].fell);
  CHECK(log.pushes[0].recovery_steps >= 0);
  CHECK(log.pushes[0].time > cfg.plant.recovery_time - 1e-9);
  CHECK(!log.ticks.empty());
  CHECK(!log.events.empty());
  for (std::size_t i = 1; i < log.ticks.size(); ++i)
    REQUIRE(log.ticks[i].time > log.ticks[i - 1].time);
}

TEST_CASE("identical seeds reproduce the log byte for byte") {
  const auto cfg = make_cfg(ControllerKind::TimingStepLearning, PlantConfig{},
                            20, -9.0, 9.0, 42);
  GridApproximator g1(cfg.grid), g2(cfg.grid);
  const RunLog a = run_experiment(cfg, &g1);
  const RunLog b = run_experiment(cfg, &g2);
  CHECK(serialize_run_log(a) == serialize_run_log(b));
  CHECK(run_meta_to_json(a).dump() == run_meta_to_json(b).dump());
  CHECK(g1 == g2);
}

TEST_CASE("controllers share one scenario stream per seed") {
  const auto base = make_cfg(ControllerKind::NoFeedback, PlantConfig{}, 12,
                             -9.0, 9.0, 7);
  auto other = base;
  other.controller = ControllerKind::TimingStep;
  const RunLog a = run_experiment(base);
  const RunLog b = run_experiment(other);
  REQUIRE(a.pushes.size() == b.pushes.size());
  for (std::size_t i = 0; i < a.pushes.size(); ++i)
    CHECK(a.pushes[i].impulse == b.pushes[i].impulse);
  CHECK(a.meta.config_hash != b.meta.config_hash);
}

TEST_CASE("gentle pushes never fell the open-loop gait") {
  // the measured worst-phase single-push threshold is ~1.2 Ns; stay under it
  const auto cfg =
      make_cfg(ControllerKind::NoFeedback, PlantConfig{}, 25, -0.8, 0.8);
  const RunLog log = run_experiment(cfg);
  CHECK(fall_count(log) == 0);
  for (const EventRecord& e : log.events)
    REQUIRE(e.type != EventType::Fell);
}

TEST_CASE("strong pushes fell the open-loop gait through region B") {
  const auto cfg =
      make_cfg(ControllerKind::NoFeedback, PlantConfig{}, 30, -9.0, 9.0);
  const RunLog log = run_experiment(cfg);
  REQUIRE(fall_count(log) > 0);

  const PendulumConstant cp = cfg.plant.c_plant;
  for (const PushRecord& p : log.pushes) {
    if (!p.fell) continue;
    // the fall trajectory visits positive orbital energy
    bool saw_unstable = false;
    for (const TickRecord& t : log.ticks) {
      if (t.push != p.id) continue;
      if (orbital_energy({t.y, t.vy}, cp) > 0.0) saw_unstable = true;
    }
    CHECK(saw_unstable);
    CHECK(p.time_to_fall > 0.0);
  }

  // every fall is followed by a reset
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    if (log.events[i].type != EventType::Fell) continue;
    REQUIRE(i + 1 < log.events.size());
    CHECK(log.events[i + 1].type == EventType::Reset);
    CHECK(log.events[i + 1].time == log.events[i].time);
  }
}

TEST_CASE("feedback reduces fall counts on the paired scenario set") {
  const PlantConfig plant;
  const auto base =
      make_cfg(ControllerKind::NoFeedback, plant, 40, -9.0, 9.0, 3);
  auto timing = base;
  timing.controller = ControllerKind::Timing;
  auto full = base;
  full.controller = ControllerKind::TimingStep;

  const int f_none = fall_count(run_experiment(base));
  const int f_timing = fall_count(run_experiment(timing));
  const int f_full = fall_count(run_experiment(full));
  CHECK(f_none > f_timing);
  CHECK(f_none > f_full);
}

TEST_CASE("learning populates the grid during a mismatched run") {
  const auto cfg = make_cfg(ControllerKind::TimingStepLearning, PlantConfig{},
                            50, -9.0, 9.0, 5);
  GridApproximator grid(cfg.grid);
  run_experiment(cfg, &grid);
  CHECK(grid.max_abs_value() > 0.0);

  long visits = 0;
  for (int iy = 0; iy < cfg.grid.ny; ++iy)
    for (int ivy = 0; ivy < cfg.grid.nvy; ++ivy)
      visits += grid.visits_at(iy, ivy);
  CHECK(visits > 0);
}

TEST_CASE("learning on the ideal plant stays near zero") {
  const auto cfg = make_cfg(ControllerKind::TimingStepLearning,
                            ideal_plant_config(), 50, -9.0, 9.0, 5);
  GridApproximator grid(cfg.grid);
  run_experiment(cfg, &grid);
  CHECK(grid.max_abs_value() < 2e-3);
}

TEST_CASE("run logs survive the csv round trip") {
  const auto cfg =
      make_cfg(ControllerKind::TimingStep, PlantConfig{}, 6, -9.0, 9.0, 11);
  const RunLog log = run_experiment(cfg);
  const std::string path = "/tmp/capstep_test_log.csv";
  write_run_log(path, log);
  const RunLog back = read_run_log(path);

  REQUIRE(back.ticks.size() == log.ticks.size());
  REQUIRE(back.events.size() == log.events.size());
  REQUIRE(back.pushes.size() == log.pushes.size());
  CHECK(back.meta.controller == log.meta.controller);
  CHECK(back.meta.seed == log.meta.seed);
  CHECK(back.meta.config_hash == log.meta.config_hash);
  CHECK(back.meta.alpha == log.meta.alpha);
  for (std::size_t i = 0; i < log.ticks.size(); i += 97) {
    CHECK(back.ticks[i].time == log.ticks[i].time);
    CHECK(back.ticks[i].y == log.ticks[i].y);
    CHECK(back.ticks[i].vy == log.ticks[i].vy);
    CHECK(back.ticks[i].side == log.ticks[i].side);
    CHECK(back.ticks[i].f_exec == log.ticks[i].f_exec);
  }
  for (std::size_t i = 0; i < log.pushes.size(); ++i) {
    CHECK(back.pushes[i].impulse == log.pushes[i].impulse);
    CHECK(back.pushes[i].fell == log.pushes[i].fell);
    CHECK(back.pushes[i].recovery_steps == log.pushes[i].recovery_steps);
  }
  std::remove(path.c_str());
  std::remove("/tmp/capstep_test_log.meta.json");
}

TEST_CASE("log parsing reports file, line and field") {
  std::istringstream bad(
      "log_schema,1\n" + std::string(kLogHeader) +
      "\ntick,0,0.01,1,nope,0,1,0,0,0,,,,,\n");
  try {
    parse_run_log(bad, "runs/x.csv");
    FAIL("expected a parse error");
  } catch (const LogError& e) {
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("runs/x.csv:3"));
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("y"));
  }

  std::istringstream unknown(
      "log_schema,1\n" + std::string(kLogHeader) +
      "\nwat,0,0.01,1,0,0,1,0,0,0,,,,,\n");
  CHECK_THROWS_WITH(parse_run_log(unknown, "z.csv"),
                    Catch::Matchers::ContainsSubstring("unknown row kind"));

  std::istringstream old_schema("log_schema,99\n");
  CHECK_THROWS_WITH(parse_run_log(old_schema, "z.csv"),
                    Catch::Matchers::ContainsSubstring("schema"));
}

TEST_CASE("config validation names the offending field") {
  auto cfg = make_cfg(ControllerKind::Timing, PlantConfig{}, 10, -9.0, 9.0);

  auto bad = cfg;
  bad.n_pushes = 0;
  CHECK_THROWS_WITH(run_experiment(bad),
                    Catch::Matchers::ContainsSubstring("n_pushes"));

  bad = cfg;
  bad.gait.delta = bad.gait.alpha / 2.0;
  CHECK_THROWS_WITH(run_experiment(bad),
                    Catch::Matchers::ContainsSubstring("gait.delta"));

  bad = cfg;
  bad.plant.t_min = 0.001;  // below one control tick
  CHECK_THROWS_WITH(run_experiment(bad),
                    Catch::Matchers::ContainsSubstring("t_min"));

  bad = cfg;
  bad.impulse_min = 5.0;
  bad.impulse_max = -5.0;
  CHECK_THROWS_WITH(run_experiment(bad),
                    Catch::Matchers::ContainsSubstring("impulse_min"));
}
