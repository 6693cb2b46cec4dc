#pragma once

// Push-experiment harness: seeded scenario generation, controller-in-the-loop
// execution against the plant, online learning, and structured logging.
//
// Scenarios (impulse, step-phase fraction) are drawn from a stream keyed by
// the seed alone, so every controller sees the same pushes — paired sampling
// keeps cross-controller comparisons low-variance.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <capstep/balance.hpp>
#include <capstep/grid.hpp>
#include <capstep/lipm.hpp>
#include <capstep/log.hpp>
#include <capstep/plant.hpp>
#include <capstep/rng.hpp>

#include <nlohmann/json.hpp>

namespace capstep {

struct ExperimentConfig {
  ControllerKind controller = ControllerKind::NoFeedback;
  int n_pushes = 400;
  double impulse_min = -9.0;  // Ns
  double impulse_max = 9.0;   // Ns
  std::uint64_t seed = 1;
  PlantConfig plant;
  GaitParams gait;  // calibrated; gait.c is the controller's model constant
  double nominal_period = 0.45;  // s
  double nominal_width = 0.22;   // m
  GridSpec grid;
  bool freeze_grid = false;      // evaluation-only replay of a learned grid
  double recovery_band = 0.005;  // m: |apex - alpha| counted as recovered
};

inline void validate_experiment_config(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("config: " + field + " " + why);
  };
  if (cfg.n_pushes <= 0) fail("n_pushes", "must be > 0");
  if (!(cfg.impulse_min <= cfg.impulse_max))
    fail("impulse_min", "must not exceed impulse_max");
  if (!(cfg.gait.alpha > 0.0)) fail("gait.alpha", "must be > 0");
  if (!(cfg.gait.delta > cfg.gait.alpha))
    fail("gait.delta", "must exceed gait.alpha");
  if (!(cfg.gait.c.c > 0.0)) fail("gait.c", "must be > 0");
  if (!(cfg.nominal_period > 0.0)) fail("nominal_period", "must be > 0");
  if (!(cfg.nominal_width > 0.0)) fail("nominal_width", "must be > 0");
  if (!(cfg.plant.mass > 0.0)) fail("plant.mass", "must be > 0");
  if (!(cfg.plant.c_plant.c > 0.0)) fail("plant.c", "must be > 0");
  if (!(cfg.plant.control_rate > 0.0)) fail("plant.control_rate", "must be > 0");
  if (!(cfg.plant.t_min > 0.0)) fail("plant.t_min", "must be > 0");
  if (!(cfg.plant.t_min * cfg.plant.control_rate >= 1.0))
    fail("plant.t_min", "must cover at least one control tick");
  if (!(cfg.plant.f_min < cfg.plant.f_max))
    fail("plant.f_min", "must be below plant.f_max");
  if (!(cfg.plant.y_fall > 3.0 * cfg.gait.alpha))
    fail("plant.y_fall", "must exceed 3x gait.alpha");
  if (!(cfg.plant.latency >= 0.0)) fail("plant.latency", "must be >= 0");
  if (!(cfg.plant.recovery_time > 0.0)) fail("plant.recovery_time", "must be > 0");
  if (!(cfg.plant.sensor_noise_y >= 0.0))
    fail("plant.sensor_noise_y", "must be >= 0");
  if (!(cfg.plant.sensor_noise_vy >= 0.0))
    fail("plant.sensor_noise_vy", "must be >= 0");
  if (!(cfg.plant.actuation_noise_std >= 0.0))
    fail("plant.actuation_noise_std", "must be >= 0");
  if (!(cfg.plant.actuation_scale > 0.0))
    fail("plant.actuation_scale", "must be > 0");
  if (!(cfg.plant.exchange_restitution > 0.0 &&
        cfg.plant.exchange_restitution <= 1.0))
    fail("plant.exchange_restitution", "must be in (0, 1]");
  if (!(cfg.recovery_band > 0.0)) fail("recovery_band", "must be > 0");
  if (!(cfg.grid.y_min < cfg.grid.y_max))
    fail("grid.y_min", "must be below grid.y_max");
  if (!(cfg.grid.vy_min < cfg.grid.vy_max))
    fail("grid.vy_min", "must be below grid.vy_max");
  if (cfg.grid.ny < 2 || cfg.grid.nvy < 2)
    fail("grid.shape", "needs at least 2 nodes per axis");
  if (!(cfg.grid.eta > 0.0)) fail("grid.eta", "must be > 0");
}

inline nlohmann::json experiment_config_json(const ExperimentConfig& cfg) {
  return nlohmann::json{
      {"controller", to_string(cfg.controller)},
      {"n_pushes", cfg.n_pushes},
      {"impulse_min", cfg.impulse_min},
      {"impulse_max", cfg.impulse_max},
      {"seed", cfg.seed},
      {"plant",
       {{"mass", cfg.plant.mass},
        {"c", cfg.plant.c_plant.c},
        {"actuation_bias", cfg.plant.actuation_bias},
        {"actuation_scale", cfg.plant.actuation_scale},
        {"actuation_noise_std", cfg.plant.actuation_noise_std},
        {"sensor_noise_y", cfg.plant.sensor_noise_y},
        {"sensor_noise_vy", cfg.plant.sensor_noise_vy},
        {"latency", cfg.plant.latency},
        {"f_min", cfg.plant.f_min},
        {"f_max", cfg.plant.f_max},
        {"t_min", cfg.plant.t_min},
        {"y_fall", cfg.plant.y_fall},
        {"recovery_time", cfg.plant.recovery_time},
        {"control_rate", cfg.plant.control_rate},
        {"exchange_restitution", cfg.plant.exchange_restitution}}},
      {"gait",
       {{"alpha", cfg.gait.alpha},
        {"delta", cfg.gait.delta},
        {"c", cfg.gait.c.c}}},
      {"nominal_period", cfg.nominal_period},
      {"nominal_width", cfg.nominal_width},
      {"grid",
       {{"y_min", cfg.grid.y_min},
        {"y_max", cfg.grid.y_max},
        {"vy_min", cfg.grid.vy_min},
        {"vy_max", cfg.grid.vy_max},
        {"ny", cfg.grid.ny},
        {"nvy", cfg.grid.nvy},
        {"eta", cfg.grid.eta}}},
      {"freeze_grid", cfg.freeze_grid},
      {"recovery_band", cfg.recovery_band}};
}

namespace detail {

// Apex distance as the sensors see it: orbit-invariant for returning
// trajectories, so a slightly stale reading on the same orbit still lands on
// the apex. Falls back to plain |y| for pivot-crossing readings.
inline double observed_apex(const ComState& obs, PendulumConstant c) {
  const double r = obs.y * obs.y - (obs.vy / c.c) * (obs.vy / c.c);
  return r > 0.0 ? std::sqrt(r) : std::abs(obs.y);
}

}  // namespace detail

// Runs the push experiment. When `grid_io` is given (learning controller
// only) it supplies the initial grid and receives the final one.
inline RunLog run_experiment(const ExperimentConfig& cfg,
                             GridApproximator* grid_io = nullptr) {
  validate_experiment_config(cfg);

  struct Scenario {
    double impulse, frac;
  };
  std::vector<Scenario> scenarios(static_cast<std::size_t>(cfg.n_pushes));
  {
    Rng scen(derive_seed(cfg.seed, 0x5ce7a9e5u));
    for (Scenario& s : scenarios) {
      s.impulse = scen.uniform(cfg.impulse_min, cfg.impulse_max);
      s.frac = scen.uniform(0.0, 1.0);
    }
  }

  Plant plant(cfg.plant, cfg.nominal_period, cfg.nominal_width,
              derive_seed(cfg.seed, 0x9a17u));
  const bool learning = cfg.controller == ControllerKind::TimingStepLearning;
  GridApproximator local_grid(cfg.grid);
  GridApproximator* grid = learning ? (grid_io ? grid_io : &local_grid)
                                    : nullptr;
  const BalanceController ctl{cfg.controller,      cfg.gait,
                              cfg.nominal_period,  cfg.nominal_width,
                              grid,                cfg.plant.t_min};

  RunLog log;
  log.meta.controller = to_string(cfg.controller);
  log.meta.seed = cfg.seed;
  log.meta.n_pushes = cfg.n_pushes;
  log.meta.config_hash =
      detail::fnv1a64(experiment_config_json(cfg).dump());
  log.meta.alpha = cfg.gait.alpha;
  log.meta.delta = cfg.gait.delta;
  log.meta.c = cfg.gait.c.c;
  log.meta.period = cfg.nominal_period;
  log.meta.width = cfg.nominal_width;

  // push scheduler
  int next_push = 0;
  int active_push = -1;
  double arm_after = cfg.plant.recovery_time;  // quiet period before arming
  bool armed = false;
  bool needs_steady = false;  // re-center the gait before the next trial
  double push_due = 1e300;

  // learning bookkeeping: a step's tick states are scored by the apex that
  // follows the exchange at its end; a push or reset between that exchange
  // and the apex invalidates the pairing
  std::vector<ComState> cur_states, prev_states;
  bool prev_valid = false;
  bool prev_clamped = false;  // saturated placement carries no gradient
  bool push_in_cur_step = false;
  bool apex_consumed = false;
  double last_exchange_time = 0.0;

  // open window stats for the active push
  struct Window {
    std::size_t rec;
    double push_time;
    bool fell = false;
    double fall_time = 0.0;
    int exchanges = 0;
    int recovery = -1;
  };
  bool win_open = false;
  Window win{};

  auto close_window = [&]() {
    if (!win_open) return;
    PushRecord& r = log.pushes[win.rec];
    r.fell = win.fell;
    r.time_to_fall = win.fell ? win.fall_time - win.push_time : 0.0;
    r.recovery_steps = win.fell ? -1 : win.recovery;
    win_open = false;
  };

  const double dt = plant.dt();
  const long tick_cap =
      static_cast<long>((static_cast<double>(cfg.n_pushes) + 1.0) *
                        (cfg.plant.recovery_time + 20.0) / dt) +
      10000;
  for (long guard = 0;; ++guard) {
    if (guard > tick_cap)
      throw std::runtime_error("experiment stalled: tick cap exceeded");
    const double now = plant.state().sim_time;
    if (next_push >= cfg.n_pushes && now >= arm_after) break;

    if (next_push < cfg.n_pushes && armed && now + 1e-9 >= push_due) {
      close_window();
      plant.apply_push(scenarios[static_cast<std::size_t>(next_push)].impulse);
      const PlantState& st = plant.state();
      const ComState can = plant.true_canonical();
      PushRecord rec;
      rec.id = next_push;
      rec.impulse = scenarios[static_cast<std::size_t>(next_push)].impulse;
      rec.time = now;
      rec.phase = st.phase_time;
      rec.step = st.step_index;
      rec.y = can.y;
      rec.vy = can.vy;
      rec.side = st.support_side;
      win = Window{log.pushes.size(), now};
      win_open = true;
      log.pushes.push_back(rec);
      active_push = next_push;
      push_in_cur_step = true;
      arm_after = now + cfg.plant.recovery_time;
      armed = false;
      needs_steady = true;
      push_due = 1e300;
      ++next_push;
    }

    // Between trials the handler steadies the gait back onto the nominal
    // cycle (unless a fall already reset it), so every push lands on the
    // calibrated cycle instead of the accumulated residue of earlier pushes.
    // Controllers that conserve orbital energy never shed that residue on
    // their own, which would let a chain of weak pushes masquerade as a
    // single-push fall.
    if (needs_steady && next_push < cfg.n_pushes && now >= arm_after) {
      const PlantEvent ev = plant.steady();
      EventRecord er;
      er.type = ev.type;
      er.push = active_push;
      er.time = ev.time;
      er.step = ev.step_index;
      er.y = ev.state.y;
      er.vy = ev.state.vy;
      er.side = ev.side;
      log.events.push_back(er);
      if (learning) {
        cur_states.clear();
        prev_states.clear();
        prev_valid = false;
        push_in_cur_step = false;
        apex_consumed = false;
      }
      last_exchange_time = ev.time;
      needs_steady = false;
    }

    const ComState obs = plant.observe();
    const StepCommand cmd = ctl.command(obs, plant.state().phase_time);
    {
      const PlantState& st = plant.state();
      const ComState can = plant.true_canonical();
      TickRecord t;
      t.push = active_push;
      t.time = now;
      t.step = st.step_index;
      t.y = can.y;
      t.vy = can.vy;
      t.side = st.support_side;
      t.t_cmd = cmd.t_remaining;
      t.f_cmd = cmd.f;
      t.f_exec = plant.planned_placement(cmd.f);
      log.ticks.push_back(t);
    }
    if (learning) cur_states.push_back(obs);

    for (const PlantEvent& ev : plant.tick(cmd)) {
      EventRecord er;
      er.type = ev.type;
      er.push = active_push;
      er.time = ev.time;
      er.step = ev.step_index;
      er.y = ev.state.y;
      er.vy = ev.state.vy;
      er.side = ev.side;
      if (ev.type == EventType::SupportExchange) {
        er.f_cmd = ev.f_commanded;
        er.f_exec = ev.f_executed;
        er.flags = (ev.f_clamped ? kFlagClamped : 0) |
                   (ev.min_duration_clamped ? kFlagMinDuration : 0) |
                   (ev.deferred_outbound ? kFlagDeferred : 0) |
                   (ev.tip_triggered ? kFlagTip : 0);
      }
      log.events.push_back(er);

      switch (ev.type) {
        case EventType::ApexReached: {
          if (win_open && !win.fell && win.recovery < 0 &&
              std::abs(ev.apex_y - cfg.gait.alpha) <= cfg.recovery_band)
            win.recovery = win.exchanges;
          if (learning && !apex_consumed) {
            apex_consumed = true;
            // an apex inside the sensor-latency window of the step start is
            // not yet visible in the observations; skip rather than score the
            // previous step with a stale reading
            const bool sensed =
                ev.time - last_exchange_time > cfg.plant.latency + dt;
            if (prev_valid && !prev_clamped && !push_in_cur_step && sensed &&
                !cfg.freeze_grid) {
              StepTrace trace;
              trace.states = prev_states;
              trace.apex_y = detail::observed_apex(plant.observe(), cfg.gait.c);
              grid->end_of_step_update(trace, cfg.gait.alpha);
            }
          }
          break;
        }
        case EventType::SupportExchange: {
          if (win_open && !win.fell) ++win.exchanges;
          if (!armed && next_push < cfg.n_pushes && ev.time >= arm_after) {
            armed = true;
            push_due =
                ev.time +
                scenarios[static_cast<std::size_t>(next_push)].frac *
                    cfg.nominal_period;
          }
          last_exchange_time = ev.time;
          if (learning) {
            prev_states = std::move(cur_states);
            cur_states.clear();
            prev_valid = true;
            prev_clamped = ev.f_clamped;
            push_in_cur_step = false;
            apex_consumed = false;
          }
          break;
        }
        case EventType::Fell: {
          if (win_open && !win.fell) {
            win.fell = true;
            win.fall_time = ev.time;
          }
          if (learning) {
            cur_states.clear();
            prev_states.clear();
            prev_valid = false;
          }
          break;
        }
        case EventType::Reset: {
          arm_after = std::max(arm_after, ev.time + cfg.plant.recovery_time);
          armed = false;
          needs_steady = false;  // the fall reset already re-centered
          push_due = 1e300;
          last_exchange_time = ev.time;
          if (learning) {
            push_in_cur_step = false;
            apex_consumed = false;
          }
          break;
        }
      }
    }
  }
  close_window();
  return log;
}

}  // namespace capstep
