#pragma once

// The simulated lateral biped. Between support exchanges the center of mass
// follows the closed-form pendulum flow about the support pivot (under the
// plant's own constant, which may differ from the controller's model). The
// support exchange fires on whichever of two triggers comes first:
//
//  - the commanded trigger: the step command's remaining time runs out,
//    subject to the minimum step duration and to an outbound gate (weight
//    cannot transfer onto the swing leg while the body still falls away
//    from it, i.e. while E < 0 and vy < 0; such commands wait for the apex);
//  - the passive tip trigger: once the body tips past the midpoint of the
//    pending footstep while moving toward it, weight transfers by itself.
//    An exchange exactly at the midpoint conserves orbital energy, which is
//    what keeps the open-loop gait's neutral rocking bounded.
//
// Exchange timing, apexes and the triggers are all resolved sub-tick with
// the closed form, so the ideal plant reproduces the model exactly.
//
// Mismatch knobs (actuation scale/bias/noise, sensor noise, latency, a
// pendulum constant differing from the model) stand in for everything a
// full-body robot does that the controller's model does not capture.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <stdexcept>
#include <vector>

#include "capstep/balance.hpp"
#include "capstep/lipm.hpp"
#include "capstep/rng.hpp"

namespace capstep {

enum class Side { Left, Right };

inline double side_sign(Side s) { return s == Side::Right ? 1.0 : -1.0; }
inline Side other_side(Side s) {
  return s == Side::Right ? Side::Left : Side::Right;
}
inline const char* to_string(Side s) {
  return s == Side::Right ? "right" : "left";
}

struct PlantConfig {
  double mass = 13.5;                 // kg
  PendulumConstant c_plant{3.5};      // true dynamics, not the model's
  double actuation_bias = 0.02;       // m, added to every executed placement
  double actuation_scale = 0.88;      // executed F = scale*F_cmd + bias + noise
  double actuation_noise_std = 0.0;   // m, drawn once per step
  double sensor_noise_y = 0.0;        // m
  double sensor_noise_vy = 0.0;       // m/s
  double latency = 0.02;              // s, observation delay
  double f_min = 0.08;                // m, no leg crossing
  double f_max = 0.40;                // m, kinematic reach
  double t_min = 0.1;                 // s, minimum step duration
  double y_fall = 0.35;               // m, fall threshold in the support frame
  double recovery_time = 5.0;         // s between pushes
  double control_rate = 100.0;        // Hz
  double exchange_restitution = 1.0;  // velocity kept through the exchange
};

// All mismatch knobs zeroed: the plant then matches the model bitwise.
inline PlantConfig ideal_plant_config() {
  PlantConfig c;
  c.actuation_bias = 0.0;
  c.actuation_scale = 1.0;
  c.actuation_noise_std = 0.0;
  c.sensor_noise_y = 0.0;
  c.sensor_noise_vy = 0.0;
  c.latency = 0.0;
  return c;
}

struct PlantState {
  Side support_side = Side::Right;
  double y_world = 0.0;       // m, CoM
  double vy_world = 0.0;      // m/s
  double foot_y_world = 0.0;  // m, support pivot
  double sim_time = 0.0;      // s
  long step_index = 0;
  double phase_time = 0.0;    // s since the last exchange (or reset)
};

enum class EventType { ApexReached, SupportExchange, Fell, Reset };

struct PlantEvent {
  EventType type{};
  double time = 0.0;
  long step_index = 0;     // step the event belongs to (exchange: ending step)
  Side side = Side::Right; // support side the event happened on
  ComState state{};        // canonical state at the event
  double apex_y = 0.0;     // ApexReached only
  double f_commanded = 0.0, f_executed = 0.0;  // SupportExchange only
  bool f_clamped = false;
  bool min_duration_clamped = false;  // commanded earlier than t_min allows
  bool deferred_outbound = false;     // command waited for the outbound gate
  bool tip_triggered = false;         // passive midpoint transfer
};

class Plant {
 public:
  Plant(const PlantConfig& cfg, double nominal_period, double nominal_width,
        std::uint64_t seed, Side initial_side = Side::Right)
      : cfg_(cfg),
        nominal_period_(nominal_period),
        nominal_width_(nominal_width),
        initial_side_(initial_side),
        rng_(seed) {
    if (!(cfg.mass > 0) || !(cfg.c_plant.c > 0) || !(cfg.f_min < cfg.f_max) ||
        !(cfg.t_min > 0) || !(cfg.control_rate > 0))
      throw std::invalid_argument("plant config out of range");
    lag_ = static_cast<int>(std::llround(cfg.latency * cfg.control_rate));
    // Walking on the spot keeps the feet a stance width apart; passive
    // weight transfer happens when the CoM crosses the midline between them.
    stance_midline_ =
        std::clamp(cfg.actuation_scale * nominal_width + cfg.actuation_bias,
                   cfg.f_min, cfg.f_max) /
        2.0;
    reset_gait();
  }

  double stance_midline() const { return stance_midline_; }

  double dt() const { return 1.0 / cfg_.control_rate; }
  const PlantConfig& config() const { return cfg_; }
  const PlantState& state() const { return st_; }
  double phase_time() const { return st_.phase_time; }
  double nominal_period() const { return nominal_period_; }
  double nominal_width() const { return nominal_width_; }

  ComState true_canonical() const { return canonical(); }

  // Placement that would execute if the current command were carried out now
  // (mismatch and clamps applied, this step's actuation noise included).
  double planned_placement(double f_cmd) const {
    return executed_f(f_cmd, nullptr);
  }

  // Latest sensor reading: the canonical-frame state from `latency` seconds
  // ago plus this tick's noise draw. Computed once per tick, so repeated
  // calls are idempotent.
  ComState observe() const { return cached_obs_; }

  void apply_push(double impulse_ns) {
    st_.vy_world += impulse_ns / cfg_.mass;
    history_.back() = canonical();
    refresh_observation();
  }

  // Standing reset: the walk generator restarts the gait from its nominal
  // rocking cycle (CoM midway between the nominal foot positions, leaning
  // off toward the support side). A pendulum with point feet cannot pump
  // itself up from a standstill, so the restart begins on the cycle.
  void reset_gait() {
    st_.support_side = initial_side_;
    const OpenLoopCycle cyc =
        open_loop_cycle(cfg_.c_plant, nominal_period_, nominal_width_);
    const double s = side_sign(st_.support_side);
    st_.y_world = 0.0;
    st_.vy_world = s * cyc.start.vy;
    st_.foot_y_world = -s * cyc.start.y;
    st_.phase_time = 0.0;
    ++st_.step_index;
    step_start_ = st_.sim_time;
    draw_step_noise();
    history_.clear();
    history_.push_back(canonical());
    draw_sensor_noise();
    refresh_observation();
  }

  // Handler intervention between trials: restore the nominal cycle. Same
  // state change as the post-fall reset, reported so logs stay complete.
  PlantEvent steady() {
    reset_gait();
    PlantEvent ev;
    ev.type = EventType::Reset;
    ev.time = st_.sim_time;
    ev.step_index = st_.step_index;
    ev.side = st_.support_side;
    ev.state = canonical();
    return ev;
  }

  // Test hook: pin the plant to an exact canonical state mid-gait (the
  // minimum step duration is treated as already served).
  void force_state(Side side, const ComState& canonical_state,
                   double foot_y_world = 0.0) {
    st_.support_side = side;
    const double s = side_sign(side);
    st_.foot_y_world = foot_y_world;
    st_.y_world = foot_y_world + s * canonical_state.y;
    st_.vy_world = s * canonical_state.vy;
    st_.phase_time = cfg_.t_min;
    step_start_ = st_.sim_time - cfg_.t_min;
    ++st_.step_index;
    draw_step_noise();
    history_.clear();
    history_.push_back(canonical());
    draw_sensor_noise();
    refresh_observation();
  }

  std::vector<PlantEvent> tick(const StepCommand& cmd) {
    std::vector<PlantEvent> ev;
    const double t0 = st_.sim_time;
    const double t_end = t0 + dt();
    const double floor_t = step_start_ + cfg_.t_min;
    const double inf = std::numeric_limits<double>::infinity();

    // Schedule the exchange from this tick's command (receding horizon: the
    // next tick brings a fresh command, so only fires within this tick run).
    double t_cmd = t0 + std::max(cmd.t_remaining, 0.0);
    bool min_clamped = false, deferred = false;
    if (t_cmd < floor_t) {
      t_cmd = floor_t;
      min_clamped = true;
    }
    {
      const ComState can = canonical();
      if (orbital_energy(can, cfg_.c_plant) < 0.0 && can.vy < 0.0) {
        const auto ta = time_to_apex(can, cfg_.c_plant);
        const double t_gate = t0 + (ta ? std::max(*ta, 0.0) : 0.0);
        if (t_gate > t_cmd) {
          t_cmd = t_gate;
          deferred = true;
        }
      }
    }
    double t_tip = inf;
    {
      const ComState can = canonical();
      const double mid = stance_midline_;
      if (can.y >= mid && can.vy > 0.0) {
        t_tip = t0;
      } else if (const auto tx = time_to_position(
                     can, cfg_.c_plant, mid, CrossingDirection::Outbound)) {
        t_tip = t0 + *tx;
      }
      // Once past the midline moving outward the condition persists, so a
      // crossing inside the minimum-duration window fires right at its end.
      if (t_tip < floor_t) t_tip = floor_t;
    }

    const double t_fire = std::min(t_cmd, t_tip);
    if (t_fire <= t_end) {
      emit_apexes(ev, t_fire);
      advance_to(t_fire);
      do_exchange(ev, cmd, /*tip=*/t_tip < t_cmd, min_clamped, deferred);
      emit_apexes(ev, t_end);
      advance_to(t_end);
    } else {
      emit_apexes(ev, t_end);
      advance_to(t_end);
    }
    st_.phase_time = st_.sim_time - step_start_;

    const ComState can = canonical();
    if (std::abs(can.y) > cfg_.y_fall) {
      PlantEvent fell;
      fell.type = EventType::Fell;
      fell.time = st_.sim_time;
      fell.step_index = st_.step_index;
      fell.side = st_.support_side;
      fell.state = can;
      ev.push_back(fell);
      reset_gait();
      PlantEvent reset;
      reset.type = EventType::Reset;
      reset.time = st_.sim_time;
      reset.step_index = st_.step_index;
      reset.side = st_.support_side;
      reset.state = canonical();
      ev.push_back(reset);
    } else {
      history_.push_back(canonical());
      while (history_.size() > static_cast<size_t>(lag_) + 2)
        history_.pop_front();
      draw_sensor_noise();
      refresh_observation();
    }
    return ev;
  }

 private:
  ComState rel() const {
    return {st_.y_world - st_.foot_y_world, st_.vy_world};
  }

  ComState canonical() const {
    const double s = side_sign(st_.support_side);
    return {s * (st_.y_world - st_.foot_y_world), s * st_.vy_world};
  }

  void advance_to(double t) {
    const double h = t - st_.sim_time;
    if (h > 0.0) {
      const ComState r = propagate(rel(), cfg_.c_plant, h);
      st_.y_world = st_.foot_y_world + r.y;
      st_.vy_world = r.vy;
    }
    st_.sim_time = t;
  }

  // Apex (vy zero crossing) strictly after now and no later than t_to,
  // located in closed form; at most one exists per pendulum phase.
  void emit_apexes(std::vector<PlantEvent>& ev, double t_to) {
    const ComState can = canonical();
    const auto ta = time_to_apex(can, cfg_.c_plant);
    if (!ta || *ta <= 0.0 || st_.sim_time + *ta > t_to) return;
    const ComState at = propagate(can, cfg_.c_plant, *ta);
    PlantEvent e;
    e.type = EventType::ApexReached;
    e.time = st_.sim_time + *ta;
    e.step_index = st_.step_index;
    e.side = st_.support_side;
    e.state = at;
    e.apex_y = at.y;
    ev.push_back(e);
  }

  double executed_f(double f_cmd, bool* clamped) const {
    const double raw =
        cfg_.actuation_scale * f_cmd + cfg_.actuation_bias + step_noise_;
    const double f = std::clamp(raw, cfg_.f_min, cfg_.f_max);
    if (clamped) *clamped = (f != raw);
    return f;
  }

  void do_exchange(std::vector<PlantEvent>& ev, const StepCommand& cmd,
                   bool tip, bool min_clamped, bool deferred) {
    PlantEvent e;
    e.type = EventType::SupportExchange;
    e.time = st_.sim_time;
    e.step_index = st_.step_index;
    e.side = st_.support_side;
    e.state = canonical();
    e.f_commanded = cmd.f;
    e.f_executed = executed_f(cmd.f, &e.f_clamped);
    e.min_duration_clamped = min_clamped;
    e.deferred_outbound = deferred;
    e.tip_triggered = tip;
    ev.push_back(e);

    const double s = side_sign(st_.support_side);
    st_.foot_y_world += s * e.f_executed;
    st_.support_side = other_side(st_.support_side);
    st_.vy_world *= cfg_.exchange_restitution;
    ++st_.step_index;
    st_.phase_time = 0.0;
    step_start_ = st_.sim_time;
    draw_step_noise();
  }

  void draw_step_noise() {
    step_noise_ = cfg_.actuation_noise_std > 0.0
                      ? rng_.normal(0.0, cfg_.actuation_noise_std)
                      : 0.0;
  }

  void draw_sensor_noise() {
    noise_y_ = cfg_.sensor_noise_y > 0.0
                   ? rng_.normal(0.0, cfg_.sensor_noise_y)
                   : 0.0;
    noise_vy_ = cfg_.sensor_noise_vy > 0.0
                    ? rng_.normal(0.0, cfg_.sensor_noise_vy)
                    : 0.0;
  }

  void refresh_observation() {
    const size_t newest = history_.size() - 1;
    const size_t back = std::min(newest, static_cast<size_t>(lag_));
    const ComState base = history_[newest - back];
    cached_obs_ = {base.y + noise_y_, base.vy + noise_vy_};
  }

  PlantConfig cfg_;
  double nominal_period_, nominal_width_;
  Side initial_side_;
  Rng rng_;
  PlantState st_{};
  double step_start_ = 0.0;
  double step_noise_ = 0.0;
  double noise_y_ = 0.0, noise_vy_ = 0.0;
  double stance_midline_ = 0.0;
  int lag_ = 0;
  std::deque<ComState> history_;
  ComState cached_obs_{};
};

}  // namespace capstep
