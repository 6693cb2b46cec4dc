#pragma once

// The four balance controllers: open-loop, step timing only, timing plus
// foot placement, and timing plus placement with the learned correction.
// Each maps an observed canonical state to a step command (T, F): time
// remaining until support exchange and the lateral footstep offset.

#include <algorithm>
#include <optional>
#include <string>

#include "capstep/grid.hpp"
#include "capstep/lipm.hpp"

namespace capstep {

struct StepCommand {
  double t_remaining = 0.0;  // s; 0 requests the exchange as soon as allowed
  double f = 0.0;            // m, from the support foot toward the swing side
};

enum class ControllerKind { NoFeedback, Timing, TimingStep, TimingStepLearning };

inline const char* to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::NoFeedback: return "none";
    case ControllerKind::Timing: return "timing";
    case ControllerKind::TimingStep: return "timing+step";
    case ControllerKind::TimingStepLearning: return "timing+step+learning";
  }
  return "?";
}

inline std::optional<ControllerKind> parse_controller(const std::string& s) {
  if (s == "none") return ControllerKind::NoFeedback;
  if (s == "timing") return ControllerKind::Timing;
  if (s == "timing+step") return ControllerKind::TimingStep;
  if (s == "timing+step+learning") return ControllerKind::TimingStepLearning;
  return std::nullopt;
}

// Fixed frequency, fixed step size; the observed state plays no part.
inline StepCommand open_loop(double phase_time, double nominal_period,
                             double nominal_width) {
  return {std::max(nominal_period - phase_time, 0.0), nominal_width};
}

// Remaining time until the outbound crossing of the nominal exchange
// location delta. When the trajectory never gets there (pivot-crossing
// states, outward escapes) the step is requested as soon as possible; the
// plant's minimum step duration provides the floor.
inline double time_until_exchange(const ComState& s, const GaitParams& g) {
  auto t = time_to_position(s, g.c, g.delta, CrossingDirection::Outbound);
  return t ? std::max(*t, 0.0) : 0.0;
}

inline StepCommand timing_controller(const ComState& s, const GaitParams& g,
                                     double nominal_width) {
  return {time_until_exchange(s, g), nominal_width};
}

// Timing as above plus model-based placement: predict the exchange state,
// then choose F so the next apex passes at distance alpha. The step motion
// generator never exchanges earlier than its minimum step duration and holds
// inbound returning states until their apex, so the placement targets the
// state at that predicted moment rather than at the raw commanded time.
// Inbound pivot-crossing states (E > 0 moving toward and past the pivot,
// where a wide step would only re-launch the body outward) instead get the
// narrow crossing step; recovery then completes on the following exchange.
inline StepCommand full_controller(const ComState& s, const GaitParams& g,
                                   double floor_remaining = 0.0) {
  const double t = time_until_exchange(s, g);
  double t_fire = std::max(t, floor_remaining);
  if (orbital_energy(s, g.c) < 0.0 && s.vy < 0.0) {
    const auto ta = time_to_apex(s, g.c);
    if (ta) t_fire = std::max(t_fire, *ta);
  }
  const ComState at_exchange = propagate(s, g.c, t_fire);
  const double f =
      at_exchange.vy < 0.0 && orbital_energy(at_exchange, g.c) > 0.0
          ? foot_placement_for_crossing(at_exchange, g.c, g.alpha)
          : foot_placement_for_apex(at_exchange, g.c, g.alpha);
  return {t, f};
}

// Full controller with the learned step-size error subtracted from F only;
// the timing half of the command is untouched.
inline StepCommand learning_controller(const ComState& s, const GaitParams& g,
                                       const GridApproximator& f_hat,
                                       double floor_remaining = 0.0) {
  StepCommand cmd = full_controller(s, g, floor_remaining);
  cmd.f -= f_hat.query(s);
  return cmd;
}

// Dispatcher bound to one controller kind plus everything it may need.
struct BalanceController {
  ControllerKind kind = ControllerKind::NoFeedback;
  GaitParams gait;
  double nominal_period = 0.0;
  double nominal_width = 0.0;
  const GridApproximator* f_hat = nullptr;  // required for learning only
  double min_step_duration = 0.0;  // the generator's timing floor

  StepCommand command(const ComState& obs, double phase_time) const {
    const double floor_remaining =
        std::max(min_step_duration - phase_time, 0.0);
    switch (kind) {
      case ControllerKind::NoFeedback:
        return open_loop(phase_time, nominal_period, nominal_width);
      case ControllerKind::Timing:
        return timing_controller(obs, gait, nominal_width);
      case ControllerKind::TimingStep:
        return full_controller(obs, gait, floor_remaining);
      case ControllerKind::TimingStepLearning:
        return learning_controller(obs, gait, *f_hat, floor_remaining);
    }
    return {};
  }
};

}  // namespace capstep
