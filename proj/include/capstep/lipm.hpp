#pragma once

// Closed-form lateral dynamics of the linear inverted pendulum:
//   y'' = c^2 * y,  c = sqrt(g/h)
// All states live in the active support-foot frame. Trajectories either
// return to the pivot side they came from (orbital energy E < 0) or cross
// over the pivot (E > 0); the sign of E is what every controller here
// ultimately manipulates.

#include <algorithm>
#include <cmath>
#include <optional>

namespace capstep {

struct PendulumConstant {
  double c = 3.5;  // 1/s
};

struct ComState {
  double y = 0.0;   // m, lateral CoM offset from the support pivot
  double vy = 0.0;  // m/s
};

struct GaitParams {
  double alpha = 0.0;  // nominal apex distance, m
  double delta = 0.0;  // nominal support exchange location, m
  PendulumConstant c;
};

inline ComState propagate(const ComState& s, PendulumConstant pc, double t) {
  const double ch = std::cosh(pc.c * t);
  const double sh = std::sinh(pc.c * t);
  return {s.y * ch + s.vy / pc.c * sh, s.y * pc.c * sh + s.vy * ch};
}

// E = (vy^2 - c^2 y^2)/2, conserved along the pendulum flow (per unit mass).
inline double orbital_energy(const ComState& s, PendulumConstant pc) {
  return 0.5 * (s.vy * s.vy - pc.c * pc.c * s.y * s.y);
}

enum class Region { A, B, Boundary };  // A: E<0 returning, B: E>0 crossing

inline Region region(const ComState& s, PendulumConstant pc) {
  const double e = orbital_energy(s, pc);
  if (std::abs(e) < 1e-12) return Region::Boundary;
  return e < 0.0 ? Region::A : Region::B;
}

// Minimal |y| along the trajectory; only exists on returning trajectories.
inline std::optional<double> apex_distance(const ComState& s,
                                           PendulumConstant pc) {
  if (orbital_energy(s, pc) >= 0.0) return std::nullopt;
  return std::sqrt(s.y * s.y - (s.vy / pc.c) * (s.vy / pc.c));
}

// Time until vy = 0 (only meaningful when E < 0). Negative result means the
// apex lies in the past of the current step.
inline std::optional<double> time_to_apex(const ComState& s,
                                          PendulumConstant pc) {
  const double r = -s.vy / (pc.c * s.y);
  if (!(std::abs(r) < 1.0)) return std::nullopt;
  return std::atanh(r) / pc.c;
}

enum class CrossingDirection {
  Any,       // first crossing of the target, regardless of velocity
  Outbound,  // first crossing moving away from the pivot (target side)
};

namespace detail {

inline bool direction_ok(double target, double vy, CrossingDirection dir) {
  if (dir == CrossingDirection::Any) return true;
  if (target > 0.0) return vy >= -1e-9;
  if (target < 0.0) return vy <= 1e-9;
  return true;
}

// Bracketed bisection fallback over [0, horizon]; used when the logarithmic
// closed form is numerically delicate (tangency near the apex, u ~ 1).
inline std::optional<double> scan_for_crossing(const ComState& s,
                                               PendulumConstant pc,
                                               double target,
                                               CrossingDirection dir) {
  const double horizon = 5.0 / pc.c;
  const int n = 4096;
  const double dt = horizon / n;
  double t0 = 0.0;
  double g0 = s.y - target;
  for (int i = 1; i <= n; ++i) {
    const double t1 = i * dt;
    const ComState s1 = propagate(s, pc, t1);
    const double g1 = s1.y - target;
    if (g0 == 0.0 && direction_ok(target, propagate(s, pc, t0).vy, dir))
      return t0;
    if (g0 * g1 < 0.0) {
      double lo = t0, hi = t1;
      for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        const double gm = propagate(s, pc, mid).y - target;
        if (gm == 0.0) { lo = hi = mid; break; }
        if (gm * g0 < 0.0) hi = mid; else lo = mid;
        if (hi - lo < 1e-15) break;
      }
      const double t = 0.5 * (lo + hi);
      if (std::abs(propagate(s, pc, t).y - target) < 1e-12 ||
          std::abs(propagate(s, pc, t).y - target) <
              1e-9 * std::max(1.0, std::abs(target))) {
        if (direction_ok(target, propagate(s, pc, t).vy, dir)) return t;
      }
    }
    t0 = t1;
    g0 = g1;
  }
  return std::nullopt;
}

}  // namespace detail

// Smallest t >= 0 with y(t) = target on the forward trajectory, or absent if
// the trajectory never reaches it. Substituting u = e^{ct} turns
// y(t) = A u + B/u into the quadratic A u^2 - target u + B = 0 with
//   A = (y + vy/c)/2,  B = (y - vy/c)/2,
// solved in the numerically stable Vieta form; roots with u >= 1 map back
// through t = ln(u)/c. Outbound restricts to crossings moving away from the
// pivot on the target's side (grazing the apex counts).
inline std::optional<double> time_to_position(
    const ComState& s, PendulumConstant pc, double target,
    CrossingDirection dir = CrossingDirection::Any) {
  const double a = 0.5 * (s.y + s.vy / pc.c);
  const double b = 0.5 * (s.y - s.vy / pc.c);
  const double tol = 1e-9 * std::max(1.0, std::abs(target));
  const double scale =
      std::max({target * target, 4.0 * std::abs(a * b), 1e-300});

  double roots[2];
  int nroots = 0;
  if (std::abs(a) < 1e-14 * std::max(std::abs(s.y), std::abs(s.vy / pc.c))) {
    // On the inbound separatrix the trajectory decays as y(t) = B e^{-ct}.
    if (b != 0.0 && target != 0.0 && b / target >= 1.0 - 1e-9)
      roots[nroots++] = std::max(b / target, 1.0);
  } else {
    double disc = target * target - 4.0 * a * b;
    if (disc < 0.0 && disc > -1e-12 * scale) disc = 0.0;  // apex tangency
    if (disc >= 0.0) {
      const double q = 0.5 * (target + std::copysign(std::sqrt(disc), target));
      const double u1 = (q != 0.0) ? b / q : 0.0;
      const double u2 = q / a;
      for (double u : {u1, u2})
        if (u >= 1.0 - 1e-9) roots[nroots++] = std::max(u, 1.0);
    }
  }

  std::optional<double> best;
  for (int i = 0; i < nroots; ++i) {
    const double t = std::log(roots[i]) / pc.c;
    const ComState st = propagate(s, pc, t);
    if (std::abs(st.y - target) > tol) continue;
    if (!detail::direction_ok(target, st.vy, dir)) continue;
    if (!best || t < *best) best = t;
  }
  if (best) return best;
  return detail::scan_for_crossing(s, pc, target, dir);
}

// Footstep offset that makes the next step's apex distance exactly alpha,
// given the predicted state at support exchange: F = y + sqrt(a^2 + (vy/c)^2).
inline double foot_placement_for_apex(const ComState& s_exchange,
                                      PendulumConstant pc, double alpha) {
  const double w = s_exchange.vy / pc.c;
  return s_exchange.y + std::sqrt(alpha * alpha + w * w);
}

// Footstep offset for an inbound pivot-crossing state (E > 0 with vy < 0).
// No wide step can turn such a state: the exchange flips the velocity, so a
// foot beyond the body re-launches it outward faster than any apex allows.
// Stepping narrow, F = y - sqrt((vy/c)^2 - a^2), puts the new pivot just
// short of the body; it crosses and re-emerges outbound at speed c*a, which
// the following ordinary exchange captures at apex distance exactly alpha.
inline double foot_placement_for_crossing(const ComState& s_exchange,
                                          PendulumConstant pc, double alpha) {
  const double w = s_exchange.vy / pc.c;
  return s_exchange.y - std::sqrt(std::max(w * w - alpha * alpha, 0.0));
}

// State after moving the pivot to F and flipping into the new support frame
// (the lateral symmetry convention: the canonical frame always looks alike).
inline ComState post_exchange_state(const ComState& s_exchange, double f) {
  return {f - s_exchange.y, -s_exchange.vy};
}

// Analytic period-one cycle of an open-loop gait with step period P and step
// width W: support exchange at y = W/2, apex at (W/2)/cosh(cP/2). The state
// returned is the start-of-step state on the cycle (inbound).
struct OpenLoopCycle {
  ComState start;
  double apex = 0.0;
  double exchange_y = 0.0;
};

inline OpenLoopCycle open_loop_cycle(PendulumConstant pc, double period,
                                     double width) {
  const double h = width / 2.0;
  OpenLoopCycle cyc;
  cyc.start = {h, -h * pc.c * std::tanh(pc.c * period / 2.0)};
  cyc.apex = h / std::cosh(pc.c * period / 2.0);
  cyc.exchange_y = h;
  return cyc;
}

}  // namespace capstep
