#pragma once

// Gait parameter identification from undisturbed open-loop walking: run the
// plant on the nominal rocking gait, discard the transient, and average the
// apex distances and exchange locations into (alpha, delta).

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <capstep/balance.hpp>
#include <capstep/lipm.hpp>
#include <capstep/plant.hpp>

#include <nlohmann/json.hpp>

namespace capstep {

struct OpenLoopNominals {
  double period = 0.45;  // s
  double width = 0.22;   // m
};

struct CalibrationResult {
  GaitParams gait;
  double period = 0.0;  // mean measured exchange interval, s
  double width = 0.0;   // mean executed step width, m
  int steps_used = 0;   // steps averaged after the transient discard
};

class NoLimitCycle : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline double mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

}  // namespace detail

inline CalibrationResult calibrate(const PlantConfig& cfg,
                                   const OpenLoopNominals& nom, int n_steps,
                                   std::uint64_t seed = 1,
                                   Side initial_side = Side::Right) {
  if (n_steps < 20)
    throw std::invalid_argument("calibrate: n_steps must be >= 20");
  if (!(nom.period > 0.0) || !(nom.width > 0.0))
    throw std::invalid_argument("calibrate: nominals must be positive");

  Plant plant(cfg, nom.period, nom.width, seed, initial_side);

  struct StepSample {
    double apex = -1.0;  // < 0: no apex seen this step
    double exchange_y = 0.0;
    double f = 0.0;
    double interval = 0.0;
  };
  std::vector<StepSample> steps;
  steps.reserve(static_cast<std::size_t>(n_steps));

  double pending_apex = -1.0;
  double last_exchange_time = plant.state().sim_time;
  const long max_ticks =
      static_cast<long>(cfg.control_rate * nom.period * n_steps * 10) + 1000;

  for (long t = 0; t < max_ticks && static_cast<int>(steps.size()) < n_steps;
       ++t) {
    const StepCommand cmd =
        open_loop(plant.state().phase_time, nom.period, nom.width);
    for (const PlantEvent& ev : plant.tick(cmd)) {
      switch (ev.type) {
        case EventType::ApexReached:
          pending_apex = ev.apex_y;
          break;
        case EventType::SupportExchange:
          steps.push_back({pending_apex, std::abs(ev.state.y), ev.f_executed,
                           ev.time - last_exchange_time});
          pending_apex = -1.0;
          last_exchange_time = ev.time;
          break;
        case EventType::Fell:
          throw NoLimitCycle("calibrate: plant fell during open-loop walking");
        case EventType::Reset:
          break;
      }
    }
  }
  if (static_cast<int>(steps.size()) < n_steps)
    throw NoLimitCycle("calibrate: open-loop gait stopped exchanging support");

  const int discard = n_steps / 4;
  std::vector<double> apexes, exchange_ys, widths, intervals;
  for (int i = discard; i < n_steps; ++i) {
    if (steps[i].apex >= 0.0) apexes.push_back(steps[i].apex);
    exchange_ys.push_back(steps[i].exchange_y);
    widths.push_back(steps[i].f);
    intervals.push_back(steps[i].interval);
  }
  if (apexes.size() < exchange_ys.size() / 2)
    throw NoLimitCycle("calibrate: too few apexes; gait is not oscillating");

  // limit-cycle diagnostic: apex spread over the tail must be small
  const std::vector<double> tail(apexes.begin() + apexes.size() / 2,
                                 apexes.end());
  const double apex_mean = detail::mean(apexes);
  if (!(apex_mean > 0.0) || detail::stddev(tail) > 0.2 * apex_mean)
    throw NoLimitCycle("calibrate: apex distances did not settle");

  CalibrationResult out;
  out.gait = GaitParams{apex_mean, detail::mean(exchange_ys), cfg.c_plant};
  out.period = detail::mean(intervals);
  out.width = detail::mean(widths);
  out.steps_used = static_cast<int>(exchange_ys.size());
  if (!(out.gait.delta > out.gait.alpha && out.gait.alpha > 0.0))
    throw NoLimitCycle("calibrate: measured gait violates delta > alpha > 0");
  return out;
}

inline nlohmann::json gait_params_to_json(const CalibrationResult& r) {
  return nlohmann::json{{"alpha", r.gait.alpha},
                        {"delta", r.gait.delta},
                        {"c", r.gait.c.c},
                        {"period", r.period},
                        {"width", r.width},
                        {"steps_used", r.steps_used}};
}

inline CalibrationResult gait_params_from_json(const nlohmann::json& j) {
  CalibrationResult r;
  try {
    r.gait.alpha = j.at("alpha").get<double>();
    r.gait.delta = j.at("delta").get<double>();
    r.gait.c.c = j.at("c").get<double>();
    r.period = j.at("period").get<double>();
    r.width = j.at("width").get<double>();
    r.steps_used = j.value("steps_used", 0);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("gait params: ") + e.what());
  }
  if (!(r.gait.delta > r.gait.alpha && r.gait.alpha > 0.0))
    throw std::runtime_error("gait params: require delta > alpha > 0");
  if (!(r.gait.c.c > 0.0) || !(r.period > 0.0) || !(r.width > 0.0))
    throw std::runtime_error("gait params: require positive c, period, width");
  return r;
}

}  // namespace capstep
