#pragma once

// Evaluation artifacts computed from run logs: fall probability versus push
// magnitude, phase-space fall heatmaps with zero-energy overlays, and
// orbital-energy statistics including capture-step efficiency.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <capstep/grid.hpp>
#include <capstep/lipm.hpp>
#include <capstep/log.hpp>

namespace capstep {

// ---------------------------------------------------------------- fall rate

struct FallBin {
  double lo = 0.0, hi = 0.0;  // |impulse| bin [lo, hi), Ns
  int trials = 0;
  int falls = 0;
  double probability = 0.0;  // falls/trials; meaningless when empty
  bool empty = true;         // no push landed in this bin
};

struct FallProbabilityTable {
  double bin_width = 0.0;
  std::vector<FallBin> bins;
  int total_trials = 0;
  int total_falls = 0;
};

inline FallProbabilityTable fall_probability(const RunLog& log,
                                             double bin_width) {
  if (!(bin_width > 0.0))
    throw std::invalid_argument("fall probability: bin width must be > 0");
  if (log.pushes.empty())
    throw std::invalid_argument("fall probability: no pushes");
  double max_mag = 0.0;
  for (const PushRecord& p : log.pushes)
    max_mag = std::max(max_mag, std::abs(p.impulse));
  const int n_bins = static_cast<int>(max_mag / bin_width) + 1;

  FallProbabilityTable t;
  t.bin_width = bin_width;
  t.bins.resize(static_cast<std::size_t>(n_bins));
  for (int i = 0; i < n_bins; ++i) {
    t.bins[static_cast<std::size_t>(i)].lo = i * bin_width;
    t.bins[static_cast<std::size_t>(i)].hi = (i + 1) * bin_width;
  }
  for (const PushRecord& p : log.pushes) {
    const int i = std::min(
        static_cast<int>(std::abs(p.impulse) / bin_width), n_bins - 1);
    FallBin& b = t.bins[static_cast<std::size_t>(i)];
    ++b.trials;
    if (p.fell) ++b.falls;
  }
  for (FallBin& b : t.bins) {
    b.empty = b.trials == 0;
    b.probability = b.empty ? 0.0 : double(b.falls) / b.trials;
    t.total_trials += b.trials;
    t.total_falls += b.falls;
  }
  return t;
}

// ------------------------------------------------------------------ heatmap

struct PhaseSpaceHeatmap {
  GridSpec spec;  // cell bounds and shape; eta is unused here
  int visit_threshold = 10;
  double c = 0.0;  // zero-energy lines vy = +-c*y
  long long falls = 0;
  std::vector<long long> counts;  // per-cell fall-path increments
  std::vector<long long> visits;  // per-cell totals over all trace states

  std::size_t idx(int iy, int ivy) const {
    return static_cast<std::size_t>(iy) * spec.nvy + ivy;
  }
  bool masked(int iy, int ivy) const {
    return visits[idx(iy, ivy)] < visit_threshold;
  }
  double y_center(int iy) const {
    return spec.y_min + (iy + 0.5) * (spec.y_max - spec.y_min) / spec.ny;
  }
  double vy_center(int ivy) const {
    return spec.vy_min + (ivy + 0.5) * (spec.vy_max - spec.vy_min) / spec.nvy;
  }
  long long total_count() const {
    long long s = 0;
    for (long long v : counts) s += v;
    return s;
  }
};

// Default diagnostic window. Wider than the learner grid: it covers the
// whole fall corridor (the trial ends one tick past |y| = 0.35, and the
// strongest default-config pushes top out near |vy| = 1.5 m/s), so fall
// trajectories are histogrammed without truncation.
inline GridSpec heatmap_window() {
  GridSpec w;
  w.y_min = -0.36;
  w.y_max = 0.36;
  w.vy_min = -1.6;
  w.vy_max = 1.6;
  w.ny = 41;
  w.nvy = 41;
  return w;
}

namespace detail {

// Histogram cell of a state; absent when it lies outside the grid bounds.
inline std::optional<std::pair<int, int>> heat_cell(const GridSpec& g,
                                                    double y, double vy) {
  if (y < g.y_min || y > g.y_max || vy < g.vy_min || vy > g.vy_max)
    return std::nullopt;
  const int iy = std::min(
      static_cast<int>((y - g.y_min) / (g.y_max - g.y_min) * g.ny), g.ny - 1);
  const int ivy = std::min(
      static_cast<int>((vy - g.vy_min) / (g.vy_max - g.vy_min) * g.nvy),
      g.nvy - 1);
  return std::make_pair(iy, ivy);
}

// Half-open tick index range [first, last) belonging to each push window.
inline std::vector<std::pair<std::size_t, std::size_t>> push_tick_ranges(
    const RunLog& log) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges(
      log.pushes.size(), {0, 0});
  int cur = -1;
  for (std::size_t i = 0; i < log.ticks.size(); ++i) {
    const int id = log.ticks[i].push;
    if (id != cur) {
      if (id >= 0 && static_cast<std::size_t>(id) < ranges.size())
        ranges[static_cast<std::size_t>(id)].first = i;
      if (cur >= 0 && static_cast<std::size_t>(cur) < ranges.size())
        ranges[static_cast<std::size_t>(cur)].second = i;
      cur = id;
    }
  }
  if (cur >= 0 && static_cast<std::size_t>(cur) < ranges.size())
    ranges[static_cast<std::size_t>(cur)].second = log.ticks.size();
  return ranges;
}

}  // namespace detail

// Backtracks every fall to the first frame of its push and increments each
// grid cell the path touched, once per fall; the visit mask counts all trace
// states so sparsely explored cells can be blanked out.
inline PhaseSpaceHeatmap build_heatmap(const std::vector<RunLog>& logs,
                                       const GridSpec& spec) {
  if (!(spec.y_min < spec.y_max) || !(spec.vy_min < spec.vy_max) ||
      spec.ny < 1 || spec.nvy < 1)
    throw std::invalid_argument(
        "heatmap: grid bounds must be ordered and shape positive");
  if (logs.empty()) throw std::invalid_argument("heatmap: no logs");

  PhaseSpaceHeatmap h;
  h.spec = spec;
  const std::size_t n_cells = static_cast<std::size_t>(spec.ny) * spec.nvy;
  h.counts.assign(n_cells, 0);
  h.visits.assign(n_cells, 0);
  for (const RunLog& log : logs)
    if (log.meta.c > 0.0) {
      h.c = log.meta.c;
      break;
    }
  if (!(h.c > 0.0))
    throw std::invalid_argument("heatmap: no log carries a model c");

  std::vector<char> stamp(n_cells, 0);
  for (const RunLog& log : logs) {
    if (log.ticks.empty())
      throw std::invalid_argument("heatmap: log has no tick trace");
    for (const TickRecord& t : log.ticks)
      if (auto cell = detail::heat_cell(spec, t.y, t.vy))
        ++h.visits[h.idx(cell->first, cell->second)];

    const auto ranges = detail::push_tick_ranges(log);
    for (const PushRecord& p : log.pushes) {
      if (!p.fell) continue;
      if (p.id < 0 || static_cast<std::size_t>(p.id) >= ranges.size())
        throw std::invalid_argument("heatmap: push ids must be sequential");
      ++h.falls;
      std::fill(stamp.begin(), stamp.end(), 0);
      const double fall_time = p.time + p.time_to_fall;
      const auto [first, last] = ranges[static_cast<std::size_t>(p.id)];
      for (std::size_t i = first; i < last; ++i) {
        const TickRecord& t = log.ticks[i];
        if (t.time < p.time - 1e-9) continue;
        if (t.time > fall_time + 1e-9) break;
        if (auto cell = detail::heat_cell(spec, t.y, t.vy)) {
          const std::size_t k = h.idx(cell->first, cell->second);
          if (!stamp[k]) {
            stamp[k] = 1;
            ++h.counts[k];
          }
        }
      }
    }
  }
  return h;
}

// Fraction of heat-counted visits whose cell center has E > 0 (region B).
inline double region_b_fraction(const PhaseSpaceHeatmap& h) {
  long long b = 0, total = 0;
  for (int iy = 0; iy < h.spec.ny; ++iy)
    for (int ivy = 0; ivy < h.spec.nvy; ++ivy) {
      const long long n = h.counts[h.idx(iy, ivy)];
      if (n == 0) continue;
      total += n;
      if (orbital_energy({h.y_center(iy), h.vy_center(ivy)}, {h.c}) > 0.0)
        b += n;
    }
  return total > 0 ? double(b) / total : 0.0;
}

// ------------------------------------------------------------------- energy

struct SeriesPoint {
  double t = 0.0;  // s since the push
  double mean = 0.0;
  double q25 = 0.0, q75 = 0.0;
  int n = 0;  // pushes contributing at this offset
};

struct StepBox {
  int step = 0;  // steps after the pushed one (0 = the pushed step)
  double lo = 0.0, q25 = 0.0, median = 0.0, q75 = 0.0, hi = 0.0;
  int n = 0;
};

struct PushEnergy {
  int id = -1;
  double e0 = 0.0;  // excess of the pushed step
  double e1 = 0.0;  // excess of the first post-push step
  bool valid = false;  // survived, chain unbroken, e0 above the floor
};

struct EnergyStats {
  double e_nom = 0.0;  // nominal orbital energy, model frame
  std::vector<SeriesPoint> push_aligned;  // fixed-rate timeline from the push
  std::vector<StepBox> step_boxes;        // empty for the open-loop gait
  std::vector<PushEnergy> per_push;
  double efficiency = 0.0;  // mean over valid pushes of 1 - e1/e0
  int pushes_used = 0;
};

namespace detail {

// Linear-interpolated quantile of an already sorted sample.
inline double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) return 0.0;
  const double pos = q * (static_cast<double>(v.size()) - 1.0);
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= v.size()) return v.back();
  const double frac = pos - static_cast<double>(i);
  return v[i] * (1.0 - frac) + v[i + 1] * frac;
}

}  // namespace detail

// Excess energy e = |E - E_nom| with E_nom = -c^2 alpha^2 / 2, scored with
// the model c and calibrated alpha so all controllers share one scale. Each
// step's excess is sampled at its apex, or at the closing exchange when the
// step has no apex. Pushes that ended in a fall, or whose initial excess
// sits below `e0_floor` (nothing to absorb, the ratio would be noise), are
// excluded from the efficiency mean; a reset merely ends the chain.
inline EnergyStats energy_stats(const RunLog& log, const GaitParams& gait,
                                double horizon = 3.0, int max_steps = 8,
                                double e0_floor = 1e-3) {
  if (!(gait.alpha > 0.0) || !(gait.c.c > 0.0))
    throw std::invalid_argument("energy stats: gait alpha and c must be > 0");
  if (!(horizon > 0.0) || max_steps < 1)
    throw std::invalid_argument(
        "energy stats: horizon must be > 0 and max_steps >= 1");

  EnergyStats st;
  st.e_nom = -0.5 * gait.c.c * gait.c.c * gait.alpha * gait.alpha;
  auto excess = [&](double y, double vy) {
    return std::abs(orbital_energy({y, vy}, gait.c) - st.e_nom);
  };

  // push-aligned series on the tick timeline
  const double dt = log.ticks.size() > 1
                        ? log.ticks[1].time - log.ticks[0].time
                        : 0.01;
  const int n_samples = static_cast<int>(std::lround(horizon / dt)) + 1;
  std::vector<std::vector<double>> columns(
      static_cast<std::size_t>(n_samples));
  const auto ranges = detail::push_tick_ranges(log);
  for (const PushRecord& p : log.pushes) {
    if (p.id < 0 || static_cast<std::size_t>(p.id) >= ranges.size())
      throw std::invalid_argument("energy stats: push ids must be sequential");
    double cutoff = p.time + horizon;
    if (p.fell) cutoff = std::min(cutoff, p.time + p.time_to_fall);
    const auto [first, last] = ranges[static_cast<std::size_t>(p.id)];
    for (std::size_t i = first; i < last; ++i) {
      const TickRecord& t = log.ticks[i];
      if (t.time < p.time - 1e-9) continue;
      if (t.time > cutoff + 1e-9) break;
      const long k = std::lround((t.time - p.time) / dt);
      if (k >= 0 && k < n_samples)
        columns[static_cast<std::size_t>(k)].push_back(excess(t.y, t.vy));
    }
  }
  for (int k = 0; k < n_samples; ++k) {
    auto& col = columns[static_cast<std::size_t>(k)];
    if (col.empty()) continue;
    std::sort(col.begin(), col.end());
    SeriesPoint pt;
    pt.t = k * dt;
    pt.n = static_cast<int>(col.size());
    double sum = 0.0;
    for (double v : col) sum += v;
    pt.mean = sum / pt.n;
    pt.q25 = detail::quantile_sorted(col, 0.25);
    pt.q75 = detail::quantile_sorted(col, 0.75);
    st.push_aligned.push_back(pt);
  }

  // per-step excess chains: step s of push p is the apex (else the closing
  // exchange) of plant step p.step + s after the push; a fall or reset ends
  // the chain
  std::vector<std::vector<double>> step_cols(
      static_cast<std::size_t>(max_steps) + 1);
  for (std::size_t pi = 0; pi < log.pushes.size(); ++pi) {
    const PushRecord& p = log.pushes[pi];
    const double window_end = pi + 1 < log.pushes.size()
                                  ? log.pushes[pi + 1].time
                                  : 1e300;
    std::vector<double> chain;  // excess per step index while unbroken
    long want = p.step;
    bool broken = false;
    for (const EventRecord& ev : log.events) {
      if (ev.time < p.time - 1e-9) continue;
      if (ev.time > window_end + 1e-9) break;
      if (ev.type == EventType::Fell) {
        broken = true;
        break;
      }
      // a reset (fall recovery or between-trial steadying) ends the chain:
      // later steps sit on the restored nominal cycle, not the recovery
      if (ev.type == EventType::Reset) break;
      if (static_cast<int>(chain.size()) > max_steps) break;
      if (ev.step == want && (ev.type == EventType::ApexReached ||
                              ev.type == EventType::SupportExchange)) {
        // the apex scores the step; the closing exchange stands in when the
        // push left the step without one
        chain.push_back(excess(ev.y, ev.vy));
        ++want;
      }
    }

    PushEnergy pe;
    pe.id = p.id;
    if (chain.size() >= 2) {
      pe.e0 = chain[0];
      pe.e1 = chain[1];
      pe.valid = !p.fell && !broken && pe.e0 > e0_floor;
    }
    st.per_push.push_back(pe);
    if (!p.fell && !broken)
      for (std::size_t s = 0; s < chain.size(); ++s)
        step_cols[s].push_back(chain[s]);
  }

  double eff_sum = 0.0;
  for (const PushEnergy& pe : st.per_push)
    if (pe.valid) {
      eff_sum += 1.0 - pe.e1 / pe.e0;
      ++st.pushes_used;
    }
  st.efficiency = st.pushes_used > 0 ? eff_sum / st.pushes_used : 0.0;

  // the open-loop gait has no push-synchronized step rhythm to align on
  if (log.meta.controller != "none") {
    for (int s = 0; s <= max_steps; ++s) {
      auto& col = step_cols[static_cast<std::size_t>(s)];
      if (col.empty()) continue;
      std::sort(col.begin(), col.end());
      StepBox b;
      b.step = s;
      b.n = static_cast<int>(col.size());
      b.lo = col.front();
      b.hi = col.back();
      b.q25 = detail::quantile_sorted(col, 0.25);
      b.median = detail::quantile_sorted(col, 0.5);
      b.q75 = detail::quantile_sorted(col, 0.75);
      st.step_boxes.push_back(b);
    }
  }
  return st;
}

// Mean efficiency restricted to pushes with id >= from_id (e.g. the back
// half of a run, after a learner has had time to train).
inline double efficiency_from(const EnergyStats& st, int from_id) {
  double sum = 0.0;
  int n = 0;
  for (const PushEnergy& pe : st.per_push)
    if (pe.valid && pe.id >= from_id) {
      sum += 1.0 - pe.e1 / pe.e0;
      ++n;
    }
  return n > 0 ? sum / n : 0.0;
}

// ------------------------------------------------------------ artifact CSVs

inline constexpr const char* kFallProbHeader =
    "label,bin_lo,bin_hi,trials,falls,probability";
inline constexpr const char* kHeatmapHeader =
    "label,iy,ivy,y_center,vy_center,count,visits,masked";
inline constexpr const char* kEnergyHeader =
    "label,kind,step,t,mean,q25,median,q75,lo,hi,n,efficiency,pushes_used";

inline void append_fallprob_csv(std::string& out, const std::string& label,
                                const FallProbabilityTable& t) {
  using detail::put_num;
  for (const FallBin& b : t.bins) {
    out += label;
    out += ',';
    put_num(out, b.lo);
    out += ',';
    put_num(out, b.hi);
    out += ',';
    put_num(out, b.trials);
    out += ',';
    put_num(out, b.falls);
    out += ',';
    if (!b.empty) put_num(out, b.probability);  // empty field = no trials
    out += '\n';
  }
}

inline void append_heatmap_csv(std::string& out, const std::string& label,
                               const PhaseSpaceHeatmap& h) {
  using detail::put_num;
  for (int iy = 0; iy < h.spec.ny; ++iy)
    for (int ivy = 0; ivy < h.spec.nvy; ++ivy) {
      out += label;
      out += ',';
      put_num(out, iy);
      out += ',';
      put_num(out, ivy);
      out += ',';
      put_num(out, h.y_center(iy));
      out += ',';
      put_num(out, h.vy_center(ivy));
      out += ',';
      put_num(out, static_cast<long>(h.counts[h.idx(iy, ivy)]));
      out += ',';
      put_num(out, static_cast<long>(h.visits[h.idx(iy, ivy)]));
      out += ',';
      put_num(out, h.masked(iy, ivy) ? 1 : 0);
      out += '\n';
    }
}

inline void append_energy_csv(std::string& out, const std::string& label,
                              const EnergyStats& st) {
  using detail::put_num;
  for (const SeriesPoint& pt : st.push_aligned) {
    out += label;
    out += ",series,,";
    put_num(out, pt.t);
    out += ',';
    put_num(out, pt.mean);
    out += ',';
    put_num(out, pt.q25);
    out += ",,";
    put_num(out, pt.q75);
    out += ",,,";
    put_num(out, pt.n);
    out += ",,\n";
  }
  for (const StepBox& b : st.step_boxes) {
    out += label;
    out += ",stepbox,";
    put_num(out, b.step);
    out += ",,,";
    put_num(out, b.q25);
    out += ',';
    put_num(out, b.median);
    out += ',';
    put_num(out, b.q75);
    out += ',';
    put_num(out, b.lo);
    out += ',';
    put_num(out, b.hi);
    out += ',';
    put_num(out, b.n);
    out += ",,\n";
  }
  out += label;
  out += ",efficiency,,,,,,,,,,";
  put_num(out, st.efficiency);
  out += ',';
  put_num(out, st.pushes_used);
  out += '\n';
}

}  // namespace capstep
