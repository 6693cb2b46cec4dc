#pragma once

// Learned step-size error f(y, vy): a bounded uniform grid over the lateral
// state space with bilinear query and end-of-step updates
//   f((y, vy)_i) += eta * (apex_y - alpha)
// applied to every state encountered during the step. Values start at zero,
// so an untrained grid is a no-op correction.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "capstep/lipm.hpp"

namespace capstep {

struct GridSpec {
  double y_min = -0.05, y_max = 0.25;    // m
  double vy_min = -0.8, vy_max = 0.8;    // m/s
  int ny = 31, nvy = 31;                 // nodes per axis
  double eta = 0.2;                      // learning rate
};

struct StepTrace {
  std::vector<ComState> states;      // one sample per control tick
  std::optional<double> apex_y;      // measured at the apex event
};

class GridApproximator {
 public:
  GridApproximator() : GridApproximator(GridSpec{}) {}
  explicit GridApproximator(const GridSpec& spec)
      : spec_(spec),
        values_(static_cast<size_t>(spec.ny) * spec.nvy, 0.0),
        visits_(static_cast<size_t>(spec.ny) * spec.nvy, 0) {
    if (!(spec.y_min < spec.y_max) || !(spec.vy_min < spec.vy_max) ||
        spec.ny < 2 || spec.nvy < 2 || !(spec.eta > 0.0))
      throw std::invalid_argument("grid spec: bounds must be ordered, "
                                  "shape >= 2x2, eta > 0");
  }

  const GridSpec& spec() const { return spec_; }
  double value_at(int iy, int ivy) const { return values_[idx(iy, ivy)]; }
  long long visits_at(int iy, int ivy) const { return visits_[idx(iy, ivy)]; }
  double& value_ref(int iy, int ivy) { return values_[idx(iy, ivy)]; }
  long long& visits_ref(int iy, int ivy) { return visits_[idx(iy, ivy)]; }

  double max_abs_value() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  // Bilinear interpolation of the four surrounding nodes; out-of-bounds
  // inputs are clamped to the boundary first.
  double query(const ComState& s) const {
    Cell c = locate(s);
    return (1 - c.u) * (1 - c.v) * values_[idx(c.iy, c.ivy)] +
           c.u * (1 - c.v) * values_[idx(c.iy + 1, c.ivy)] +
           (1 - c.u) * c.v * values_[idx(c.iy, c.ivy + 1)] +
           c.u * c.v * values_[idx(c.iy + 1, c.ivy + 1)];
  }

  // Distributes eta*(apex_y - alpha) onto the nodes around the states the
  // step visited, weighted bilinearly. A node receives at most one increment
  // per step (replacing-trace accumulation): the trajectory dwells near the
  // apex for many control ticks, and letting every tick deposit the same
  // error would turn those nodes into unbounded integrators of the error
  // history. Steps without an apex carry no error measurement and skip.
  bool end_of_step_update(const StepTrace& trace, double alpha) {
    if (!trace.apex_y) return false;
    const double upd = spec_.eta * (*trace.apex_y - alpha);
    weight_.assign(values_.size(), 0.0);
    touched_.clear();
    for (const ComState& s : trace.states) {
      Cell c = locate(s);
      const double w[4] = {(1 - c.u) * (1 - c.v), c.u * (1 - c.v),
                           (1 - c.u) * c.v, c.u * c.v};
      const size_t id[4] = {idx(c.iy, c.ivy), idx(c.iy + 1, c.ivy),
                            idx(c.iy, c.ivy + 1), idx(c.iy + 1, c.ivy + 1)};
      for (int k = 0; k < 4; ++k) {
        if (w[k] <= 0.0) continue;
        if (weight_[id[k]] == 0.0) touched_.push_back(id[k]);
        weight_[id[k]] = std::max(weight_[id[k]], w[k]);
      }
    }
    for (size_t id : touched_) {
      values_[id] += upd * weight_[id];
      visits_[id] += std::llround(weight_[id]);
    }
    return true;
  }

  bool operator==(const GridApproximator& o) const {
    return spec_.y_min == o.spec_.y_min && spec_.y_max == o.spec_.y_max &&
           spec_.vy_min == o.spec_.vy_min && spec_.vy_max == o.spec_.vy_max &&
           spec_.ny == o.spec_.ny && spec_.nvy == o.spec_.nvy &&
           spec_.eta == o.spec_.eta && values_ == o.values_ &&
           visits_ == o.visits_;
  }

 private:
  struct Cell {
    int iy, ivy;
    double u, v;  // fractional position within the cell, each in [0, 1]
  };

  size_t idx(int iy, int ivy) const {
    return static_cast<size_t>(iy) * spec_.nvy + ivy;
  }

  Cell locate(const ComState& s) const {
    const double y = std::clamp(s.y, spec_.y_min, spec_.y_max);
    const double vy = std::clamp(s.vy, spec_.vy_min, spec_.vy_max);
    const double fy = (y - spec_.y_min) / (spec_.y_max - spec_.y_min) *
                      (spec_.ny - 1);
    const double fv = (vy - spec_.vy_min) / (spec_.vy_max - spec_.vy_min) *
                      (spec_.nvy - 1);
    Cell c;
    c.iy = std::min(static_cast<int>(fy), spec_.ny - 2);
    c.ivy = std::min(static_cast<int>(fv), spec_.nvy - 2);
    c.u = fy - c.iy;
    c.v = fv - c.ivy;
    return c;
  }

  GridSpec spec_;
  std::vector<double> values_;
  std::vector<long long> visits_;
  // update scratch, excluded from comparison and persistence
  std::vector<double> weight_;
  std::vector<size_t> touched_;
};

struct GridLoadError : std::runtime_error {
  GridLoadError(const std::string& path, int line, const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + what) {}
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t p = line.find(',', start);
    if (p == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, p - start));
    start = p + 1;
  }
}

inline double parse_double(const std::string& s, const std::string& path,
                           int line, const char* field) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || !std::isfinite(v))
    throw GridLoadError(path, line,
                        std::string("bad ") + field + " value '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& s, const std::string& path,
                           int line, const char* field) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0')
    throw GridLoadError(path, line,
                        std::string("bad ") + field + " value '" + s + "'");
  return v;
}

}  // namespace detail

// Grid file layout: a small header block (schema tag, bounds, shape, eta)
// followed by one `iy,ivy,value,visits` row per node.
inline void save_grid(const GridApproximator& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  const GridSpec& sp = g.spec();
  out << "grid_schema,1\n";
  out << "y_bounds," << detail::fmt_double(sp.y_min) << ","
      << detail::fmt_double(sp.y_max) << "\n";
  out << "vy_bounds," << detail::fmt_double(sp.vy_min) << ","
      << detail::fmt_double(sp.vy_max) << "\n";
  out << "shape," << sp.ny << "," << sp.nvy << "\n";
  out << "eta," << detail::fmt_double(sp.eta) << "\n";
  out << "iy,ivy,value,visits\n";
  for (int iy = 0; iy < sp.ny; ++iy)
    for (int ivy = 0; ivy < sp.nvy; ++ivy)
      out << iy << "," << ivy << ","
          << detail::fmt_double(g.value_at(iy, ivy)) << ","
          << g.visits_at(iy, ivy) << "\n";
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline GridApproximator load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  int ln = 0;
  auto next_line = [&](const char* what) {
    if (!std::getline(in, line))
      throw GridLoadError(path, ln + 1, std::string("missing ") + what);
    ++ln;
  };

  next_line("schema tag");
  if (line != "grid_schema,1")
    throw GridLoadError(path, ln, "unsupported schema tag '" + line + "'");

  GridSpec sp;
  next_line("y_bounds");
  {
    auto f = detail::split_csv(line);
    if (f.size() != 3 || f[0] != "y_bounds")
      throw GridLoadError(path, ln, "expected y_bounds row");
    sp.y_min = detail::parse_double(f[1], path, ln, "y_min");
    sp.y_max = detail::parse_double(f[2], path, ln, "y_max");
  }
  next_line("vy_bounds");
  {
    auto f = detail::split_csv(line);
    if (f.size() != 3 || f[0] != "vy_bounds")
      throw GridLoadError(path, ln, "expected vy_bounds row");
    sp.vy_min = detail::parse_double(f[1], path, ln, "vy_min");
    sp.vy_max = detail::parse_double(f[2], path, ln, "vy_max");
  }
  next_line("shape");
  {
    auto f = detail::split_csv(line);
    if (f.size() != 3 || f[0] != "shape")
      throw GridLoadError(path, ln, "expected shape row");
    sp.ny = static_cast<int>(detail::parse_int(f[1], path, ln, "ny"));
    sp.nvy = static_cast<int>(detail::parse_int(f[2], path, ln, "nvy"));
    if (sp.ny < 2 || sp.nvy < 2)
      throw GridLoadError(path, ln, "shape must be at least 2x2");
  }
  next_line("eta");
  {
    auto f = detail::split_csv(line);
    if (f.size() != 2 || f[0] != "eta")
      throw GridLoadError(path, ln, "expected eta row");
    sp.eta = detail::parse_double(f[1], path, ln, "eta");
  }
  next_line("column header");
  if (line != "iy,ivy,value,visits")
    throw GridLoadError(path, ln, "expected column header, got '" + line + "'");

  GridApproximator g(sp);
  const long long expected = static_cast<long long>(sp.ny) * sp.nvy;
  for (long long k = 0; k < expected; ++k) {
    next_line("node row");
    auto f = detail::split_csv(line);
    if (f.size() != 4) throw GridLoadError(path, ln, "expected 4 fields");
    const long long iy = detail::parse_int(f[0], path, ln, "iy");
    const long long ivy = detail::parse_int(f[1], path, ln, "ivy");
    if (iy < 0 || iy >= sp.ny || ivy < 0 || ivy >= sp.nvy)
      throw GridLoadError(path, ln, "node index out of range");
    g.value_ref(static_cast<int>(iy), static_cast<int>(ivy)) =
        detail::parse_double(f[2], path, ln, "value");
    g.visits_ref(static_cast<int>(iy), static_cast<int>(ivy)) =
        detail::parse_int(f[3], path, ln, "visits");
  }
  return g;
}

}  // namespace capstep
