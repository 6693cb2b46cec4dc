#pragma once

// Structured run logs: one flat CSV per run (tick trace, step events, push
// records behind a leading `kind` column) plus a JSON metadata sidecar.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <capstep/plant.hpp>

#include <nlohmann/json.hpp>

namespace capstep {

inline constexpr int kLogSchema = 1;
inline constexpr const char* kCodeVersion = "0.1.0";

struct TickRecord {
  int push = -1;  // active push window, -1 before the first push
  double time = 0.0;
  long step = 0;
  double y = 0.0, vy = 0.0;  // canonical support-frame state
  Side side = Side::Right;
  double t_cmd = 0.0, f_cmd = 0.0, f_exec = 0.0;
};

// SupportExchange flag bits
inline constexpr int kFlagClamped = 1;
inline constexpr int kFlagMinDuration = 2;
inline constexpr int kFlagDeferred = 4;
inline constexpr int kFlagTip = 8;

struct EventRecord {
  EventType type = EventType::ApexReached;
  int push = -1;
  double time = 0.0;
  long step = 0;
  double y = 0.0, vy = 0.0;
  Side side = Side::Right;
  double f_cmd = 0.0, f_exec = 0.0;  // exchanges only
  int flags = 0;
};

struct PushRecord {
  int id = 0;
  double impulse = 0.0;  // Ns, signed
  double time = 0.0;
  double phase = 0.0;  // s since the step began
  long step = 0;
  double y = 0.0, vy = 0.0;  // canonical state just after application
  Side side = Side::Right;
  bool fell = false;
  double time_to_fall = 0.0;  // valid when fell
  int recovery_steps = -1;    // valid when !fell; -1 = not recovered in window
};

struct RunMeta {
  std::string controller;
  std::uint64_t seed = 0;
  int n_pushes = 0;
  std::uint64_t config_hash = 0;
  double alpha = 0.0, delta = 0.0, c = 0.0;
  double period = 0.0, width = 0.0;
};

struct RunLog {
  RunMeta meta;
  std::vector<TickRecord> ticks;
  std::vector<EventRecord> events;
  std::vector<PushRecord> pushes;
};

class LogError : public std::runtime_error {
 public:
  LogError(const std::string& path, int line, const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + what) {}
  explicit LogError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline void put_num(std::string& out, double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  out.append(buf, p);
}

inline void put_num(std::string& out, long v) {
  char buf[24];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  out.append(buf, p);
}

inline void put_num(std::string& out, int v) { put_num(out, long(v)); }

inline double parse_num(const std::string& field, const char* name,
                        const std::string& path, int line) {
  double v = 0.0;
  const char* b = field.data();
  auto [p, ec] = std::from_chars(b, b + field.size(), v);
  if (ec != std::errc() || p != b + field.size())
    throw LogError(path, line, std::string("bad ") + name + " '" + field + "'");
  return v;
}

inline long parse_long(const std::string& field, const char* name,
                       const std::string& path, int line) {
  long v = 0;
  const char* b = field.data();
  auto [p, ec] = std::from_chars(b, b + field.size(), v);
  if (ec != std::errc() || p != b + field.size())
    throw LogError(path, line, std::string("bad ") + name + " '" + field + "'");
  return v;
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline const char* event_kind(EventType t) {
  switch (t) {
    case EventType::ApexReached: return "apex";
    case EventType::SupportExchange: return "exchange";
    case EventType::Fell: return "fell";
    case EventType::Reset: return "reset";
  }
  return "?";
}

}  // namespace detail

inline constexpr const char* kLogHeader =
    "kind,push,time,step,y,vy,side,t_cmd,f_cmd,f_exec,impulse,phase,flags,"
    "fell,outcome";

inline std::string serialize_run_log(const RunLog& log) {
  using detail::put_num;
  std::string out;
  out.reserve(log.ticks.size() * 96 + log.events.size() * 64 + 4096);
  out += "log_schema,";
  put_num(out, kLogSchema);
  out += '\n';
  out += kLogHeader;
  out += '\n';

  // rows are interleaved in time order: ticks and events merged, push/result
  // rows at their own timestamps
  std::size_t it = 0, ie = 0, ip = 0;
  double last_tick_time = -1.0;
  auto emit_tick = [&](const TickRecord& r) {
    if (r.time <= last_tick_time)
      throw LogError("serialize: tick timestamps must strictly increase");
    last_tick_time = r.time;
    out += "tick,";
    put_num(out, r.push);
    out += ',';
    put_num(out, r.time);
    out += ',';
    put_num(out, r.step);
    out += ',';
    put_num(out, r.y);
    out += ',';
    put_num(out, r.vy);
    out += ',';
    put_num(out, side_sign(r.side));
    out += ',';
    put_num(out, r.t_cmd);
    out += ',';
    put_num(out, r.f_cmd);
    out += ',';
    put_num(out, r.f_exec);
    out += ",,,,,\n";
  };
  auto emit_event = [&](const EventRecord& r) {
    out += detail::event_kind(r.type);
    out += ',';
    put_num(out, r.push);
    out += ',';
    put_num(out, r.time);
    out += ',';
    put_num(out, r.step);
    out += ',';
    put_num(out, r.y);
    out += ',';
    put_num(out, r.vy);
    out += ',';
    put_num(out, side_sign(r.side));
    out += ",,";
    if (r.type == EventType::SupportExchange) {
      put_num(out, r.f_cmd);
      out += ',';
      put_num(out, r.f_exec);
      out += ",,,";
      put_num(out, r.flags);
      out += ",,\n";
    } else {
      out += ",,,,,,\n";
    }
  };
  auto emit_push = [&](const PushRecord& r) {
    out += "push,";
    put_num(out, r.id);
    out += ',';
    put_num(out, r.time);
    out += ',';
    put_num(out, r.step);
    out += ',';
    put_num(out, r.y);
    out += ',';
    put_num(out, r.vy);
    out += ',';
    put_num(out, side_sign(r.side));
    out += ",,,,";
    put_num(out, r.impulse);
    out += ',';
    put_num(out, r.phase);
    out += ",,,\n";
  };

  while (it < log.ticks.size() || ie < log.events.size() ||
         ip < log.pushes.size()) {
    const double tt =
        it < log.ticks.size() ? log.ticks[it].time : 1e300;
    const double te =
        ie < log.events.size() ? log.events[ie].time : 1e300;
    const double tp =
        ip < log.pushes.size() ? log.pushes[ip].time : 1e300;
    if (te <= tt && te <= tp) {
      emit_event(log.events[ie++]);
    } else if (tp <= tt) {
      emit_push(log.pushes[ip++]);
    } else {
      emit_tick(log.ticks[it++]);
    }
  }

  // per-push summaries at the tail so they are complete
  for (const PushRecord& r : log.pushes) {
    out += "result,";
    put_num(out, r.id);
    out += ',';
    put_num(out, r.time);
    out += ',';
    put_num(out, r.step);
    out += ",,,,,,,";
    put_num(out, r.impulse);
    out += ',';
    put_num(out, r.phase);
    out += ",,";
    put_num(out, r.fell ? 1 : 0);
    out += ',';
    if (r.fell)
      put_num(out, r.time_to_fall);
    else
      put_num(out, r.recovery_steps);
    out += '\n';
  }
  return out;
}

inline nlohmann::json run_meta_to_json(const RunLog& log) {
  int falls = 0;
  for (const EventRecord& e : log.events)
    if (e.type == EventType::Fell) ++falls;
  char hash[24];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(log.meta.config_hash));
  return nlohmann::json{
      {"schema", kLogSchema},
      {"version", kCodeVersion},
      {"controller", log.meta.controller},
      {"seed", log.meta.seed},
      {"n_pushes", log.meta.n_pushes},
      {"config_hash", hash},
      {"gait",
       {{"alpha", log.meta.alpha},
        {"delta", log.meta.delta},
        {"c", log.meta.c},
        {"period", log.meta.period},
        {"width", log.meta.width}}},
      {"counts",
       {{"ticks", log.ticks.size()},
        {"events", log.events.size()},
        {"pushes", log.pushes.size()},
        {"falls", falls}}}};
}

inline void write_run_log(const std::string& csv_path, const RunLog& log) {
  {
    std::ofstream f(csv_path, std::ios::binary);
    if (!f) throw LogError("cannot open '" + csv_path + "' for writing");
    const std::string body = serialize_run_log(log);
    f.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!f) throw LogError("short write to '" + csv_path + "'");
  }
  std::string meta_path = csv_path;
  const std::size_t dot = meta_path.rfind(".csv");
  if (dot == meta_path.size() - 4) meta_path.erase(dot);
  meta_path += ".meta.json";
  std::ofstream m(meta_path, std::ios::binary);
  if (!m) throw LogError("cannot open '" + meta_path + "' for writing");
  m << run_meta_to_json(log).dump(2) << '\n';
}

inline RunLog parse_run_log(std::istream& in, const std::string& path) {
  using detail::parse_long;
  using detail::parse_num;
  RunLog log;
  std::string line;
  int lineno = 0;

  if (!std::getline(in, line)) throw LogError(path, 1, "empty log");
  ++lineno;
  {
    const auto f = detail::split_line(line);
    if (f.size() != 2 || f[0] != "log_schema")
      throw LogError(path, lineno, "missing log_schema line");
    if (parse_long(f[1], "schema", path, lineno) != kLogSchema)
      throw LogError(path, lineno, "unsupported log schema '" + f[1] + "'");
  }
  if (!std::getline(in, line)) throw LogError(path, 2, "missing header");
  ++lineno;
  if (line != kLogHeader)
    throw LogError(path, lineno, "unexpected header '" + line + "'");

  auto parse_side = [&](const std::string& s, int ln) {
    const long v = parse_long(s, "side", path, ln);
    if (v != 1 && v != -1) throw LogError(path, ln, "bad side '" + s + "'");
    return v == 1 ? Side::Right : Side::Left;
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split_line(line);
    if (f.size() != 15)
      throw LogError(path, lineno,
                     "expected 15 fields, got " + std::to_string(f.size()));
    const std::string& kind = f[0];
    if (kind == "tick") {
      TickRecord r;
      r.push = static_cast<int>(parse_long(f[1], "push", path, lineno));
      r.time = parse_num(f[2], "time", path, lineno);
      r.step = parse_long(f[3], "step", path, lineno);
      r.y = parse_num(f[4], "y", path, lineno);
      r.vy = parse_num(f[5], "vy", path, lineno);
      r.side = parse_side(f[6], lineno);
      r.t_cmd = parse_num(f[7], "t_cmd", path, lineno);
      r.f_cmd = parse_num(f[8], "f_cmd", path, lineno);
      r.f_exec = parse_num(f[9], "f_exec", path, lineno);
      log.ticks.push_back(r);
    } else if (kind == "apex" || kind == "exchange" || kind == "fell" ||
               kind == "reset") {
      EventRecord r;
      r.type = kind == "apex"       ? EventType::ApexReached
               : kind == "exchange" ? EventType::SupportExchange
               : kind == "fell"     ? EventType::Fell
                                    : EventType::Reset;
      r.push = static_cast<int>(parse_long(f[1], "push", path, lineno));
      r.time = parse_num(f[2], "time", path, lineno);
      r.step = parse_long(f[3], "step", path, lineno);
      r.y = parse_num(f[4], "y", path, lineno);
      r.vy = parse_num(f[5], "vy", path, lineno);
      r.side = parse_side(f[6], lineno);
      if (r.type == EventType::SupportExchange) {
        r.f_cmd = parse_num(f[8], "f_cmd", path, lineno);
        r.f_exec = parse_num(f[9], "f_exec", path, lineno);
        r.flags =
            static_cast<int>(parse_long(f[12], "flags", path, lineno));
      }
      log.events.push_back(r);
    } else if (kind == "push") {
      PushRecord r;
      r.id = static_cast<int>(parse_long(f[1], "push", path, lineno));
      r.time = parse_num(f[2], "time", path, lineno);
      r.step = parse_long(f[3], "step", path, lineno);
      r.y = parse_num(f[4], "y", path, lineno);
      r.vy = parse_num(f[5], "vy", path, lineno);
      r.side = parse_side(f[6], lineno);
      r.impulse = parse_num(f[10], "impulse", path, lineno);
      r.phase = parse_num(f[11], "phase", path, lineno);
      log.pushes.push_back(r);
    } else if (kind == "result") {
      const int id = static_cast<int>(parse_long(f[1], "push", path, lineno));
      PushRecord* rec = nullptr;
      for (PushRecord& p : log.pushes)
        if (p.id == id) rec = &p;
      if (!rec)
        throw LogError(path, lineno,
                       "result for unknown push " + std::to_string(id));
      rec->fell = parse_long(f[13], "fell", path, lineno) != 0;
      if (rec->fell)
        rec->time_to_fall = parse_num(f[14], "outcome", path, lineno);
      else
        rec->recovery_steps =
            static_cast<int>(parse_long(f[14], "outcome", path, lineno));
    } else {
      throw LogError(path, lineno, "unknown row kind '" + kind + "'");
    }
  }
  return log;
}

inline RunLog read_run_log(const std::string& csv_path) {
  std::ifstream f(csv_path, std::ios::binary);
  if (!f) throw LogError("cannot open '" + csv_path + "'");
  RunLog log = parse_run_log(f, csv_path);

  std::string meta_path = csv_path;
  const std::size_t dot = meta_path.rfind(".csv");
  if (dot != std::string::npos && dot == meta_path.size() - 4)
    meta_path.erase(dot);
  meta_path += ".meta.json";
  std::ifstream m(meta_path);
  if (m) {
    nlohmann::json j;
    try {
      m >> j;
      if (j.at("schema").get<int>() != kLogSchema)
        throw LogError("unsupported metadata schema in '" + meta_path + "'");
      log.meta.controller = j.at("controller").get<std::string>();
      log.meta.seed = j.at("seed").get<std::uint64_t>();
      log.meta.n_pushes = j.at("n_pushes").get<int>();
      log.meta.config_hash =
          std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
      const auto& g = j.at("gait");
      log.meta.alpha = g.at("alpha").get<double>();
      log.meta.delta = g.at("delta").get<double>();
      log.meta.c = g.at("c").get<double>();
      log.meta.period = g.at("period").get<double>();
      log.meta.width = g.at("width").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw LogError("bad metadata in '" + meta_path + "': " + e.what());
    }
  }
  return log;
}

}  // namespace capstep
