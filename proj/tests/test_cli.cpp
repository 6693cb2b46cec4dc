// End-to-end checks of the capstep binary: subcommand wiring, exit codes,
// artifact outputs, and byte-identical reruns.

#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#ifndef CAPSTEP_CLI_PATH
#error "CAPSTEP_CLI_PATH must point at the capstep binary"
#endif

namespace {

namespace fs = std::filesystem;

struct CmdResult {
  int exit_code = -1;
  std::string out;
};

CmdResult run_cli(const std::string& args, const fs::path& cwd) {
  const std::string cmd = "cd '" + cwd.string() + "' && '" CAPSTEP_CLI_PATH
                          "' " + args + " 2>&1";
  std::array<char, 4096> buf{};
  CmdResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0)
    r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int count_occurrences(const std::string& hay, const std::string& needle) {
  int n = 0;
  for (std::size_t at = hay.find(needle); at != std::string::npos;
       at = hay.find(needle, at + needle.size()))
    ++n;
  return n;
}

// One shared workspace: calibrate once, run all controllers once, and let
// the artifact tests reuse the logs.  Small push counts keep this fast.
const fs::path& workspace() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "capstep_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    CmdResult cal = run_cli("calibrate", d);
    REQUIRE(cal.exit_code == 0);
    CmdResult run = run_cli("run --all --jobs 2 --pushes 30 --seed 3", d);
    REQUIRE(run.exit_code == 0);
    return d;
  }();
  return dir;
}

const char* kAllLogs =
    "run_none.csv run_timing.csv run_timing_step.csv "
    "run_timing_step_learning.csv";

}  // namespace

TEST_CASE("calibrate writes usable gait parameters") {
  const fs::path& dir = workspace();
  const std::string body = slurp(dir / "gait_params.json");
  CHECK(body.find("\"alpha\"") != std::string::npos);
  CHECK(body.find("\"delta\"") != std::string::npos);

  // Same seed, same file.
  CmdResult again = run_cli("calibrate --out gait2.json", dir);
  REQUIRE(again.exit_code == 0);
  CHECK(slurp(dir / "gait2.json") == body);
}

TEST_CASE("run produces one log per controller and reports falls") {
  const fs::path& dir = workspace();
  for (const char* name :
       {"run_none", "run_timing", "run_timing_step",
        "run_timing_step_learning"}) {
    CAPTURE(name);
    CHECK(fs::exists(dir / (std::string(name) + ".csv")));
    CHECK(fs::exists(dir / (std::string(name) + ".meta.json")));
  }
  CHECK(fs::exists(dir / "run_timing_step_learning.grid.csv"));
}

TEST_CASE("same seed reruns are byte-identical") {
  const fs::path& dir = workspace();
  fs::create_directories(dir / "again");
  CmdResult r = run_cli(
      "run --gait gait_params.json --controller timing+step+learning "
      "--pushes 30 --seed 3 --out again",
      dir);
  REQUIRE(r.exit_code == 0);
  CHECK(slurp(dir / "again/run_timing_step_learning.csv") ==
        slurp(dir / "run_timing_step_learning.csv"));
  CHECK(slurp(dir / "again/run_timing_step_learning.grid.csv") ==
        slurp(dir / "run_timing_step_learning.grid.csv"));
}

TEST_CASE("print-config echoes a reloadable config") {
  const fs::path& dir = workspace();
  CmdResult first = run_cli("run --controller timing --print-config", dir);
  REQUIRE(first.exit_code == 0);
  CHECK(first.out.find("\"controller\": \"timing\"") != std::string::npos);
  CHECK(first.out.find("\"plant\"") != std::string::npos);

  std::ofstream(dir / "echo.json") << first.out;
  CmdResult second =
      run_cli("run --config echo.json --print-config", dir);
  REQUIRE(second.exit_code == 0);
  CHECK(second.out == first.out);
}

TEST_CASE("usage and validation errors exit 2") {
  const fs::path& dir = workspace();
  CmdResult bad_ctl = run_cli("run --controller walk", dir);
  CHECK(bad_ctl.exit_code == 2);
  CHECK(bad_ctl.out.find("unknown controller") != std::string::npos);

  CmdResult bad_gait = run_cli("run --controller timing --gait nope.json",
                               dir);
  CHECK(bad_gait.exit_code == 2);

  CmdResult bad_artifact =
      run_cli("analyze --artifact trend run_none.csv", dir);
  CHECK(bad_artifact.exit_code == 2);

  CmdResult bad_flag = run_cli("run --controller timing --bogus", dir);
  CHECK(bad_flag.exit_code == 2);

  CmdResult help = run_cli("--help", dir);
  CHECK(help.exit_code == 0);
}

TEST_CASE("fallprob artifact rejects a log with no pushes") {
  const fs::path& dir = workspace();
  std::ofstream(dir / "empty.csv")
      << "log_schema,1\n"
      << "kind,push,time,step,y,vy,side,t_cmd,f_cmd,f_exec,impulse,phase,"
         "flags,fell,outcome\n";
  CmdResult r = run_cli("analyze --artifact fallprob empty.csv", dir);
  CHECK(r.exit_code == 2);
  CHECK(r.out.find("no pushes") != std::string::npos);
}

TEST_CASE("fallprob artifact covers every log") {
  const fs::path& dir = workspace();
  CmdResult r = run_cli(std::string("analyze --artifact fallprob ") +
                            kAllLogs + " --bin-width 1.5 --out fp",
                        dir);
  REQUIRE(r.exit_code == 0);
  const std::string csv = slurp(dir / "fp.csv");
  for (const char* label :
       {"\nnone,", "\ntiming,", "\ntiming+step,", "\ntiming+step+learning,"})
    CHECK(csv.find(label) != std::string::npos);
  CHECK(slurp(dir / "fp.svg").find("<svg") != std::string::npos);
}

TEST_CASE("heatmap artifact renders one panel per log") {
  const fs::path& dir = workspace();
  CmdResult r = run_cli(
      std::string("analyze --artifact heatmap ") + kAllLogs + " --out hm",
      dir);
  REQUIRE(r.exit_code == 0);
  const std::string svg = slurp(dir / "hm.svg");
  CHECK(count_occurrences(svg, "class=\"panel\"") == 4);
  CHECK(count_occurrences(svg, "class=\"zero-energy\"") == 8);
}

TEST_CASE("energy artifact prints one efficiency row per controller") {
  const fs::path& dir = workspace();
  CmdResult r = run_cli(
      std::string("analyze --artifact energy ") + kAllLogs + " --out en",
      dir);
  REQUIRE(r.exit_code == 0);
  CHECK(count_occurrences(r.out, "%") == 4);
  CHECK(r.out.find("timing+step+learning") != std::string::npos);
  const std::string csv = slurp(dir / "en.csv");
  CHECK(count_occurrences(csv, ",efficiency,,") == 4);
}
