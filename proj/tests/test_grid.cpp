#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "capstep/grid.hpp"
#include "oracles.hpp"

using namespace capstep;

namespace {

GridSpec small_spec() {
  GridSpec sp;
  sp.y_min = 0.0; sp.y_max = 1.0;
  sp.vy_min = 0.0; sp.vy_max = 1.0;
  sp.ny = 3; sp.nvy = 3;
  sp.eta = 0.2;
  return sp;
}

ComState node_state(const GridSpec& sp, int iy, int ivy) {
  return {sp.y_min + (sp.y_max - sp.y_min) * iy / (sp.ny - 1),
          sp.vy_min + (sp.vy_max - sp.vy_min) * ivy / (sp.nvy - 1)};
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("fresh grid queries to zero everywhere") {
  GridApproximator g;
  oracle::TestRng rng(21);
  for (int i = 0; i < 200; ++i)
    REQUIRE(g.query({rng.uniform(-0.2, 0.4), rng.uniform(-1.0, 1.0)}) == 0.0);
  CHECK(g.max_abs_value() == 0.0);
}

TEST_CASE("query is exact at nodes and averages at midpoints") {
  GridSpec sp = small_spec();
  GridApproximator g(sp);
  g.value_ref(0, 0) = 1.0;
  g.value_ref(1, 0) = 2.0;
  g.value_ref(0, 1) = 3.0;
  g.value_ref(1, 1) = 4.0;

  for (int iy = 0; iy < sp.ny; ++iy)
    for (int ivy = 0; ivy < sp.nvy; ++ivy)
      CHECK(g.query(node_state(sp, iy, ivy)) == g.value_at(iy, ivy));

  // midpoint of the first cell: mean of its four corners
  CHECK_THAT(g.query({0.25, 0.25}), Catch::Matchers::WithinAbs(2.5, 1e-12));
}

TEST_CASE("out-of-bounds queries clamp to the boundary") {
  GridSpec sp = small_spec();
  GridApproximator g(sp);
  g.value_ref(2, 2) = 7.0;
  g.value_ref(0, 0) = -3.0;
  CHECK(g.query({5.0, 5.0}) == g.query({1.0, 1.0}));
  CHECK(g.query({-5.0, -5.0}) == g.query({0.0, 0.0}));
  CHECK(g.query({5.0, 5.0}) == 7.0);
}

TEST_CASE("single-state update at a node") {
  GridSpec sp = small_spec();
  GridApproximator g(sp);
  StepTrace trace;
  trace.states = {node_state(sp, 1, 1)};
  const double alpha = 0.05;
  trace.apex_y = alpha + 0.05;  // error 0.05, eta 0.2 -> +0.01

  REQUIRE(g.end_of_step_update(trace, alpha));
  CHECK_THAT(g.value_at(1, 1), Catch::Matchers::WithinAbs(0.01, 1e-15));
  CHECK(g.visits_at(1, 1) == 1);
  // all other nodes untouched
  double sum = 0.0;
  for (int iy = 0; iy < sp.ny; ++iy)
    for (int ivy = 0; ivy < sp.nvy; ++ivy) sum += std::abs(g.value_at(iy, ivy));
  CHECK_THAT(sum, Catch::Matchers::WithinAbs(0.01, 1e-15));
}

TEST_CASE("zero apex error leaves the grid unchanged") {
  GridApproximator g;
  StepTrace trace;
  trace.states = {{0.1, 0.2}, {0.12, 0.1}};
  trace.apex_y = 0.08;
  REQUIRE(g.end_of_step_update(trace, 0.08));
  CHECK(g.max_abs_value() == 0.0);
}

TEST_CASE("missing apex skips the update") {
  GridApproximator g;
  StepTrace trace;
  trace.states = {{0.1, 0.2}};
  trace.apex_y = std::nullopt;
  CHECK_FALSE(g.end_of_step_update(trace, 0.08));
  CHECK(g.max_abs_value() == 0.0);
}

TEST_CASE("updates distribute bilinear weights and clamp out-of-range states") {
  GridSpec sp = small_spec();
  GridApproximator g(sp);
  StepTrace trace;
  trace.states = {{0.25, 0.25}};  // midpoint of the first cell
  trace.apex_y = 0.1;             // error 0.05 with alpha 0.05
  REQUIRE(g.end_of_step_update(trace, 0.05));
  for (int iy = 0; iy < 2; ++iy)
    for (int ivy = 0; ivy < 2; ++ivy)
      CHECK_THAT(g.value_at(iy, ivy),
                 Catch::Matchers::WithinAbs(0.2 * 0.05 * 0.25, 1e-15));

  GridApproximator h(sp);
  StepTrace far;
  far.states = {{100.0, 100.0}};
  far.apex_y = 0.1;
  REQUIRE(h.end_of_step_update(far, 0.05));
  CHECK_THAT(h.value_at(2, 2), Catch::Matchers::WithinAbs(0.01, 1e-15));
  CHECK(h.visits_at(2, 2) == 1);
}

TEST_CASE("update linearity: two errors compose additively") {
  GridSpec sp = small_spec();
  StepTrace trace;
  trace.states = {{0.3, 0.6}, {0.7, 0.2}, {0.5, 0.5}};
  const double alpha = 0.05, e1 = 0.03, e2 = -0.07;

  GridApproximator a(sp);
  trace.apex_y = alpha + e1;
  a.end_of_step_update(trace, alpha);
  trace.apex_y = alpha + e2;
  a.end_of_step_update(trace, alpha);

  GridApproximator b(sp);
  trace.apex_y = alpha + e1 + e2;
  b.end_of_step_update(trace, alpha);

  for (int iy = 0; iy < sp.ny; ++iy)
    for (int ivy = 0; ivy < sp.nvy; ++ivy)
      REQUIRE_THAT(a.value_at(iy, ivy),
                   Catch::Matchers::WithinAbs(b.value_at(iy, ivy), 1e-15));
}

TEST_CASE("query is continuous in the state") {
  GridApproximator g;
  oracle::TestRng rng(22);
  for (int iy = 0; iy < g.spec().ny; ++iy)
    for (int ivy = 0; ivy < g.spec().nvy; ++ivy)
      g.value_ref(iy, ivy) = rng.uniform(-0.05, 0.05);
  for (int i = 0; i < 500; ++i) {
    ComState s{rng.uniform(-0.05, 0.25), rng.uniform(-0.8, 0.8)};
    ComState t{s.y + 1e-7, s.vy - 1e-7};
    REQUIRE_THAT(g.query(s), Catch::Matchers::WithinAbs(g.query(t), 1e-5));
  }
}

// One-cell closed loop against a constant placement bias: the learned value
// converges geometrically and the apex error dies. The recurrence oracle is
// coded independently of the grid class.
TEST_CASE("scalar surrogate reaches the learning fixed point") {
  const double alpha = 0.08, bias = 0.012, eta = 0.2, c = 3.5, ve = 0.3;
  const double r = std::sqrt(alpha * alpha + (ve / c) * (ve / c));

  // oracle: f_{k+1} = f_k + eta * (sqrt((r + b - f_k)^2 - (ve/c)^2) - alpha)
  std::vector<double> oracle_err;
  double f = 0.0;
  for (int k = 0; k < 50; ++k) {
    const double reach = r + bias - f;
    const double apex = std::sqrt(reach * reach - (ve / c) * (ve / c));
    oracle_err.push_back(std::abs(apex - alpha));
    f += eta * (apex - alpha);
  }

  // grid under test: trace pinned to a single node, same plant arithmetic
  GridSpec sp = small_spec();
  GridApproximator g(sp);
  const ComState node = node_state(sp, 0, 0);
  std::vector<double> grid_err;
  for (int k = 0; k < 50; ++k) {
    const double reach = r + bias - g.query(node);
    const double apex = std::sqrt(reach * reach - (ve / c) * (ve / c));
    grid_err.push_back(std::abs(apex - alpha));
    StepTrace trace;
    trace.states = {node};
    trace.apex_y = apex;
    g.end_of_step_update(trace, alpha);
  }

  for (int k = 0; k < 50; ++k)
    REQUIRE_THAT(grid_err[k], Catch::Matchers::WithinAbs(oracle_err[k], 1e-12));
  for (int k = 2; k < 50; ++k) REQUIRE(grid_err[k] < grid_err[k - 1]);
  CHECK(grid_err[49] < 0.05 * grid_err[0]);
  CHECK_THAT(g.query(node), Catch::Matchers::WithinAbs(bias, 1e-4));
}

TEST_CASE("save/load round-trips every field") {
  GridApproximator g;
  oracle::TestRng rng(23);
  for (int iy = 0; iy < g.spec().ny; ++iy)
    for (int ivy = 0; ivy < g.spec().nvy; ++ivy) {
      g.value_ref(iy, ivy) = rng.uniform(-0.1, 0.1);
      g.visits_ref(iy, ivy) = static_cast<long long>(rng.next() % 1000);
    }
  const auto path = temp_file("capstep_grid_roundtrip.csv");
  save_grid(g, path.string());
  GridApproximator h = load_grid(path.string());
  CHECK(g == h);
  std::filesystem::remove(path);
}

TEST_CASE("fresh grid round-trips to all zeros") {
  GridApproximator g;
  const auto path = temp_file("capstep_grid_fresh.csv");
  save_grid(g, path.string());
  GridApproximator h = load_grid(path.string());
  CHECK(g == h);
  CHECK(h.max_abs_value() == 0.0);
  std::filesystem::remove(path);
}

TEST_CASE("truncated and malformed grid files are rejected") {
  GridApproximator g;
  const auto path = temp_file("capstep_grid_bad.csv");
  save_grid(g, path.string());

  // truncate: drop the last 40 bytes
  std::string contents;
  {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    contents = ss.str();
  }
  {
    std::ofstream out(path);
    out << contents.substr(0, contents.size() - 40);
  }
  CHECK_THROWS_AS(load_grid(path.string()), GridLoadError);

  // corrupt a value field
  {
    std::ofstream out(path);
    std::string bad = contents;
    const auto pos = bad.find("0,0,0,");
    REQUIRE(pos != std::string::npos);
    bad.replace(pos, 6, "0,0,x,");
    out << bad;
  }
  try {
    load_grid(path.string());
    FAIL("expected GridLoadError");
  } catch (const GridLoadError& e) {
    CHECK(std::string(e.what()).find(":7:") != std::string::npos);
    CHECK(std::string(e.what()).find("value") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("bad grid specs are rejected") {
  GridSpec sp = small_spec();
  sp.y_min = 2.0;  // inverted bounds
  CHECK_THROWS_AS(GridApproximator(sp), std::invalid_argument);
  sp = small_spec();
  sp.ny = 1;
  CHECK_THROWS_AS(GridApproximator(sp), std::invalid_argument);
  sp = small_spec();
  sp.eta = 0.0;
  CHECK_THROWS_AS(GridApproximator(sp), std::invalid_argument);
}
