#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "flatflow/diagnostics.hpp"
#include "flatflow/errors.hpp"
#include "flatflow/flow.hpp"
#include "flatflow/io.hpp"
#include "flatflow/reference.hpp"
#include "support.hpp"

using namespace flatflow;
using namespace flatflow::testing;
namespace fs = std::filesystem;

namespace {

FlowConfig disk_config(int n, double h, double t_max) {
  FlowConfig c;
  c.grid = unit_box(n);
  c.h = h;
  c.t_max = t_max;
  c.initial = "disk(0,0,0.564190)";
  return c;
}

double eps_solver(const GridSpec& g) { return 10.0 * 1e-6 * g.area(); }

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("flatflow_test_flow_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("flow") {
  TEST_CASE("stationary disk run") {
    const FlowConfig c = disk_config(128, 1e-3, 0.01);
    const FlowResult r = run_flow(c);
    const auto& steps = r.trace.steps;
    REQUIRE(steps.size() == 10);
    REQUIRE(r.snapshots.size() == 11);

    const double per0 = tv(r.initial);
    CHECK(r.trace.initial_perimeter == per0);
    CHECK(symdiff_measure(r.final_set, r.initial) <= 0.02);
    double lyapunov = per0 + std::abs(integrate(r.initial) - 1.0) / std::sqrt(c.h);
    for (const auto& s : steps) {
      CHECK(s.t == doctest::Approx(s.step * c.h).epsilon(1e-15));
      CHECK(std::abs(s.volume - 1.0) <= std::sqrt(c.h) * per0);
      CHECK(std::abs(s.perimeter - per0) <= 0.02 * per0);
      CHECK(s.diss_residual <= eps_solver(c.grid));
      const double next = s.perimeter + std::abs(s.volume - 1.0) / std::sqrt(c.h);
      CHECK(next <= lyapunov + eps_solver(c.grid));
      lyapunov = next;
    }
    // Once a step returns its own input, the rest are repeats.
    bool repeating = false;
    for (std::size_t k = 1; k < steps.size(); ++k) {
      if (steps[k].symdiff_prev == 0.0 && steps[k - 1].symdiff_prev == 0.0) {
        repeating = true;
      }
      if (repeating && k + 1 < steps.size()) {
        CHECK(steps[k + 1].reused);
      }
    }
  }

  TEST_CASE("left-constant queries") {
    const FlowConfig c = disk_config(64, 0.01, 0.05);
    const FlowResult r = run_flow(c);
    REQUIRE(r.snapshots.size() == 6);
    for (int k = 0; k <= 5; ++k) {
      const IndicatorField& at = r.snapshots[static_cast<std::size_t>(k)].set;
      CHECK(set_at(r, k * c.h) == at);
      if (k < 5) {
        CHECK(set_at(r, (k + 0.5) * c.h) == at);
        CHECK(set_at(r, (k + 1) * c.h - 1e-9) == at);
      }
    }
    CHECK(&set_at(r, 0.0) == &r.snapshots.front().set);
    CHECK_THROWS_AS(set_at(r, -0.001), std::out_of_range);
    CHECK_THROWS_AS(set_at(r, 1.0), std::out_of_range);

    FlowConfig sparse = c;
    sparse.snapshot_every = 2;
    const FlowResult s = run_flow(sparse);
    REQUIRE(s.snapshots.size() == 4);
    CHECK(s.snapshots.back().step == 5);
    CHECK(set_at(s, 0.025) == s.snapshots[1].set);
    CHECK_THROWS_AS(set_at(s, 0.015), std::out_of_range);
  }

  TEST_CASE("two disks: the small one vanishes and the flow goes on") {
    FlowConfig c;
    c.grid = unit_box(64);
    c.h = 0.02;
    c.t_max = 0.12;
    c.initial = "disk(-0.45,-0.45,0.3) + disk(0.3,0.3,0.477797)";
    const FlowResult r = run_flow(c);
    REQUIRE(r.trace.steps.size() == 6);
    CHECK(components(r.initial).size() == 2);
    CHECK(components(r.final_set).size() == 1);
    double prev_small = components(r.initial)[0].area;
    for (const auto& snap : r.snapshots) {
      const auto parts = components(snap.set);
      if (parts.size() == 2) {
        const double small = std::min(parts[0].area, parts[1].area);
        CHECK(small <= prev_small);
        prev_small = small;
      }
    }
    for (const auto& s : r.trace.steps) {
      CHECK(s.diss_residual <= eps_solver(c.grid));
      CHECK(std::abs(s.volume - 1.0) <= std::sqrt(c.h) * r.trace.initial_perimeter);
    }
  }

  TEST_CASE("runs are reproducible byte for byte") {
    FlowConfig c = disk_config(64, 4e-3, 0.02);
    c.initial = "disk(0,0,0.4) + rect(0.2,-0.2,0.7,0.2)";
    const fs::path a = scratch_dir("a");
    const fs::path b = scratch_dir("b");
    c.out_dir = a.string();
    run_flow(c);
    c.out_dir = b.string();
    run_flow(c);
    for (const char* name : {"diagnostics.csv", "steps.csv"}) {
      REQUIRE(fs::exists(a / name));
      CHECK(slurp(a / name) == slurp(b / name));
    }
    int snapshots = 0;
    for (const auto& entry : fs::directory_iterator(a / "snapshots")) {
      const fs::path other = b / "snapshots" / entry.path().filename();
      REQUIRE(fs::exists(other));
      CHECK(slurp(entry.path()) == slurp(other));
      ++snapshots;
    }
    CHECK(snapshots == 6);
    CHECK(read_diagnostics((a / "diagnostics.csv").string()).steps.size() == 5);
    const FlowConfig echoed = load_config((a / "run.cfg").string());
    CHECK(echoed.h == c.h);
    CHECK(echoed.initial == c.initial);
  }

  TEST_CASE("invalid runs") {
    FlowConfig c = disk_config(64, 1e-3, 0.01);
    c.initial = "disk(0.8,0,0.3)";
    CHECK_THROWS_AS(run_flow(c), FrameContact);
    CHECK_THROWS_AS(run_flow(c, IndicatorField(c.grid)), ConfigError);
    CHECK_THROWS_AS(run_flow(c, block(c.grid, 0, 10, 20, 30)), FrameContact);

    c = disk_config(64, -1e-3, 0.01);
    try {
      run_flow(c);
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("h") != std::string::npos);
    }
    c = disk_config(64, 1e-3, 1e-4);
    CHECK_THROWS_AS(run_flow(c), ConfigError);
  }

  TEST_CASE("growth into the frame is reported with its step") {
    // Unit area needs radius 0.564, more than the box leaves room for.
    FlowConfig c;
    c.grid = GridSpec::from_box(48, 48, -0.6, 0.6, -0.6);
    c.h = 0.01;
    c.t_max = 1.0;
    c.initial = "disk(0,0,0.45)";
    try {
      run_flow(c);
      FAIL("expected frame contact");
    } catch (const FrameContact& e) {
      CHECK(e.step() >= 1);
    }
  }

  TEST_CASE("convergence study on the disk") {
    FlowConfig c = disk_config(64, 4e-3, 0.016);
    c.out_dir = scratch_dir("study").string();
    const StudyReport rep = convergence_study(c, 2);
    REQUIRE(rep.levels.size() == 2);
    CHECK(rep.levels[0].steps == 4);
    CHECK(rep.levels[1].steps == 8);
    CHECK(rep.levels[1].h == c.h / 2);
    REQUIRE_FALSE(rep.matched.empty());
    for (const auto& m : rep.matched) {
      CHECK(m.symdiff <= 0.02);
    }
    CHECK(fs::exists(fs::path(c.out_dir) / "study_levels.csv"));
    CHECK(fs::exists(fs::path(c.out_dir) / "study_matched.csv"));
    CHECK_THROWS_AS(convergence_study(c, 1), ConfigError);
  }
}
