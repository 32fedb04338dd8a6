#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <regex>
#include <sstream>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "flatflow/diagnostics.hpp"
#include "flatflow/errors.hpp"
#include "flatflow/flow.hpp"
#include "flatflow/io.hpp"
#include "flatflow/reference.hpp"
#include "flatflow/tv_solver.hpp"

namespace fs = std::filesystem;
using namespace flatflow;

namespace {

constexpr int kOk = 0;
constexpr int kConfig = 2;
constexpr int kNumerical = 3;
constexpr int kFrame = 4;

void apply_thread_env() {
  const char* env = std::getenv("FLATFLOW_THREADS");
  if (env == nullptr || *env == '\0') {
    return;
  }
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) {
    throw ConfigError(std::string("FLATFLOW_THREADS must be a positive integer, got '") + env + "'");
  }
#ifdef _OPENMP
  omp_set_num_threads(static_cast<int>(n));
#endif
}

std::vector<double> parse_radii(const std::string& text) {
  std::vector<double> radii;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double r = std::strtod(item.c_str(), &end);
    if (item.empty() || *end != '\0' || !(r > 0.0)) {
      throw ConfigError("radii must be a comma-separated list of positive numbers, got '" + text + "'");
    }
    radii.push_back(r);
  }
  if (radii.empty()) {
    throw ConfigError("no radii given");
  }
  return radii;
}

void print_summary(const FlowResult& r) {
  const auto& steps = r.trace.steps;
  double drift = 0.0;
  double diss = -1e300;
  int saturated = 0;
  for (const auto& s : steps) {
    drift = std::max(drift, std::abs(s.volume - 1.0));
    diss = std::max(diss, s.diss_residual);
    saturated += s.saturated ? 1 : 0;
  }
  std::cout << "steps: " << steps.size() << "\n"
            << "initial area: " << format_number(r.trace.initial_volume) << "\n"
            << "initial perimeter: " << format_number(r.trace.initial_perimeter) << "\n";
  if (!steps.empty()) {
    std::cout << "final area: " << format_number(steps.back().volume) << "\n"
              << "final perimeter: " << format_number(steps.back().perimeter) << "\n"
              << "max volume drift: " << format_number(drift) << "\n"
              << "max dissipation residual: " << format_number(diss) << "\n"
              << "saturated steps: " << saturated << "\n";
  }
}

int cmd_run(const std::string& path, const std::string& out, bool quiet) {
  FlowConfig config = load_config(path);
  if (!out.empty()) {
    config.out_dir = out;
  }
  const FlowResult r = run_flow(config, quiet ? nullptr : &std::cerr);
  print_summary(r);
  return kOk;
}

int cmd_study(const std::string& path, int levels, const std::string& out, bool quiet) {
  FlowConfig config = load_config(path);
  if (!out.empty()) {
    config.out_dir = out;
  }
  const StudyReport report = convergence_study(config, levels, quiet ? nullptr : &std::cerr);
  std::cout << "level,h,steps,sigma_count,sigma_measure,v_l2_total,holder,disp_sup_max\n";
  for (const auto& s : report.levels) {
    std::cout << s.level << ',' << format_number(s.h) << ',' << s.steps << ',' << s.sigma_count << ','
              << format_number(s.sigma_measure) << ',' << format_number(s.v_l2_total) << ','
              << format_number(s.holder) << ',' << format_number(s.disp_sup_max) << '\n';
  }
  double worst = 0.0;
  for (const auto& m : report.matched) {
    worst = std::max(worst, m.symdiff);
  }
  std::cout << "matched snapshots: " << report.matched.size() << ", max symdiff " << format_number(worst) << '\n';
  return kOk;
}

int cmd_oracle(const std::string& radii_text, double tmax, double dt, double rfloor, const std::string& out) {
  if (!(tmax > 0.0) || !(dt > 0.0)) {
    throw ConfigError("--tmax and --dt must be positive");
  }
  BallSystem s;
  s.radii = parse_radii(radii_text);
  RK4Options opts;
  opts.r_floor = rfloor;
  Trajectory traj;
  try {
    traj = rk4_integrate(s, tmax, dt, opts);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (out.empty()) {
    write_trajectory_csv(traj, std::cout);
  } else {
    write_trajectory_csv(traj, out);
  }
  for (const auto& e : traj.extinctions) {
    std::cerr << "disk " << e.disk + 1 << " vanishes at t = " << format_number(e.t) << '\n';
  }
  std::cerr << "max area drift: " << format_number(traj.max_area_drift) << '\n';
  return kOk;
}

/// Recomputes per-step diagnostics from stored snapshots and compares them with diagnostics.csv.
int cmd_check(const std::string& dir) {
  const fs::path root(dir);
  const FlowConfig config = load_config((root / "run.cfg").string());
  const FlowTrace csv = read_diagnostics((root / "diagnostics.csv").string());

  std::vector<Snapshot> snaps;
  const std::regex name("step_([0-9]+)\\.pgm");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(root / "snapshots")) {
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::smatch m;
    const std::string base = f.filename().string();
    if (!std::regex_match(base, m, name)) {
      continue;
    }
    const int k = std::stoi(m[1].str());
    snaps.push_back({k, k * config.h, load_pgm(f.string(), config.grid)});
  }
  if (snaps.empty()) {
    throw ConfigError("no snapshots in " + (root / "snapshots").string());
  }

  const double h = config.h;
  const double dx2 = config.grid.cell_area();
  const double eps = 10.0 * config.step.solver.tol * config.grid.area();
  const double per0 = tv(snaps.front().set);
  int mismatches = 0;
  int violations = 0;
  int compared = 0;
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); };

  for (std::size_t s = 0; s + 1 < snaps.size(); ++s) {
    const Snapshot& a = snaps[s];
    const Snapshot& b = snaps[s + 1];
    if (b.step != a.step + 1 || b.step < 1 || static_cast<std::size_t>(b.step) > csv.steps.size()) {
      continue;
    }
    const StepRecord& row = csv.steps[static_cast<std::size_t>(b.step - 1)];
    ++compared;
    const double vol = integrate(b.set);
    const double per = tv(b.set);
    const double diss = dissipation_residual(a.set, b.set, h);
    const double disp = displacement_sup(b.set, a.set);
    const double sym = symdiff_measure(b.set, a.set);
    const bool ok = close(vol, row.volume) && close(per, row.perimeter) && close(diss, row.diss_residual) &&
                    close(disp, row.disp_sup) && close(sym, row.symdiff_prev);
    if (!ok) {
      ++mismatches;
      std::cout << "step " << b.step << ": stored diagnostics do not match the snapshots\n";
    }
  }

  for (const auto& row : csv.steps) {
    if (row.diss_residual > eps) {
      ++violations;
      std::cout << "step " << row.step << ": dissipation residual " << format_number(row.diss_residual)
                << " exceeds " << format_number(eps) << '\n';
    }
    if (std::abs(row.volume - 1.0) > std::sqrt(h) * per0) {
      ++violations;
      std::cout << "step " << row.step << ": volume drift exceeds sqrt(h) * initial perimeter\n";
    }
    if (row.saturated) {
      const double expect = std::copysign(1.0 / std::sqrt(h), 1.0 - row.volume);
      if (!close(row.lambda, expect) || row.volume == 1.0) {
        ++violations;
        std::cout << "step " << row.step << ": saturated multiplier has the wrong value or sign\n";
      }
    } else if (std::abs(row.volume - 1.0) > dx2 * (1.0 + 1e-9)) {
      ++violations;
      std::cout << "step " << row.step << ": unsaturated step misses unit volume\n";
    }
  }

  const DensityReport density = density_check(snaps.back().set, h, 32);
  std::cout << "snapshots: " << snaps.size() << ", steps compared: " << compared << "\n"
            << "holder quotient: " << format_number(holder_quotient(snaps, h)) << "\n"
            << "density ratio (last snapshot): " << format_number(density.min_ratio)
            << (density.passed ? "" : " (below floor)") << "\n"
            << "mismatches: " << mismatches << ", violations: " << violations << '\n';
  return mismatches + violations == 0 ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Volume-preserving flat flow on a square lattice"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  bool quiet = false;
  int levels = 3;
  std::string radii;
  double tmax = 0.0;
  double dt = 1e-5;
  double rfloor = RK4Options{}.r_floor;
  std::string csv_out;
  std::string run_dir;

  auto* run = app.add_subcommand("run", "Run one flow from a config file");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("--out", out_dir, "Output directory (overrides [output] dir)");
  run->add_flag("-q,--quiet", quiet, "No per-step progress on stderr");

  auto* study = app.add_subcommand("study", "Convergence study at h, h/2, ...");
  study->add_option("config", config_path, "Config file")->required();
  study->add_option("--levels", levels, "Number of time-step levels")->check(CLI::Range(2, 12));
  study->add_option("--out", out_dir, "Output directory (overrides [output] dir)");
  study->add_flag("-q,--quiet", quiet, "No per-step progress on stderr");

  auto* oracle = app.add_subcommand("oracle", "Integrate the multi-disk radius ODE");
  oracle->add_option("radii", radii, "Comma-separated radii, e.g. 0.3,0.477797")->required();
  oracle->add_option("--tmax", tmax, "Final time")->required();
  oracle->add_option("--dt", dt, "Largest RK4 step");
  oracle->add_option("--rfloor", rfloor, "Radius at which a disk is removed");
  oracle->add_option("--out", csv_out, "Trajectory CSV path (default stdout)");

  auto* check = app.add_subcommand("check", "Recompute diagnostics from a run directory");
  check->add_option("run-dir", run_dir, "Directory written by run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    apply_thread_env();
    if (*run) {
      return cmd_run(config_path, out_dir, quiet);
    }
    if (*study) {
      return cmd_study(config_path, levels, out_dir, quiet);
    }
    if (*oracle) {
      return cmd_oracle(radii, tmax, dt, rfloor, csv_out);
    }
    return cmd_check(run_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const FrameContact& e) {
    std::cerr << "frame contact: " << e.what() << '\n';
    return kFrame;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const GridMismatch& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kConfig;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  }
}
