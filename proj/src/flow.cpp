#include "flatflow/flow.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>

#include "flatflow/diagnostics.hpp"
#include "flatflow/errors.hpp"
#include "flatflow/io.hpp"
#include "flatflow/shape.hpp"

namespace fs = std::filesystem;

namespace flatflow {
namespace {

constexpr int kFrameMargin = 3;

std::string snapshot_name(int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%06d.pgm", step);
  return buf;
}

double max_coarea_excess(const StepResult& r) {
  double worst = 0.0;
  for (const auto& s : r.samples) {
    worst = std::max(worst, s.coarea_excess);
  }
  return worst;
}

void write_outputs(const FlowConfig& config, const FlowResult& result) {
  if (config.out_dir.empty()) {
    return;
  }
  const fs::path dir(config.out_dir);
  write_diagnostics(result.trace, (dir / "diagnostics.csv").string());
  write_step_details(result.trace, (dir / "steps.csv").string());
}

}  // namespace

void FlowConfig::validate() const {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw ConfigError("key 'h': time step must be positive");
  }
  if (!(t_max >= h)) {
    throw ConfigError("key 't_max': final time must be at least h");
  }
  if (snapshot_every < 1) {
    throw ConfigError("key 'snapshot_every': must be at least 1");
  }
  if (step.lambda_tol < 0.0) {
    throw ConfigError("key 'lambda_tol': must be positive (0 selects one cell area)");
  }
  if (step.max_bisections < 0) {
    throw ConfigError("key 'max_bisections': must be nonnegative");
  }
  if (!(step.lambda_resolution > 0.0)) {
    throw ConfigError("key 'lambda_resolution': must be positive");
  }
  if (!(step.lambda_stride > 0.0)) {
    throw ConfigError("key 'lambda_stride': must be positive");
  }
  try {
    (void)step.solver.resolved(grid);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[solver]: ") + e.what());
  }
}

int FlowConfig::step_count() const { return static_cast<int>(std::ceil(t_max / h - 1e-9)); }

const IndicatorField& set_at(const FlowResult& result, double t) {
  const int k = static_cast<int>(std::floor(t / result.trace.h + 1e-9));
  for (const auto& s : result.snapshots) {
    if (s.step == k) {
      return s.set;
    }
  }
  throw std::out_of_range("no snapshot kept for step " + std::to_string(k));
}

FlowResult run_flow(const FlowConfig& config, std::ostream* log) {
  config.validate();
  const Rasterized init = rasterize(parse_shape(config.initial), config.grid, config.base_dir);
  if (log != nullptr) {
    for (const auto& w : init.warnings) {
      *log << "warning: " << w << '\n';
    }
  }
  FlowResult result = run_flow(config, init.set, log);
  result.warnings.insert(result.warnings.begin(), init.warnings.begin(), init.warnings.end());
  return result;
}

FlowResult run_flow(const FlowConfig& config, const IndicatorField& initial, std::ostream* log) {
  config.validate();
  require_same_grid(config.grid, initial.grid(), "run_flow initial set");
  if (count(initial) == 0) {
    throw ConfigError("initial set is empty");
  }
  if (frame_distance(initial) < kFrameMargin) {
    throw FrameContact("initial set is closer than 3 cells to the frame", 0);
  }

  const double h = config.h;
  StepParams params = config.step;
  params.h = h;
  params = params.resolved(config.grid);

  FlowResult result(config.grid);
  result.initial = initial;
  result.trace.h = h;
  result.trace.dx = config.grid.dx();
  result.trace.initial_volume = integrate(initial);
  result.trace.initial_perimeter = tv(initial);
  if (std::abs(result.trace.initial_volume - 1.0) > 0.05) {
    result.warnings.push_back("initial area " + format_number(result.trace.initial_volume) +
                              " differs from 1 by more than 0.05");
    if (log != nullptr) {
      *log << "warning: " << result.warnings.back() << '\n';
    }
  }

  fs::path snap_dir;
  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    snap_dir = fs::path(config.out_dir) / "snapshots";
    fs::create_directories(snap_dir);
    std::ofstream cfg(fs::path(config.out_dir) / "run.cfg");
    cfg << format_config(config);
    if (!cfg) {
      throw std::runtime_error("cannot write run.cfg in " + config.out_dir);
    }
  }
  auto keep_snapshot = [&](int step, const IndicatorField& set) {
    result.snapshots.push_back({step, step * h, set});
    if (!snap_dir.empty()) {
      save_snapshot(set, (snap_dir / snapshot_name(step)).string());
    }
  };
  keep_snapshot(0, initial);

  const int steps = config.step_count();
  IndicatorField F = initial;
  std::optional<IndicatorField> last_input;
  std::optional<StepResult> last;
  StepRecord last_record;

  try {
    for (int k = 1; k <= steps; ++k) {
      const auto start = std::chrono::steady_clock::now();
      StepRecord rec;
      if (last_input && *last_input == F) {
        rec = last_record;
        rec.reused = true;
      } else {
        StepResult r = [&] {
          try {
            return minimize_Fh(F, params, last ? &last->solution : nullptr);
          } catch (const std::exception& e) {
            throw NumericalError("step " + std::to_string(k) + ": " + e.what());
          }
        }();
        rec.volume = r.volume;
        rec.perimeter = r.perimeter_d;
        rec.lambda = r.lambda;
        rec.lambda_target = r.lambda_target;
        rec.saturated = r.saturated;
        rec.transport = r.energy_terms.transport;
        rec.penalty = r.energy_terms.penalty;
        rec.diss_residual = dissipation_residual(F, r.E_new, h);
        rec.disp_sup = displacement_sup(r.E_new, F);
        rec.symdiff_prev = symdiff_measure(r.E_new, F);
        rec.v_l2_inc = velocity_l2_increment(r.E_new, r.velocity, h);
        rec.bisections = r.bisections;
        rec.solver_iterations = r.solver_iterations;
        rec.solver_converged = r.solver_converged;
        rec.rounded = r.rounded;
        rec.kept_previous = r.kept_previous;
        rec.coarea_excess = max_coarea_excess(r);
        rec.warnings = static_cast<int>(r.warnings.size());
        if (log != nullptr) {
          for (const auto& w : r.warnings) {
            *log << "warning: step " << k << ": " << w << '\n';
          }
        }
        last_input = F;
        last = std::move(r);
      }
      rec.step = k;
      rec.t = k * h;
      const IndicatorField& E = last->E_new;
      if (config.record_wall_time) {
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      }
      last_record = rec;
      result.trace.steps.push_back(rec);
      if (log != nullptr) {
        *log << "step " << k << " t=" << format_number(rec.t) << " volume=" << format_number(rec.volume)
             << " lambda=" << format_number(rec.lambda) << (rec.reused ? " (repeat)" : "") << '\n';
      }
      if (frame_distance(E) < kFrameMargin) {
        keep_snapshot(k, E);
        throw FrameContact("set came within 3 cells of the frame at step " + std::to_string(k) +
                               "; enlarge the domain",
                           k);
      }
      if (k % config.snapshot_every == 0 || k == steps) {
        keep_snapshot(k, E);
      }
      F = E;
    }
  } catch (...) {
    write_outputs(config, result);
    throw;
  }
  result.final_set = F;
  write_outputs(config, result);
  return result;
}

StudyReport convergence_study(const FlowConfig& base, int levels, std::ostream* log) {
  if (levels < 2) {
    throw ConfigError("convergence study needs at least 2 levels");
  }
  base.validate();
  StudyReport report;
  for (int level = 0; level < levels; ++level) {
    FlowConfig cfg = base;
    const int factor = 1 << level;
    cfg.h = base.h / factor;
    cfg.snapshot_every = base.snapshot_every * factor;
    if (!base.out_dir.empty()) {
      cfg.out_dir = (fs::path(base.out_dir) / ("level_" + std::to_string(level))).string();
    }
    if (log != nullptr) {
      *log << "level " << level << ": h = " << format_number(cfg.h) << '\n';
    }
    report.runs.push_back(run_flow(cfg, log));
    const FlowResult& run = report.runs.back();

    LevelSummary s;
    s.level = level;
    s.h = cfg.h;
    s.steps = static_cast<int>(run.trace.steps.size());
    const double vol_tol = cfg.step.lambda_tol > 0.0 ? cfg.step.lambda_tol : cfg.grid.cell_area();
    const SigmaMeasure sigma = sigma_measure(run.trace, vol_tol);
    s.sigma_count = sigma.count;
    s.sigma_measure = sigma.measure;
    s.v_l2_total = velocity_l2_total(run.trace);
    s.holder = holder_quotient(run.snapshots, base.h);
    for (const auto& r : run.trace.steps) {
      s.disp_sup_max = std::max(s.disp_sup_max, r.disp_sup);
      s.perimeter_time_integral += cfg.h * r.perimeter;
      s.max_volume_drift = std::max(s.max_volume_drift, std::abs(r.volume - 1.0));
      s.max_diss_residual = std::max(s.max_diss_residual, r.diss_residual);
    }
    report.levels.push_back(s);
  }

  // Snapshots of level l sit at steps m * snapshot_every * 2^l, i.e. at the same times.
  for (int a = 0; a < levels; ++a) {
    for (int b = a + 1; b < levels; ++b) {
      const auto& sa = report.runs[a].snapshots;
      const auto& sb = report.runs[b].snapshots;
      const int ratio = 1 << (b - a);
      for (const auto& snap : sa) {
        for (const auto& other : sb) {
          if (other.step == snap.step * ratio) {
            report.matched.push_back({snap.t, a, b, symdiff_measure(snap.set, other.set)});
            break;
          }
        }
      }
    }
  }
  if (!base.out_dir.empty()) {
    write_study_csv(report, base.out_dir);
  }
  return report;
}

void write_study_csv(const StudyReport& report, const std::string& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "study_levels.csv");
    out << "level,h,steps,sigma_count,sigma_measure,v_l2_total,holder,disp_sup_max,"
           "perimeter_time_integral,max_volume_drift,max_diss_residual\n";
    for (const auto& s : report.levels) {
      out << s.level << ',' << format_number(s.h) << ',' << s.steps << ',' << s.sigma_count << ','
          << format_number(s.sigma_measure) << ',' << format_number(s.v_l2_total) << ','
          << format_number(s.holder) << ',' << format_number(s.disp_sup_max) << ','
          << format_number(s.perimeter_time_integral) << ',' << format_number(s.max_volume_drift) << ','
          << format_number(s.max_diss_residual) << '\n';
    }
    if (!out) {
      throw std::runtime_error("cannot write study_levels.csv in " + dir);
    }
  }
  std::ofstream out(fs::path(dir) / "study_matched.csv");
  out << "t,level_a,level_b,symdiff\n";
  for (const auto& m : report.matched) {
    out << format_number(m.t) << ',' << m.level_a << ',' << m.level_b << ',' << format_number(m.symdiff) << '\n';
  }
  if (!out) {
    throw std::runtime_error("cannot write study_matched.csv in " + dir);
  }
}

}  // namespace flatflow
