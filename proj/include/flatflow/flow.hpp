#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "flatflow/grid.hpp"
#include "flatflow/step.hpp"
#include "flatflow/trace.hpp"

namespace flatflow {

struct FlowConfig {
  GridSpec grid = GridSpec(256, 256, 2.0 / 256, {-1.0 + 1.0 / 256, -1.0 + 1.0 / 256});
  double h = 1e-3;
  double t_max = 0.05;
  std::string initial = "disk(0, 0, 0.564190)";
  std::string base_dir;       ///< resolves relative bitmap paths in `initial`
  StepParams step;            ///< step.h is overwritten by h
  int snapshot_every = 1;
  std::string out_dir;        ///< empty: nothing is written
  bool record_wall_time = false;

  /// Throws ConfigError naming the offending key.
  void validate() const;
  int step_count() const;
};

struct FlowResult {
  explicit FlowResult(const GridSpec& grid) : initial(grid), final_set(grid) {}

  FlowTrace trace;
  std::vector<Snapshot> snapshots;  ///< step 0 and every snapshot_every steps, plus the last
  IndicatorField initial;
  IndicatorField final_set;
  std::vector<std::string> warnings;
};

/// E at time t under the left-constant convention: the snapshot of step floor(t/h).
/// Throws std::out_of_range if that step was not kept.
const IndicatorField& set_at(const FlowResult& result, double t);

/// Iterates minimize_Fh for k = 1..ceil(t_max/h). Throws FrameContact when the set comes
/// within 3 cells of the frame and NumericalError (with the step index) when a step fails.
/// Progress lines go to `log` when given.
FlowResult run_flow(const FlowConfig& config, std::ostream* log = nullptr);

/// Same loop from an explicit initial set.
FlowResult run_flow(const FlowConfig& config, const IndicatorField& initial, std::ostream* log = nullptr);

struct LevelSummary {
  int level = 0;
  double h = 0.0;
  int steps = 0;
  int sigma_count = 0;
  double sigma_measure = 0.0;
  double v_l2_total = 0.0;
  double holder = 0.0;
  double disp_sup_max = 0.0;
  double perimeter_time_integral = 0.0;
  double max_volume_drift = 0.0;
  double max_diss_residual = 0.0;
};

struct MatchedSymdiff {
  double t = 0.0;
  int level_a = 0;
  int level_b = 0;
  double symdiff = 0.0;
};

struct StudyReport {
  std::vector<LevelSummary> levels;
  std::vector<MatchedSymdiff> matched;
  std::vector<FlowResult> runs;
};

/// Runs the flow at h, h/2, ..., h/2^(levels-1) on the same grid, snapshots at the coarse
/// times, and writes study_levels.csv and study_matched.csv to base.out_dir when set.
StudyReport convergence_study(const FlowConfig& base, int levels, std::ostream* log = nullptr);

void write_study_csv(const StudyReport& report, const std::string& dir);

}  // namespace flatflow
