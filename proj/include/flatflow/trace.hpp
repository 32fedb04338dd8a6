#pragma once

#include <vector>

#include "flatflow/grid.hpp"

namespace flatflow {

/// Everything recorded for step k (time t = k*h).
struct StepRecord {
  int step = 0;
  double t = 0.0;
  double volume = 0.0;
  double perimeter = 0.0;
  double lambda = 0.0;
  double lambda_target = 0.0;
  bool saturated = false;
  double transport = 0.0;
  double penalty = 0.0;
  double diss_residual = 0.0;
  double disp_sup = 0.0;
  double symdiff_prev = 0.0;
  double v_l2_inc = 0.0;
  double wall_ms = 0.0;
  int bisections = 0;
  int solver_iterations = 0;
  bool solver_converged = true;
  bool rounded = false;
  bool kept_previous = false;
  bool reused = false;  ///< input equal to the previous step's input, result repeated
  double coarea_excess = 0.0;
  int warnings = 0;
};

struct FlowTrace {
  double h = 0.0;
  double dx = 0.0;
  double initial_volume = 0.0;
  double initial_perimeter = 0.0;
  std::vector<StepRecord> steps;
};

/// E at time t.
struct Snapshot {
  int step = 0;
  double t = 0.0;
  IndicatorField set;
};

}  // namespace flatflow
