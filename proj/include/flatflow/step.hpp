#pragma once

#include <string>
#include <vector>

#include "flatflow/grid.hpp"
#include "flatflow/tv_solver.hpp"

namespace flatflow {

struct StepParams {
  double h = 1e-3;
  double lambda_tol = 0.0;  ///< volume tolerance; 0 means one cell area
  int max_bisections = 40;
  double lambda_resolution = 0.02;  ///< bracket width (1/length) at which bisection stops
  double lambda_stride = 0.5;       ///< first stride of the bracketing walk
  SolverParams solver;

  /// Validates and fills lambda_tol for the given grid.
  StepParams resolved(const GridSpec& grid) const;
};

struct EnergyTerms {
  double perimeter = 0.0;
  double transport = 0.0;  ///< (1/h) * integral of sd_F over E
  double penalty = 0.0;    ///< (1/sqrt h) * ||E| - 1|
  double total() const { return perimeter + transport + penalty; }
};

/// One subproblem solve at a fixed multiplier.
struct LambdaSample {
  double lambda = 0.0;
  double volume = 0.0;
  int iterations = 0;
  bool converged = false;
  /// max over levels {0.3, 0.5, 0.7} of thresholded minus relaxed energy.
  double coarea_excess = 0.0;
};

struct StepResult {
  explicit StepResult(const GridSpec& grid) : E_new(grid), velocity(grid), solution(grid) {}

  IndicatorField E_new;
  double lambda = 0.0;
  double lambda_target = 0.0;  ///< boundary average of H + v the search aimed at
  double volume = 0.0;
  double perimeter_d = 0.0;
  EnergyTerms energy_terms;
  ScalarField velocity;
  int bisections = 0;
  bool saturated = false;

  bool solver_converged = true;   ///< every subproblem met its tolerance
  int solver_iterations = 0;      ///< summed over all solves of the step
  bool rounded = false;           ///< volume fixed by cell-level rounding across a jump of V
  bool kept_previous = false;     ///< F itself beat the computed candidate
  int polish_flips = 0;
  std::vector<LambdaSample> samples;
  std::vector<std::string> warnings;
  SubproblemSolution solution;    ///< warm start for the next step
};

/// Per_d(E) + (1/h) int_E sd_F + (1/sqrt h) ||E| - 1|.
double fh_energy(const IndicatorField& E, const IndicatorField& F, double h);
EnergyTerms fh_terms(const IndicatorField& E, const ScalarField& sd_F, double h);

/// sd_F / h on the boundary band of E_new, zero elsewhere.
ScalarField discrete_velocity(const IndicatorField& E_new, const IndicatorField& F, double h);

/// Band cells of E: members with a 4-neighbour outside, and those outside neighbours.
IndicatorField boundary_band(const IndicatorField& E);

/// A 4-neighbour pair straddling the interface: one member cell, one outside cell.
struct InterfacePair {
  std::size_t inside;
  std::size_t outside;
};
std::vector<InterfacePair> interface_pairs(const IndicatorField& E);

/// Mean over interface pairs of the pair-averaged band velocity; 0 without pairs.
double mean_interface_velocity(const IndicatorField& E, const ScalarField& velocity);

/// Length-weighted mean curvature 2*pi*chi(E)/Per_d(E) (turning-number identity).
double mean_curvature(const IndicatorField& E);

/// One minimizing-movement step from F. The multiplier is the admissible value (unit volume
/// within lambda_tol) nearest the boundary average of H + v; jumps of V(lambda) across the
/// target are resolved to lambda_resolution and rounded at cell level; if V stays off target
/// over [-1/sqrt h, 1/sqrt h] the step is saturated. Throws std::invalid_argument when F is
/// empty, full or closer than 3 cells to the frame.
StepResult minimize_Fh(const IndicatorField& F, const StepParams& params,
                       const SubproblemSolution* warm = nullptr);

}  // namespace flatflow
