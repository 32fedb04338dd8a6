#pragma once

#include <cstdint>
#include <vector>

#include "flatflow/grid.hpp"
#include "flatflow/step.hpp"
#include "flatflow/trace.hpp"

namespace flatflow {

/// [Per(E) + (1/h) int_{E sym F} |sd_F| + (1/sqrt h)||E|-1|] - [Per(F) + (1/sqrt h)||F|-1|].
double dissipation_residual(const IndicatorField& F, const IndicatorField& E, double h);
double dissipation_residual(const IndicatorField& F, const StepResult& R, double h);

/// max |sd_F| over E sym F; 0 when the sets agree.
double displacement_sup(const IndicatorField& E, const IndicatorField& F);

/// max over snapshot pairs with |t - s| >= h of |E_t sym E_s| / sqrt|t - s|; 0 without pairs.
double holder_quotient(const std::vector<Snapshot>& snapshots, double h);

/// h * sum over interface pairs of E_new of (pair-averaged velocity)^2 * dx.
double velocity_l2_increment(const IndicatorField& E_new, const ScalarField& velocity, double h);
double velocity_l2_total(const FlowTrace& trace);

struct SigmaMeasure {
  int count = 0;
  double measure = 0.0;
};
SigmaMeasure sigma_measure(const FlowTrace& trace, double vol_tol);

struct DensitySample {
  int i = 0;  ///< member cell of the sampled interface pair
  int j = 0;
  double radius = 0.0;
  double ratio = 0.0;  ///< min(|B_r \ E|, |B_r cap E|) / r^2
};
struct DensityReport {
  std::vector<DensitySample> samples;
  double min_ratio = 0.0;
  bool passed = false;  ///< min_ratio >= floor
};
inline constexpr double kDensityFloor = 0.05;

/// Balls centered on `samples` random interface points (midpoints of member/non-member
/// 4-neighbour pairs, fixed seed), radii 2dx, 4dx, 8dx, ... up to sqrt(h) (at least 2dx).
DensityReport density_check(const IndicatorField& E, double h, int samples, std::uint64_t seed = 1);

/// Closed contour of the 1/2 level set through interface edge midpoints, members on the left.
struct ContourLoop {
  std::vector<Point> points;
  std::vector<std::size_t> inside;   ///< member cell of the edge each point sits on
  std::vector<std::size_t> outside;  ///< non-member cell of that edge
};
std::vector<ContourLoop> extract_contours(const IndicatorField& E);

/// Signed curvature at each point of a loop from a quadratic fit through 7 consecutive points,
/// positive where the members are convex. Empty for loops with fewer than 7 points.
std::vector<double> loop_curvature(const ContourLoop& loop);

struct LoopCurvature {
  double length = 0.0;
  double mean_h = 0.0;
  double mean_v = 0.0;
  Point centroid{0.0, 0.0};
};
struct CurvatureReport {
  bool available = false;
  double mean_h = 0.0;  ///< length-weighted over all usable loops
  double mean_v = 0.0;
  double lambda = 0.0;
  double residual = 0.0;  ///< |mean(H + v) - lambda| / max(1, |lambda|)
  std::vector<LoopCurvature> loops;
};
CurvatureReport curvature_residual(const IndicatorField& E_new, const ScalarField& velocity, double lambda);
CurvatureReport curvature_residual(const StepResult& R, const IndicatorField& F, double h);

/// 8-connected components of E.
struct Component {
  std::size_t cells = 0;
  double area = 0.0;
  Point centroid{0.0, 0.0};
};
std::vector<Component> components(const IndicatorField& E);

}  // namespace flatflow
