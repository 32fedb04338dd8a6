#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "flatflow/grid.hpp"

namespace flatflow {

/// Disjoint disks evolving by v = <H> - H; only the radii change.
struct BallSystem {
  std::vector<double> radii;
  std::vector<Point> centers;  ///< optional; empty or one per radius

  void validate() const;
  double area() const;
};

/// dr_i/dt = N / sum_j r_j - 1/r_i. Throws std::invalid_argument on a nonpositive radius.
std::vector<double> multiball_rhs(const std::vector<double>& radii);
std::vector<double> multiball_rhs(const BallSystem& s);

struct Extinction {
  std::size_t disk = 0;
  double t = 0.0;
};

struct Trajectory {
  std::vector<double> t;
  std::vector<std::vector<double>> radii;  ///< one row per time; removed disks hold 0
  std::vector<Extinction> extinctions;
  double max_area_drift = 0.0;  ///< relative, between removal events
  long steps = 0;
};

struct RK4Options {
  double r_floor = 1e-3;
  /// Step cap guard * r_min^2 keeps the relative change of the smallest radius small.
  double guard = 1e-2;
  /// Record every n-th accepted step (events and the final state are always recorded).
  int record_every = 1;
};

/// Classical RK4 with a curvature-limited step. A disk reaching r_floor is removed (time found
/// by shrinking the step onto the floor) and the flow continues with the rest. Throws
/// NumericalError when the step falls below 1e-12.
Trajectory rk4_integrate(const BallSystem& s, double t_end, double dt, const RK4Options& options = {});

/// Linear interpolation of the radii at time t (removed disks read 0).
std::vector<double> radii_at(const Trajectory& trajectory, double t);

void write_trajectory_csv(const Trajectory& trajectory, std::ostream& out);
void write_trajectory_csv(const Trajectory& trajectory, const std::string& path);

}  // namespace flatflow
