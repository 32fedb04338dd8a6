#pragma once

#include <array>
#include <vector>

#include "flatflow/grid.hpp"

namespace flatflow {

/// One family of lattice edges (i,j) -> (i+di, j+dj) with its perimeter weight in units of dx.
struct EdgeDirection {
  int di;
  int dj;
  double weight;
};

/// 8-neighbour stencil with Cauchy-Crofton weights. Each undirected edge is owned by the cell
/// it starts from, so four directions cover all eight neighbours.
inline constexpr std::array<EdgeDirection, 4> kStencil{{
    {1, 0, 0.39269908169872414},   // pi/8
    {0, 1, 0.39269908169872414},
    {1, 1, 0.27768018363489789},   // pi/(8*sqrt2)
    {-1, 1, 0.27768018363489789},
}};

/// Squared operator-norm bound of the (area-normalized) discrete gradient of the stencil.
double gradient_norm_squared(double dx);

/// One dual value per stencil edge, stored as one plane per direction. Edges leaving the grid
/// carry zero.
struct EdgeField {
  explicit EdgeField(const GridSpec& grid)
      : planes{ScalarField(grid), ScalarField(grid), ScalarField(grid), ScalarField(grid)} {}
  const GridSpec& grid() const { return planes[0].grid(); }

  std::array<ScalarField, kStencil.size()> planes;
};

/// Step sizes and stopping rule of the primal-dual iteration. tau*sigma*L^2 <= 1 is required,
/// L^2 = gradient_norm_squared(dx).
struct SolverParams {
  int max_iters = 20000;
  double tol = 1e-6;
  double tau = 0.0;
  double sigma = 0.0;
  int check_every = 10;

  /// tau*sigma*L^2 = 0.95, split as tau/sigma = ratio.
  static SolverParams for_grid(const GridSpec& grid, double ratio = 4.0);

  /// Fills tau/sigma from the grid when they are unset (zero), then validates.
  SolverParams resolved(const GridSpec& grid) const;
};

struct SubproblemSolution {
  explicit SubproblemSolution(const GridSpec& grid) : u(grid, 0.0), p(grid) {}

  ScalarField u;  ///< relaxed indicator, clamped to [0,1]
  EdgeField p;    ///< dual variable, |p| <= 1 per edge
  int iterations = 0;
  double residual = 0.0;
  double relaxed_energy = 0.0;
  bool converged = false;
  std::vector<double> energy_history;  ///< relaxed energy every check_every iterations
};

/// Discrete total variation: sum over stencil edges inside the grid of weight*dx*|u_a - u_b|.
/// No edges cross the frame (Neumann). On an indicator this is the discrete perimeter Per_d.
double tv(const ScalarField& u);
double tv(const IndicatorField& set);

/// tv(u) + integrate(g*u).
double relaxed_energy(const ScalarField& u, const ScalarField& g);
double relaxed_energy(const IndicatorField& set, const ScalarField& g);

/// Perimeter change (tv units) when cell (i,j) of `set` is flipped.
double flip_perimeter_delta(const IndicatorField& set, int i, int j);

/// Minimizes tv(u) + integrate(g*u) over 0 <= u <= 1 with the extrapolated primal-dual
/// iteration (theta = 1). Stops when the RMS per-cell change of (u,p) over one iteration drops
/// below params.tol or after params.max_iters; non-convergence is reported, not thrown.
/// Throws std::invalid_argument on non-finite g or a step-size violation.
SubproblemSolution solve_box_tv(const ScalarField& g, const SolverParams& params,
                                const SubproblemSolution* warm = nullptr);

}  // namespace flatflow
