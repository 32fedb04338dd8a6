#include "flatflow/tv_solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace flatflow {
namespace {

constexpr double kStepProduct = 0.95;

double row_sum(const std::vector<double>& rows) {
  double total = 0.0;
  for (double r : rows) {
    total += r;
  }
  return total;
}

// Column range [lo, hi) of cells whose edge in direction d stays inside the grid.
struct EdgeRange {
  int i_lo, i_hi, j_hi;
};

EdgeRange edge_range(const EdgeDirection& d, int nx, int ny) {
  return {std::max(0, -d.di), nx - std::max(0, d.di), ny - d.dj};
}

}  // namespace

double gradient_norm_squared(double dx) {
  // Gershgorin on the weighted graph Laplacian: 2 * max_node sum_{incident edges} c_e^2.
  double sum = 0.0;
  for (const auto& d : kStencil) {
    const double c = d.weight / dx;
    sum += 2.0 * c * c;
  }
  return 2.0 * sum;
}

SolverParams SolverParams::for_grid(const GridSpec& grid, double ratio) {
  if (!(ratio > 0.0)) {
    throw std::invalid_argument("step ratio must be positive");
  }
  SolverParams params;
  const double base = std::sqrt(kStepProduct / gradient_norm_squared(grid.dx()));
  params.tau = base * std::sqrt(ratio);
  params.sigma = base / std::sqrt(ratio);
  return params;
}

SolverParams SolverParams::resolved(const GridSpec& grid) const {
  SolverParams out = *this;
  const double l2 = gradient_norm_squared(grid.dx());
  if (out.tau == 0.0 && out.sigma == 0.0) {
    const auto def = for_grid(grid);
    out.tau = def.tau;
    out.sigma = def.sigma;
  } else if (out.tau == 0.0 && out.sigma > 0.0) {
    out.tau = kStepProduct / (l2 * out.sigma);
  } else if (out.sigma == 0.0 && out.tau > 0.0) {
    out.sigma = kStepProduct / (l2 * out.tau);
  }
  if (!(out.tau > 0.0) || !(out.sigma > 0.0)) {
    throw std::invalid_argument("solver steps tau and sigma must be positive");
  }
  const double product = out.tau * out.sigma * l2;
  if (product > 1.0 + 1e-12) {
    throw std::invalid_argument("solver steps violate tau*sigma*L^2 <= 1 (got " +
                                std::to_string(product) + ")");
  }
  if (out.max_iters < 1 || out.check_every < 1 || !(out.tol >= 0.0)) {
    throw std::invalid_argument("solver needs max_iters >= 1, check_every >= 1, tol >= 0");
  }
  return out;
}

double tv(const ScalarField& u) {
  const auto& g = u.grid();
  const int nx = g.nx();
  const int ny = g.ny();
  std::vector<double> rows(ny, 0.0);
  for (int j = 0; j < ny; ++j) {
    double acc = 0.0;
    for (const auto& d : kStencil) {
      if (j + d.dj >= ny) {
        continue;
      }
      const auto r = edge_range(d, nx, ny);
      double dir = 0.0;
      for (int i = r.i_lo; i < r.i_hi; ++i) {
        dir += std::abs(u(i + d.di, j + d.dj) - u(i, j));
      }
      acc += d.weight * dir;
    }
    rows[j] = acc;
  }
  return row_sum(rows) * g.dx();
}

double tv(const IndicatorField& set) { return tv(lift(set)); }

double relaxed_energy(const ScalarField& u, const ScalarField& g) {
  require_same_grid(u.grid(), g.grid(), "relaxed_energy");
  ScalarField gu(u.grid());
  for (std::size_t k = 0; k < u.size(); ++k) {
    gu[k] = g[k] * u[k];
  }
  return tv(u) + integrate(gu);
}

double relaxed_energy(const IndicatorField& set, const ScalarField& g) {
  return relaxed_energy(lift(set), g);
}

double flip_perimeter_delta(const IndicatorField& set, int i, int j) {
  const auto& g = set.grid();
  const int self = set(i, j) ? 1 : 0;
  double delta = 0.0;
  for (const auto& d : kStencil) {
    for (int sgn : {1, -1}) {
      const int a = i + sgn * d.di;
      const int b = j + sgn * d.dj;
      if (!g.contains(a, b)) {
        continue;
      }
      const int other = set(a, b) ? 1 : 0;
      // |self - other| becomes |1 - self - other|.
      delta += d.weight * (std::abs(1 - self - other) - std::abs(self - other));
    }
  }
  return delta * g.dx();
}

SubproblemSolution solve_box_tv(const ScalarField& g, const SolverParams& raw_params,
                                const SubproblemSolution* warm) {
  const GridSpec& grid = g.grid();
  if (!all_finite(g)) {
    throw std::invalid_argument("solve_box_tv: linear term contains non-finite values");
  }
  const SolverParams params = raw_params.resolved(grid);

  SubproblemSolution sol(grid);
  if (warm != nullptr) {
    require_same_grid(grid, warm->u.grid(), "solve_box_tv warm start");
    sol.u = warm->u;
    sol.p = warm->p;
  }

  const int nx = grid.nx();
  const int ny = grid.ny();
  const std::size_t n = grid.size();
  const double tau = params.tau;

  // Area-normalized objective: sum_e (w_e/dx) |u_a - u_b| + sum_k g_k u_k.
  std::array<double, kStencil.size()> coef{};
  std::array<long, kStencil.size()> offset{};
  std::array<double*, kStencil.size()> planes{};
  for (std::size_t d = 0; d < kStencil.size(); ++d) {
    coef[d] = kStencil[d].weight / grid.dx();
    offset[d] = static_cast<long>(kStencil[d].dj) * nx + kStencil[d].di;
    planes[d] = sol.p.planes[d].values().data();
  }

  double* u = sol.u.values().data();
  const double* gv = g.values().data();
  std::vector<double> ubar(u, u + n);
  std::vector<double> dual_change(ny, 0.0);
  std::vector<double> primal_change(ny, 0.0);

  sol.converged = false;
  int it = 0;
  while (it < params.max_iters) {
    ++it;
    const bool check = it % params.check_every == 0 || it == params.max_iters;

    // Dual ascent, projection onto [-1,1] per edge.
#pragma omp parallel for schedule(static)
    for (int j = 0; j < ny; ++j) {
      double change = 0.0;
      for (std::size_t d = 0; d < kStencil.size(); ++d) {
        const auto r = edge_range(kStencil[d], nx, ny);
        if (j >= r.j_hi) {
          continue;
        }
        const double step = params.sigma * coef[d];
        double* p = planes[d];
        const long off = offset[d];
        const std::size_t row = static_cast<std::size_t>(j) * nx;
        for (int i = r.i_lo; i < r.i_hi; ++i) {
          const std::size_t k = row + i;
          double q = p[k] + step * (ubar[k + off] - ubar[k]);
          q = q > 1.0 ? 1.0 : (q < -1.0 ? -1.0 : q);
          if (check) {
            change += (q - p[k]) * (q - p[k]);
          }
          p[k] = q;
        }
      }
      dual_change[j] = change;
    }

    // Primal descent, clamping to [0,1], theta = 1 extrapolation.
#pragma omp parallel for schedule(static)
    for (int j = 0; j < ny; ++j) {
      double change = 0.0;
      const std::size_t row = static_cast<std::size_t>(j) * nx;
      for (int i = 0; i < nx; ++i) {
        const std::size_t k = row + i;
        // K^T p: incoming edges add, outgoing edges subtract. Out-of-grid edges hold zero.
        double kt = 0.0;
        for (std::size_t d = 0; d < kStencil.size(); ++d) {
          const int si = i - kStencil[d].di;
          const int sj = j - kStencil[d].dj;
          double acc = -planes[d][k];
          if (si >= 0 && si < nx && sj >= 0) {
            acc += planes[d][k - offset[d]];
          }
          kt += coef[d] * acc;
        }
        const double old = u[k];
        double next = old - tau * (kt + gv[k]);
        next = next < 0.0 ? 0.0 : (next > 1.0 ? 1.0 : next);
        if (check) {
          change += (next - old) * (next - old);
        }
        u[k] = next;
        ubar[k] = 2.0 * next - old;
      }
      primal_change[j] = change;
    }

    if (check) {
      sol.residual = std::sqrt((row_sum(dual_change) + row_sum(primal_change)) / static_cast<double>(n));
      sol.energy_history.push_back(relaxed_energy(sol.u, g));
      if (sol.residual < params.tol) {
        sol.converged = true;
        break;
      }
    }
  }
  sol.iterations = it;
  sol.relaxed_energy = relaxed_energy(sol.u, g);
  return sol;
}

}  // namespace flatflow
