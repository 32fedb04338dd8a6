#include "flatflow/grid.hpp"

#include <algorithm>
#include <cmath>

namespace flatflow {

GridSpec::GridSpec(int nx, int ny, double dx, Point origin)
    : nx_(nx), ny_(ny), dx_(dx), origin_(origin) {
  if (nx < 2 || ny < 2) {
    throw std::invalid_argument("grid needs at least 2 cells per axis, got " + std::to_string(nx) +
                                "x" + std::to_string(ny));
  }
  if (!(dx > 0.0) || !std::isfinite(dx)) {
    throw std::invalid_argument("grid spacing must be positive and finite");
  }
}

GridSpec GridSpec::from_box(int nx, int ny, double xmin, double xmax, double ymin) {
  if (nx < 2) {
    throw std::invalid_argument("grid needs at least 2 cells per axis");
  }
  const double dx = (xmax - xmin) / nx;
  return GridSpec(nx, ny, dx, {xmin + 0.5 * dx, ymin + 0.5 * dx});
}

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
  if (!(a == b)) {
    throw GridMismatch(std::string(what) + ": fields live on different grids");
  }
}

double integrate(const ScalarField& f) {
  // Row partial sums keep the reduction order fixed.
  const auto& g = f.grid();
  double total = 0.0;
  for (int j = 0; j < g.ny(); ++j) {
    double row = 0.0;
    const std::size_t base = g.index(0, j);
    for (int i = 0; i < g.nx(); ++i) {
      row += f[base + i];
    }
    total += row;
  }
  return total * g.cell_area();
}

double integrate(const IndicatorField& f) {
  return static_cast<double>(count(f)) * f.grid().cell_area();
}

std::size_t count(const IndicatorField& f) {
  std::size_t n = 0;
  for (auto v : f.values()) {
    n += v ? 1u : 0u;
  }
  return n;
}

ScalarField lift(const IndicatorField& f) {
  ScalarField out(f.grid());
  for (std::size_t k = 0; k < f.size(); ++k) {
    out[k] = f[k] ? 1.0 : 0.0;
  }
  return out;
}

IndicatorField threshold(const ScalarField& u, double s) {
  IndicatorField out(u.grid());
  for (std::size_t k = 0; k < u.size(); ++k) {
    out[k] = u[k] > s ? 1 : 0;
  }
  return out;
}

double symdiff_measure(const IndicatorField& a, const IndicatorField& b) {
  require_same_grid(a.grid(), b.grid(), "symdiff_measure");
  std::size_t n = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    n += (a[k] != 0) != (b[k] != 0) ? 1u : 0u;
  }
  return static_cast<double>(n) * a.grid().cell_area();
}

IndicatorField complement(const IndicatorField& f) {
  IndicatorField out(f.grid());
  for (std::size_t k = 0; k < f.size(); ++k) {
    out[k] = f[k] ? 0 : 1;
  }
  return out;
}

IndicatorField symmetric_difference(const IndicatorField& a, const IndicatorField& b) {
  require_same_grid(a.grid(), b.grid(), "symmetric_difference");
  IndicatorField out(a.grid());
  for (std::size_t k = 0; k < a.size(); ++k) {
    out[k] = (a[k] != 0) != (b[k] != 0) ? 1 : 0;
  }
  return out;
}

int frame_distance(const IndicatorField& f) {
  const auto& g = f.grid();
  int best = -1;
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      if (!f(i, j)) {
        continue;
      }
      const int d = std::min({i, j, g.nx() - 1 - i, g.ny() - 1 - j});
      if (best < 0 || d < best) {
        best = d;
      }
    }
  }
  return best;
}

bool all_finite(const ScalarField& f) {
  return std::all_of(f.values().begin(), f.values().end(), [](double v) { return std::isfinite(v); });
}

int euler_characteristic(const IndicatorField& f) {
  const auto& g = f.grid();
  auto at = [&](int i, int j) { return g.contains(i, j) && f(i, j) ? 1 : 0; };
  long q1 = 0;
  long q3 = 0;
  long qd = 0;
  for (int j = -1; j < g.ny(); ++j) {
    for (int i = -1; i < g.nx(); ++i) {
      const int a = at(i, j);
      const int b = at(i + 1, j);
      const int c = at(i, j + 1);
      const int d = at(i + 1, j + 1);
      const int n = a + b + c + d;
      if (n == 1) {
        ++q1;
      } else if (n == 3) {
        ++q3;
      } else if (n == 2 && a == d) {
        ++qd;
      }
    }
  }
  return static_cast<int>((q1 - q3 - 2 * qd) / 4);
}

}  // namespace flatflow
