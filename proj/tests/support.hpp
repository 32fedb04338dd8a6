#pragma once

#include <cmath>
#include <random>

#include "flatflow/grid.hpp"

namespace flatflow::testing {

inline GridSpec unit_box(int n) { return GridSpec::from_box(n, n, -1.0, 1.0, -1.0); }

inline IndicatorField disk(const GridSpec& g, double cx, double cy, double r) {
  IndicatorField E(g);
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      const Point c = g.center(i, j);
      E(i, j) = std::hypot(c[0] - cx, c[1] - cy) <= r ? 1 : 0;
    }
  }
  return E;
}

inline IndicatorField united(IndicatorField a, const IndicatorField& b) {
  for (std::size_t k = 0; k < a.size(); ++k) {
    a[k] = a[k] | b[k];
  }
  return a;
}

/// Cells [i0, i1) x [j0, j1).
inline IndicatorField block(const GridSpec& g, int i0, int j0, int i1, int j1) {
  IndicatorField E(g);
  for (int j = j0; j < j1; ++j) {
    for (int i = i0; i < i1; ++i) {
      E(i, j) = 1;
    }
  }
  return E;
}

inline IndicatorField random_mask(const GridSpec& g, std::mt19937_64& rng, double p = 0.5) {
  std::bernoulli_distribution coin(p);
  IndicatorField E(g);
  for (std::size_t k = 0; k < E.size(); ++k) {
    E[k] = coin(rng) ? 1 : 0;
  }
  return E;
}

/// Random set of a few disks, kept at least `margin` cells from the frame.
inline IndicatorField random_blobs(const GridSpec& g, std::mt19937_64& rng, int blobs, int margin = 4) {
  IndicatorField E(g);
  const double span = g.dx() * (g.nx() - 2 * margin);
  std::uniform_real_distribution<double> rad(0.08 * span, 0.2 * span);
  for (int b = 0; b < blobs; ++b) {
    const double r = rad(rng);
    std::uniform_real_distribution<double> pos(-0.5 * span + r, 0.5 * span - r);
    const Point o = g.center(g.nx() / 2, g.ny() / 2);
    E = united(E, disk(g, o[0] + pos(rng), o[1] + pos(rng), r));
  }
  return E;
}

inline double disk_radius_from_area(double area) { return std::sqrt(area / M_PI); }

}  // namespace flatflow::testing
