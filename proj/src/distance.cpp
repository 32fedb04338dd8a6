#include "flatflow/distance.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace flatflow {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1-D squared distance transform of f over n samples with given stride.
// Infinite samples contribute no parabola.
void envelope_pass(double* f, int n, std::size_t stride, std::vector<int>& v, std::vector<double>& z,
                   std::vector<double>& out) {
  int k = -1;
  for (int q = 0; q < n; ++q) {
    const double fq = f[q * stride];
    if (fq == kInf) {
      continue;
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    auto intersect = [&](int p) {
      const double fp = f[p * stride];
      return ((fq + double(q) * q) - (fp + double(p) * p)) / (2.0 * (q - p));
    };
    // z[0] is -inf, so the scan always stops at k == 0.
    double s = intersect(v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q) {
      out[q] = kInf;
    }
  } else {
    int j = 0;
    for (int q = 0; q < n; ++q) {
      while (z[j + 1] < q) {
        ++j;
      }
      const double d = q - v[j];
      out[q] = d * d + f[v[j] * stride];
    }
  }
  for (int q = 0; q < n; ++q) {
    f[q * stride] = out[q];
  }
}

}  // namespace

std::vector<double> squared_cell_distance(const IndicatorField& set) {
  const auto& g = set.grid();
  const int nx = g.nx();
  const int ny = g.ny();
  std::vector<double> d(g.size());
  bool any = false;
  for (std::size_t k = 0; k < set.size(); ++k) {
    d[k] = set[k] ? 0.0 : kInf;
    any = any || set[k];
  }
  if (!any) {
    throw std::invalid_argument("distance to an empty set is undefined");
  }
  const int n = std::max(nx, ny);
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  std::vector<double> buf(n);

  for (int j = 0; j < ny; ++j) {
    envelope_pass(d.data() + g.index(0, j), nx, 1, v, z, buf);
  }
  for (int i = 0; i < nx; ++i) {
    envelope_pass(d.data() + i, ny, static_cast<std::size_t>(nx), v, z, buf);
  }
  return d;
}

ScalarField unsigned_distance(const IndicatorField& F) {
  const auto sq = squared_cell_distance(F);
  ScalarField out(F.grid());
  const double dx = F.grid().dx();
  for (std::size_t k = 0; k < sq.size(); ++k) {
    out[k] = std::sqrt(sq[k]) * dx;
  }
  return out;
}

ScalarField signed_distance(const IndicatorField& F) {
  const auto outside = squared_cell_distance(F);
  const auto inside = squared_cell_distance(complement(F));
  const double dx = F.grid().dx();
  ScalarField out(F.grid());
  for (std::size_t k = 0; k < out.size(); ++k) {
    // Exactly one of the two distances is zero.
    const double raw = (std::sqrt(outside[k]) - std::sqrt(inside[k])) * dx;
    out[k] = raw > 0.0 ? raw - 0.5 * dx : raw + 0.5 * dx;
  }
  return out;
}

}  // namespace flatflow
