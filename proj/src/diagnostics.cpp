#include "flatflow/diagnostics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_map>

#include "flatflow/distance.hpp"
#include "flatflow/tv_solver.hpp"

namespace flatflow {

double dissipation_residual(const IndicatorField& F, const IndicatorField& E, double h) {
  require_same_grid(F.grid(), E.grid(), "dissipation_residual");
  const ScalarField sd = signed_distance(F);
  ScalarField moved(F.grid());
  for (std::size_t k = 0; k < F.size(); ++k) {
    moved[k] = (E[k] != 0) != (F[k] != 0) ? std::abs(sd[k]) : 0.0;
  }
  const double slope = 1.0 / std::sqrt(h);
  const double after = tv(E) + integrate(moved) / h + slope * std::abs(integrate(E) - 1.0);
  const double before = tv(F) + slope * std::abs(integrate(F) - 1.0);
  return after - before;
}

double dissipation_residual(const IndicatorField& F, const StepResult& R, double h) {
  return dissipation_residual(F, R.E_new, h);
}

double displacement_sup(const IndicatorField& E, const IndicatorField& F) {
  require_same_grid(E.grid(), F.grid(), "displacement_sup");
  bool any = false;
  for (std::size_t k = 0; k < E.size() && !any; ++k) {
    any = (E[k] != 0) != (F[k] != 0);
  }
  if (!any) {
    return 0.0;
  }
  const ScalarField sd = signed_distance(F);
  double sup = 0.0;
  for (std::size_t k = 0; k < E.size(); ++k) {
    if ((E[k] != 0) != (F[k] != 0)) {
      sup = std::max(sup, std::abs(sd[k]));
    }
  }
  return sup;
}

double holder_quotient(const std::vector<Snapshot>& snapshots, double h) {
  double worst = 0.0;
  const double min_gap = h * (1.0 - 1e-9);
  for (std::size_t a = 0; a < snapshots.size(); ++a) {
    for (std::size_t b = a + 1; b < snapshots.size(); ++b) {
      const double gap = std::abs(snapshots[b].t - snapshots[a].t);
      if (gap < min_gap) {
        continue;
      }
      worst = std::max(worst, symdiff_measure(snapshots[a].set, snapshots[b].set) / std::sqrt(gap));
    }
  }
  return worst;
}

double velocity_l2_increment(const IndicatorField& E_new, const ScalarField& velocity, double h) {
  require_same_grid(E_new.grid(), velocity.grid(), "velocity_l2_increment");
  double sum = 0.0;
  for (const auto& p : interface_pairs(E_new)) {
    const double v = 0.5 * (velocity[p.inside] + velocity[p.outside]);
    sum += v * v;
  }
  return h * sum * E_new.grid().dx();
}

double velocity_l2_total(const FlowTrace& trace) {
  double total = 0.0;
  for (const auto& r : trace.steps) {
    total += r.v_l2_inc;
  }
  return total;
}

SigmaMeasure sigma_measure(const FlowTrace& trace, double vol_tol) {
  SigmaMeasure out;
  for (const auto& r : trace.steps) {
    if (std::abs(r.volume - 1.0) > vol_tol) {
      ++out.count;
    }
  }
  out.measure = trace.h * out.count;
  return out;
}

DensityReport density_check(const IndicatorField& E, double h, int samples, std::uint64_t seed) {
  const auto& grid = E.grid();
  const double dx = grid.dx();
  const auto pairs = interface_pairs(E);
  std::vector<double> radii;
  for (double r = 2.0 * dx; r <= std::sqrt(h) * (1.0 + 1e-12); r *= 2.0) {
    radii.push_back(r);
  }
  if (radii.empty()) {
    radii.push_back(2.0 * dx);
  }

  DensityReport report;
  report.min_ratio = std::numeric_limits<double>::infinity();
  if (pairs.empty() || samples <= 0) {
    report.min_ratio = 0.0;
    return report;
  }
  const auto cell_of = [&](std::size_t k) {
    return std::pair<int, int>{static_cast<int>(k % static_cast<std::size_t>(grid.nx())),
                               static_cast<int>(k / static_cast<std::size_t>(grid.nx()))};
  };
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
  for (int s = 0; s < samples; ++s) {
    // Center on the interface: the midpoint of a member cell and its outside neighbour.
    const InterfacePair p = pairs[pick(rng)];
    const auto [ci, cj] = cell_of(p.inside);
    const auto [oi, oj] = cell_of(p.outside);
    const double mi = 0.5 * (ci + oi);
    const double mj = 0.5 * (cj + oj);
    for (double r : radii) {
      const int reach = static_cast<int>(std::ceil(r / dx)) + 1;
      std::size_t in = 0;
      std::size_t out = 0;
      for (int b = cj - reach; b <= cj + reach; ++b) {
        for (int a = ci - reach; a <= ci + reach; ++a) {
          const double di = (a - mi) * dx;
          const double dj = (b - mj) * dx;
          if (di * di + dj * dj > r * r) {
            continue;
          }
          if (grid.contains(a, b) && E(a, b)) {
            ++in;
          } else {
            ++out;
          }
        }
      }
      const double ratio = static_cast<double>(std::min(in, out)) * grid.cell_area() / (r * r);
      report.samples.push_back({ci, cj, r, ratio});
      report.min_ratio = std::min(report.min_ratio, ratio);
    }
  }
  report.passed = report.min_ratio >= kDensityFloor;
  return report;
}

namespace {

struct Segment {
  long from;
  long to;
};

}  // namespace

std::vector<ContourLoop> extract_contours(const IndicatorField& E) {
  const auto& grid = E.grid();
  const int nx = grid.nx();
  const int ny = grid.ny();
  // Edge ids: 2k joins cell k to its +x neighbour, 2k+1 joins it to its +y neighbour.
  auto h_edge = [&](int i, int j) { return 2L * static_cast<long>(grid.index(i, j)); };
  auto v_edge = [&](int i, int j) { return 2L * static_cast<long>(grid.index(i, j)) + 1; };
  auto edge_cells = [&](long id) {
    const std::size_t k = static_cast<std::size_t>(id / 2);
    const std::size_t other = id % 2 == 0 ? k + 1 : k + static_cast<std::size_t>(nx);
    return std::pair<std::size_t, std::size_t>{k, other};
  };
  auto midpoint = [&](long id) {
    const auto [a, b] = edge_cells(id);
    const Point pa = grid.center(static_cast<int>(a % nx), static_cast<int>(a / nx));
    const Point pb = grid.center(static_cast<int>(b % nx), static_cast<int>(b / nx));
    return Point{0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])};
  };

  std::vector<Segment> segments;
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      // Corners counter-clockwise from bottom-left; edge e joins corner e and corner e+1.
      const std::array<std::pair<int, int>, 4> corner{{{i, j}, {i + 1, j}, {i + 1, j + 1}, {i, j + 1}}};
      const std::array<long, 4> edge{h_edge(i, j), v_edge(i + 1, j), h_edge(i, j + 1), v_edge(i, j)};
      std::array<bool, 4> in{};
      int members = 0;
      for (int c = 0; c < 4; ++c) {
        in[c] = E(corner[c].first, corner[c].second) != 0;
        members += in[c] ? 1 : 0;
      }
      if (members == 0 || members == 4) {
        continue;
      }
      std::vector<std::pair<int, int>> pairs;
      if (members == 2 && in[0] == in[2]) {
        // Saddle: members stay connected, so each outside corner is cut off on its own.
        for (int c = 0; c < 4; ++c) {
          if (!in[c]) {
            pairs.emplace_back((c + 3) % 4, c);
          }
        }
      } else {
        std::vector<int> crossing;
        for (int e = 0; e < 4; ++e) {
          if (in[e] != in[(e + 1) % 4]) {
            crossing.push_back(e);
          }
        }
        pairs.emplace_back(crossing[0], crossing[1]);
      }
      for (auto [e1, e2] : pairs) {
        // Orient so that the member endpoint of the first edge lies on the left.
        const Point p = midpoint(edge[e1]);
        const Point q = midpoint(edge[e2]);
        const auto& cin = in[e1] ? corner[e1] : corner[(e1 + 1) % 4];
        const Point c = grid.center(cin.first, cin.second);
        const double cross = (q[0] - p[0]) * (c[1] - p[1]) - (q[1] - p[1]) * (c[0] - p[0]);
        if (cross > 0.0) {
          segments.push_back({edge[e1], edge[e2]});
        } else {
          segments.push_back({edge[e2], edge[e1]});
        }
      }
    }
  }

  std::unordered_map<long, std::size_t> by_start;
  by_start.reserve(segments.size());
  for (std::size_t s = 0; s < segments.size(); ++s) {
    by_start.emplace(segments[s].from, s);
  }
  std::vector<char> used(segments.size(), 0);
  std::vector<ContourLoop> loops;
  for (std::size_t s0 = 0; s0 < segments.size(); ++s0) {
    if (used[s0]) {
      continue;
    }
    ContourLoop loop;
    std::size_t s = s0;
    while (!used[s]) {
      used[s] = 1;
      const long id = segments[s].from;
      loop.points.push_back(midpoint(id));
      const auto [a, b] = edge_cells(id);
      loop.inside.push_back(E[a] ? a : b);
      loop.outside.push_back(E[a] ? b : a);
      const auto next = by_start.find(segments[s].to);
      if (next == by_start.end()) {
        break;
      }
      s = next->second;
    }
    loops.push_back(std::move(loop));
  }
  return loops;
}

std::vector<double> loop_curvature(const ContourLoop& loop) {
  constexpr int kHalf = 3;
  const std::size_t n = loop.points.size();
  std::vector<double> kappa;
  if (n < 2 * kHalf + 1) {
    return kappa;
  }
  kappa.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Point& o = loop.points[k];
    const Point& back = loop.points[(k + n - kHalf) % n];
    const Point& fwd = loop.points[(k + kHalf) % n];
    double tx = fwd[0] - back[0];
    double ty = fwd[1] - back[1];
    const double norm = std::hypot(tx, ty);
    tx /= norm;
    ty /= norm;
    // Least squares y = a + b x + c x^2 in the frame (tangent, left normal).
    std::array<double, 5> sx{};  // sums of x^0..x^4
    std::array<double, 3> sy{};  // sums of y, xy, x^2 y
    for (int m = -kHalf; m <= kHalf; ++m) {
      const Point& p = loop.points[(k + n + m) % n];
      const double x = (p[0] - o[0]) * tx + (p[1] - o[1]) * ty;
      const double y = -(p[0] - o[0]) * ty + (p[1] - o[1]) * tx;
      double xp = 1.0;
      for (int e = 0; e < 5; ++e) {
        sx[e] += xp;
        if (e < 3) {
          sy[e] += xp * y;
        }
        xp *= x;
      }
    }
    std::array<std::array<double, 4>, 3> m{{{sx[0], sx[1], sx[2], sy[0]},
                                            {sx[1], sx[2], sx[3], sy[1]},
                                            {sx[2], sx[3], sx[4], sy[2]}}};
    for (int col = 0; col < 3; ++col) {
      int pivot = col;
      for (int r = col + 1; r < 3; ++r) {
        if (std::abs(m[r][col]) > std::abs(m[pivot][col])) {
          pivot = r;
        }
      }
      std::swap(m[col], m[pivot]);
      for (int r = 0; r < 3; ++r) {
        if (r != col && m[col][col] != 0.0) {
          const double f = m[r][col] / m[col][col];
          for (int c = col; c < 4; ++c) {
            m[r][c] -= f * m[col][c];
          }
        }
      }
    }
    const double b = m[1][3] / m[1][1];
    const double c = m[2][3] / m[2][2];
    kappa[k] = 2.0 * c / std::pow(1.0 + b * b, 1.5);
  }
  return kappa;
}

CurvatureReport curvature_residual(const IndicatorField& E_new, const ScalarField& velocity, double lambda) {
  require_same_grid(E_new.grid(), velocity.grid(), "curvature_residual");
  CurvatureReport report;
  report.lambda = lambda;
  double total_len = 0.0;
  double sum_h = 0.0;
  double sum_v = 0.0;
  for (const auto& loop : extract_contours(E_new)) {
    const auto kappa = loop_curvature(loop);
    if (kappa.empty()) {
      continue;
    }
    const std::size_t n = loop.points.size();
    LoopCurvature lc;
    double cx = 0.0;
    double cy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const Point& prev = loop.points[(k + n - 1) % n];
      const Point& p = loop.points[k];
      const Point& next = loop.points[(k + 1) % n];
      const double w = 0.5 * (std::hypot(p[0] - prev[0], p[1] - prev[1]) +
                              std::hypot(next[0] - p[0], next[1] - p[1]));
      const double v = 0.5 * (velocity[loop.inside[k]] + velocity[loop.outside[k]]);
      lc.length += w;
      lc.mean_h += w * kappa[k];
      lc.mean_v += w * v;
      cx += w * p[0];
      cy += w * p[1];
    }
    total_len += lc.length;
    sum_h += lc.mean_h;
    sum_v += lc.mean_v;
    lc.mean_h /= lc.length;
    lc.mean_v /= lc.length;
    lc.centroid = {cx / lc.length, cy / lc.length};
    report.loops.push_back(lc);
  }
  if (total_len <= 0.0) {
    return report;
  }
  report.available = true;
  report.mean_h = sum_h / total_len;
  report.mean_v = sum_v / total_len;
  report.residual = std::abs(report.mean_h + report.mean_v - lambda) / std::max(1.0, std::abs(lambda));
  return report;
}

CurvatureReport curvature_residual(const StepResult& R, const IndicatorField& F, double h) {
  return curvature_residual(R.E_new, discrete_velocity(R.E_new, F, h), R.lambda);
}

std::vector<Component> components(const IndicatorField& E) {
  const auto& grid = E.grid();
  std::vector<int> label(E.size(), -1);
  std::vector<Component> out;
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < E.size(); ++seed) {
    if (!E[seed] || label[seed] >= 0) {
      continue;
    }
    const int id = static_cast<int>(out.size());
    Component comp;
    double sx = 0.0;
    double sy = 0.0;
    label[seed] = id;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t k = stack.back();
      stack.pop_back();
      const int i = static_cast<int>(k % grid.nx());
      const int j = static_cast<int>(k / grid.nx());
      ++comp.cells;
      const Point c = grid.center(i, j);
      sx += c[0];
      sy += c[1];
      for (int b = -1; b <= 1; ++b) {
        for (int a = -1; a <= 1; ++a) {
          if (!grid.contains(i + a, j + b)) {
            continue;
          }
          const std::size_t q = grid.index(i + a, j + b);
          if (E[q] && label[q] < 0) {
            label[q] = id;
            stack.push_back(q);
          }
        }
      }
    }
    comp.area = static_cast<double>(comp.cells) * grid.cell_area();
    comp.centroid = {sx / static_cast<double>(comp.cells), sy / static_cast<double>(comp.cells)};
    out.push_back(comp);
  }
  return out;
}

}  // namespace flatflow
