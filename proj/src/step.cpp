#include "flatflow/step.hpp"

#include <algorithm>
#include <deque>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>

#include "flatflow/distance.hpp"

namespace flatflow {
namespace {

enum class VolumeClass { below, inside, above };

struct Sample {
  double lambda;
  double volume;
  VolumeClass cls;
  IndicatorField set;
  std::shared_ptr<SubproblemSolution> solution;
};

constexpr std::array<double, 3> kCoareaLevels{0.3, 0.5, 0.7};

double coarea_excess(const ScalarField& u, const ScalarField& g) {
  const double relaxed = relaxed_energy(u, g);
  double worst = -std::numeric_limits<double>::infinity();
  for (double s : kCoareaLevels) {
    worst = std::max(worst, relaxed_energy(threshold(u, s), g) - relaxed);
  }
  return worst;
}

class MultiplierSearch {
public:
  MultiplierSearch(const ScalarField& g0, const StepParams& params, const SubproblemSolution* warm,
                   StepResult& out)
      : g0_(g0), params_(params), warm_(warm), out_(out) {}

  const Sample& classify(double lambda) {
    for (const auto& s : samples_) {
      if (s.lambda == lambda) {
        return s;
      }
    }
    const SubproblemSolution* start = warm_;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : samples_) {
      if (std::abs(s.lambda - lambda) < best) {
        best = std::abs(s.lambda - lambda);
        start = s.solution.get();
      }
    }
    ScalarField g = g0_;
    for (auto& v : g.values()) {
      v -= lambda;
    }
    auto sol = std::make_shared<SubproblemSolution>(solve_box_tv(g, params_.solver, start));
    IndicatorField set = threshold(sol->u, 0.5);
    const double volume = integrate(set);

    LambdaSample record;
    record.lambda = lambda;
    record.volume = volume;
    record.iterations = sol->iterations;
    record.converged = sol->converged;
    record.coarea_excess = coarea_excess(sol->u, g);
    out_.samples.push_back(record);
    out_.solver_iterations += sol->iterations;
    out_.solver_converged = out_.solver_converged && sol->converged;

    VolumeClass cls = VolumeClass::inside;
    if (volume < 1.0 - params_.lambda_tol) {
      cls = VolumeClass::below;
    } else if (volume > 1.0 + params_.lambda_tol) {
      cls = VolumeClass::above;
    }
    samples_.push_back({lambda, volume, cls, std::move(set), std::move(sol)});
    return samples_.back();
  }

  const std::deque<Sample>& samples() const { return samples_; }

private:
  const ScalarField& g0_;
  const StepParams& params_;
  const SubproblemSolution* warm_;
  StepResult& out_;
  std::deque<Sample> samples_;
};

// Marginal change of perimeter + transport when cell k is flipped.
double flip_delta(const IndicatorField& set, const ScalarField& g0, int i, int j) {
  const double transport = g0(i, j) * set.grid().cell_area();
  return flip_perimeter_delta(set, i, j) + (set(i, j) ? -transport : transport);
}

// Flips cells of `pool` one at a time (cheapest first) until the member count reaches target.
IndicatorField greedy_round(IndicatorField set, const std::vector<std::size_t>& pool,
                            std::size_t target, const ScalarField& g0) {
  const auto& grid = set.grid();
  std::size_t n = count(set);
  std::vector<double> marginal(pool.size());
  std::vector<char> used(pool.size(), 0);
  auto eval = [&](std::size_t p) {
    const int i = static_cast<int>(pool[p] % grid.nx());
    const int j = static_cast<int>(pool[p] / grid.nx());
    marginal[p] = flip_delta(set, g0, i, j);
  };
  for (std::size_t p = 0; p < pool.size(); ++p) {
    eval(p);
  }
  while (n != target) {
    std::size_t best = pool.size();
    for (std::size_t p = 0; p < pool.size(); ++p) {
      if (!used[p] && (best == pool.size() || marginal[p] < marginal[best])) {
        best = p;
      }
    }
    if (best == pool.size()) {
      break;
    }
    used[best] = 1;
    set[pool[best]] = set[pool[best]] ? 0 : 1;
    n = set[pool[best]] ? n + 1 : n - 1;
    // Only cells within one stencil step see a changed marginal.
    const long bi = static_cast<long>(pool[best] % grid.nx());
    const long bj = static_cast<long>(pool[best] / grid.nx());
    for (std::size_t p = 0; p < pool.size(); ++p) {
      const long pi = static_cast<long>(pool[p] % grid.nx());
      const long pj = static_cast<long>(pool[p] / grid.nx());
      if (!used[p] && std::abs(pi - bi) <= 1 && std::abs(pj - bj) <= 1) {
        eval(p);
      }
    }
  }
  return set;
}

// Single-cell descent on F_h near the interface that keeps ||E| - 1| <= tol.
int polish(IndicatorField& set, const ScalarField& g0, double h, double tol) {
  const auto& grid = set.grid();
  const double cell = grid.cell_area();
  const double slope = 1.0 / std::sqrt(h);
  double volume = integrate(set);
  int flips = 0;
  for (int pass = 0; pass < 20; ++pass) {
    int changed = 0;
    for (int j = 1; j + 1 < grid.ny(); ++j) {
      for (int i = 1; i + 1 < grid.nx(); ++i) {
        const bool in = set(i, j) != 0;
        bool mixed = false;
        for (int b = -1; b <= 1 && !mixed; ++b) {
          for (int a = -1; a <= 1; ++a) {
            if ((set(i + a, j + b) != 0) != in) {
              mixed = true;
              break;
            }
          }
        }
        if (!mixed) {
          continue;
        }
        const double next_volume = in ? volume - cell : volume + cell;
        if (std::abs(next_volume - 1.0) > tol) {
          continue;
        }
        const double delta = flip_delta(set, g0, i, j) +
                             slope * (std::abs(next_volume - 1.0) - std::abs(volume - 1.0));
        if (delta < -1e-12) {
          set(i, j) = in ? 0 : 1;
          volume = next_volume;
          ++changed;
        }
      }
    }
    flips += changed;
    if (changed == 0) {
      break;
    }
  }
  return flips;
}

void validate_previous(const IndicatorField& F) {
  const std::size_t n = count(F);
  if (n == 0) {
    throw std::invalid_argument("minimize_Fh: previous set is empty");
  }
  if (n == F.size()) {
    throw std::invalid_argument("minimize_Fh: previous set fills the grid");
  }
  if (frame_distance(F) < 3) {
    throw std::invalid_argument("minimize_Fh: previous set is closer than 3 cells to the frame");
  }
}

}  // namespace

StepParams StepParams::resolved(const GridSpec& grid) const {
  StepParams out = *this;
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw std::invalid_argument("step: h must be positive");
  }
  if (out.lambda_tol == 0.0) {
    out.lambda_tol = grid.cell_area();
  }
  if (!(out.lambda_tol > 0.0)) {
    throw std::invalid_argument("step: lambda_tol must be positive");
  }
  if (out.max_bisections < 0) {
    throw std::invalid_argument("step: max_bisections must be nonnegative");
  }
  if (!(out.lambda_resolution > 0.0)) {
    throw std::invalid_argument("step: lambda_resolution must be positive");
  }
  out.solver = solver.resolved(grid);
  return out;
}

EnergyTerms fh_terms(const IndicatorField& E, const ScalarField& sd_F, double h) {
  require_same_grid(E.grid(), sd_F.grid(), "fh_terms");
  EnergyTerms terms;
  terms.perimeter = tv(E);
  ScalarField masked(E.grid());
  for (std::size_t k = 0; k < E.size(); ++k) {
    masked[k] = E[k] ? sd_F[k] : 0.0;
  }
  terms.transport = integrate(masked) / h;
  terms.penalty = std::abs(integrate(E) - 1.0) / std::sqrt(h);
  return terms;
}

double fh_energy(const IndicatorField& E, const IndicatorField& F, double h) {
  return fh_terms(E, signed_distance(F), h).total();
}

IndicatorField boundary_band(const IndicatorField& E) {
  const auto& grid = E.grid();
  IndicatorField band(grid);
  constexpr int di[4] = {1, -1, 0, 0};
  constexpr int dj[4] = {0, 0, 1, -1};
  for (int j = 0; j < grid.ny(); ++j) {
    for (int i = 0; i < grid.nx(); ++i) {
      if (!E(i, j)) {
        continue;
      }
      for (int d = 0; d < 4; ++d) {
        const int a = i + di[d];
        const int b = j + dj[d];
        if (grid.contains(a, b) && !E(a, b)) {
          band(i, j) = 1;
          band(a, b) = 1;
        }
      }
    }
  }
  return band;
}

ScalarField discrete_velocity(const IndicatorField& E_new, const IndicatorField& F, double h) {
  require_same_grid(E_new.grid(), F.grid(), "discrete_velocity");
  const ScalarField sd = signed_distance(F);
  const IndicatorField band = boundary_band(E_new);
  ScalarField v(E_new.grid());
  for (std::size_t k = 0; k < v.size(); ++k) {
    v[k] = band[k] ? sd[k] / h : 0.0;
  }
  return v;
}

std::vector<InterfacePair> interface_pairs(const IndicatorField& E) {
  const auto& grid = E.grid();
  std::vector<InterfacePair> pairs;
  constexpr int di[4] = {1, -1, 0, 0};
  constexpr int dj[4] = {0, 0, 1, -1};
  for (int j = 0; j < grid.ny(); ++j) {
    for (int i = 0; i < grid.nx(); ++i) {
      if (!E(i, j)) {
        continue;
      }
      for (int d = 0; d < 4; ++d) {
        const int a = i + di[d];
        const int b = j + dj[d];
        if (grid.contains(a, b) && !E(a, b)) {
          pairs.push_back({grid.index(i, j), grid.index(a, b)});
        }
      }
    }
  }
  return pairs;
}

double mean_interface_velocity(const IndicatorField& E, const ScalarField& velocity) {
  require_same_grid(E.grid(), velocity.grid(), "mean_interface_velocity");
  const auto pairs = interface_pairs(E);
  if (pairs.empty()) {
    return 0.0;
  }
  double sum = 0.0;
  for (const auto& p : pairs) {
    sum += 0.5 * (velocity[p.inside] + velocity[p.outside]);
  }
  return sum / static_cast<double>(pairs.size());
}

double mean_curvature(const IndicatorField& E) {
  const double per = tv(E);
  if (per <= 0.0) {
    return 0.0;
  }
  return 2.0 * std::numbers::pi * euler_characteristic(E) / per;
}

namespace {

enum class Outcome { admissible, jump, saturated, non_monotone };

struct Located {
  Outcome outcome;
  const Sample* hit = nullptr;    // admissible or saturated sample
  const Sample* below = nullptr;  // jump bracket
  const Sample* above = nullptr;
};

// Walks from `start` toward unit volume in doubling strides, then bisects the first bracket.
// Returns the admissible sample nearest `start`, a resolved jump, or saturation at the cap.
Located locate(MultiplierSearch& search, double start, double cap, const StepParams& params,
               int& budget, int& bisections) {
  const Sample* s = &search.classify(std::clamp(start, -cap, cap));
  if (s->cls == VolumeClass::inside) {
    return {Outcome::admissible, s};
  }
  const VolumeClass side = s->cls;
  const double dir = side == VolumeClass::below ? 1.0 : -1.0;
  const Sample* near = s;
  const Sample* far = nullptr;
  double stride = params.lambda_stride;
  while (far == nullptr) {
    const double x = std::clamp(s->lambda + dir * stride, -cap, cap);
    const Sample* cur = &search.classify(x);
    if (cur->cls == side) {
      if (x == cap || x == -cap) {
        return {Outcome::saturated, cur};
      }
      near = cur;
      stride *= 2.0;
    } else {
      far = cur;
    }
  }
  // Bisection stops at lambda_resolution, or once two successive midpoints reproduce the bracket
  // sets (solves next to a breakpoint are degenerate and slow).
  int repeats = 0;
  while (std::abs(far->lambda - near->lambda) > params.lambda_resolution && budget > 0 && repeats < 2) {
    const Sample* mid = &search.classify(0.5 * (near->lambda + far->lambda));
    --budget;
    ++bisections;
    if (mid->cls == side) {
      repeats = mid->set == near->set ? repeats + 1 : 0;
      near = mid;
    } else if (mid->cls == VolumeClass::inside || far->cls != VolumeClass::inside) {
      repeats = mid->set == far->set && mid->cls != VolumeClass::inside ? repeats + 1 : 0;
      far = mid;
    } else {
      return {Outcome::non_monotone, mid};
    }
  }
  if (far->cls == VolumeClass::inside) {
    return {Outcome::admissible, far};
  }
  if (side == VolumeClass::below) {
    return {Outcome::jump, nullptr, near, far};
  }
  return {Outcome::jump, nullptr, far, near};
}

// Multiplier where the bracketing sets of a jump of V have equal energy, kept inside the bracket.
double jump_crossing(const Sample& below, const Sample& above, const ScalarField& sd, double h) {
  const auto small = fh_terms(below.set, sd, h);
  const auto large = fh_terms(above.set, sd, h);
  const double crossing =
      (large.perimeter + large.transport - small.perimeter - small.transport) / (above.volume - below.volume);
  return std::clamp(crossing, below.lambda, above.lambda);
}

// Unit volume reached at cell level between the nested bracketing sets, grown from the inner one
// or shrunk from the outer one, whichever has the lower energy.
IndicatorField round_jump(const Sample& below, const Sample& above, const ScalarField& g0,
                          const ScalarField& sd, double h) {
  const GridSpec& grid = g0.grid();
  std::vector<std::size_t> pool;
  IndicatorField inner(grid);
  IndicatorField outer(grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    inner[k] = below.set[k] && above.set[k];
    outer[k] = below.set[k] || above.set[k];
    if (inner[k] != outer[k]) {
      pool.push_back(k);
    }
  }
  const auto target = static_cast<std::size_t>(std::llround(1.0 / grid.cell_area()));
  IndicatorField grown = greedy_round(inner, pool, target, g0);
  IndicatorField shrunk = greedy_round(outer, pool, target, g0);
  return fh_terms(shrunk, sd, h).total() < fh_terms(grown, sd, h).total() ? shrunk : grown;
}

}  // namespace

StepResult minimize_Fh(const IndicatorField& F, const StepParams& raw, const SubproblemSolution* warm) {
  validate_previous(F);
  const GridSpec& grid = F.grid();
  const StepParams params = raw.resolved(grid);
  const double h = params.h;
  const double cap = 1.0 / std::sqrt(h);
  const ScalarField sd = signed_distance(F);
  ScalarField g0 = sd;
  for (auto& v : g0.values()) {
    v /= h;
  }

  std::optional<SubproblemSolution> seed;
  if (warm == nullptr) {
    seed.emplace(grid);
    seed->u = lift(F);
    warm = &*seed;
  }
  StepResult result(grid);
  MultiplierSearch search(g0, params, warm, result);
  int budget = params.max_bisections;

  // For a volume-preserving move the boundary average of v vanishes, so <H> of F is the target.
  result.lambda_target = mean_curvature(F);
  Located found = locate(search, result.lambda_target, cap, params, budget, result.bisections);

  if (found.outcome == Outcome::admissible) {
    // Re-aim at the boundary average of H + v of the candidate itself.
    const Sample* first = found.hit;
    const ScalarField v = discrete_velocity(first->set, F, h);
    const double target = mean_curvature(first->set) + mean_interface_velocity(first->set, v);
    if (std::abs(target - first->lambda) > params.lambda_resolution) {
      result.lambda_target = target;
      const Located second = locate(search, target, cap, params, budget, result.bisections);
      if (second.outcome == Outcome::admissible) {
        found = second;
      }
    }
  }

  std::shared_ptr<SubproblemSolution> chosen;
  switch (found.outcome) {
    case Outcome::non_monotone: {
      const Sample* best = nullptr;
      for (const auto& s : search.samples()) {
        if (best == nullptr || std::abs(s.volume - 1.0) < std::abs(best->volume - 1.0)) {
          best = &s;
        }
      }
      result.warnings.push_back("V(lambda) not monotone across samples; kept sample closest to unit volume");
      result.E_new = best->set;
      result.lambda = best->lambda;
      chosen = best->solution;
      break;
    }
    case Outcome::saturated:
      result.saturated = true;
      result.E_new = found.hit->set;
      result.lambda = found.hit->lambda;
      chosen = found.hit->solution;
      break;
    case Outcome::admissible:
      result.E_new = found.hit->set;
      result.lambda = found.hit->lambda;
      chosen = found.hit->solution;
      break;
    case Outcome::jump: {
      result.lambda = jump_crossing(*found.below, *found.above, sd, h);
      result.E_new = round_jump(*found.below, *found.above, g0, sd, h);
      result.rounded = true;
      chosen = found.above->solution;
      if (std::abs(integrate(result.E_new) - 1.0) > params.lambda_tol) {
        result.warnings.push_back("cell rounding could not reach unit volume inside the bracket");
      }
      break;
    }
  }
  if (!result.saturated) {
    result.polish_flips = polish(result.E_new, g0, h, params.lambda_tol);
  }

  // A jump of V often means a whole component switching at once. The volume-constrained minimizer
  // is then no threshold set of the full problem, so search again with cells farther than sqrt(h)
  // from the boundary of F held fixed.
  std::optional<IndicatorField> confined;
  double confined_lambda = 0.0;
  bool confined_rounded = false;
  if (found.outcome == Outcome::jump && std::sqrt(h) >= 3.0 * grid.dx()) {
    const double delta = std::sqrt(h);
    const double force = 100.0 / grid.dx() + cap;
    ScalarField g_band = g0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (sd[k] < -delta) {
        g_band[k] = -force;
      } else if (sd[k] > delta) {
        g_band[k] = force;
      }
    }
    MultiplierSearch local(g_band, params, chosen.get(), result);
    int local_budget = params.max_bisections;
    const Located hit = locate(local, result.lambda, cap, params, local_budget, result.bisections);
    if (hit.outcome == Outcome::admissible) {
      confined = hit.hit->set;
      confined_lambda = hit.hit->lambda;
    } else if (hit.outcome == Outcome::jump) {
      confined = round_jump(*hit.below, *hit.above, g0, sd, h);
      confined_lambda = jump_crossing(*hit.below, *hit.above, sd, h);
      confined_rounded = true;
    }
    if (confined) {
      polish(*confined, g0, h, params.lambda_tol);
    }
  }

  // Any set competes for the minimum of F_h: the sets bracketing a jump of V and F itself.
  // A winner off unit volume carries the multiplier sgn(1 - |E|)/sqrt(h).
  double best = fh_terms(result.E_new, sd, h).total();
  auto compete = [&](const IndicatorField& set, bool is_previous, std::optional<double> lambda = {},
                     bool rounded = false) {
    const double e = fh_terms(set, sd, h).total();
    if (!(e < best)) {
      return;
    }
    best = e;
    result.E_new = set;
    result.kept_previous = is_previous;
    result.rounded = rounded;
    const double v = integrate(set);
    if (std::abs(v - 1.0) > params.lambda_tol) {
      result.saturated = true;
      result.lambda = v < 1.0 ? cap : -cap;
    } else if (lambda) {
      result.saturated = false;
      result.lambda = *lambda;
    } else if (result.saturated) {
      result.saturated = false;
      result.lambda = std::clamp(result.lambda_target, -cap, cap);
    }
  };
  if (found.outcome == Outcome::jump) {
    compete(found.below->set, false);
    compete(found.above->set, false);
  }
  if (confined) {
    compete(*confined, false, confined_lambda, confined_rounded);
  }
  compete(F, true);

  result.volume = integrate(result.E_new);
  result.energy_terms = fh_terms(result.E_new, sd, h);
  result.perimeter_d = result.energy_terms.perimeter;
  result.velocity = discrete_velocity(result.E_new, F, h);
  result.solution = *chosen;
  if (!result.solver_converged) {
    result.warnings.push_back("subproblem solver hit max_iters before reaching tol");
  }
  return result;
}

}  // namespace flatflow
