#include <doctest.h>

#include <cmath>

#include "flatflow/distance.hpp"
#include "flatflow/tv_solver.hpp"
#include "support.hpp"

using namespace flatflow;
using namespace flatflow::testing;

namespace {

/// Independent edge enumeration over all 8 neighbours, each undirected edge counted twice.
double brute_tv(const ScalarField& u) {
  const GridSpec& g = u.grid();
  const double wa = M_PI / 8.0;
  const double wd = M_PI / (8.0 * std::sqrt(2.0));
  double sum = 0.0;
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      for (int dj = -1; dj <= 1; ++dj) {
        for (int di = -1; di <= 1; ++di) {
          if ((di == 0 && dj == 0) || !g.contains(i + di, j + dj)) {
            continue;
          }
          const double w = (di != 0 && dj != 0) ? wd : wa;
          sum += w * g.dx() * std::abs(u(i, j) - u(i + di, j + dj));
        }
      }
    }
  }
  return 0.5 * sum;
}

double eps_solver(const GridSpec& g, double tol) { return 10.0 * tol * g.area(); }

}  // namespace

TEST_SUITE("tv_solver") {
  TEST_CASE("tv of a constant is zero") {
    const GridSpec g(17, 9, 0.3);
    CHECK(tv(ScalarField(g, 0.42)) == 0.0);
    CHECK(tv(IndicatorField(g, 1)) == 0.0);
  }

  TEST_CASE("tv of a cell-aligned rectangle") {
    const GridSpec g(40, 40, 0.05);
    const double wd = kStencil[2].weight;
    for (const auto& [k, m] : {std::pair{5, 9}, std::pair{12, 3}, std::pair{20, 20}}) {
      const IndicatorField R = block(g, 8, 6, 8 + k, 6 + m);
      const double a = k * g.dx();
      const double b = m * g.dx();
      const double closed = 2.0 * (a + b) * (M_PI / 8.0) * (1.0 + std::sqrt(2.0)) - 4.0 * wd * g.dx();
      CHECK(tv(R) == doctest::Approx(closed).epsilon(1e-12));
      CHECK(tv(R) == doctest::Approx(brute_tv(lift(R))).epsilon(1e-12));
    }
  }

  TEST_CASE("tv agrees with brute-force enumeration on random fields") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const GridSpec g(23, 31, 0.11);
    for (int trial = 0; trial < 5; ++trial) {
      ScalarField u(g);
      for (std::size_t k = 0; k < g.size(); ++k) {
        u[k] = u01(rng);
      }
      CHECK(tv(u) == doctest::Approx(brute_tv(u)).epsilon(1e-12));
    }
  }

  TEST_CASE("disk perimeter calibration") {
    const double r = 0.3;
    double kappa = 0.0;
    for (const int n : {128, 256, 512}) {
      const GridSpec g = unit_box(n);
      kappa = tv(disk(g, 0.0, 0.0, r)) / (2.0 * M_PI * r);
      MESSAGE("n = " << n << ": tv(disk)/(2 pi r) = " << kappa);
      CHECK(kappa >= 0.97);
      CHECK(kappa <= 4.0 / M_PI);
    }
    CHECK(kappa == doctest::Approx(1.0).epsilon(0.01));
  }

  TEST_CASE("relaxed energy examples") {
    const GridSpec g(20, 20, 0.1);
    CHECK(relaxed_energy(ScalarField(g, 0.0), ScalarField(g, 3.0)) == 0.0);
    CHECK(relaxed_energy(ScalarField(g, 1.0), ScalarField(g, -2.5)) == doctest::Approx(-2.5 * 4.0));

    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_real_distribution<double> gd(-5.0, 5.0);
    for (int trial = 0; trial < 5; ++trial) {
      ScalarField u(g);
      ScalarField c(g);
      double linear = 0.0;
      for (std::size_t k = 0; k < g.size(); ++k) {
        u[k] = u01(rng);
        c[k] = gd(rng);
        linear += u[k] * c[k] * g.cell_area();
      }
      CHECK(relaxed_energy(u, c) == doctest::Approx(brute_tv(u) + linear).epsilon(1e-12));
    }
  }

  TEST_CASE("flip_perimeter_delta matches recomputation") {
    std::mt19937_64 rng(10);
    const GridSpec g(24, 24, 0.1);
    IndicatorField E = random_mask(g, rng);
    std::uniform_int_distribution<int> cell(0, 23);
    for (int trial = 0; trial < 40; ++trial) {
      const int i = cell(rng);
      const int j = cell(rng);
      const double before = tv(E);
      const double delta = flip_perimeter_delta(E, i, j);
      E(i, j) ^= 1;
      CHECK(tv(E) - before == doctest::Approx(delta).epsilon(1e-10));
    }
  }

  TEST_CASE("uniform linear terms") {
    const GridSpec g(16, 16, 1.0 / 16);
    const auto params = SolverParams::for_grid(g);
    const SubproblemSolution pos = solve_box_tv(ScalarField(g, 1.0), params);
    CHECK(pos.converged);
    CHECK(pos.relaxed_energy == doctest::Approx(0.0).epsilon(1e-9));
    for (const double v : pos.u.values()) {
      CHECK(v == doctest::Approx(0.0));
    }
    const SubproblemSolution neg = solve_box_tv(ScalarField(g, -1.0), params);
    CHECK(neg.converged);
    CHECK(neg.relaxed_energy == doctest::Approx(-1.0).epsilon(1e-9));
    for (const double v : neg.u.values()) {
      CHECK(v == doctest::Approx(1.0));
    }
  }

  TEST_CASE("invalid inputs") {
    const GridSpec g(8, 8, 0.1);
    ScalarField bad(g, 0.0);
    bad(3, 3) = std::nan("");
    CHECK_THROWS_AS(solve_box_tv(bad, SolverParams::for_grid(g)), std::invalid_argument);
    SolverParams p = SolverParams::for_grid(g);
    p.tau *= 2.0;
    CHECK_THROWS_AS(solve_box_tv(ScalarField(g), p), std::invalid_argument);
  }

  TEST_CASE("curvature step of a disk") {
    const GridSpec g = unit_box(256);
    const double h = 4e-3;
    const IndicatorField F = disk(g, 0.0, 0.0, 0.3);
    const ScalarField sd = signed_distance(F);
    ScalarField gfield(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
      gfield[k] = sd[k] / h;
    }
    const SubproblemSolution sol = solve_box_tv(gfield, SolverParams::for_grid(g));
    CHECK(sol.converged);
    const IndicatorField E = threshold(sol.u, 0.5);
    const double r = disk_radius_from_area(integrate(E));
    CHECK(r >= 0.3 - 5 * g.dx());
    CHECK(r <= 0.3 + 5 * g.dx());
    CHECK(r < 0.3);
    // Continuum answer: radius 0.3 - h/0.3, so E sym F is an annulus of that width.
    const double r_step = 0.3 - h / 0.3;
    CHECK(std::abs(r - r_step) <= 2 * g.dx());
    const double annulus = M_PI * (0.3 * 0.3 - r_step * r_step);
    CHECK(std::abs(symdiff_measure(E, F) - annulus) <= M_PI * 0.3 * g.dx());
  }

  TEST_CASE("thresholding never raises the relaxed energy") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> shift(-3.0, 3.0);
    const GridSpec g = unit_box(64);
    const SolverParams params = SolverParams::for_grid(g);
    for (int trial = 0; trial < 6; ++trial) {
      const IndicatorField F = random_blobs(g, rng, 3);
      const ScalarField sd = signed_distance(F);
      const double h = 0.01;
      const double lambda = shift(rng);
      ScalarField gfield(g);
      for (std::size_t k = 0; k < g.size(); ++k) {
        gfield[k] = sd[k] / h - lambda;
      }
      const SubproblemSolution sol = solve_box_tv(gfield, params);
      CHECK(sol.converged);
      for (const double s : {0.3, 0.5, 0.7}) {
        CHECK(relaxed_energy(threshold(sol.u, s), gfield) <=
              relaxed_energy(sol.u, gfield) + eps_solver(g, params.tol));
      }
    }
  }

  TEST_CASE("relaxed energy settles monotonically") {
    const GridSpec g = unit_box(64);
    const IndicatorField F = disk(g, 0.1, -0.1, 0.45);
    const ScalarField sd = signed_distance(F);
    ScalarField gfield(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
      gfield[k] = sd[k] / 0.01 - 1.5;
    }
    const SubproblemSolution sol = solve_box_tv(gfield, SolverParams::for_grid(g));
    REQUIRE(sol.converged);
    const auto& e = sol.energy_history;
    REQUIRE(e.size() >= 4);
    int rises = 0;
    for (std::size_t k = e.size() / 2; k + 1 < e.size(); ++k) {
      if (e[k + 1] > e[k] + 1e-8 * std::max(1.0, std::abs(e[k]))) {
        ++rises;
      }
    }
    CHECK(rises == 0);
    CHECK(e.back() == doctest::Approx(sol.relaxed_energy));
  }

  TEST_CASE("comparison principle for ordered linear terms") {
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> gd(-4.0, 4.0);
    std::uniform_real_distribution<double> bump(0.0, 2.0);
    const GridSpec g(32, 32, 1.0 / 16);
    const SolverParams params = SolverParams::for_grid(g);
    for (int trial = 0; trial < 5; ++trial) {
      ScalarField g1(g);
      ScalarField g2(g);
      for (std::size_t k = 0; k < g.size(); ++k) {
        g1[k] = gd(rng);
        g2[k] = g1[k] + bump(rng);
      }
      const auto s1 = solve_box_tv(g1, params);
      const auto s2 = solve_box_tv(g2, params);
      CHECK(integrate(s1.u) >= integrate(s2.u) - eps_solver(g, params.tol));
    }
  }

  TEST_CASE("warm start reaches the same minimizer faster") {
    const GridSpec g = unit_box(64);
    const ScalarField sd = signed_distance(disk(g, 0.0, 0.0, 0.5));
    ScalarField g1(g);
    ScalarField g2(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
      g1[k] = sd[k] / 0.01 - 2.0;
      g2[k] = sd[k] / 0.01 - 2.05;
    }
    const SolverParams params = SolverParams::for_grid(g);
    const auto first = solve_box_tv(g1, params);
    const auto cold = solve_box_tv(g2, params);
    const auto warm = solve_box_tv(g2, params, &first);
    CHECK(warm.iterations <= cold.iterations);
    CHECK(threshold(warm.u, 0.5) == threshold(cold.u, 0.5));
  }
}
