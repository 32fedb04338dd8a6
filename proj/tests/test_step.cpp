#include <doctest.h>

#include <cmath>

#include "flatflow/diagnostics.hpp"
#include "flatflow/distance.hpp"
#include "flatflow/reference.hpp"
#include "flatflow/step.hpp"
#include "support.hpp"

using namespace flatflow;
using namespace flatflow::testing;

namespace {

constexpr double kUnitRadius = 0.564190;

double eps_solver(const GridSpec& g, double tol = 1e-6) { return 10.0 * tol * g.area(); }

StepParams params_for(double h) {
  StepParams p;
  p.h = h;
  return p;
}

void check_dichotomy(const StepResult& r, double h, double cell_area) {
  if (r.saturated) {
    CHECK(std::abs(std::abs(r.lambda) - 1.0 / std::sqrt(h)) <= 1e-12 / std::sqrt(h));
    CHECK(r.volume != 1.0);
    CHECK(std::signbit(r.lambda) == std::signbit(1.0 - r.volume));
  } else {
    CHECK(std::abs(r.volume - 1.0) <= cell_area * (1.0 + 1e-12));
    CHECK(std::abs(r.lambda) < 1.0 / std::sqrt(h));
  }
}

/// One member cell with an outside 4-neighbour (erosion) or one outside cell next to a member
/// (dilation), picked at random.
IndicatorField perturb(const IndicatorField& E, std::mt19937_64& rng) {
  const auto pairs = interface_pairs(E);
  std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
  const InterfacePair p = pairs[pick(rng)];
  IndicatorField out = E;
  if (rng() % 2 == 0) {
    out[p.inside] = 0;
  } else {
    out[p.outside] = 1;
  }
  return out;
}

}  // namespace

TEST_SUITE("step") {
  TEST_CASE("energy terms") {
    const GridSpec g = unit_box(64);
    const double h = 1e-3;
    const IndicatorField F = disk(g, 0.0, 0.0, kUnitRadius);
    const ScalarField sd = signed_distance(F);
    double inside = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      inside += F[k] * sd[k] * g.cell_area();
    }
    const double per = tv(F);
    const double pen = std::abs(integrate(F) - 1.0) / std::sqrt(h);
    CHECK(fh_energy(F, F, h) == doctest::Approx(per + inside / h + pen).epsilon(1e-12));
    CHECK(inside < 0.0);
    CHECK(fh_energy(IndicatorField(g), F, h) == doctest::Approx(1.0 / std::sqrt(h)).epsilon(1e-12));

    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 5; ++trial) {
      const IndicatorField E = random_blobs(g, rng, 2);
      double transport = 0.0;
      for (std::size_t k = 0; k < g.size(); ++k) {
        transport += E[k] * sd[k] * g.cell_area();
      }
      const EnergyTerms t = fh_terms(E, sd, h);
      CHECK(t.perimeter == doctest::Approx(tv(E)));
      CHECK(t.transport == doctest::Approx(transport / h).epsilon(1e-12));
      CHECK(t.penalty == doctest::Approx(std::abs(integrate(E) - 1.0) / std::sqrt(h)).epsilon(1e-12));
      CHECK(fh_energy(E, F, h) == doctest::Approx(t.total()).epsilon(1e-12));
    }
  }

  TEST_CASE("boundary band and interface pairs") {
    const GridSpec g(12, 12, 1.0);
    const IndicatorField E = block(g, 4, 4, 8, 7);
    const IndicatorField band = boundary_band(E);
    // 4x3 block: 10 boundary members, 14 outside 4-neighbours.
    CHECK(count(band) == 24);
    CHECK(interface_pairs(E).size() == 14);
    for (const auto& p : interface_pairs(E)) {
      CHECK(E[p.inside] == 1);
      CHECK(E[p.outside] == 0);
    }
  }

  TEST_CASE("discrete velocity") {
    const GridSpec g = unit_box(128);
    const double h = 0.01;
    const double r = 0.4;
    const IndicatorField F = disk(g, 0.0, 0.0, r);

    const ScalarField v0 = discrete_velocity(F, F, h);
    const IndicatorField band = boundary_band(F);
    for (std::size_t k = 0; k < g.size(); ++k) {
      CHECK(std::abs(v0[k]) <= g.dx() / (2 * h) + 1e-12);
      if (!band[k]) {
        CHECK(v0[k] == 0.0);
      }
    }

    const double delta = 3 * g.dx();
    const IndicatorField grown = disk(g, 0.0, 0.0, r + delta);
    const ScalarField v = discrete_velocity(grown, F, h);
    const IndicatorField gband = boundary_band(grown);
    // Band cells straddle the interface by half a cell on either side; the pair average sits on it.
    for (const auto& p : interface_pairs(grown)) {
      CHECK(std::abs(0.5 * (v[p.inside] + v[p.outside]) - delta / h) <= g.dx() / h);
    }
    CHECK(mean_interface_velocity(grown, v) == doctest::Approx(delta / h).epsilon(0.1));

    const IndicatorField shrunk = disk(g, 0.0, 0.0, r - delta);
    const ScalarField vs = discrete_velocity(shrunk, F, h);
    const IndicatorField sband = boundary_band(shrunk);
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (sband[k] && F[k] && !shrunk[k]) {
        CHECK(vs[k] < 0.0);
      }
      if (gband[k] && grown[k] && !F[k]) {
        CHECK(v[k] > 0.0);
      }
    }
  }

  TEST_CASE("mean curvature of a disk") {
    const GridSpec g = unit_box(256);
    CHECK(mean_curvature(disk(g, 0.0, 0.0, 0.4)) == doctest::Approx(1.0 / 0.4).epsilon(0.01));
  }

  TEST_CASE("invalid previous sets are rejected") {
    const GridSpec g = unit_box(32);
    const StepParams p = params_for(1e-3);
    CHECK_THROWS_AS(minimize_Fh(IndicatorField(g), p), std::invalid_argument);
    CHECK_THROWS_AS(minimize_Fh(IndicatorField(g, 1), p), std::invalid_argument);
    CHECK_THROWS_AS(minimize_Fh(block(g, 1, 10, 8, 20), p), std::invalid_argument);
  }

  TEST_CASE("unit disk is a fixed point up to the lattice") {
    const GridSpec g = unit_box(256);
    const double h = 1e-3;
    const IndicatorField F = disk(g, 0.0, 0.0, kUnitRadius);
    const StepResult r = minimize_Fh(F, params_for(h));
    const double per = tv(F);
    CHECK(symdiff_measure(r.E_new, F) <= 8 * g.dx() * per);
    CHECK(std::abs(r.volume - 1.0) <= std::sqrt(h) * per);
    CHECK_FALSE(r.saturated);
    CHECK(std::abs(r.volume - 1.0) <= g.cell_area());
    CHECK(std::abs(r.lambda) < 1.0 / std::sqrt(h));
    CHECK(r.volume == doctest::Approx(integrate(r.E_new)).epsilon(1e-14));
    CHECK(r.perimeter_d == doctest::Approx(tv(r.E_new)).epsilon(1e-14));
    CHECK(dissipation_residual(F, r, h) <= eps_solver(g));
    check_dichotomy(r, h, g.cell_area());

    std::mt19937_64 rng(99);
    const double e0 = fh_energy(r.E_new, F, h);
    for (int trial = 0; trial < 20; ++trial) {
      CHECK(fh_energy(perturb(r.E_new, rng), F, h) >= e0 - eps_solver(g));
    }
  }

  TEST_CASE("two disks: the small one shrinks and the large one grows") {
    const GridSpec g = unit_box(128);
    const double h = 0.02;
    const double r1 = 0.3;
    const double r2 = 0.477797;
    const IndicatorField F = united(disk(g, -0.5, -0.5, r1), disk(g, 0.33, 0.33, r2));
    const StepResult r = minimize_Fh(F, params_for(h));
    check_dichotomy(r, h, g.cell_area());
    CHECK(dissipation_residual(F, r, h) <= eps_solver(g));

    const auto before = components(F);
    const auto after = components(r.E_new);
    REQUIRE(before.size() == 2);
    REQUIRE(after.size() == 2);
    const auto small = [](const std::vector<Component>& c) { return c[0].area < c[1].area ? 0 : 1; };
    const auto& s0 = before[small(before)];
    const auto& l0 = before[1 - small(before)];
    const auto& s1 = after[small(after)];
    const auto& l1 = after[1 - small(after)];

    const auto rate = multiball_rhs({r1, r2});
    CHECK(rate[0] < 0.0);
    CHECK(rate[1] > 0.0);
    CHECK(s1.area < s0.area);
    CHECK(l1.area > l0.area);
    // The multiplier sits between the two curvatures, as the oracle's <H> = 2/(r1 + r2) does.
    CHECK(r.lambda - 1.0 / r1 < 0.0);
    CHECK(r.lambda - 1.0 / r2 > 0.0);
    CHECK(r.lambda == doctest::Approx(2.0 / (r1 + r2)).epsilon(0.1));

    std::mt19937_64 rng(5);
    const double e0 = fh_energy(r.E_new, F, h);
    for (int trial = 0; trial < 20; ++trial) {
      CHECK(fh_energy(perturb(r.E_new, rng), F, h) >= e0 - eps_solver(g));
    }
  }

  TEST_CASE("small set with a narrow multiplier range saturates") {
    const GridSpec g = unit_box(64);
    const double h = 0.5;
    const IndicatorField F = disk(g, 0.0, 0.0, 0.3);
    const StepResult r = minimize_Fh(F, params_for(h));
    CHECK(r.saturated);
    CHECK(r.lambda == doctest::Approx(1.0 / std::sqrt(h)));
    check_dichotomy(r, h, g.cell_area());
    CHECK(dissipation_residual(F, r, h) <= eps_solver(g));
  }

  TEST_CASE("random sets satisfy dichotomy, dissipation and single-flip minimality") {
    std::mt19937_64 rng(2718);
    std::uniform_real_distribution<double> small(0.2, 0.35);
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    const GridSpec g = unit_box(64);
    for (const double h : {0.005, 0.02, 0.1}) {
      for (const bool unit : {true, false}) {
        IndicatorField F(g);
        if (unit) {
          const double r1 = small(rng);
          const double r2 = std::sqrt(1.0 / M_PI - r1 * r1);
          F = united(disk(g, -0.5 + jitter(rng), -0.5 + jitter(rng), r1),
                     disk(g, 0.3 + jitter(rng), 0.3 + jitter(rng), r2));
        } else {
          F = random_blobs(g, rng, 3, 6);
        }
        const StepResult r = minimize_Fh(F, params_for(h));
        check_dichotomy(r, h, g.cell_area());
        CHECK(dissipation_residual(F, r, h) <= eps_solver(g));
        for (const auto& s : r.samples) {
          if (s.converged) {
            CHECK(s.coarea_excess <= eps_solver(g));
          }
        }
        if (count(r.E_new) == 0) {
          continue;
        }
        const double e0 = fh_energy(r.E_new, F, h);
        for (int trial = 0; trial < 20; ++trial) {
          CHECK(fh_energy(perturb(r.E_new, rng), F, h) >= e0 - eps_solver(g));
        }
      }
    }
  }

  TEST_CASE("steps are deterministic") {
    const GridSpec g = unit_box(64);
    std::mt19937_64 rng(6);
    const IndicatorField F = random_blobs(g, rng, 2, 6);
    const StepResult a = minimize_Fh(F, params_for(0.01));
    const StepResult b = minimize_Fh(F, params_for(0.01));
    CHECK(a.E_new == b.E_new);
    CHECK(a.lambda == b.lambda);
    CHECK(a.velocity == b.velocity);
  }
}
