#include "flatflow/reference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "flatflow/errors.hpp"

namespace flatflow {
namespace {

std::vector<double> rhs_active(const std::vector<double>& r, const std::vector<char>& alive) {
  double sum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (alive[i]) {
      if (!(r[i] > 0.0)) {
        throw NumericalError("reference: radius reached zero before removal");
      }
      sum += r[i];
      ++n;
    }
  }
  std::vector<double> out(r.size(), 0.0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (alive[i]) {
      out[i] = n / sum - 1.0 / r[i];
    }
  }
  return out;
}

double active_area(const std::vector<double>& r, const std::vector<char>& alive) {
  double a = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (alive[i]) {
      a += std::numbers::pi * r[i] * r[i];
    }
  }
  return a;
}

std::vector<double> rk4_step(const std::vector<double>& r, const std::vector<char>& alive, double dt) {
  auto axpy = [&](const std::vector<double>& k, double s) {
    std::vector<double> out(r);
    for (std::size_t i = 0; i < r.size(); ++i) {
      out[i] += s * k[i];
    }
    return out;
  };
  const auto k1 = rhs_active(r, alive);
  const auto k2 = rhs_active(axpy(k1, 0.5 * dt), alive);
  const auto k3 = rhs_active(axpy(k2, 0.5 * dt), alive);
  const auto k4 = rhs_active(axpy(k3, dt), alive);
  std::vector<double> out(r);
  for (std::size_t i = 0; i < r.size(); ++i) {
    out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return out;
}

}  // namespace

void BallSystem::validate() const {
  if (radii.empty()) {
    throw std::invalid_argument("ball system needs at least one disk");
  }
  for (double r : radii) {
    if (!(r > 0.0) || !std::isfinite(r)) {
      throw std::invalid_argument("ball radii must be positive");
    }
  }
  if (!centers.empty()) {
    if (centers.size() != radii.size()) {
      throw std::invalid_argument("ball system needs one center per radius");
    }
    for (std::size_t a = 0; a < radii.size(); ++a) {
      for (std::size_t b = a + 1; b < radii.size(); ++b) {
        const double d = std::hypot(centers[a][0] - centers[b][0], centers[a][1] - centers[b][1]);
        if (d <= radii[a] + radii[b]) {
          throw std::invalid_argument("ball system disks must be disjoint");
        }
      }
    }
  }
}

double BallSystem::area() const {
  double a = 0.0;
  for (double r : radii) {
    a += std::numbers::pi * r * r;
  }
  return a;
}

std::vector<double> multiball_rhs(const std::vector<double>& radii) {
  for (double r : radii) {
    if (!(r > 0.0)) {
      throw std::invalid_argument("multiball_rhs: radii must be positive");
    }
  }
  return rhs_active(radii, std::vector<char>(radii.size(), 1));
}

std::vector<double> multiball_rhs(const BallSystem& s) { return multiball_rhs(s.radii); }

constexpr double kRemovalWindow = 1e-10;

Trajectory rk4_integrate(const BallSystem& s, double t_end, double dt, const RK4Options& options) {
  s.validate();
  if (!(dt > 0.0) || !(t_end >= 0.0)) {
    throw std::invalid_argument("rk4_integrate: need dt > 0 and t_end >= 0");
  }
  if (!(options.r_floor > 0.0) || options.record_every < 1 || options.guard < 0.0) {
    throw std::invalid_argument("rk4_integrate: need r_floor > 0, record_every >= 1, guard >= 0");
  }
  const std::size_t n = s.radii.size();
  std::vector<double> r = s.radii;
  std::vector<char> alive(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (r[i] <= options.r_floor) {
      throw std::invalid_argument("rk4_integrate: initial radius at or below r_floor");
    }
  }

  Trajectory traj;
  auto record = [&](double t) {
    traj.t.push_back(t);
    std::vector<double> row(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      row[i] = alive[i] ? r[i] : 0.0;
    }
    traj.radii.push_back(std::move(row));
  };

  double t = 0.0;
  double area0 = active_area(r, alive);
  record(t);
  const double close = 1e-10 * std::max(1.0, options.r_floor);
  while (t < t_end && std::any_of(alive.begin(), alive.end(), [](char a) { return a != 0; })) {
    double r_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (alive[i]) {
        r_min = std::min(r_min, r[i]);
      }
    }
    // A disk whose remaining time to the floor is negligible is removed in place.
    {
      const auto rate = rhs_active(r, alive);
      bool removed = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (alive[i] && rate[i] < 0.0 && (r[i] - options.r_floor) / -rate[i] < kRemovalWindow) {
          alive[i] = 0;
          traj.extinctions.push_back({i, t + (r[i] - options.r_floor) / -rate[i]});
          removed = true;
        }
      }
      if (removed) {
        area0 = active_area(r, alive);
        record(t);
        continue;
      }
    }
    double step = std::min(dt, t_end - t);
    if (options.guard > 0.0) {
      step = std::min(step, options.guard * r_min * r_min);
    }
    // Approach the floor geometrically: never cover more than half the remaining gap per step.
    const auto rate = rhs_active(r, alive);
    for (std::size_t i = 0; i < n; ++i) {
      if (alive[i] && rate[i] < 0.0) {
        const double gap = r[i] - options.r_floor;
        step = std::min(step, std::max(0.5 * gap / -rate[i], 0.0));
      }
    }
    if (step < 1e-12) {
      throw NumericalError("rk4_integrate: step size underflow at t = " + std::to_string(t));
    }
    auto next = rk4_step(r, alive, step);
    while (true) {
      bool crossed = false;
      for (std::size_t i = 0; i < n; ++i) {
        crossed = crossed || (alive[i] && next[i] < options.r_floor);
      }
      if (!crossed) {
        break;
      }
      step *= 0.5;
      if (step < 1e-12) {
        throw NumericalError("rk4_integrate: step size underflow at t = " + std::to_string(t));
      }
      next = rk4_step(r, alive, step);
    }
    r = std::move(next);
    t += step;
    ++traj.steps;

    const double drift = std::abs(active_area(r, alive) - area0) / area0;
    traj.max_area_drift = std::max(traj.max_area_drift, drift);

    bool removed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (alive[i] && r[i] - options.r_floor <= close) {
        alive[i] = 0;
        traj.extinctions.push_back({i, t});
        removed = true;
      }
    }
    if (removed) {
      area0 = active_area(r, alive);
    }
    if (removed || traj.steps % options.record_every == 0 || t >= t_end) {
      record(t);
    }
  }
  if (traj.t.back() != t) {
    record(t);
  }
  return traj;
}

std::vector<double> radii_at(const Trajectory& trajectory, double t) {
  const auto& ts = trajectory.t;
  if (ts.empty()) {
    return {};
  }
  if (t <= ts.front()) {
    return trajectory.radii.front();
  }
  if (t >= ts.back()) {
    return trajectory.radii.back();
  }
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  const std::size_t b = static_cast<std::size_t>(it - ts.begin());
  const std::size_t a = b - 1;
  const double w = (t - ts[a]) / (ts[b] - ts[a]);
  std::vector<double> out(trajectory.radii[a].size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double ra = trajectory.radii[a][i];
    const double rb = trajectory.radii[b][i];
    out[i] = rb == 0.0 ? (ra == 0.0 ? 0.0 : ra) : (1.0 - w) * ra + w * rb;
  }
  return out;
}

void write_trajectory_csv(const Trajectory& trajectory, std::ostream& out) {
  const std::size_t n = trajectory.radii.empty() ? 0 : trajectory.radii.front().size();
  out << "t";
  for (std::size_t i = 0; i < n; ++i) {
    out << ",r" << (i + 1);
  }
  out << '\n';
  char buf[32];
  for (std::size_t k = 0; k < trajectory.t.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", trajectory.t[k]);
    out << buf;
    for (double r : trajectory.radii[k]) {
      std::snprintf(buf, sizeof buf, "%.17g", r);
      out << ',' << buf;
    }
    out << '\n';
  }
}

void write_trajectory_csv(const Trajectory& trajectory, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  write_trajectory_csv(trajectory, out);
  if (!out) {
    throw std::runtime_error("write failed for " + path);
  }
}

}  // namespace flatflow
