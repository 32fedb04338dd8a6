#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace flatflow {

/// Raised when two fields that must share a lattice do not.
class GridMismatch : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

using Point = std::array<double, 2>;

/// Uniform square lattice. Fields live at cell centers; cell (i,j) sits at
/// origin + (i*dx, j*dx).
class GridSpec {
public:
  GridSpec(int nx, int ny, double dx, Point origin = {0.0, 0.0});

  /// Square cells covering [xmin, xmax] x [ymin, ymin + ny*dx] with dx = (xmax - xmin)/nx.
  static GridSpec from_box(int nx, int ny, double xmin, double xmax, double ymin);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double dx() const { return dx_; }
  double cell_area() const { return dx_ * dx_; }
  Point origin() const { return origin_; }
  std::size_t size() const { return static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_); }
  double area() const { return cell_area() * static_cast<double>(size()); }

  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(i);
  }
  Point center(int i, int j) const { return {origin_[0] + i * dx_, origin_[1] + j * dx_}; }
  bool contains(int i, int j) const { return i >= 0 && j >= 0 && i < nx_ && j < ny_; }

  bool operator==(const GridSpec& other) const = default;

private:
  int nx_;
  int ny_;
  double dx_;
  Point origin_;
};

/// One value of type T per cell, row-major with i fastest.
template <typename T>
class Field {
public:
  using value_type = T;

  explicit Field(const GridSpec& grid, T fill = T{}) : grid_(grid), values_(grid.size(), fill) {}
  Field(const GridSpec& grid, std::vector<T> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) {
      throw GridMismatch("field value count does not match grid size");
    }
  }

  const GridSpec& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }

  T& operator()(int i, int j) { return values_[grid_.index(i, j)]; }
  const T& operator()(int i, int j) const { return values_[grid_.index(i, j)]; }
  T& operator[](std::size_t k) { return values_[k]; }
  const T& operator[](std::size_t k) const { return values_[k]; }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  bool operator==(const Field& other) const = default;

private:
  GridSpec grid_;
  std::vector<T> values_;
};

using ScalarField = Field<double>;
/// Characteristic function of a set: 1 inside, 0 outside.
using IndicatorField = Field<std::uint8_t>;

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what);

/// dx^2 * sum of values.
double integrate(const ScalarField& f);
double integrate(const IndicatorField& f);

/// Number of cells with value 1.
std::size_t count(const IndicatorField& f);

ScalarField lift(const IndicatorField& f);

/// Superlevel set {u > s}; ties go outside.
IndicatorField threshold(const ScalarField& u, double s);

/// dx^2 * #{cells where a != b}.
double symdiff_measure(const IndicatorField& a, const IndicatorField& b);

IndicatorField complement(const IndicatorField& f);
IndicatorField symmetric_difference(const IndicatorField& a, const IndicatorField& b);

/// Smallest lattice distance (in cells) from any member cell to the frame, or -1 for an empty set.
int frame_distance(const IndicatorField& f);

bool all_finite(const ScalarField& f);

/// Euler characteristic with 8-connected members and 4-connected complement (2x2 quad counts).
int euler_characteristic(const IndicatorField& f);

}  // namespace flatflow
