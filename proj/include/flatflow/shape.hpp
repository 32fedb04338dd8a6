#pragma once

#include <array>
#include <string>
#include <vector>

#include "flatflow/grid.hpp"

namespace flatflow {

/// disk(cx, cy, r), rect(x0, y0, x1, y1) or bitmap(path), in domain units.
struct Primitive {
  enum class Kind { disk, rect, bitmap };
  Kind kind = Kind::disk;
  std::array<double, 4> args{};
  std::string path;
};

struct ShapeTerm {
  bool subtract = false;
  Primitive primitive;
};

/// Primitives combined left to right: '+' is union, '-' is difference.
struct ShapeSpec {
  std::vector<ShapeTerm> terms;
};

/// Parses e.g. "disk(0,0,0.564190) + rect(-0.1,-0.1,0.1,0.1) - bitmap(hole.pgm)".
/// Throws ConfigError with the offending position.
ShapeSpec parse_shape(const std::string& text);

struct Rasterized {
  IndicatorField set;
  double area = 0.0;
  std::vector<std::string> warnings;
};

/// A cell is a member iff its center lies in the combined shape (boundaries included).
/// Relative bitmap paths resolve against base_dir. Throws ConfigError on an empty result and
/// FrameContact when a member is closer than 3 cells to the frame.
Rasterized rasterize(const ShapeSpec& spec, const GridSpec& grid, const std::string& base_dir = "");

}  // namespace flatflow
