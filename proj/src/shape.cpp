#include "flatflow/shape.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>

#include "flatflow/errors.hpp"
#include "flatflow/io.hpp"

namespace flatflow {
namespace {

class ShapeParser {
public:
  explicit ShapeParser(const std::string& text) : text_(text) {}

  ShapeSpec parse() {
    ShapeSpec spec;
    skip_space();
    bool subtract = false;
    if (peek() == '+') {
      ++pos_;
    }
    while (true) {
      skip_space();
      spec.terms.push_back({subtract, primitive()});
      skip_space();
      if (pos_ == text_.size()) {
        break;
      }
      const char op = text_[pos_];
      if (op != '+' && op != '-') {
        fail("expected '+', '-' or end of shape");
      }
      subtract = op == '-';
      ++pos_;
    }
    if (spec.terms.front().subtract) {
      fail("shape cannot start with a difference");
    }
    return spec;
  }

private:
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("shape '" + text_ + "' at column " + std::to_string(pos_ + 1) + ": " + what);
  }

  void expect(char c) {
    skip_space();
    if (peek() != c) {
      fail(std::string("expected '") + c + "'");
    }
    ++pos_;
  }

  double number() {
    skip_space();
    const char* first = text_.data() + pos_;
    const char* last = text_.data() + text_.size();
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || !std::isfinite(value)) {
      fail("expected a number");
    }
    pos_ += static_cast<std::size_t>(ptr - first);
    return value;
  }

  Primitive primitive() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
    const std::string name = text_.substr(start, pos_ - start);
    Primitive p;
    if (name == "disk") {
      p.kind = Primitive::Kind::disk;
      expect('(');
      for (int a = 0; a < 3; ++a) {
        if (a > 0) {
          expect(',');
        }
        p.args[a] = number();
      }
      expect(')');
      if (!(p.args[2] > 0.0)) {
        fail("disk radius must be positive");
      }
    } else if (name == "rect") {
      p.kind = Primitive::Kind::rect;
      expect('(');
      for (int a = 0; a < 4; ++a) {
        if (a > 0) {
          expect(',');
        }
        p.args[a] = number();
      }
      expect(')');
      if (!(p.args[0] < p.args[2]) || !(p.args[1] < p.args[3])) {
        fail("rect needs x0 < x1 and y0 < y1");
      }
    } else if (name == "bitmap") {
      p.kind = Primitive::Kind::bitmap;
      expect('(');
      skip_space();
      const std::size_t open = pos_;
      const std::size_t close = text_.find(')', open);
      if (close == std::string::npos) {
        fail("unterminated bitmap path");
      }
      std::string path = text_.substr(open, close - open);
      while (!path.empty() && std::isspace(static_cast<unsigned char>(path.back()))) {
        path.pop_back();
      }
      if (path.size() >= 2 && (path.front() == '"' || path.front() == '\'') && path.back() == path.front()) {
        path = path.substr(1, path.size() - 2);
      }
      if (path.empty()) {
        fail("empty bitmap path");
      }
      p.path = path;
      pos_ = close + 1;
    } else {
      fail(name.empty() ? "expected disk, rect or bitmap" : "unknown primitive '" + name + "'");
    }
    return p;
  }

  const std::string& text_;
  std::size_t pos_ = 0;
};

IndicatorField draw(const Primitive& p, const GridSpec& grid, const std::string& base_dir) {
  IndicatorField out(grid);
  const double eps = 1e-9 * grid.dx();
  switch (p.kind) {
    case Primitive::Kind::disk: {
      const double r2 = p.args[2] * p.args[2];
      for (int j = 0; j < grid.ny(); ++j) {
        for (int i = 0; i < grid.nx(); ++i) {
          const Point c = grid.center(i, j);
          const double dx = c[0] - p.args[0];
          const double dy = c[1] - p.args[1];
          out(i, j) = dx * dx + dy * dy <= r2 ? 1 : 0;
        }
      }
      break;
    }
    case Primitive::Kind::rect:
      for (int j = 0; j < grid.ny(); ++j) {
        for (int i = 0; i < grid.nx(); ++i) {
          const Point c = grid.center(i, j);
          const bool in = c[0] >= p.args[0] - eps && c[0] <= p.args[2] + eps && c[1] >= p.args[1] - eps &&
                          c[1] <= p.args[3] + eps;
          out(i, j) = in ? 1 : 0;
        }
      }
      break;
    case Primitive::Kind::bitmap: {
      std::filesystem::path path(p.path);
      if (path.is_relative() && !base_dir.empty()) {
        path = std::filesystem::path(base_dir) / path;
      }
      try {
        out = load_pgm(path.string(), grid);
      } catch (const std::exception& e) {
        throw ConfigError("bitmap '" + p.path + "': " + e.what());
      }
      break;
    }
  }
  return out;
}

}  // namespace

ShapeSpec parse_shape(const std::string& text) { return ShapeParser(text).parse(); }

Rasterized rasterize(const ShapeSpec& spec, const GridSpec& grid, const std::string& base_dir) {
  if (spec.terms.empty()) {
    throw ConfigError("shape has no primitives");
  }
  Rasterized r{IndicatorField(grid), 0.0, {}};
  for (const auto& term : spec.terms) {
    const IndicatorField part = draw(term.primitive, grid, base_dir);
    for (std::size_t k = 0; k < r.set.size(); ++k) {
      if (term.subtract) {
        r.set[k] = r.set[k] && !part[k];
      } else {
        r.set[k] = r.set[k] || part[k];
      }
    }
  }
  if (count(r.set) == 0) {
    throw ConfigError("initial shape covers no cell centers");
  }
  if (frame_distance(r.set) < 3) {
    throw FrameContact("initial shape is closer than 3 cells to the frame", 0);
  }
  r.area = integrate(r.set);
  if (std::abs(r.area - 1.0) > 0.05) {
    r.warnings.push_back("rasterized area " + format_number(r.area) + " differs from 1 by more than 0.05");
  }
  return r;
}

}  // namespace flatflow
