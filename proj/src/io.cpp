#include "flatflow/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "flatflow/errors.hpp"
#include "flatflow/shape.hpp"

namespace fs = std::filesystem;

namespace flatflow {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) {
    return "";
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

struct Entry {
  std::string value;
  int line = 0;
};

class ConfigReader {
public:
  explicit ConfigReader(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  std::optional<double> real(const std::string& key) {
    const Entry* e = take(key);
    if (e == nullptr) {
      return std::nullopt;
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(e->value.data(), e->value.data() + e->value.size(), v);
    if (ec != std::errc() || ptr != e->value.data() + e->value.size() || !std::isfinite(v)) {
      fail(*e, key, "expected a finite number, got '" + e->value + "'");
    }
    return v;
  }

  std::optional<int> integer(const std::string& key) {
    const Entry* e = take(key);
    if (e == nullptr) {
      return std::nullopt;
    }
    int v = 0;
    const auto [ptr, ec] = std::from_chars(e->value.data(), e->value.data() + e->value.size(), v);
    if (ec != std::errc() || ptr != e->value.data() + e->value.size()) {
      fail(*e, key, "expected an integer, got '" + e->value + "'");
    }
    return v;
  }

  std::optional<bool> flag(const std::string& key) {
    const Entry* e = take(key);
    if (e == nullptr) {
      return std::nullopt;
    }
    if (e->value == "true" || e->value == "1") {
      return true;
    }
    if (e->value == "false" || e->value == "0") {
      return false;
    }
    fail(*e, key, "expected true or false, got '" + e->value + "'");
  }

  std::optional<std::string> text(const std::string& key) {
    const Entry* e = take(key);
    if (e == nullptr) {
      return std::nullopt;
    }
    return e->value;
  }

  /// Throws for a value that failed a range check after parsing.
  [[noreturn]] void reject(const std::string& key, const std::string& why) const {
    const auto it = entries_.find(key);
    fail(it->second, key, why);
  }


  void require(const std::string& key) const {
    if (!has(key)) {
      throw ConfigError("missing required key '" + key + "'");
    }
  }

  void reject_leftovers() const {
    for (const auto& [key, e] : entries_) {
      if (used_.count(key) == 0) {
        fail(e, key, "unknown key");
      }
    }
  }

private:
  const Entry* take(const std::string& key) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
      return nullptr;
    }
    used_[key] = true;
    return &it->second;
  }

  [[noreturn]] static void fail(const Entry& e, const std::string& key, const std::string& why) {
    throw ConfigError("line " + std::to_string(e.line) + ", key '" + key + "': " + why);
  }

  std::map<std::string, Entry> entries_;
  std::map<std::string, bool> used_;
};

std::map<std::string, Entry> split_sections(const std::string& text) {
  static const char* const kSections[] = {"grid", "flow", "step", "solver", "init", "output"};
  std::map<std::string, Entry> entries;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(raw);
    if (s.empty() || s[0] == '#' || s[0] == ';') {
      continue;
    }
    if (s.front() == '[') {
      if (s.back() != ']') {
        throw ConfigError("line " + std::to_string(line) + ": malformed section header '" + s + "'");
      }
      section = trim(s.substr(1, s.size() - 2));
      bool known = false;
      for (const char* k : kSections) {
        known = known || section == k;
      }
      if (!known) {
        throw ConfigError("line " + std::to_string(line) + ": unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line) + ": expected key = value");
    }
    const std::string key = trim(s.substr(0, eq));
    std::string value = s.substr(eq + 1);
    const auto hash = value.find('#');
    if (hash != std::string::npos) {
      value = value.substr(0, hash);
    }
    value = trim(value);
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line) + ": empty key");
    }
    if (section.empty()) {
      throw ConfigError("line " + std::to_string(line) + ", key '" + key + "': key outside of any section");
    }
    if (value.empty()) {
      throw ConfigError("line " + std::to_string(line) + ", key '" + key + "': empty value");
    }
    const std::string full = section + "." + key;
    const auto [it, inserted] = entries.emplace(full, Entry{value, line});
    if (!inserted) {
      throw ConfigError("line " + std::to_string(line) + ", key '" + full + "': duplicate of line " +
                        std::to_string(it->second.line));
    }
  }
  return entries;
}

[[noreturn]] void fail_key(ConfigReader& r, const std::string& full, const std::string& why) { r.reject(full, why); }

}  // namespace

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

FlowConfig parse_config(const std::string& text, const std::string& base_dir) {
  ConfigReader r(split_sections(text));
  FlowConfig c;
  c.base_dir = base_dir;

  const int nx = r.integer("grid.nx").value_or(256);
  if (nx < 8) {
    fail_key(r, "grid.nx", "need at least 8 cells");
  }
  const double xmin = r.real("grid.xmin").value_or(-1.0);
  const double xmax = r.real("grid.xmax").value_or(1.0);
  if (!(xmax > xmin)) {
    fail_key(r, r.has("grid.xmax") ? "grid.xmax" : "grid.xmin", "need xmin < xmax");
  }
  const double dx = (xmax - xmin) / nx;
  const double ymin = r.real("grid.ymin").value_or(xmin);
  const auto ny_given = r.integer("grid.ny");
  const auto ymax_given = r.real("grid.ymax");
  int ny = ny_given.value_or(nx);
  if (ymax_given) {
    const double cells = (*ymax_given - ymin) / dx;
    if (!(cells > 0.0)) {
      fail_key(r, "grid.ymax", "need ymin < ymax");
    }
    if (!ny_given) {
      ny = static_cast<int>(std::lround(cells));
    }
    if (std::abs(cells - ny) > 1e-6 * std::max(1.0, cells)) {
      fail_key(r, "grid.ymax", "cells must be square: (ymax - ymin)/ny must equal (xmax - xmin)/nx");
    }
  }
  if (ny < 8) {
    fail_key(r, ny_given ? "grid.ny" : "grid.ymax", "need at least 8 cells");
  }
  c.grid = GridSpec::from_box(nx, ny, xmin, xmax, ymin);

  r.require("flow.h");
  r.require("flow.t_max");
  c.h = *r.real("flow.h");
  if (!(c.h > 0.0)) {
    fail_key(r, "flow.h", "time step h must be positive");
  }
  c.t_max = *r.real("flow.t_max");
  if (!(c.t_max >= c.h)) {
    fail_key(r, "flow.t_max", "t_max must be at least h");
  }
  c.snapshot_every = r.integer("flow.snapshot_every").value_or(1);
  if (c.snapshot_every < 1) {
    fail_key(r, "flow.snapshot_every", "must be at least 1");
  }

  c.step.lambda_tol = r.real("step.lambda_tol").value_or(0.0);
  if (c.step.lambda_tol < 0.0) {
    fail_key(r, "step.lambda_tol", "must be nonnegative (0 selects one cell area)");
  }
  c.step.max_bisections = r.integer("step.max_bisections").value_or(c.step.max_bisections);
  if (c.step.max_bisections < 0) {
    fail_key(r, "step.max_bisections", "must be nonnegative");
  }
  c.step.lambda_resolution = r.real("step.lambda_resolution").value_or(c.step.lambda_resolution);
  if (!(c.step.lambda_resolution > 0.0)) {
    fail_key(r, "step.lambda_resolution", "must be positive");
  }
  c.step.lambda_stride = r.real("step.lambda_stride").value_or(c.step.lambda_stride);
  if (!(c.step.lambda_stride > 0.0)) {
    fail_key(r, "step.lambda_stride", "must be positive");
  }

  SolverParams& s = c.step.solver;
  s.max_iters = r.integer("solver.max_iters").value_or(s.max_iters);
  if (s.max_iters < 1) {
    fail_key(r, "solver.max_iters", "must be at least 1");
  }
  s.tol = r.real("solver.tol").value_or(s.tol);
  if (!(s.tol > 0.0)) {
    fail_key(r, "solver.tol", "must be positive");
  }
  s.tau = r.real("solver.tau").value_or(0.0);
  if (s.tau < 0.0) {
    fail_key(r, "solver.tau", "must be positive (0 selects the default)");
  }
  s.sigma = r.real("solver.sigma").value_or(0.0);
  if (s.sigma < 0.0) {
    fail_key(r, "solver.sigma", "must be positive (0 selects the default)");
  }
  s.check_every = r.integer("solver.check_every").value_or(s.check_every);
  if (s.check_every < 1) {
    fail_key(r, "solver.check_every", "must be at least 1");
  }
  try {
    (void)s.resolved(c.grid);
  } catch (const std::invalid_argument& e) {
    fail_key(r, r.has("solver.tau") ? "solver.tau" : "solver.sigma", e.what());
  }

  r.require("init.shape");
  c.initial = *r.text("init.shape");
  try {
    (void)parse_shape(c.initial);
  } catch (const ConfigError& e) {
    fail_key(r, "init.shape", e.what());
  }

  if (auto dir = r.text("output.dir")) {
    fs::path p(*dir);
    if (p.is_relative() && !base_dir.empty()) {
      p = fs::path(base_dir) / p;
    }
    c.out_dir = p.string();
  }
  c.record_wall_time = r.flag("output.record_wall_time").value_or(false);

  r.reject_leftovers();
  c.validate();
  return c;
}

FlowConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  std::ostringstream text;
  text << in.rdbuf();
  const fs::path parent = fs::path(path).parent_path();
  return parse_config(text.str(), parent.empty() ? std::string(".") : parent.string());
}

std::string format_config(const FlowConfig& c) {
  const GridSpec& g = c.grid;
  const double xmin = g.origin()[0] - 0.5 * g.dx();
  const double ymin = g.origin()[1] - 0.5 * g.dx();
  std::ostringstream out;
  out << "[grid]\n"
      << "nx = " << g.nx() << '\n'
      << "ny = " << g.ny() << '\n'
      << "xmin = " << format_number(xmin) << '\n'
      << "xmax = " << format_number(xmin + g.nx() * g.dx()) << '\n'
      << "ymin = " << format_number(ymin) << '\n'
      << "\n[flow]\n"
      << "h = " << format_number(c.h) << '\n'
      << "t_max = " << format_number(c.t_max) << '\n'
      << "snapshot_every = " << c.snapshot_every << '\n'
      << "\n[step]\n"
      << "lambda_tol = " << format_number(c.step.lambda_tol) << '\n'
      << "max_bisections = " << c.step.max_bisections << '\n'
      << "lambda_resolution = " << format_number(c.step.lambda_resolution) << '\n'
      << "lambda_stride = " << format_number(c.step.lambda_stride) << '\n'
      << "\n[solver]\n"
      << "max_iters = " << c.step.solver.max_iters << '\n'
      << "tol = " << format_number(c.step.solver.tol) << '\n'
      << "tau = " << format_number(c.step.solver.tau) << '\n'
      << "sigma = " << format_number(c.step.solver.sigma) << '\n'
      << "check_every = " << c.step.solver.check_every << '\n'
      << "\n[init]\n"
      << "shape = " << c.initial << '\n';
  out << "\n[output]\n";
  if (!c.out_dir.empty()) {
    out << "dir = " << c.out_dir << '\n';
  }
  out << "record_wall_time = " << (c.record_wall_time ? "true" : "false") << '\n';
  return out.str();
}

void save_snapshot(const IndicatorField& E, const std::string& path) {
  const GridSpec& g = E.grid();
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  out << "P5\n" << g.nx() << ' ' << g.ny() << "\n255\n";
  std::string row(static_cast<std::size_t>(g.nx()), '\0');
  for (int j = g.ny() - 1; j >= 0; --j) {
    for (int i = 0; i < g.nx(); ++i) {
      row[static_cast<std::size_t>(i)] = E(i, j) ? static_cast<char>(255) : '\0';
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!out) {
    throw std::runtime_error("write to '" + path + "' failed");
  }
}

namespace {

std::string pgm_token(std::istream& in, const std::string& path) {
  std::string tok;
  while (true) {
    const int c = in.get();
    if (c == EOF) {
      break;
    }
    if (c == '#' && tok.empty()) {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) {
        return tok;
      }
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) {
    throw std::runtime_error("'" + path + "': truncated PGM header");
  }
  return tok;
}

int pgm_int(std::istream& in, const std::string& path, const char* what) {
  const std::string tok = pgm_token(in, path);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v <= 0) {
    throw std::runtime_error("'" + path + "': malformed PGM " + std::string(what) + " '" + tok + "'");
  }
  return v;
}

IndicatorField read_pgm(const std::string& path, const GridSpec* grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open '" + path + "'");
  }
  if (pgm_token(in, path) != "P5") {
    throw std::runtime_error("'" + path + "': not a binary PGM (expected P5)");
  }
  const int w = pgm_int(in, path, "width");
  const int hgt = pgm_int(in, path, "height");
  const int maxval = pgm_int(in, path, "maxval");
  if (maxval > 255) {
    throw std::runtime_error("'" + path + "': 16-bit PGM is not supported");
  }
  if (grid != nullptr && (grid->nx() != w || grid->ny() != hgt)) {
    throw GridMismatch("'" + path + "': image is " + std::to_string(w) + "x" + std::to_string(hgt) +
                       ", grid is " + std::to_string(grid->nx()) + "x" + std::to_string(grid->ny()));
  }
  IndicatorField E(grid != nullptr ? *grid : GridSpec(w, hgt, 1.0));
  std::string row(static_cast<std::size_t>(w), '\0');
  for (int j = hgt - 1; j >= 0; --j) {
    in.read(row.data(), static_cast<std::streamsize>(row.size()));
    if (in.gcount() != static_cast<std::streamsize>(row.size())) {
      throw std::runtime_error("'" + path + "': truncated PGM data");
    }
    for (int i = 0; i < w; ++i) {
      E(i, j) = static_cast<unsigned char>(row[static_cast<std::size_t>(i)]) >= 128 ? 1 : 0;
    }
  }
  return E;
}

void write_row(std::ostream& out, const StepRecord& r) {
  out << r.step << ',' << format_number(r.t) << ',' << format_number(r.volume) << ','
      << format_number(r.perimeter) << ',' << format_number(r.lambda) << ',' << (r.saturated ? 1 : 0) << ','
      << format_number(r.diss_residual) << ',' << format_number(r.disp_sup) << ','
      << format_number(r.symdiff_prev) << ',' << format_number(r.v_l2_inc) << ',' << format_number(r.wall_ms)
      << '\n';
}

}  // namespace

IndicatorField load_pgm(const std::string& path) { return read_pgm(path, nullptr); }

IndicatorField load_pgm(const std::string& path, const GridSpec& grid) { return read_pgm(path, &grid); }

void write_diagnostics(const FlowTrace& trace, std::ostream& out) {
  out << kDiagnosticsHeader << '\n';
  for (const auto& r : trace.steps) {
    write_row(out, r);
  }
}

void write_diagnostics(const FlowTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  write_diagnostics(trace, out);
  if (!out) {
    throw std::runtime_error("write to '" + path + "' failed");
  }
}

void write_step_details(const FlowTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  out << "step,t,lambda_target,transport,penalty,bisections,solver_iterations,solver_converged,rounded,"
         "kept_previous,reused,coarea_excess,warnings\n";
  for (const auto& r : trace.steps) {
    out << r.step << ',' << format_number(r.t) << ',' << format_number(r.lambda_target) << ','
        << format_number(r.transport) << ',' << format_number(r.penalty) << ',' << r.bisections << ','
        << r.solver_iterations << ',' << (r.solver_converged ? 1 : 0) << ',' << (r.rounded ? 1 : 0) << ','
        << (r.kept_previous ? 1 : 0) << ',' << (r.reused ? 1 : 0) << ',' << format_number(r.coarea_excess)
        << ',' << r.warnings << '\n';
  }
  if (!out) {
    throw std::runtime_error("write to '" + path + "' failed");
  }
}

FlowTrace read_diagnostics(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open '" + path + "'");
  }
  std::string line;
  if (!std::getline(in, line) || line != kDiagnosticsHeader) {
    throw std::runtime_error("'" + path + "': unexpected diagnostics header");
  }
  FlowTrace trace;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    std::vector<std::string> cols;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      cols.push_back(cell);
    }
    if (cols.size() != 11) {
      throw std::runtime_error("'" + path + "' line " + std::to_string(lineno) + ": expected 11 columns");
    }
    auto num = [&](int k) {
      double v = 0.0;
      const std::string& s = cols[static_cast<std::size_t>(k)];
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw std::runtime_error("'" + path + "' line " + std::to_string(lineno) + ": bad number '" + s + "'");
      }
      return v;
    };
    StepRecord r;
    r.step = static_cast<int>(num(0));
    r.t = num(1);
    r.volume = num(2);
    r.perimeter = num(3);
    r.lambda = num(4);
    r.saturated = num(5) != 0.0;
    r.diss_residual = num(6);
    r.disp_sup = num(7);
    r.symdiff_prev = num(8);
    r.v_l2_inc = num(9);
    r.wall_ms = num(10);
    trace.steps.push_back(r);
  }
  if (trace.steps.size() >= 2) {
    trace.h = trace.steps[1].t - trace.steps[0].t;
  } else if (trace.steps.size() == 1) {
    trace.h = trace.steps[0].t / std::max(1, trace.steps[0].step);
  }
  return trace;
}

}  // namespace flatflow
