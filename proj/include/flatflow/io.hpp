#pragma once

#include <iosfwd>
#include <string>

#include "flatflow/flow.hpp"
#include "flatflow/grid.hpp"
#include "flatflow/trace.hpp"

namespace flatflow {

/// Parses the sectioned key = value format ([grid] [flow] [step] [solver] [init] [output]).
/// Unknown or repeated keys and invalid values throw ConfigError naming the line and key.
FlowConfig parse_config(const std::string& text, const std::string& base_dir = "");
FlowConfig load_config(const std::string& path);

/// Inverse of parse_config; numbers written with 17 significant digits.
std::string format_config(const FlowConfig& config);

/// Binary PGM (P5, maxval 255), 255 = member, first row written is the top row (largest j).
void save_snapshot(const IndicatorField& E, const std::string& path);
/// Values >= 128 are members. The grid has unit spacing unless `grid` is given, in which case
/// the image size must match it.
IndicatorField load_pgm(const std::string& path);
IndicatorField load_pgm(const std::string& path, const GridSpec& grid);

inline constexpr const char* kDiagnosticsHeader =
    "step,t,volume,perimeter,lambda,saturated,diss_residual,disp_sup,symdiff_prev,v_l2_inc,wall_ms";

void write_diagnostics(const FlowTrace& trace, std::ostream& out);
void write_diagnostics(const FlowTrace& trace, const std::string& path);

/// Per-step multiplier search and solver details (not part of the fixed diagnostics layout).
void write_step_details(const FlowTrace& trace, const std::string& path);

/// Reads a file written by write_diagnostics back into step records (columns listed above).
FlowTrace read_diagnostics(const std::string& path);

std::string format_number(double value);

}  // namespace flatflow
