#pragma once

#include "flatflow/grid.hpp"

namespace flatflow {

/// Squared lattice distance (in cells^2) from every cell center to the nearest member of `set`.
/// Exact: two separable passes of the lower envelope of parabolas. Throws on an empty set.
std::vector<double> squared_cell_distance(const IndicatorField& set);

/// Euclidean distance from each cell center to the nearest cell center of F; zero on F.
ScalarField unsigned_distance(const IndicatorField& F);

/// Signed distance, negative inside F. Center-to-center distances are shifted by dx/2 towards
/// the interface so that a flat boundary between two cells reads zero.
/// Throws when F or its complement is empty.
ScalarField signed_distance(const IndicatorField& F);

}  // namespace flatflow
