#pragma once

#include <string>
#include <vector>

#include "haelt/errors.hpp"

namespace haelt::data {

// Per-column min/max fitted on training rows only. apply never updates the
// state, so there is no leakage path through this API.
struct ScalerState {
    std::vector<std::string> names;
    std::vector<double> min;
    std::vector<double> max;
    std::vector<bool> degenerate;  // max == min: column transforms to 0.5
};

// Fits on rows [row_begin, row_end) of each column. Constant columns are
// flagged degenerate and a warning is written to stderr.
ScalerState fit_scaler(const std::vector<std::string>& names,
                       const std::vector<std::vector<double>>& columns, size_t row_begin,
                       size_t row_end);

// (x - min) / (max - min) per column over all rows. Values outside the
// training range map outside [0, 1] and are accepted.
std::vector<std::vector<double>> apply_scaler(const ScalerState& state,
                                              const std::vector<std::vector<double>>& columns);

}  // namespace haelt::data
