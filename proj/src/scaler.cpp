#include "haelt/scaler.hpp"

#include <cmath>
#include <iostream>

namespace haelt::data {

ScalerState fit_scaler(const std::vector<std::string>& names,
                       const std::vector<std::vector<double>>& columns, size_t row_begin,
                       size_t row_end) {
    if (names.size() != columns.size()) {
        throw DataError("fit_scaler: " + std::to_string(names.size()) + " names for " +
                        std::to_string(columns.size()) + " columns");
    }
    if (row_begin >= row_end) throw DataError("fit_scaler: empty training range");

    ScalerState st;
    st.names = names;
    st.min.resize(columns.size());
    st.max.resize(columns.size());
    st.degenerate.resize(columns.size(), false);
    for (size_t c = 0; c < columns.size(); ++c) {
        if (row_end > columns[c].size()) {
            throw DataError("fit_scaler: range exceeds column '" + names[c] + "'");
        }
        double lo = columns[c][row_begin], hi = columns[c][row_begin];
        for (size_t r = row_begin; r < row_end; ++r) {
            const double v = columns[c][r];
            if (std::isnan(v)) throw DataError("fit_scaler: NaN in column '" + names[c] + "'");
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        st.min[c] = lo;
        st.max[c] = hi;
        if (lo == hi) {
            st.degenerate[c] = true;
            std::cerr << "warning: column '" << names[c]
                      << "' is constant on training rows; scaling it to 0.5\n";
        }
    }
    return st;
}

std::vector<std::vector<double>> apply_scaler(const ScalerState& state,
                                              const std::vector<std::vector<double>>& columns) {
    if (state.min.size() != columns.size()) {
        throw DataError("apply_scaler: state tracks " + std::to_string(state.min.size()) +
                        " columns, got " + std::to_string(columns.size()));
    }
    std::vector<std::vector<double>> out(columns.size());
    for (size_t c = 0; c < columns.size(); ++c) {
        out[c].resize(columns[c].size());
        const double lo = state.min[c];
        const double range = state.max[c] - state.min[c];
        for (size_t r = 0; r < columns[c].size(); ++r) {
            out[c][r] = state.degenerate[c] ? 0.5 : (columns[c][r] - lo) / range;
        }
    }
    return out;
}

}  // namespace haelt::data
