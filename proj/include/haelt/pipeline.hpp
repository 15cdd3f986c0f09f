#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "haelt/errors.hpp"

namespace haelt::data {

// Contiguous, ordered, disjoint row ranges: train [0, train_end),
// val [train_end, val_end), test [val_end, n).
struct SplitRanges {
    size_t n = 0;
    size_t train_end = 0;
    size_t val_end = 0;

    size_t train_size() const { return train_end; }
    size_t val_size() const { return val_end - train_end; }
    size_t test_size() const { return n - val_end; }
};

// Sizes are floor(train_frac*n), floor(val_frac*n) and the remainder.
SplitRanges chronological_split(size_t n, double train_frac = 0.8, double val_frac = 0.1);

// Fixed-length windows over scaled features with next-step direction labels.
// Window i spans rows [end_row[i]-seq_len+1, end_row[i]]; its label compares
// close at end_row[i]+1 against close at end_row[i] (1 if strictly up, else 0,
// equality counting as down/stable). The final row has no successor, so the
// window count is rows - seq_len.
struct SequenceDataset {
    int seq_len = 0;
    int n_features = 0;
    std::vector<std::string> feature_names;
    std::vector<double> windows;  // [n][seq_len][n_features], row-major
    std::vector<int> labels;
    std::vector<int64_t> timestamps;  // window-end timestamps
    std::vector<size_t> end_rows;

    size_t size() const { return labels.size(); }
    const double* window(size_t i) const {
        return windows.data() + i * static_cast<size_t>(seq_len) * n_features;
    }
    double at(size_t i, int t, int f) const {
        return windows[(i * static_cast<size_t>(seq_len) + t) * n_features + f];
    }
    SequenceDataset slice(size_t begin, size_t end) const;
};

SequenceDataset make_sequences(const std::vector<std::string>& feature_names,
                               const std::vector<std::vector<double>>& columns,
                               const std::vector<double>& close,
                               const std::vector<int64_t>& timestamps, int seq_len);

// Window index boundaries induced by the row split: a window belongs to the
// split containing its label row (the row it predicts), so each split holds
// exactly as many windows as it has labelled rows.
struct WindowSplit {
    size_t train_end = 0;
    size_t val_end = 0;
};

WindowSplit split_windows(const SequenceDataset& ds, const SplitRanges& rows);

}  // namespace haelt::data
