#include "haelt/pipeline.hpp"

#include <cmath>

namespace haelt::data {

SplitRanges chronological_split(size_t n, double train_frac, double val_frac) {
    if (n < 50) {
        throw DataError("chronological_split: need at least 50 rows, got " + std::to_string(n));
    }
    if (train_frac <= 0.0 || val_frac <= 0.0 || train_frac + val_frac >= 1.0) {
        throw DataError("chronological_split: invalid fractions");
    }
    SplitRanges r;
    r.n = n;
    r.train_end = static_cast<size_t>(std::floor(train_frac * static_cast<double>(n)));
    r.val_end = r.train_end + static_cast<size_t>(std::floor(val_frac * static_cast<double>(n)));
    return r;
}

SequenceDataset SequenceDataset::slice(size_t begin, size_t end) const {
    SequenceDataset out;
    out.seq_len = seq_len;
    out.n_features = n_features;
    out.feature_names = feature_names;
    const size_t stride = static_cast<size_t>(seq_len) * n_features;
    out.windows.assign(windows.begin() + begin * stride, windows.begin() + end * stride);
    out.labels.assign(labels.begin() + begin, labels.begin() + end);
    out.timestamps.assign(timestamps.begin() + begin, timestamps.begin() + end);
    out.end_rows.assign(end_rows.begin() + begin, end_rows.begin() + end);
    return out;
}

SequenceDataset make_sequences(const std::vector<std::string>& feature_names,
                               const std::vector<std::vector<double>>& columns,
                               const std::vector<double>& close,
                               const std::vector<int64_t>& timestamps, int seq_len) {
    if (seq_len <= 0) throw DataError("make_sequences: sequence length must be positive");
    const size_t rows = close.size();
    if (columns.empty()) throw DataError("make_sequences: no feature columns");
    for (const auto& c : columns) {
        if (c.size() != rows) throw DataError("make_sequences: column/close length mismatch");
    }
    if (timestamps.size() != rows) throw DataError("make_sequences: timestamp length mismatch");
    if (rows <= static_cast<size_t>(seq_len)) {
        throw DataError("make_sequences: need more than " + std::to_string(seq_len) +
                        " rows, got " + std::to_string(rows));
    }

    SequenceDataset ds;
    ds.seq_len = seq_len;
    ds.n_features = static_cast<int>(columns.size());
    ds.feature_names = feature_names;

    // ends at rows seq_len-1 .. rows-2: the final row lacks a successor label
    const size_t n_windows = rows - static_cast<size_t>(seq_len);
    ds.windows.resize(n_windows * static_cast<size_t>(seq_len) * columns.size());
    ds.labels.resize(n_windows);
    ds.timestamps.resize(n_windows);
    ds.end_rows.resize(n_windows);

    size_t w = 0;
    for (size_t end = static_cast<size_t>(seq_len) - 1; end + 1 < rows; ++end, ++w) {
        double* dst = ds.windows.data() + w * static_cast<size_t>(seq_len) * columns.size();
        for (int t = 0; t < seq_len; ++t) {
            const size_t row = end - static_cast<size_t>(seq_len) + 1 + static_cast<size_t>(t);
            for (size_t f = 0; f < columns.size(); ++f) {
                dst[static_cast<size_t>(t) * columns.size() + f] = columns[f][row];
            }
        }
        ds.labels[w] = close[end + 1] > close[end] ? 1 : 0;
        ds.timestamps[w] = timestamps[end];
        ds.end_rows[w] = end;
    }
    return ds;
}

WindowSplit split_windows(const SequenceDataset& ds, const SplitRanges& rows) {
    WindowSplit ws;
    ws.train_end = 0;
    ws.val_end = 0;
    for (size_t i = 0; i < ds.size(); ++i) {
        const size_t label_row = ds.end_rows[i] + 1;
        if (label_row < rows.train_end) ws.train_end = i + 1;
        if (label_row < rows.val_end) ws.val_end = i + 1;
    }
    return ws;
}

}  // namespace haelt::data
