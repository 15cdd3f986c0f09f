#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "haelt/errors.hpp"

namespace haelt::data {

// One market hour. NaN in a price/volume field means missing (pre fill).
struct OhlcvRow {
    int64_t timestamp = 0;
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double close = 0.0;
    double volume = 0.0;
};

struct OhlcvSeries {
    std::vector<OhlcvRow> rows;

    size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }

    std::vector<double> opens() const;
    std::vector<double> highs() const;
    std::vector<double> lows() const;
    std::vector<double> closes() const;
    std::vector<double> volumes() const;
    std::vector<int64_t> timestamps() const;
};

// Reads a CSV with header timestamp,open,high,low,close,volume
// (case-insensitive, any column order). Empty or "nan" cells are missing.
// Rows are sorted by timestamp; malformed rows, negative volume, non-positive
// prices, inconsistent OHLC bounds and duplicate timestamps are rejected with
// the offending line number.
OhlcvSeries load_csv(const std::string& path);

void save_csv(const OhlcvSeries& s, const std::string& path);

// Replaces each missing field with the most recent valid value of the same
// column. The first row must be complete. Row count is unchanged.
OhlcvSeries forward_fill(const OhlcvSeries& s);

// Percentile by linear interpolation between closest ranks of the sorted
// column (rank = pct/100 * (n-1)).
double percentile(const std::vector<double>& column, double pct);

// Clips values outside [P_lower, P_upper] to those percentile values.
void winsorize_column(std::vector<double>& column, double lower_pct, double upper_pct);

// Applies winsorize_column to each of the five numeric columns independently.
OhlcvSeries winsorize(const OhlcvSeries& s, double lower_pct = 0.5, double upper_pct = 99.5);

}  // namespace haelt::data
