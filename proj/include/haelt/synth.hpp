#pragma once

#include <cstdint>
#include <vector>

#include "haelt/errors.hpp"
#include "haelt/ohlcv.hpp"

namespace haelt::synth {

struct Segment {
    size_t rows = 0;          // 0 on the last segment: extend to the end
    double drift = 0.0;       // per-hour log drift
    double volatility = 0.01; // per-hour log-return standard deviation
};

struct SyntheticSpec {
    size_t n_rows = 2438;
    double base_price = 200.0;
    double base_volume = 5e6;
    std::vector<Segment> segments;  // empty: single flat-drift segment
    // When positive, hides the next hour's direction in the close/open ratio
    // (used by the learnability experiments). 0 keeps the walk honest.
    double signal_strength = 0.0;
    uint64_t seed = 42;
    int64_t start_timestamp = 1704207600;
    int64_t step_seconds = 3600;
};

// Geometric random walk OHLCV, deterministic per seed. Every row satisfies
// high >= max(open, close) and low <= min(open, close).
data::OhlcvSeries generate(const SyntheticSpec& spec);

}  // namespace haelt::synth
