#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "haelt/errors.hpp"
#include "haelt/ohlcv.hpp"

namespace haelt::feat {

// Named feature columns over a shared row count. Warm-up rows (the leading
// lookback of each indicator) hold NaN and are trimmed jointly before the
// data reaches any model.
struct FeatureFrame {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;  // [F][N]
    std::vector<int> warmup;                   // leading undefined rows per column

    size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
    size_t n_features() const { return names.size(); }
    int max_warmup() const;
    int col(const std::string& name) const;
    void drop_front(size_t k);
    // equal lengths, finite beyond each column's warm-up, registry names
    void validate() const;
};

// Canonical registry: every engineered feature, in fixed order.
const std::vector<std::string>& feature_registry();

// Longest lookback across the registry (the 50-hour moving averages).
constexpr int kMaxLookback = 50;

// Computes the complete registry. Requires series length > kMaxLookback.
FeatureFrame compute_feature_set(const data::OhlcvSeries& s);

void write_csv(const FeatureFrame& frame, const std::vector<int64_t>& timestamps,
               const std::string& path);

// --- individual indicators; NaN prefixes mark warm-up ----------------------
// EMA uses alpha = 2/(window+1) seeded with the SMA of the first window;
// RSI/ATR/ADX use Wilder smoothing (alpha = 1/window), same seeding. Rolling
// std is population (divide by n).

std::vector<double> sma(const std::vector<double>& x, int window);
std::vector<double> ema(const std::vector<double>& x, int window);
std::vector<double> rolling_std(const std::vector<double>& x, int window);
std::vector<double> lag(const std::vector<double>& x, int k);

std::vector<double> rsi(const std::vector<double>& close, int window = 14);

struct MacdColumns {
    std::vector<double> macd, signal, diff;
};
MacdColumns macd(const std::vector<double>& close, int fast = 12, int slow = 26,
                 int signal_window = 9);

struct BollingerColumns {
    std::vector<double> high_ind, low_ind, width, pct_b;
};
BollingerColumns bollinger(const std::vector<double>& close, int window = 20, double k = 2.0);

std::vector<double> atr(const std::vector<double>& high, const std::vector<double>& low,
                        const std::vector<double>& close, int window = 14);
std::vector<double> adx(const std::vector<double>& high, const std::vector<double>& low,
                        const std::vector<double>& close, int window = 14);

struct VortexColumns {
    std::vector<double> pos, neg;
};
VortexColumns vortex(const std::vector<double>& high, const std::vector<double>& low,
                     const std::vector<double>& close, int window = 14);

struct StochasticColumns {
    std::vector<double> k, d;
};
StochasticColumns stochastic(const std::vector<double>& high, const std::vector<double>& low,
                             const std::vector<double>& close, int window = 14, int smooth = 3);

std::vector<double> roc(const std::vector<double>& close, int window = 10);
std::vector<double> ultimate_oscillator(const std::vector<double>& high,
                                        const std::vector<double>& low,
                                        const std::vector<double>& close, int short_w = 7,
                                        int medium_w = 14, int long_w = 28);
std::vector<double> williams_r(const std::vector<double>& high, const std::vector<double>& low,
                               const std::vector<double>& close, int window = 14);

std::vector<double> obv(const std::vector<double>& close, const std::vector<double>& volume);
std::vector<double> mfi(const std::vector<double>& high, const std::vector<double>& low,
                        const std::vector<double>& close, const std::vector<double>& volume,
                        int window = 14);
std::vector<double> cmf(const std::vector<double>& high, const std::vector<double>& low,
                        const std::vector<double>& close, const std::vector<double>& volume,
                        int window = 20);
std::vector<double> force_index(const std::vector<double>& close,
                                const std::vector<double>& volume, int window = 13);

}  // namespace haelt::feat
