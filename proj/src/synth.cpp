#include "haelt/synth.hpp"

#include <algorithm>
#include <cmath>

#include "haelt/rng.hpp"

namespace haelt::synth {

data::OhlcvSeries generate(const SyntheticSpec& spec) {
    if (spec.n_rows < 100) {
        throw UsageError("synthetic spec: need at least 100 rows, got " +
                         std::to_string(spec.n_rows));
    }
    if (spec.base_price <= 0.0 || spec.base_volume < 0.0) {
        throw UsageError("synthetic spec: base price must be positive, volume nonnegative");
    }
    for (const Segment& s : spec.segments) {
        if (s.volatility < 0.0) throw UsageError("synthetic spec: negative volatility");
    }

    // per-row drift/volatility from the segment schedule
    std::vector<double> drift(spec.n_rows, 0.0), vol(spec.n_rows, 0.01);
    if (spec.segments.empty()) {
        std::fill(drift.begin(), drift.end(), 0.0);
        std::fill(vol.begin(), vol.end(), 0.01);
    } else {
        size_t row = 0;
        for (size_t s = 0; s < spec.segments.size() && row < spec.n_rows; ++s) {
            const Segment& seg = spec.segments[s];
            size_t len = seg.rows;
            if (len == 0 || s + 1 == spec.segments.size()) len = spec.n_rows - row;
            len = std::min(len, spec.n_rows - row);
            for (size_t i = 0; i < len; ++i, ++row) {
                drift[row] = seg.drift;
                vol[row] = seg.volatility;
            }
        }
        for (; row < spec.n_rows; ++row) {
            drift[row] = spec.segments.back().drift;
            vol[row] = spec.segments.back().volatility;
        }
    }

    Rng rng(spec.seed);
    Rng price_rng = rng.fork("price");
    Rng pad_rng = rng.fork("brackets");
    Rng volume_rng = rng.fork("volume");

    std::vector<double> close(spec.n_rows);
    close[0] = spec.base_price;
    for (size_t t = 1; t < spec.n_rows; ++t) {
        close[t] = close[t - 1] * std::exp(drift[t] + vol[t] * price_rng.normal());
    }

    data::OhlcvSeries out;
    out.rows.resize(spec.n_rows);
    for (size_t t = 0; t < spec.n_rows; ++t) {
        data::OhlcvRow& r = out.rows[t];
        r.timestamp = spec.start_timestamp + static_cast<int64_t>(t) * spec.step_seconds;
        r.close = close[t];
        if (spec.signal_strength > 0.0) {
            // leak the next step's direction into the close/open ratio
            double dir = -1.0;
            if (t + 1 < spec.n_rows && close[t + 1] > close[t]) dir = 1.0;
            r.open = close[t] * (1.0 - dir * spec.signal_strength);
        } else {
            r.open = t == 0 ? spec.base_price : close[t - 1];
        }
        const double hi_pad = std::min(0.45, std::abs(pad_rng.normal()) * vol[t] * 0.5);
        const double lo_pad = std::min(0.45, std::abs(pad_rng.normal()) * vol[t] * 0.5);
        r.high = std::max(r.open, r.close) * (1.0 + hi_pad);
        r.low = std::min(r.open, r.close) * (1.0 - lo_pad);
        r.volume = spec.base_volume * std::exp(0.3 * volume_rng.normal());
    }
    return out;
}

}  // namespace haelt::synth
