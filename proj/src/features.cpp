#include "haelt/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace haelt::feat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> nan_vec(size_t n) { return std::vector<double>(n, kNaN); }

size_t first_valid(const std::vector<double>& x) {
    size_t i = 0;
    while (i < x.size() && std::isnan(x[i])) ++i;
    return i;
}

// Exponential average with the given alpha, seeded with the SMA of the first
// `window` valid values. Leading NaNs of the input are skipped.
std::vector<double> smoothed(const std::vector<double>& x, int window, double alpha) {
    const size_t n = x.size();
    std::vector<double> out = nan_vec(n);
    const size_t f = first_valid(x);
    if (n - f < static_cast<size_t>(window)) return out;
    double seed = 0.0;
    for (size_t i = f; i < f + static_cast<size_t>(window); ++i) seed += x[i];
    seed /= window;
    size_t t = f + static_cast<size_t>(window) - 1;
    out[t] = seed;
    for (++t; t < n; ++t) out[t] = alpha * x[t] + (1.0 - alpha) * out[t - 1];
    return out;
}

std::vector<double> rolling_sum(const std::vector<double>& x, int window) {
    const size_t n = x.size();
    std::vector<double> out = nan_vec(n);
    const size_t f = first_valid(x);
    if (n - f < static_cast<size_t>(window)) return out;
    double acc = 0.0;
    for (size_t i = f; i < n; ++i) {
        acc += x[i];
        if (i >= f + static_cast<size_t>(window)) acc -= x[i - static_cast<size_t>(window)];
        if (i + 1 >= f + static_cast<size_t>(window)) out[i] = acc;
    }
    return out;
}

// True range; index 0 uses high-low only (no previous close).
std::vector<double> true_range(const std::vector<double>& high, const std::vector<double>& low,
                               const std::vector<double>& close) {
    const size_t n = close.size();
    std::vector<double> tr(n);
    tr[0] = high[0] - low[0];
    for (size_t t = 1; t < n; ++t) {
        tr[t] = std::max({high[t] - low[t], std::abs(high[t] - close[t - 1]),
                          std::abs(low[t] - close[t - 1])});
    }
    return tr;
}

void check_aligned(const std::vector<double>& a, const std::vector<double>& b, const char* what) {
    if (a.size() != b.size()) throw DataError(std::string(what) + ": column length mismatch");
}

}  // namespace

int FeatureFrame::max_warmup() const {
    int m = 0;
    for (const int w : warmup) m = std::max(m, w);
    return m;
}

int FeatureFrame::col(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    throw DataError("unknown feature '" + name + "'");
}

void FeatureFrame::drop_front(size_t k) {
    for (auto& c : columns) {
        if (k > c.size()) throw DataError("drop_front: cannot drop " + std::to_string(k) + " rows");
        c.erase(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(k));
    }
    for (int& w : warmup) w = std::max(0, w - static_cast<int>(k));
}

void FeatureFrame::validate() const {
    if (names.size() != columns.size() || names.size() != warmup.size()) {
        throw DataError("feature frame: inconsistent column bookkeeping");
    }
    const size_t n = rows();
    for (size_t c = 0; c < columns.size(); ++c) {
        if (columns[c].size() != n) {
            throw DataError("feature frame: column '" + names[c] + "' has odd length");
        }
        for (size_t r = static_cast<size_t>(warmup[c]); r < n; ++r) {
            if (!std::isfinite(columns[c][r])) {
                throw DataError("feature frame: non-finite value in '" + names[c] + "' at row " +
                                std::to_string(r));
            }
        }
    }
}

const std::vector<std::string>& feature_registry() {
    static const std::vector<std::string> reg = {
        "sma_10", "sma_20", "sma_50",
        "ema_10", "ema_20", "ema_50",
        "macd", "macd_signal", "macd_diff",
        "adx_14",
        "vortex_pos_14", "vortex_neg_14",
        "rsi_14",
        "stoch_k_14_3", "stoch_d_3",
        "roc_10",
        "uo_7_14_28",
        "williams_r_14",
        "bb_high_20_2", "bb_low_20_2", "bb_width_20_2", "bb_pctb_20_2",
        "atr_14",
        "obv",
        "mfi_14", "cmf_20",
        "force_index_13",
        "close_lag_1", "close_lag_2", "close_lag_3", "close_lag_4", "close_lag_5",
        "volume_lag_1", "volume_lag_2", "volume_lag_3", "volume_lag_4", "volume_lag_5",
        "close_mean_6", "close_mean_12", "close_mean_24",
        "close_std_6", "close_std_12", "close_std_24",
        "high_low_ratio", "close_open_ratio",
        "price_change_1h", "price_change_6h",
    };
    return reg;
}

std::vector<double> sma(const std::vector<double>& x, int window) {
    const size_t n = x.size();
    std::vector<double> out = nan_vec(n);
    const size_t f = first_valid(x);
    if (n - f < static_cast<size_t>(window)) return out;
    double acc = 0.0;
    for (size_t i = f; i < n; ++i) {
        acc += x[i];
        if (i >= f + static_cast<size_t>(window)) acc -= x[i - static_cast<size_t>(window)];
        if (i + 1 >= f + static_cast<size_t>(window)) out[i] = acc / window;
    }
    return out;
}

std::vector<double> ema(const std::vector<double>& x, int window) {
    return smoothed(x, window, 2.0 / (window + 1.0));
}

std::vector<double> rolling_std(const std::vector<double>& x, int window) {
    const size_t n = x.size();
    std::vector<double> out = nan_vec(n);
    const size_t f = first_valid(x);
    if (n - f < static_cast<size_t>(window)) return out;
    for (size_t i = f + static_cast<size_t>(window) - 1; i < n; ++i) {
        double mean = 0.0;
        for (size_t j = i + 1 - static_cast<size_t>(window); j <= i; ++j) mean += x[j];
        mean /= window;
        double var = 0.0;
        for (size_t j = i + 1 - static_cast<size_t>(window); j <= i; ++j) {
            const double c = x[j] - mean;
            var += c * c;
        }
        out[i] = std::sqrt(var / window);
    }
    return out;
}

std::vector<double> lag(const std::vector<double>& x, int k) {
    std::vector<double> out = nan_vec(x.size());
    for (size_t i = static_cast<size_t>(k); i < x.size(); ++i) out[i] = x[i - static_cast<size_t>(k)];
    return out;
}

std::vector<double> rsi(const std::vector<double>& close, int window) {
    const size_t n = close.size();
    if (n <= static_cast<size_t>(window)) throw DataError("rsi: series shorter than window");
    std::vector<double> gain(n, kNaN), loss(n, kNaN);
    for (size_t t = 1; t < n; ++t) {
        const double d = close[t] - close[t - 1];
        gain[t] = d > 0.0 ? d : 0.0;
        loss[t] = d < 0.0 ? -d : 0.0;
    }
    const double alpha = 1.0 / window;  // Wilder
    const std::vector<double> ag = smoothed(gain, window, alpha);
    const std::vector<double> al = smoothed(loss, window, alpha);
    std::vector<double> out = nan_vec(n);
    for (size_t t = 0; t < n; ++t) {
        if (std::isnan(ag[t])) continue;
        if (al[t] == 0.0) {
            out[t] = 100.0;  // zero average loss convention
        } else {
            out[t] = 100.0 - 100.0 / (1.0 + ag[t] / al[t]);
        }
    }
    return out;
}

MacdColumns macd(const std::vector<double>& close, int fast, int slow, int signal_window) {
    if (close.size() <= static_cast<size_t>(slow + signal_window)) {
        throw DataError("macd: need more than " + std::to_string(slow + signal_window) + " rows");
    }
    const std::vector<double> ef = ema(close, fast);
    const std::vector<double> es = ema(close, slow);
    MacdColumns out;
    out.macd = nan_vec(close.size());
    for (size_t t = 0; t < close.size(); ++t) {
        if (!std::isnan(ef[t]) && !std::isnan(es[t])) out.macd[t] = ef[t] - es[t];
    }
    out.signal = ema(out.macd, signal_window);
    out.diff = nan_vec(close.size());
    for (size_t t = 0; t < close.size(); ++t) {
        if (!std::isnan(out.macd[t]) && !std::isnan(out.signal[t])) {
            out.diff[t] = out.macd[t] - out.signal[t];
        }
    }
    return out;
}

BollingerColumns bollinger(const std::vector<double>& close, int window, double k) {
    if (close.size() < static_cast<size_t>(window)) {
        throw DataError("bollinger: series shorter than window");
    }
    const std::vector<double> mid = sma(close, window);
    const std::vector<double> sd = rolling_std(close, window);
    const size_t n = close.size();
    BollingerColumns out{nan_vec(n), nan_vec(n), nan_vec(n), nan_vec(n)};
    for (size_t t = 0; t < n; ++t) {
        if (std::isnan(mid[t])) continue;
        const double band = k * sd[t];
        const double upper = mid[t] + band;
        const double lower = mid[t] - band;
        out.high_ind[t] = close[t] > upper ? 1.0 : 0.0;
        out.low_ind[t] = close[t] < lower ? 1.0 : 0.0;
        out.width[t] = sd[t] == 0.0 ? 0.0 : (upper - lower) / mid[t];
        out.pct_b[t] = sd[t] == 0.0 ? 0.5 : (close[t] - lower) / (upper - lower);
    }
    return out;
}

std::vector<double> atr(const std::vector<double>& high, const std::vector<double>& low,
                        const std::vector<double>& close, int window) {
    check_aligned(high, close, "atr");
    check_aligned(low, close, "atr");
    return smoothed(true_range(high, low, close), window, 1.0 / window);
}

std::vector<double> adx(const std::vector<double>& high, const std::vector<double>& low,
                        const std::vector<double>& close, int window) {
    check_aligned(high, close, "adx");
    check_aligned(low, close, "adx");
    const size_t n = close.size();
    std::vector<double> dm_pos(n, kNaN), dm_neg(n, kNaN), tr(n, kNaN);
    const std::vector<double> tr_all = true_range(high, low, close);
    for (size_t t = 1; t < n; ++t) {
        const double up = high[t] - high[t - 1];
        const double down = low[t - 1] - low[t];
        dm_pos[t] = (up > down && up > 0.0) ? up : 0.0;
        dm_neg[t] = (down > up && down > 0.0) ? down : 0.0;
        tr[t] = tr_all[t];
    }
    const double alpha = 1.0 / window;
    const std::vector<double> sp = smoothed(dm_pos, window, alpha);
    const std::vector<double> sn = smoothed(dm_neg, window, alpha);
    const std::vector<double> st = smoothed(tr, window, alpha);
    std::vector<double> dx = nan_vec(n);
    for (size_t t = 0; t < n; ++t) {
        if (std::isnan(sp[t]) || std::isnan(st[t])) continue;
        const double dip = st[t] == 0.0 ? 0.0 : 100.0 * sp[t] / st[t];
        const double din = st[t] == 0.0 ? 0.0 : 100.0 * sn[t] / st[t];
        const double denom = dip + din;
        dx[t] = denom == 0.0 ? 0.0 : 100.0 * std::abs(dip - din) / denom;
    }
    return smoothed(dx, window, alpha);
}

VortexColumns vortex(const std::vector<double>& high, const std::vector<double>& low,
                     const std::vector<double>& close, int window) {
    check_aligned(high, close, "vortex");
    check_aligned(low, close, "vortex");
    const size_t n = close.size();
    std::vector<double> vm_pos(n, kNaN), vm_neg(n, kNaN), tr(n, kNaN);
    const std::vector<double> tr_all = true_range(high, low, close);
    for (size_t t = 1; t < n; ++t) {
        vm_pos[t] = std::abs(high[t] - low[t - 1]);
        vm_neg[t] = std::abs(low[t] - high[t - 1]);
        tr[t] = tr_all[t];
    }
    const std::vector<double> sp = rolling_sum(vm_pos, window);
    const std::vector<double> sn = rolling_sum(vm_neg, window);
    const std::vector<double> st = rolling_sum(tr, window);
    VortexColumns out{nan_vec(n), nan_vec(n)};
    for (size_t t = 0; t < n; ++t) {
        if (std::isnan(sp[t]) || std::isnan(st[t])) continue;
        // flat market: both lines sit at their crossing point
        out.pos[t] = st[t] == 0.0 ? 1.0 : sp[t] / st[t];
        out.neg[t] = st[t] == 0.0 ? 1.0 : sn[t] / st[t];
    }
    return out;
}

StochasticColumns stochastic(const std::vector<double>& high, const std::vector<double>& low,
                             const std::vector<double>& close, int window, int smooth) {
    check_aligned(high, close, "stochastic");
    check_aligned(low, close, "stochastic");
    const size_t n = close.size();
    std::vector<double> raw = nan_vec(n);
    for (size_t t = static_cast<size_t>(window) - 1; t < n; ++t) {
        double hh = high[t], ll = low[t];
        for (size_t j = t + 1 - static_cast<size_t>(window); j <= t; ++j) {
            hh = std::max(hh, high[j]);
            ll = std::min(ll, low[j]);
        }
        raw[t] = hh == ll ? 50.0 : 100.0 * (close[t] - ll) / (hh - ll);
    }
    StochasticColumns out;
    out.k = sma(raw, smooth);
    out.d = sma(out.k, smooth);
    return out;
}

std::vector<double> roc(const std::vector<double>& close, int window) {
    std::vector<double> out = nan_vec(close.size());
    for (size_t t = static_cast<size_t>(window); t < close.size(); ++t) {
        out[t] = 100.0 * (close[t] - close[t - static_cast<size_t>(window)]) /
                 close[t - static_cast<size_t>(window)];
    }
    return out;
}

std::vector<double> ultimate_oscillator(const std::vector<double>& high,
                                        const std::vector<double>& low,
                                        const std::vector<double>& close, int short_w,
                                        int medium_w, int long_w) {
    check_aligned(high, close, "ultimate_oscillator");
    check_aligned(low, close, "ultimate_oscillator");
    const size_t n = close.size();
    std::vector<double> bp(n, kNaN), tr(n, kNaN);
    for (size_t t = 1; t < n; ++t) {
        const double lo = std::min(low[t], close[t - 1]);
        const double hi = std::max(high[t], close[t - 1]);
        bp[t] = close[t] - lo;
        tr[t] = hi - lo;
    }
    auto avg = [&](int w) {
        const std::vector<double> sb = rolling_sum(bp, w);
        const std::vector<double> st = rolling_sum(tr, w);
        std::vector<double> a = nan_vec(n);
        for (size_t t = 0; t < n; ++t) {
            if (std::isnan(sb[t])) continue;
            a[t] = st[t] == 0.0 ? 0.5 : sb[t] / st[t];  // flat market convention
        }
        return a;
    };
    const std::vector<double> a1 = avg(short_w), a2 = avg(medium_w), a3 = avg(long_w);
    std::vector<double> out = nan_vec(n);
    for (size_t t = 0; t < n; ++t) {
        if (std::isnan(a1[t]) || std::isnan(a2[t]) || std::isnan(a3[t])) continue;
        out[t] = 100.0 * (4.0 * a1[t] + 2.0 * a2[t] + a3[t]) / 7.0;
    }
    return out;
}

std::vector<double> williams_r(const std::vector<double>& high, const std::vector<double>& low,
                               const std::vector<double>& close, int window) {
    check_aligned(high, close, "williams_r");
    check_aligned(low, close, "williams_r");
    const size_t n = close.size();
    std::vector<double> out = nan_vec(n);
    for (size_t t = static_cast<size_t>(window) - 1; t < n; ++t) {
        double hh = high[t], ll = low[t];
        for (size_t j = t + 1 - static_cast<size_t>(window); j <= t; ++j) {
            hh = std::max(hh, high[j]);
            ll = std::min(ll, low[j]);
        }
        out[t] = hh == ll ? -50.0 : -100.0 * (hh - close[t]) / (hh - ll);
    }
    return out;
}

std::vector<double> obv(const std::vector<double>& close, const std::vector<double>& volume) {
    check_aligned(close, volume, "obv");
    std::vector<double> out(close.size(), 0.0);
    for (size_t t = 1; t < close.size(); ++t) {
        double step = 0.0;
        if (close[t] > close[t - 1]) step = volume[t];
        else if (close[t] < close[t - 1]) step = -volume[t];
        out[t] = out[t - 1] + step;
    }
    return out;
}

std::vector<double> mfi(const std::vector<double>& high, const std::vector<double>& low,
                        const std::vector<double>& close, const std::vector<double>& volume,
                        int window) {
    check_aligned(high, close, "mfi");
    check_aligned(low, close, "mfi");
    check_aligned(volume, close, "mfi");
    const size_t n = close.size();
    std::vector<double> pos(n, kNaN), neg(n, kNaN);
    double tp_prev = (high[0] + low[0] + close[0]) / 3.0;
    for (size_t t = 1; t < n; ++t) {
        const double tp = (high[t] + low[t] + close[t]) / 3.0;
        const double mf = tp * volume[t];
        pos[t] = tp > tp_prev ? mf : 0.0;
        neg[t] = tp < tp_prev ? mf : 0.0;
        tp_prev = tp;
    }
    const std::vector<double> sp = rolling_sum(pos, window);
    const std::vector<double> sn = rolling_sum(neg, window);
    std::vector<double> out = nan_vec(n);
    for (size_t t = 0; t < n; ++t) {
        if (std::isnan(sp[t])) continue;
        const double total = sp[t] + sn[t];
        out[t] = total == 0.0 ? 50.0 : 100.0 * sp[t] / total;
    }
    return out;
}

std::vector<double> cmf(const std::vector<double>& high, const std::vector<double>& low,
                        const std::vector<double>& close, const std::vector<double>& volume,
                        int window) {
    check_aligned(high, close, "cmf");
    check_aligned(low, close, "cmf");
    check_aligned(volume, close, "cmf");
    const size_t n = close.size();
    std::vector<double> mfv(n);
    for (size_t t = 0; t < n; ++t) {
        const double range = high[t] - low[t];
        const double mult = range == 0.0 ? 0.0 : ((close[t] - low[t]) - (high[t] - close[t])) / range;
        mfv[t] = mult * volume[t];
    }
    const std::vector<double> sv = rolling_sum(mfv, window);
    const std::vector<double> svol = rolling_sum(volume, window);
    std::vector<double> out = nan_vec(n);
    for (size_t t = 0; t < n; ++t) {
        if (std::isnan(sv[t])) continue;
        out[t] = svol[t] == 0.0 ? 0.0 : sv[t] / svol[t];
    }
    return out;
}

std::vector<double> force_index(const std::vector<double>& close,
                                const std::vector<double>& volume, int window) {
    check_aligned(close, volume, "force_index");
    const size_t n = close.size();
    std::vector<double> fi1(n, kNaN);
    for (size_t t = 1; t < n; ++t) fi1[t] = (close[t] - close[t - 1]) * volume[t];
    return ema(fi1, window);
}

FeatureFrame compute_feature_set(const data::OhlcvSeries& s) {
    if (s.size() <= static_cast<size_t>(kMaxLookback)) {
        throw DataError("compute_feature_set: need more than " + std::to_string(kMaxLookback) +
                        " rows, got " + std::to_string(s.size()));
    }
    const std::vector<double> open = s.opens(), high = s.highs(), low = s.lows(),
                              close = s.closes(), volume = s.volumes();
    const size_t n = close.size();

    FeatureFrame frame;
    auto put = [&](const std::string& name, std::vector<double> col) {
        frame.names.push_back(name);
        frame.columns.push_back(std::move(col));
    };

    put("sma_10", sma(close, 10));
    put("sma_20", sma(close, 20));
    put("sma_50", sma(close, 50));
    put("ema_10", ema(close, 10));
    put("ema_20", ema(close, 20));
    put("ema_50", ema(close, 50));
    {
        MacdColumns m = macd(close);
        put("macd", std::move(m.macd));
        put("macd_signal", std::move(m.signal));
        put("macd_diff", std::move(m.diff));
    }
    put("adx_14", adx(high, low, close, 14));
    {
        VortexColumns v = vortex(high, low, close, 14);
        put("vortex_pos_14", std::move(v.pos));
        put("vortex_neg_14", std::move(v.neg));
    }
    put("rsi_14", rsi(close, 14));
    {
        StochasticColumns st = stochastic(high, low, close, 14, 3);
        put("stoch_k_14_3", std::move(st.k));
        put("stoch_d_3", std::move(st.d));
    }
    put("roc_10", roc(close, 10));
    put("uo_7_14_28", ultimate_oscillator(high, low, close, 7, 14, 28));
    put("williams_r_14", williams_r(high, low, close, 14));
    {
        BollingerColumns b = bollinger(close, 20, 2.0);
        put("bb_high_20_2", std::move(b.high_ind));
        put("bb_low_20_2", std::move(b.low_ind));
        put("bb_width_20_2", std::move(b.width));
        put("bb_pctb_20_2", std::move(b.pct_b));
    }
    put("atr_14", atr(high, low, close, 14));
    put("obv", obv(close, volume));
    put("mfi_14", mfi(high, low, close, volume, 14));
    put("cmf_20", cmf(high, low, close, volume, 20));
    put("force_index_13", force_index(close, volume, 13));
    for (int k = 1; k <= 5; ++k) put("close_lag_" + std::to_string(k), lag(close, k));
    for (int k = 1; k <= 5; ++k) put("volume_lag_" + std::to_string(k), lag(volume, k));
    for (const int w : {6, 12, 24}) put("close_mean_" + std::to_string(w), sma(close, w));
    for (const int w : {6, 12, 24}) put("close_std_" + std::to_string(w), rolling_std(close, w));
    {
        std::vector<double> hl(n), co(n);
        for (size_t t = 0; t < n; ++t) {
            hl[t] = high[t] / low[t];
            co[t] = close[t] / open[t];
        }
        put("high_low_ratio", std::move(hl));
        put("close_open_ratio", std::move(co));
    }
    for (const int k : {1, 6}) {
        std::vector<double> pc = nan_vec(n);
        for (size_t t = static_cast<size_t>(k); t < n; ++t) {
            pc[t] = (close[t] - close[t - static_cast<size_t>(k)]) / close[t - static_cast<size_t>(k)];
        }
        put("price_change_" + std::to_string(k) + "h", std::move(pc));
    }

    frame.warmup.resize(frame.columns.size());
    for (size_t c = 0; c < frame.columns.size(); ++c) {
        frame.warmup[c] = static_cast<int>(first_valid(frame.columns[c]));
    }
    if (frame.names != feature_registry()) {
        throw DataError("compute_feature_set: registry drift");
    }
    frame.validate();
    return frame;
}

void write_csv(const FeatureFrame& frame, const std::vector<int64_t>& timestamps,
               const std::string& path) {
    if (timestamps.size() != frame.rows()) {
        throw DataError("write_csv: timestamp count does not match rows");
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "timestamp";
    for (const std::string& name : frame.names) out << ',' << name;
    out << '\n';
    out.precision(12);
    for (size_t r = 0; r < frame.rows(); ++r) {
        out << timestamps[r];
        for (const auto& col : frame.columns) out << ',' << col[r];
        out << '\n';
    }
}

}  // namespace haelt::feat
