#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "haelt/features.hpp"
#include "support/gen.hpp"
#include "support/naive_indicators.hpp"

using namespace haelt;
using testsupport::random_series;

namespace {

// combined absolute/relative gate
bool close_to(double a, double b, double tol = 1e-9) {
    if (std::isnan(a) && std::isnan(b)) return true;
    if (std::isnan(a) != std::isnan(b)) return false;
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

void check_column(const std::vector<double>& got, const std::vector<double>& want,
                  const std::string& name, double tol = 1e-9) {
    REQUIRE(got.size() == want.size());
    for (size_t t = 0; t < got.size(); ++t) {
        if (!close_to(got[t], want[t], tol)) {
            CAPTURE(name);
            CAPTURE(t);
            CAPTURE(got[t]);
            CAPTURE(want[t]);
            FAIL_CHECK("column mismatch");
            return;
        }
    }
    CHECK(true);
}

data::OhlcvSeries constant_series(size_t n, double price = 100.0, double volume = 5000.0) {
    data::OhlcvSeries s;
    for (size_t t = 0; t < n; ++t) {
        data::OhlcvRow r;
        r.timestamp = static_cast<int64_t>(t) * 3600;
        r.open = r.high = r.low = r.close = price;
        r.volume = volume;
        s.rows.push_back(r);
    }
    return s;
}

}  // namespace

TEST_CASE("registry matches the canonical feature list") {
    const std::vector<std::string> expected = {
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
    CHECK(feat::feature_registry() == expected);
    CHECK(feat::feature_registry().size() == 47);

    const auto frame = feat::compute_feature_set(random_series(120, 21));
    CHECK(frame.names == feat::feature_registry());
    CHECK(frame.n_features() == 47);
}

TEST_CASE("constant series: averages equal the constant, changes are zero") {
    const auto frame = feat::compute_feature_set(constant_series(120));
    const size_t last = frame.rows() - 1;
    for (const char* name : {"sma_10", "sma_20", "sma_50", "ema_10", "ema_20", "ema_50",
                             "close_mean_6", "close_mean_12", "close_mean_24"}) {
        CHECK(frame.columns[static_cast<size_t>(frame.col(name))][last] == doctest::Approx(100.0));
    }
    for (const char* name : {"roc_10", "price_change_1h", "price_change_6h", "macd",
                             "macd_signal", "macd_diff", "close_std_6"}) {
        CHECK(frame.columns[static_cast<size_t>(frame.col(name))][last] ==
              doctest::Approx(0.0).epsilon(1e-12));
    }
    CHECK(frame.columns[static_cast<size_t>(frame.col("high_low_ratio"))][last] == doctest::Approx(1.0));
    CHECK(frame.columns[static_cast<size_t>(frame.col("close_open_ratio"))][last] == doctest::Approx(1.0));
}

TEST_CASE("series shorter than the longest lookback is rejected") {
    try {
        feat::compute_feature_set(constant_series(40));
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("50") != std::string::npos);
    }
}

TEST_CASE("every feature matches its naive oracle on a random series") {
    const auto s = random_series(500, 9001);
    const auto o = s.opens();
    const auto h = s.highs();
    const auto l = s.lows();
    const auto c = s.closes();
    const auto v = s.volumes();
    const auto frame = feat::compute_feature_set(s);
    auto col = [&](const char* name) {
        return frame.columns[static_cast<size_t>(frame.col(name))];
    };

    check_column(col("sma_10"), naive::sma(c, 10), "sma_10");
    check_column(col("sma_20"), naive::sma(c, 20), "sma_20");
    check_column(col("sma_50"), naive::sma(c, 50), "sma_50");
    check_column(col("ema_10"), naive::ema(c, 10), "ema_10");
    check_column(col("ema_20"), naive::ema(c, 20), "ema_20");
    check_column(col("ema_50"), naive::ema(c, 50), "ema_50");

    const naive::Macd m = naive::macd(c);
    check_column(col("macd"), m.line, "macd");
    check_column(col("macd_signal"), m.signal, "macd_signal");
    check_column(col("macd_diff"), m.diff, "macd_diff");

    check_column(col("adx_14"), naive::adx(h, l, c, 14), "adx_14");
    const naive::Vortex vx = naive::vortex(h, l, c, 14);
    check_column(col("vortex_pos_14"), vx.pos, "vortex_pos_14");
    check_column(col("vortex_neg_14"), vx.neg, "vortex_neg_14");
    check_column(col("rsi_14"), naive::rsi(c, 14), "rsi_14");

    const naive::Stochastic st = naive::stochastic(h, l, c, 14, 3);
    check_column(col("stoch_k_14_3"), st.k, "stoch_k_14_3");
    check_column(col("stoch_d_3"), st.d, "stoch_d_3");

    check_column(col("roc_10"), naive::roc(c, 10), "roc_10");
    check_column(col("uo_7_14_28"), naive::ultimate(h, l, c), "uo_7_14_28");
    check_column(col("williams_r_14"), naive::williams(h, l, c, 14), "williams_r_14");

    const naive::Bollinger bb = naive::bollinger(c);
    check_column(col("bb_high_20_2"), bb.high_ind, "bb_high_20_2");
    check_column(col("bb_low_20_2"), bb.low_ind, "bb_low_20_2");
    check_column(col("bb_width_20_2"), bb.width, "bb_width_20_2");
    check_column(col("bb_pctb_20_2"), bb.pct_b, "bb_pctb_20_2");

    check_column(col("atr_14"), naive::atr(h, l, c, 14), "atr_14");
    check_column(col("obv"), naive::obv(c, v), "obv");
    check_column(col("mfi_14"), naive::mfi(h, l, c, v, 14), "mfi_14");
    check_column(col("cmf_20"), naive::cmf(h, l, c, v, 20), "cmf_20");
    check_column(col("force_index_13"), naive::force_index(c, v, 13), "force_index_13");

    for (int k = 1; k <= 5; ++k) {
        std::vector<double> lagc(c.size(), naive::nd()), lagv(c.size(), naive::nd());
        for (size_t t = static_cast<size_t>(k); t < c.size(); ++t) {
            lagc[t] = c[t - static_cast<size_t>(k)];
            lagv[t] = v[t - static_cast<size_t>(k)];
        }
        check_column(col(("close_lag_" + std::to_string(k)).c_str()), lagc, "close_lag");
        check_column(col(("volume_lag_" + std::to_string(k)).c_str()), lagv, "volume_lag");
    }
    for (const int w : {6, 12, 24}) {
        check_column(col(("close_mean_" + std::to_string(w)).c_str()), naive::sma(c, w), "mean");
        check_column(col(("close_std_" + std::to_string(w)).c_str()), naive::rolling_std_pop(c, w),
                     "std");
    }
    std::vector<double> hl(c.size()), co(c.size()), pc1(c.size(), naive::nd()),
        pc6(c.size(), naive::nd());
    for (size_t t = 0; t < c.size(); ++t) {
        hl[t] = h[t] / l[t];
        co[t] = c[t] / o[t];
        if (t >= 1) pc1[t] = (c[t] - c[t - 1]) / c[t - 1];
        if (t >= 6) pc6[t] = (c[t] - c[t - 6]) / c[t - 6];
    }
    check_column(col("high_low_ratio"), hl, "high_low_ratio");
    check_column(col("close_open_ratio"), co, "close_open_ratio");
    check_column(col("price_change_1h"), pc1, "price_change_1h");
    check_column(col("price_change_6h"), pc6, "price_change_6h");
}

TEST_CASE("rsi saturates at 100 rising, 0 falling, 50 alternating") {
    std::vector<double> up(1000), down(1000), alt(1000);
    for (size_t i = 0; i < up.size(); ++i) {
        up[i] = 100.0 + static_cast<double>(i);
        down[i] = 1200.0 - static_cast<double>(i);
        alt[i] = 100.0 + (i % 2 == 0 ? 0.0 : 1.0);
    }
    const auto r_up = feat::rsi(up, 14);
    const auto r_down = feat::rsi(down, 14);
    const auto r_alt = feat::rsi(alt, 14);
    CHECK(r_up.back() == doctest::Approx(100.0));
    CHECK(r_down.back() == doctest::Approx(0.0));
    // Alternating unit moves: the seed window holds 7 unit gains and 7 unit
    // losses, so the first defined value is exactly 50. Afterwards the Wilder
    // recursions run out of phase and settle into a two-cycle symmetric
    // around 50 (consecutive values sum to 100 once the seed transient,
    // (13/14)^t, has decayed).
    CHECK(r_alt[14] == doctest::Approx(50.0).epsilon(1e-12));
    const size_t last = r_alt.size() - 1;
    CHECK(r_alt[last] + r_alt[last - 1] == doctest::Approx(100.0).epsilon(1e-9));
    CHECK(std::abs(r_alt[last] - 50.0) < 2.5);
}

TEST_CASE("macd diff always equals macd minus signal") {
    const auto s = random_series(300, 5150);
    const feat::MacdColumns m = feat::macd(s.closes());
    for (size_t t = 0; t < m.diff.size(); ++t) {
        if (std::isnan(m.diff[t])) continue;
        CHECK(m.diff[t] == doctest::Approx(m.macd[t] - m.signal[t]).epsilon(1e-12));
    }
}

TEST_CASE("macd on a linear ramp converges to the closed-form lag gap") {
    // EMA of a ramp a + b*t settles at x_t - b*(w-1)/2, so the fast/slow gap
    // tends to b*((slow-1)/2 - (fast-1)/2) = 7b for (12, 26).
    const double b = 0.37;
    std::vector<double> ramp(800);
    for (size_t t = 0; t < ramp.size(); ++t) ramp[t] = 5.0 + b * static_cast<double>(t);
    const feat::MacdColumns m = feat::macd(ramp);
    CHECK(std::abs(m.macd.back() - 7.0 * b) < 1e-6);
}

TEST_CASE("macd rejects series shorter than slow + signal") {
    std::vector<double> x(30, 1.0);
    CHECK_THROWS_AS(feat::macd(x), DataError);
}

TEST_CASE("bollinger on a constant series degenerates cleanly") {
    const std::vector<double> flat(60, 10.0);
    const feat::BollingerColumns b = feat::bollinger(flat);
    const size_t last = flat.size() - 1;
    CHECK(b.width[last] == 0.0);
    CHECK(b.pct_b[last] == 0.5);
    CHECK(b.high_ind[last] == 0.0);
    CHECK(b.low_ind[last] == 0.0);
}

TEST_CASE("close exactly at the upper band: strict high indicator stays 0, %B is 1") {
    // Solve for a final value sitting on mid + 2*sigma of its own window.
    std::vector<double> base(30);
    Rng rng(31);
    for (double& v : base) v = 100.0 + rng.uniform(-1.0, 1.0);
    auto upper_gap = [&](double x) {
        std::vector<double> w(base.end() - 20, base.end());
        w.back() = x;
        double mu = 0.0;
        for (const double u : w) mu += u;
        mu /= 20.0;
        double var = 0.0;
        for (const double u : w) var += (u - mu) * (u - mu);
        const double sd = std::sqrt(var / 20.0);
        return x - (mu + 2.0 * sd);
    };
    double lo = 100.0, hi = 200.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (upper_gap(mid) < 0.0 ? lo : hi) = mid;
    }
    // nudge below the root so cross-implementation rounding cannot flip the
    // strict comparison; the shift is far below the %B tolerance
    base.back() = lo - std::abs(lo) * 1e-12;
    const feat::BollingerColumns b = feat::bollinger(base, 20, 2.0);
    CHECK(b.high_ind.back() == 0.0);
    CHECK(b.pct_b.back() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("every column is causal: a prefix reproduces the prefix") {
    const auto s = random_series(300, 616);
    data::OhlcvSeries prefix;
    prefix.rows.assign(s.rows.begin(), s.rows.begin() + 200);
    const auto full = feat::compute_feature_set(s);
    const auto part = feat::compute_feature_set(prefix);
    for (size_t f = 0; f < full.columns.size(); ++f) {
        for (size_t t = 0; t < 200; ++t) {
            const double a = full.columns[f][t];
            const double b = part.columns[f][t];
            if (std::isnan(a) && std::isnan(b)) continue;
            CHECK(a == b);
        }
    }
}

TEST_CASE("bounded indicators stay within their ranges") {
    const auto s = random_series(400, 727);
    const auto frame = feat::compute_feature_set(s);
    auto check_range = [&](const char* name, double lo, double hi) {
        const auto& c = frame.columns[static_cast<size_t>(frame.col(name))];
        const int w = frame.warmup[static_cast<size_t>(frame.col(name))];
        for (size_t t = static_cast<size_t>(w); t < c.size(); ++t) {
            CHECK(c[t] >= lo);
            CHECK(c[t] <= hi);
        }
    };
    check_range("rsi_14", 0.0, 100.0);
    check_range("stoch_k_14_3", 0.0, 100.0);
    check_range("stoch_d_3", 0.0, 100.0);
    check_range("williams_r_14", -100.0, 0.0);
    check_range("mfi_14", 0.0, 100.0);
    check_range("cmf_20", -1.0, 1.0);
    check_range("adx_14", 0.0, 100.0);
}

TEST_CASE("obv moves by exactly the volume or not at all") {
    const auto s = random_series(300, 838);
    const auto c = s.closes();
    const auto v = s.volumes();
    const auto o = feat::obv(c, v);
    for (size_t t = 1; t < o.size(); ++t) {
        const double step = o[t] - o[t - 1];
        // running-sum rounding keeps the recovered step within a few ulps
        const double tol = 1e-9 * std::max({1.0, std::abs(o[t]), v[t]});
        const bool ok = step == 0.0 || std::abs(step - v[t]) <= tol || std::abs(step + v[t]) <= tol;
        CHECK(ok);
    }
}

TEST_CASE("atr is nonnegative after warm-up") {
    const auto s = random_series(300, 949);
    const auto a = feat::atr(s.highs(), s.lows(), s.closes(), 14);
    for (const double x : a) {
        if (!std::isnan(x)) CHECK(x >= 0.0);
    }
}

TEST_CASE("lag columns reproduce the source exactly") {
    const auto s = random_series(100, 111);
    const auto c = s.closes();
    const auto frame = feat::compute_feature_set(s);
    const auto& lag3 = frame.columns[static_cast<size_t>(frame.col("close_lag_3"))];
    for (size_t t = 3; t < c.size(); ++t) CHECK(lag3[t] == c[t - 3]);
}

TEST_CASE("warm-up bookkeeping: joint trim leaves only finite rows") {
    const auto s = random_series(160, 232);
    auto frame = feat::compute_feature_set(s);
    const int warm = frame.max_warmup();
    CHECK(warm == 49);  // the 50-hour averages dominate
    frame.drop_front(static_cast<size_t>(warm));
    frame.validate();
    CHECK(frame.max_warmup() == 0);
    for (const auto& c : frame.columns) {
        for (const double x : c) CHECK(std::isfinite(x));
    }
}
