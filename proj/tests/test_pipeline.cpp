#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "haelt/ohlcv.hpp"
#include "haelt/pipeline.hpp"
#include "haelt/rng.hpp"
#include "haelt/scaler.hpp"
#include "support/gen.hpp"

using namespace haelt;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& stem) {
    static int counter = 0;
    return fs::temp_directory_path() / (stem + "_" + std::to_string(++counter) + ".csv");
}

fs::path write_file(const std::string& stem, const std::string& content) {
    const fs::path p = temp_file(stem);
    std::ofstream out(p);
    out << content;
    return p;
}

// independent closest-rank linear interpolation
double oracle_percentile(std::vector<double> v, double pct) {
    std::sort(v.begin(), v.end());
    const double idx = pct / 100.0 * static_cast<double>(v.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(idx));
    const size_t hi = static_cast<size_t>(std::ceil(idx));
    if (lo == hi) return v[lo];
    return v[lo] + (idx - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

TEST_CASE("load_csv parses a well-formed file") {
    const auto p = write_file("ok",
                              "timestamp,open,high,low,close,volume\n"
                              "100,10,11,9,10.5,1000\n"
                              "200,10.5,12,10,11,1500\n"
                              "300,11,11.5,10.5,11.2,900\n");
    const data::OhlcvSeries s = data::load_csv(p.string());
    REQUIRE(s.size() == 3);
    CHECK(s.rows[1].high == doctest::Approx(12.0));
    CHECK(s.rows[2].timestamp == 300);
}

TEST_CASE("load_csv accepts case-insensitive headers in any order") {
    const auto p = write_file("hdr",
                              "Volume,Close,LOW,high,OPEN,Timestamp\n"
                              "1000,10.5,9,11,10,100\n");
    const data::OhlcvSeries s = data::load_csv(p.string());
    REQUIRE(s.size() == 1);
    CHECK(s.rows[0].open == doctest::Approx(10.0));
    CHECK(s.rows[0].volume == doctest::Approx(1000.0));
}

TEST_CASE("load_csv rejects negative volume naming the line") {
    const auto p = write_file("negvol",
                              "timestamp,open,high,low,close,volume\n"
                              "100,10,11,9,10.5,1000\n"
                              "200,10.5,12,10,11,-1\n");
    try {
        data::load_csv(p.string());
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 3") != std::string::npos);
        CHECK(msg.find("volume") != std::string::npos);
    }
}

TEST_CASE("load_csv rejects malformed cells, duplicates and bad bounds") {
    const auto bad = write_file("badcell",
                                "timestamp,open,high,low,close,volume\n"
                                "100,10,11,9,abc,1000\n");
    CHECK_THROWS_AS(data::load_csv(bad.string()), DataError);

    const auto dup = write_file("dup",
                                "timestamp,open,high,low,close,volume\n"
                                "100,10,11,9,10.5,1000\n"
                                "100,10,11,9,10.5,1000\n");
    CHECK_THROWS_AS(data::load_csv(dup.string()), DataError);

    const auto bounds = write_file("bounds",
                                   "timestamp,open,high,low,close,volume\n"
                                   "100,10,9.5,9,10.5,1000\n");
    CHECK_THROWS_AS(data::load_csv(bounds.string()), DataError);
}

TEST_CASE("load_csv sorts rows by timestamp") {
    const auto p = write_file("sort",
                              "timestamp,open,high,low,close,volume\n"
                              "300,11,11.5,10.5,11.2,900\n"
                              "100,10,11,9,10.5,1000\n"
                              "200,10.5,12,10,11,1500\n");
    const data::OhlcvSeries s = data::load_csv(p.string());
    CHECK(s.rows[0].timestamp == 100);
    CHECK(s.rows[2].timestamp == 300);
}

TEST_CASE("a 2438-row synthetic file round-trips with every record") {
    const auto series = testsupport::random_series(2438, 7);
    const auto p = temp_file("round");
    data::save_csv(series, p.string());
    const data::OhlcvSeries loaded = data::load_csv(p.string());
    CHECK(loaded.size() == 2438);
}

TEST_CASE("forward_fill leaves complete series identical") {
    const auto s = testsupport::random_series(20, 3);
    const data::OhlcvSeries f = data::forward_fill(s);
    for (size_t i = 0; i < s.size(); ++i) {
        CHECK(f.rows[i].close == s.rows[i].close);
        CHECK(f.rows[i].volume == s.rows[i].volume);
    }
}

TEST_CASE("forward_fill propagates the most recent valid value") {
    auto s = testsupport::random_series(10, 4);
    s.rows[5].close = std::nan("");
    const data::OhlcvSeries f = data::forward_fill(s);
    CHECK(f.rows[5].close == s.rows[4].close);

    // two consecutive gaps take the last pre-gap value
    auto s2 = testsupport::random_series(10, 5);
    s2.rows[6].volume = std::nan("");
    s2.rows[7].volume = std::nan("");
    const data::OhlcvSeries f2 = data::forward_fill(s2);
    CHECK(f2.rows[6].volume == s2.rows[5].volume);
    CHECK(f2.rows[7].volume == s2.rows[5].volume);
}

TEST_CASE("forward_fill requires a complete first row") {
    auto s = testsupport::random_series(5, 6);
    s.rows[0].open = std::nan("");
    CHECK_THROWS_AS(data::forward_fill(s), DataError);
}

TEST_CASE("forward_fill is idempotent") {
    Rng rng(77);
    auto s = testsupport::random_series(200, 8);
    for (size_t i = 1; i < s.size(); ++i) {
        if (rng.uniform() < 0.15) s.rows[i].close = std::nan("");
        if (rng.uniform() < 0.15) s.rows[i].volume = std::nan("");
    }
    const data::OhlcvSeries once = data::forward_fill(s);
    const data::OhlcvSeries twice = data::forward_fill(once);
    for (size_t i = 0; i < s.size(); ++i) {
        CHECK(once.rows[i].close == twice.rows[i].close);
        CHECK(once.rows[i].volume == twice.rows[i].volume);
    }
}

TEST_CASE("winsorize leaves a constant column unchanged") {
    std::vector<double> col(100, 42.0);
    data::winsorize_column(col, 0.5, 99.5);
    for (const double v : col) CHECK(v == 42.0);
}

TEST_CASE("winsorize clips to the interpolated percentiles") {
    std::vector<double> col(1000);
    for (size_t i = 0; i < 1000; ++i) col[i] = static_cast<double>(i + 1);
    const std::vector<double> original = col;
    const double lo = oracle_percentile(original, 0.5);
    const double hi = oracle_percentile(original, 99.5);
    data::winsorize_column(col, 0.5, 99.5);
    for (size_t i = 0; i < col.size(); ++i) {
        CHECK(col[i] >= lo);
        CHECK(col[i] <= hi);
        if (original[i] > lo && original[i] < hi) CHECK(col[i] == original[i]);
    }
    CHECK(col.front() == doctest::Approx(lo).epsilon(1e-12));
    CHECK(col.back() == doctest::Approx(hi).epsilon(1e-12));
}

TEST_CASE("winsorize clips a single extreme spike to the upper percentile") {
    Rng rng(12);
    std::vector<double> col(400);
    for (double& v : col) v = rng.uniform(0.0, 1.0);
    col[200] = 1e6;
    const double hi = oracle_percentile(col, 99.5);
    data::winsorize_column(col, 0.5, 99.5);
    CHECK(col[200] == doctest::Approx(hi).epsilon(1e-12));
}

TEST_CASE("winsorize is idempotent when the clip points carry point mass") {
    // With interpolated percentiles, exact idempotence needs ties at the
    // tails so the recomputed bounds land on the same values.
    Rng rng(13);
    std::vector<double> col;
    for (int i = 0; i < 20; ++i) col.push_back(-50.0);
    for (int i = 0; i < 460; ++i) col.push_back(rng.uniform(-10.0, 10.0));
    for (int i = 0; i < 20; ++i) col.push_back(50.0);
    rng.shuffle(col);
    data::winsorize_column(col, 0.5, 99.5);
    std::vector<double> again = col;
    data::winsorize_column(again, 0.5, 99.5);
    for (size_t i = 0; i < col.size(); ++i) CHECK(col[i] == again[i]);
}

TEST_CASE("re-winsorizing continuous data drifts by less than 1% of the kept range") {
    // Fractional-rank interpolation recreates slightly tighter bounds on
    // already-clipped data; the movement is bounded by the local tail gap.
    Rng rng(14);
    std::vector<double> col(500);
    for (double& v : col) v = rng.normal() * 10.0;
    data::winsorize_column(col, 0.5, 99.5);
    const double range = *std::max_element(col.begin(), col.end()) -
                         *std::min_element(col.begin(), col.end());
    std::vector<double> again = col;
    data::winsorize_column(again, 0.5, 99.5);
    for (size_t i = 0; i < col.size(); ++i) {
        CHECK(std::abs(col[i] - again[i]) <= 0.01 * range);
    }
}

TEST_CASE("winsorize rejects empty and single-element columns") {
    std::vector<double> empty;
    CHECK_THROWS_AS(data::winsorize_column(empty, 0.5, 99.5), DataError);
    std::vector<double> one{1.0};
    CHECK_THROWS_AS(data::winsorize_column(one, 0.5, 99.5), DataError);
}

TEST_CASE("scaler maps training endpoints to 0 and 1 and midpoint to 0.5") {
    const std::vector<std::string> names{"a"};
    const std::vector<std::vector<double>> cols{{2.0, 4.0, 6.0}};
    const data::ScalerState st = data::fit_scaler(names, cols, 0, 3);
    const auto scaled = data::apply_scaler(st, cols);
    CHECK(scaled[0][0] == doctest::Approx(0.0));
    CHECK(scaled[0][1] == doctest::Approx(0.5));
    CHECK(scaled[0][2] == doctest::Approx(1.0));
}

TEST_CASE("scaler transforms values beyond the training range past [0,1]") {
    const std::vector<std::string> names{"a"};
    const std::vector<std::vector<double>> cols{{0.0, 10.0, 20.0}};
    const data::ScalerState st = data::fit_scaler(names, cols, 0, 2);  // train on first 2 rows
    const auto scaled = data::apply_scaler(st, cols);
    CHECK(scaled[0][2] == doctest::Approx(2.0));  // above the training max, accepted
}

TEST_CASE("scaler flags a constant column and maps it to 0.5") {
    const std::vector<std::string> names{"flat"};
    const std::vector<std::vector<double>> cols{{3.0, 3.0, 3.0, 7.0}};
    const data::ScalerState st = data::fit_scaler(names, cols, 0, 3);
    CHECK(st.degenerate[0]);
    const auto scaled = data::apply_scaler(st, cols);
    CHECK(scaled[0][0] == 0.5);
    CHECK(scaled[0][3] == 0.5);
}

TEST_CASE("fit then apply on the training slice reproduces the fit transform") {
    Rng rng(44);
    std::vector<std::vector<double>> cols(3, std::vector<double>(120));
    for (auto& c : cols)
        for (double& v : c) v = rng.normal() * 5.0 + 1.0;
    const std::vector<std::string> names{"x", "y", "z"};
    const data::ScalerState st = data::fit_scaler(names, cols, 0, 100);
    const auto once = data::apply_scaler(st, cols);
    const auto twice = data::apply_scaler(st, cols);  // apply never mutates state
    for (size_t c = 0; c < cols.size(); ++c) {
        for (size_t r = 0; r < 100; ++r) {
            CHECK(once[c][r] >= 0.0);
            CHECK(once[c][r] <= 1.0);
            CHECK(once[c][r] == twice[c][r]);
        }
    }
}

TEST_CASE("chronological split reproduces the documented row counts") {
    const data::SplitRanges a = data::chronological_split(2414);
    CHECK(a.train_size() == 1931);
    CHECK(a.val_size() == 241);
    CHECK(a.test_size() == 242);

    const data::SplitRanges b = data::chronological_split(100);
    CHECK(b.train_size() == 80);
    CHECK(b.val_size() == 10);
    CHECK(b.test_size() == 10);

    const data::SplitRanges c = data::chronological_split(101);
    CHECK(c.train_size() == 80);
    CHECK(c.val_size() == 10);
    CHECK(c.test_size() == 11);
}

TEST_CASE("chronological split rejects short series") {
    CHECK_THROWS_AS(data::chronological_split(49), DataError);
}

TEST_CASE("split ranges are disjoint, ordered and cover every row") {
    Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        const size_t n = 50 + static_cast<size_t>(rng.uniform_int(5000));
        const data::SplitRanges r = data::chronological_split(n);
        CHECK(r.train_end <= r.val_end);
        CHECK(r.val_end <= r.n);
        CHECK(r.train_size() + r.val_size() + r.test_size() == n);
        CHECK(r.train_size() == static_cast<size_t>(std::floor(0.8 * static_cast<double>(n))));
        CHECK(r.val_size() == static_cast<size_t>(std::floor(0.1 * static_cast<double>(n))));
    }
}

TEST_CASE("make_sequences labels strictly rising close with ones") {
    const size_t n = 40;
    std::vector<double> close(n);
    std::vector<int64_t> ts(n);
    for (size_t i = 0; i < n; ++i) {
        close[i] = 100.0 + static_cast<double>(i);
        ts[i] = 1000 + static_cast<int64_t>(i);
    }
    const std::vector<std::vector<double>> cols{close};
    const data::SequenceDataset ds = data::make_sequences({"close"}, cols, close, ts, 30);
    CHECK(ds.size() == n - 30);
    for (size_t i = 0; i < ds.size(); ++i) CHECK(ds.labels[i] == 1);
}

TEST_CASE("make_sequences labels a constant close with zeros (down/stable)") {
    const size_t n = 40;
    const std::vector<double> close(n, 50.0);
    std::vector<int64_t> ts(n);
    for (size_t i = 0; i < n; ++i) ts[i] = static_cast<int64_t>(i);
    const data::SequenceDataset ds = data::make_sequences({"close"}, {close}, close, ts, 30);
    CHECK(ds.size() == 10);
    for (size_t i = 0; i < ds.size(); ++i) CHECK(ds.labels[i] == 0);
}

TEST_CASE("make_sequences window count and contents") {
    const size_t n = 40;
    std::vector<double> close(n), feat(n);
    std::vector<int64_t> ts(n);
    for (size_t i = 0; i < n; ++i) {
        close[i] = 100.0 + std::sin(static_cast<double>(i));
        feat[i] = static_cast<double>(i) * 2.0;
        ts[i] = 1000 + static_cast<int64_t>(i) * 3600;
    }
    const data::SequenceDataset ds = data::make_sequences({"f"}, {feat}, close, ts, 30);
    // the final row lacks a successor, so the count is rows - length
    REQUIRE(ds.size() == 10);
    // window 0 spans rows 0..29 and is labelled by rows 29 vs 30
    CHECK(ds.at(0, 0, 0) == feat[0]);
    CHECK(ds.at(0, 29, 0) == feat[29]);
    CHECK(ds.labels[0] == (close[30] > close[29] ? 1 : 0));
    CHECK(ds.timestamps[0] == ts[29]);
    // last window ends at row 38 (row 39 has no successor)
    CHECK(ds.end_rows.back() == 38);
    CHECK(ds.at(9, 29, 0) == feat[38]);
}

TEST_CASE("make_sequences rejects series without a full window") {
    const std::vector<double> close(30, 1.0);
    std::vector<int64_t> ts(30);
    for (size_t i = 0; i < 30; ++i) ts[i] = static_cast<int64_t>(i);
    CHECK_THROWS_AS(data::make_sequences({"c"}, {close}, close, ts, 30), DataError);
}

TEST_CASE("split_windows assigns windows to the split of their label row") {
    const size_t n = 100;
    std::vector<double> close(n);
    std::vector<int64_t> ts(n);
    for (size_t i = 0; i < n; ++i) {
        close[i] = 10.0 + 0.01 * static_cast<double>(i % 7);
        ts[i] = static_cast<int64_t>(i);
    }
    const data::SequenceDataset ds = data::make_sequences({"c"}, {close}, close, ts, 30);
    const data::SplitRanges rows = data::chronological_split(n);  // 80/10/10
    const data::WindowSplit ws = data::split_windows(ds, rows);
    for (size_t i = 0; i < ds.size(); ++i) {
        const size_t label_row = ds.end_rows[i] + 1;
        if (i < ws.train_end) CHECK(label_row < rows.train_end);
        else if (i < ws.val_end) {
            CHECK(label_row >= rows.train_end);
            CHECK(label_row < rows.val_end);
        } else {
            CHECK(label_row >= rows.val_end);
        }
    }
    CHECK(ws.val_end <= ds.size());
    // each split holds exactly as many windows as labelled rows: 10 val, 10 test
    CHECK(ws.val_end - ws.train_end == 10);
    CHECK(ds.size() - ws.val_end == 10);
}

TEST_CASE("paper-scale window counts: 2414 rows give 241 val and 242 test windows") {
    const size_t n = 2414;
    std::vector<double> close(n);
    std::vector<int64_t> ts(n);
    for (size_t i = 0; i < n; ++i) {
        close[i] = 100.0 + std::sin(0.05 * static_cast<double>(i));
        ts[i] = static_cast<int64_t>(i);
    }
    const data::SequenceDataset ds = data::make_sequences({"c"}, {close}, close, ts, 30);
    CHECK(ds.size() == 2384);
    const data::SplitRanges rows = data::chronological_split(n);
    const data::WindowSplit ws = data::split_windows(ds, rows);
    CHECK(ws.train_end == 1901);               // 1931 training rows minus the 30-row ramp-up
    CHECK(ws.val_end - ws.train_end == 241);   // one prediction per validation row
    CHECK(ds.size() - ws.val_end == 242);      // one prediction per test row
}
