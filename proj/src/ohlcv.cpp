#include "haelt/ohlcv.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace haelt::data {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string strip(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(strip(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_cell(const std::string& cell, size_t line_no, const std::string& col) {
    if (cell.empty() || lower(cell) == "nan") return kNaN;
    try {
        size_t pos = 0;
        const double v = std::stod(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw DataError("line " + std::to_string(line_no) + ": cannot parse " + col + " value '" +
                        cell + "'");
    }
}

}  // namespace

std::vector<double> OhlcvSeries::opens() const {
    std::vector<double> v(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) v[i] = rows[i].open;
    return v;
}
std::vector<double> OhlcvSeries::highs() const {
    std::vector<double> v(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) v[i] = rows[i].high;
    return v;
}
std::vector<double> OhlcvSeries::lows() const {
    std::vector<double> v(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) v[i] = rows[i].low;
    return v;
}
std::vector<double> OhlcvSeries::closes() const {
    std::vector<double> v(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) v[i] = rows[i].close;
    return v;
}
std::vector<double> OhlcvSeries::volumes() const {
    std::vector<double> v(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) v[i] = rows[i].volume;
    return v;
}
std::vector<int64_t> OhlcvSeries::timestamps() const {
    std::vector<int64_t> v(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) v[i] = rows[i].timestamp;
    return v;
}

OhlcvSeries load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");

    std::string header;
    if (!std::getline(in, header)) throw DataError("'" + path + "': empty file");
    if (!header.empty() && header.back() == '\r') header.pop_back();

    const std::vector<std::string> cols = split_line(header);
    const std::vector<std::string> wanted = {"timestamp", "open", "high", "low", "close", "volume"};
    std::vector<int> idx(wanted.size(), -1);
    for (size_t c = 0; c < cols.size(); ++c) {
        const std::string name = lower(cols[c]);
        for (size_t w = 0; w < wanted.size(); ++w)
            if (name == wanted[w]) idx[w] = static_cast<int>(c);
    }
    for (size_t w = 0; w < wanted.size(); ++w) {
        if (idx[w] < 0) throw DataError("'" + path + "': header is missing column '" + wanted[w] + "'");
    }

    OhlcvSeries s;
    std::string line;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (strip(line).empty()) continue;
        const std::vector<std::string> cells = split_line(line);
        if (cells.size() < cols.size()) {
            throw DataError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(cols.size()) + " fields, got " +
                            std::to_string(cells.size()));
        }
        OhlcvRow r;
        const std::string& ts_cell = cells[static_cast<size_t>(idx[0])];
        try {
            size_t pos = 0;
            r.timestamp = std::stoll(ts_cell, &pos);
            if (pos != ts_cell.size()) throw std::invalid_argument(ts_cell);
        } catch (const std::exception&) {
            throw DataError("line " + std::to_string(line_no) + ": cannot parse timestamp '" +
                            ts_cell + "'");
        }
        r.open = parse_cell(cells[static_cast<size_t>(idx[1])], line_no, "open");
        r.high = parse_cell(cells[static_cast<size_t>(idx[2])], line_no, "high");
        r.low = parse_cell(cells[static_cast<size_t>(idx[3])], line_no, "low");
        r.close = parse_cell(cells[static_cast<size_t>(idx[4])], line_no, "close");
        r.volume = parse_cell(cells[static_cast<size_t>(idx[5])], line_no, "volume");

        for (const double p : {r.open, r.high, r.low, r.close}) {
            if (!std::isnan(p) && p <= 0.0) {
                throw DataError("line " + std::to_string(line_no) + ": non-positive price " +
                                std::to_string(p));
            }
        }
        if (!std::isnan(r.volume) && r.volume < 0.0) {
            throw DataError("line " + std::to_string(line_no) + ": negative volume " +
                            std::to_string(r.volume));
        }
        const bool complete = !std::isnan(r.open) && !std::isnan(r.high) && !std::isnan(r.low) &&
                              !std::isnan(r.close);
        if (complete && (r.high < std::max(r.open, r.close) || r.low > std::min(r.open, r.close))) {
            throw DataError("line " + std::to_string(line_no) +
                            ": high/low do not bound open/close");
        }
        s.rows.push_back(r);
    }

    std::stable_sort(s.rows.begin(), s.rows.end(),
                     [](const OhlcvRow& a, const OhlcvRow& b) { return a.timestamp < b.timestamp; });
    for (size_t i = 1; i < s.rows.size(); ++i) {
        if (s.rows[i].timestamp == s.rows[i - 1].timestamp) {
            throw DataError("duplicate timestamp " + std::to_string(s.rows[i].timestamp));
        }
    }
    return s;
}

void save_csv(const OhlcvSeries& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "timestamp,open,high,low,close,volume\n";
    out.precision(10);
    out << std::fixed;
    for (const OhlcvRow& r : s.rows) {
        out << r.timestamp << ',' << r.open << ',' << r.high << ',' << r.low << ',' << r.close
            << ',' << r.volume << '\n';
    }
}

OhlcvSeries forward_fill(const OhlcvSeries& s) {
    if (s.empty()) return s;
    const OhlcvRow& first = s.rows.front();
    if (std::isnan(first.open) || std::isnan(first.high) || std::isnan(first.low) ||
        std::isnan(first.close) || std::isnan(first.volume)) {
        throw DataError("forward_fill: first row has missing fields");
    }
    OhlcvSeries out = s;
    OhlcvRow last = first;
    for (OhlcvRow& r : out.rows) {
        if (std::isnan(r.open)) r.open = last.open;
        if (std::isnan(r.high)) r.high = last.high;
        if (std::isnan(r.low)) r.low = last.low;
        if (std::isnan(r.close)) r.close = last.close;
        if (std::isnan(r.volume)) r.volume = last.volume;
        last = r;
    }
    return out;
}

double percentile(const std::vector<double>& column, double pct) {
    if (column.empty()) throw DataError("percentile: empty column");
    for (const double v : column) {
        if (!std::isfinite(v)) throw DataError("percentile: non-finite value in column");
    }
    std::vector<double> sorted = column;
    std::sort(sorted.begin(), sorted.end());
    const double rank = pct / 100.0 * static_cast<double>(sorted.size() - 1);
    const size_t lo = static_cast<size_t>(rank);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = rank - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

void winsorize_column(std::vector<double>& column, double lower_pct, double upper_pct) {
    if (column.empty()) throw DataError("winsorize: empty column");
    if (column.size() < 2) throw DataError("winsorize: need at least 2 values");
    const double lo = percentile(column, lower_pct);
    const double hi = percentile(column, upper_pct);
    for (double& v : column) v = std::clamp(v, lo, hi);
}

OhlcvSeries winsorize(const OhlcvSeries& s, double lower_pct, double upper_pct) {
    std::vector<double> o = s.opens(), h = s.highs(), l = s.lows(), c = s.closes(),
                        v = s.volumes();
    winsorize_column(o, lower_pct, upper_pct);
    winsorize_column(h, lower_pct, upper_pct);
    winsorize_column(l, lower_pct, upper_pct);
    winsorize_column(c, lower_pct, upper_pct);
    winsorize_column(v, lower_pct, upper_pct);
    OhlcvSeries out = s;
    for (size_t i = 0; i < out.rows.size(); ++i) {
        out.rows[i].open = o[i];
        out.rows[i].high = h[i];
        out.rows[i].low = l[i];
        out.rows[i].close = c[i];
        out.rows[i].volume = v[i];
    }
    return out;
}

}  // namespace haelt::data
