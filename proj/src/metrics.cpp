#include "haelt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "haelt/rng.hpp"

namespace haelt::eval {

ConfusionMatrix confusion(const std::vector<int>& y, const std::vector<double>& p,
                          double threshold) {
    if (y.empty()) throw DataError("confusion: empty input");
    if (y.size() != p.size()) throw DataError("confusion: label/probability length mismatch");
    ConfusionMatrix cm;
    for (size_t i = 0; i < y.size(); ++i) {
        const bool pred = p[i] >= threshold;
        if (pred && y[i] == 1) ++cm.tp;
        else if (pred && y[i] == 0) ++cm.fp;
        else if (!pred && y[i] == 1) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

double f1_score(double precision, double recall) {
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
    if (cm.total() <= 0) throw DataError("metrics: empty confusion matrix");
    MetricsReport r;
    r.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    if (cm.tp + cm.fp > 0) {
        r.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
    } else {
        r.precision = 0.0;
        r.precision_defined = false;
    }
    if (cm.tp + cm.fn > 0) {
        r.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
    } else {
        r.recall = 0.0;
        r.recall_defined = false;
    }
    r.f1 = f1_score(r.precision, r.recall);
    return r;
}

double auc_roc(const std::vector<int>& y, const std::vector<double>& p) {
    if (y.size() != p.size()) throw DataError("auc: label/probability length mismatch");
    int64_t n_pos = 0, n_neg = 0;
    for (const int v : y) (v == 1 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0) throw DataError("auc: both classes must be present");

    std::vector<size_t> order(y.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return p[a] < p[b]; });

    // average ranks over tie groups (1-based)
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j < order.size() && p[order[j]] == p[order[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (size_t k = i; k < j; ++k) {
            if (y[order[k]] == 1) rank_sum_pos += avg_rank;
        }
        i = j;
    }
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

std::vector<RocPoint> roc_points(const std::vector<int>& y, const std::vector<double>& p) {
    if (y.size() != p.size() || y.empty()) throw DataError("roc: bad input");
    int64_t n_pos = 0, n_neg = 0;
    for (const int v : y) (v == 1 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0) throw DataError("roc: both classes must be present");

    std::vector<size_t> order(y.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return p[a] > p[b]; });

    std::vector<RocPoint> pts;
    pts.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    int64_t tp = 0, fp = 0;
    size_t i = 0;
    while (i < order.size()) {
        const double score = p[order[i]];
        while (i < order.size() && p[order[i]] == score) {
            (y[order[i]] == 1 ? tp : fp) += 1;
            ++i;
        }
        pts.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                       static_cast<double>(tp) / static_cast<double>(n_pos), score});
    }
    return pts;
}

MetricsReport full_report(const std::vector<int>& y, const std::vector<double>& p,
                          double threshold) {
    MetricsReport r = metrics(confusion(y, p, threshold));
    r.threshold = threshold;
    r.auc_roc = auc_roc(y, p);
    return r;
}

double metric_value(const std::string& metric, const std::vector<int>& y,
                    const std::vector<double>& p) {
    if (metric == "accuracy") return metrics(confusion(y, p)).accuracy;
    if (metric == "f1") return metrics(confusion(y, p)).f1;
    if (metric == "auc") return auc_roc(y, p);
    throw UsageError("unknown metric '" + metric + "'");
}

ImportanceResult permutation_importance(const PredictFn& predict,
                                        const data::SequenceDataset& ds,
                                        const std::string& metric, int repeats, uint64_t seed) {
    if (repeats < 1) throw UsageError("permutation importance: repeats must be >= 1");
    if (ds.size() == 0) throw DataError("permutation importance: empty dataset");

    ImportanceResult result;
    result.metric = metric;
    result.baseline = metric_value(metric, ds.labels, predict(ds));

    const size_t n = ds.size();
    const int t_len = ds.seq_len;
    const int nf = ds.n_features;
    data::SequenceDataset work = ds;
    const Rng master(seed);

    std::vector<double> saved(n * static_cast<size_t>(t_len));
    for (int f = 0; f < nf; ++f) {
        // stash the column
        for (size_t i = 0; i < n; ++i)
            for (int t = 0; t < t_len; ++t)
                saved[i * static_cast<size_t>(t_len) + t] = work.at(i, t, f);

        double drop_sum = 0.0;
        for (int r = 0; r < repeats; ++r) {
            Rng sub = master.fork(static_cast<uint64_t>(f) * 1000003ULL + static_cast<uint64_t>(r));
            std::vector<size_t> perm(n);
            std::iota(perm.begin(), perm.end(), 0);
            sub.shuffle(perm);
            for (size_t i = 0; i < n; ++i) {
                double* dst = work.windows.data() +
                              (i * static_cast<size_t>(t_len)) * nf + static_cast<size_t>(f);
                const double* src = saved.data() + perm[i] * static_cast<size_t>(t_len);
                for (int t = 0; t < t_len; ++t) dst[static_cast<size_t>(t) * nf] = src[t];
            }
            drop_sum += metric_value(metric, work.labels, predict(work));
        }
        // restore
        for (size_t i = 0; i < n; ++i) {
            double* dst =
                work.windows.data() + (i * static_cast<size_t>(t_len)) * nf + static_cast<size_t>(f);
            const double* src = saved.data() + i * static_cast<size_t>(t_len);
            for (int t = 0; t < t_len; ++t) dst[static_cast<size_t>(t) * nf] = src[t];
        }
        const std::string name = f < static_cast<int>(ds.feature_names.size())
                                     ? ds.feature_names[static_cast<size_t>(f)]
                                     : "feature_" + std::to_string(f);
        result.entries.push_back({name, result.baseline - drop_sum / repeats});
    }
    return result;
}

}  // namespace haelt::eval
