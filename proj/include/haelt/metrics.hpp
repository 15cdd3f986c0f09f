#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "haelt/errors.hpp"
#include "haelt/pipeline.hpp"

namespace haelt::eval {

struct ConfusionMatrix {
    int64_t tp = 0, tn = 0, fp = 0, fn = 0;
    int64_t total() const { return tp + tn + fp + fn; }
};

struct MetricsReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double auc_roc = 0.0;
    double threshold = 0.5;
    // zero-denominator cases report 0 with the flag cleared
    bool precision_defined = true;
    bool recall_defined = true;
};

// Predicts 1 iff p >= threshold.
ConfusionMatrix confusion(const std::vector<int>& y, const std::vector<double>& p,
                          double threshold = 0.5);

// Harmonic mean of precision and recall; 0 when both are 0.
double f1_score(double precision, double recall);

// Accuracy, precision, recall, F1 from counts; auc_roc left at 0.
MetricsReport metrics(const ConfusionMatrix& cm);

// Rank-based (Mann-Whitney) AUC with average-rank tie correction. Requires
// both classes.
double auc_roc(const std::vector<int>& y, const std::vector<double>& p);

struct RocPoint {
    double fpr = 0.0, tpr = 0.0;
    double threshold = 0.0;
};

// Threshold sweep over distinct scores, from (0,0) to (1,1). Trapezoidal
// integration of these points equals auc_roc.
std::vector<RocPoint> roc_points(const std::vector<int>& y, const std::vector<double>& p);

// confusion + metrics + AUC in one report.
MetricsReport full_report(const std::vector<int>& y, const std::vector<double>& p,
                          double threshold = 0.5);

// "accuracy", "f1" or "auc" over labels and probabilities.
double metric_value(const std::string& metric, const std::vector<int>& y,
                    const std::vector<double>& p);

struct ImportanceEntry {
    std::string feature;
    double importance = 0.0;
};

struct ImportanceResult {
    double baseline = 0.0;
    std::string metric;
    std::vector<ImportanceEntry> entries;  // feature order of the dataset
};

using PredictFn = std::function<std::vector<double>(const data::SequenceDataset&)>;

// importance(f) = baseline - mean over `repeats` seeded permutations of the
// metric after shuffling feature f across samples (the within-window time
// structure of each sample is kept intact).
ImportanceResult permutation_importance(const PredictFn& predict,
                                        const data::SequenceDataset& ds,
                                        const std::string& metric, int repeats, uint64_t seed);

}  // namespace haelt::eval
