#pragma once

#include <string>
#include <vector>

#include "haelt/features.hpp"
#include "haelt/metrics.hpp"
#include "haelt/pipeline.hpp"
#include "haelt/runconfig.hpp"
#include "haelt/scaler.hpp"

namespace haelt::cli {

// The full preprocessing chain: ingest, fill, winsorize, engineer features,
// trim warm-up, split rows, fit/apply the scaler, window into sequences.
struct PreparedData {
    std::vector<double> close;        // label source (filled, unwinsorized), trimmed
    std::vector<int64_t> timestamps;  // trimmed
    feat::FeatureFrame scaled;        // trimmed + scaled
    data::ScalerState scaler;
    data::SplitRanges rows;
    data::SequenceDataset dataset;  // all windows
    data::WindowSplit windows;
    size_t rows_raw = 0;
    size_t warmup_dropped = 0;
};

PreparedData prepare_data(const RunConfig& cfg);
nlohmann::json manifest_json(const PreparedData& d);

void cmd_synth(const RunConfig& cfg, const std::string& out_csv);
void cmd_prepare(const RunConfig& cfg, const std::string& out_dir);
void cmd_train(const RunConfig& cfg, const std::string& out_dir);
void cmd_ablate(const RunConfig& cfg, const std::string& out_dir);
void cmd_baselines(const RunConfig& cfg, const std::string& out_dir);
void cmd_importance(const std::string& run_dir);
void cmd_report(const std::string& run_dir);

// CLI entry point; returns the process exit code (0 ok, 1 usage, 2 data,
// 3 numerical).
int run_cli(const std::vector<std::string>& args);

}  // namespace haelt::cli
