#pragma once

#include <string>

#include <json.hpp>

#include "haelt/ensemble.hpp"
#include "haelt/model.hpp"
#include "haelt/synth.hpp"
#include "haelt/train.hpp"

namespace haelt::cli {

// One structured config file drives every command; every hyperparameter of
// the training protocol surfaces here with its documented default. Unknown
// keys are rejected so typos cannot silently fall back to defaults.
struct RunConfig {
    uint64_t seed = 42;
    std::string out_dir = "runs/run";

    std::string source = "synthetic";  // synthetic | csv
    std::string csv_path;
    synth::SyntheticSpec synthetic;
    bool synthetic_seed_set = false;  // absent: derived from the master seed

    double train_frac = 0.8;
    double val_frac = 0.1;

    model::HaeltConfig model;  // n_features resolved from the feature registry
    train::TrainConfig train;
    ensemble::EnsembleConfig ensemble;

    std::string importance_metric = "f1";
    int importance_repeats = 10;

    double logistic_l2 = 1.0;
    int arima_p = 5;

    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::string& path);
    nlohmann::json to_json() const;
};

}  // namespace haelt::cli
