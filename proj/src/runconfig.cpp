#include "haelt/runconfig.hpp"

#include <fstream>

namespace haelt::cli {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw UsageError("config: '" + where + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw UsageError("config: unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    check_keys(j, {"seed", "out", "data", "split", "model", "train", "ensemble", "importance",
                   "baselines"},
               "config root");
    read(j, "seed", c.seed);
    read(j, "out", c.out_dir);

    if (j.contains("data")) {
        const json& d = j.at("data");
        check_keys(d, {"source", "csv_path", "synthetic"}, "data");
        read(d, "source", c.source);
        read(d, "csv_path", c.csv_path);
        if (c.source != "synthetic" && c.source != "csv") {
            throw UsageError("config: data.source must be 'synthetic' or 'csv'");
        }
        if (d.contains("synthetic")) {
            const json& s = d.at("synthetic");
            check_keys(s,
                       {"n_rows", "base_price", "base_volume", "signal_strength", "seed",
                        "segments", "start_timestamp"},
                       "data.synthetic");
            read(s, "n_rows", c.synthetic.n_rows);
            read(s, "base_price", c.synthetic.base_price);
            read(s, "base_volume", c.synthetic.base_volume);
            read(s, "signal_strength", c.synthetic.signal_strength);
            read(s, "start_timestamp", c.synthetic.start_timestamp);
            if (s.contains("seed")) {
                c.synthetic.seed = s.at("seed").get<uint64_t>();
                c.synthetic_seed_set = true;
            }
            if (s.contains("segments")) {
                c.synthetic.segments.clear();
                for (const json& seg : s.at("segments")) {
                    check_keys(seg, {"rows", "drift", "volatility"}, "data.synthetic.segments[]");
                    synth::Segment sg;
                    read(seg, "rows", sg.rows);
                    read(seg, "drift", sg.drift);
                    read(seg, "volatility", sg.volatility);
                    c.synthetic.segments.push_back(sg);
                }
            }
        }
    }

    if (j.contains("split")) {
        const json& s = j.at("split");
        check_keys(s, {"train", "val"}, "split");
        read(s, "train", c.train_frac);
        read(s, "val", c.val_frac);
    }

    if (j.contains("model")) {
        const json& m = j.at("model");
        check_keys(m,
                   {"variant", "seq_len", "resnet_filters", "resnet_kernels", "lstm_units",
                    "embed_dim", "heads", "ff_dim", "encoder_layers", "dropout", "head_hidden",
                    "fusion_hidden"},
                   "model");
        if (m.contains("variant")) {
            c.model.variant = model::variant_from_string(m.at("variant").get<std::string>());
        }
        read(m, "seq_len", c.model.seq_len);
        read(m, "resnet_filters", c.model.resnet_filters);
        read(m, "resnet_kernels", c.model.resnet_kernels);
        read(m, "lstm_units", c.model.lstm_units);
        read(m, "embed_dim", c.model.embed_dim);
        read(m, "heads", c.model.heads);
        read(m, "ff_dim", c.model.ff_dim);
        read(m, "encoder_layers", c.model.encoder_layers);
        read(m, "dropout", c.model.dropout);
        read(m, "head_hidden", c.model.head_hidden);
        read(m, "fusion_hidden", c.model.fusion_hidden);
    }

    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t,
                   {"lr", "batch_size", "max_epochs", "es_patience", "plateau_factor",
                    "plateau_patience", "min_lr", "val_fraction_of_train"},
                   "train");
        read(t, "lr", c.train.lr);
        read(t, "batch_size", c.train.batch_size);
        read(t, "max_epochs", c.train.max_epochs);
        read(t, "es_patience", c.train.es_patience);
        read(t, "plateau_factor", c.train.plateau_factor);
        read(t, "plateau_patience", c.train.plateau_patience);
        read(t, "min_lr", c.train.min_lr);
        read(t, "val_fraction_of_train", c.train.val_fraction_of_train);
    }

    if (j.contains("ensemble")) {
        const json& e = j.at("ensemble");
        check_keys(e, {"k", "tau", "mode"}, "ensemble");
        read(e, "k", c.ensemble.k);
        read(e, "tau", c.ensemble.tau);
        if (e.contains("mode")) {
            c.ensemble.mode = ensemble::mode_from_string(e.at("mode").get<std::string>());
        }
        if (c.ensemble.k < 1) throw UsageError("config: ensemble.k must be >= 1");
        if (c.ensemble.tau <= 0.0) throw UsageError("config: ensemble.tau must be positive");
    }

    if (j.contains("importance")) {
        const json& imp = j.at("importance");
        check_keys(imp, {"metric", "repeats"}, "importance");
        read(imp, "metric", c.importance_metric);
        read(imp, "repeats", c.importance_repeats);
    }

    if (j.contains("baselines")) {
        const json& b = j.at("baselines");
        check_keys(b, {"logistic_l2", "arima_p"}, "baselines");
        read(b, "logistic_l2", c.logistic_l2);
        read(b, "arima_p", c.arima_p);
    }

    if (c.train_frac <= 0.0 || c.val_frac <= 0.0 || c.train_frac + c.val_frac >= 1.0) {
        throw UsageError("config: split fractions must be positive and sum below 1");
    }
    if (c.source == "csv" && c.csv_path.empty()) {
        throw UsageError("config: data.source 'csv' requires data.csv_path");
    }
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("config '" + path + "': " + e.what());
    }
    return from_json(j);
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json seg = nlohmann::json::array();
    for (const synth::Segment& s : synthetic.segments) {
        seg.push_back({{"rows", s.rows}, {"drift", s.drift}, {"volatility", s.volatility}});
    }
    nlohmann::json synth_j = {
        {"n_rows", synthetic.n_rows},         {"base_price", synthetic.base_price},
        {"base_volume", synthetic.base_volume}, {"signal_strength", synthetic.signal_strength},
        {"start_timestamp", synthetic.start_timestamp}, {"segments", seg},
    };
    if (synthetic_seed_set) synth_j["seed"] = synthetic.seed;

    return {
        {"seed", seed},
        {"out", out_dir},
        {"data", {{"source", source}, {"csv_path", csv_path}, {"synthetic", synth_j}}},
        {"split", {{"train", train_frac}, {"val", val_frac}}},
        {"model",
         {{"variant", model::variant_to_string(model.variant)},
          {"seq_len", model.seq_len},
          {"resnet_filters", model.resnet_filters},
          {"resnet_kernels", model.resnet_kernels},
          {"lstm_units", model.lstm_units},
          {"embed_dim", model.embed_dim},
          {"heads", model.heads},
          {"ff_dim", model.ff_dim},
          {"encoder_layers", model.encoder_layers},
          {"dropout", model.dropout},
          {"head_hidden", model.head_hidden},
          {"fusion_hidden", model.fusion_hidden}}},
        {"train",
         {{"lr", train.lr},
          {"batch_size", train.batch_size},
          {"max_epochs", train.max_epochs},
          {"es_patience", train.es_patience},
          {"plateau_factor", train.plateau_factor},
          {"plateau_patience", train.plateau_patience},
          {"min_lr", train.min_lr},
          {"val_fraction_of_train", train.val_fraction_of_train}}},
        {"ensemble",
         {{"k", ensemble.k}, {"tau", ensemble.tau}, {"mode", mode_to_string(ensemble.mode)}}},
        {"importance", {{"metric", importance_metric}, {"repeats", importance_repeats}}},
        {"baselines", {{"logistic_l2", logistic_l2}, {"arima_p", arima_p}}},
    };
}

}  // namespace haelt::cli
