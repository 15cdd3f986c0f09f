#include "haelt/commands.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "haelt/baselines.hpp"
#include "haelt/ohlcv.hpp"
#include "haelt/synth.hpp"
#include "haelt/train.hpp"

namespace haelt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json load_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("'" + path.string() + "': " + e.what());
    }
    return j;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json report_json(const eval::MetricsReport& r, const eval::ConfusionMatrix& cm) {
    return {{"accuracy", r.accuracy},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"auc_roc", r.auc_roc},
            {"threshold", r.threshold},
            {"precision_defined", r.precision_defined},
            {"recall_defined", r.recall_defined},
            {"confusion", {{"tp", cm.tp}, {"tn", cm.tn}, {"fp", cm.fp}, {"fn", cm.fn}}}};
}

void write_predictions_csv(const fs::path& path, const std::vector<int64_t>& ts,
                           const std::vector<int>& y,
                           const std::vector<std::string>& member_names,
                           const std::vector<std::vector<double>>& member_probs,
                           const std::vector<double>& combined) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << "timestamp,label";
    for (const std::string& m : member_names) out << ',' << m;
    out << ",combined\n";
    for (size_t i = 0; i < y.size(); ++i) {
        out << ts[i] << ',' << y[i];
        for (const auto& mp : member_probs) out << ',' << fmt(mp[i]);
        out << ',' << fmt(combined[i]) << '\n';
    }
}

void write_roc_csv(const fs::path& path, const std::vector<int>& y,
                   const std::vector<double>& p) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << "fpr,tpr,threshold\n";
    for (const eval::RocPoint& pt : eval::roc_points(y, p)) {
        out << fmt(pt.fpr) << ',' << fmt(pt.tpr) << ',';
        if (std::isinf(pt.threshold)) out << "inf";
        else out << fmt(pt.threshold);
        out << '\n';
    }
}

struct PredictionsFile {
    std::vector<int64_t> timestamps;
    std::vector<int> labels;
    std::vector<double> combined;
};

PredictionsFile read_predictions_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path.string() + "': empty");
    PredictionsFile f;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream is(line);
        while (std::getline(is, cell, ',')) cells.push_back(cell);
        if (cells.size() < 3) throw DataError("'" + path.string() + "': malformed row");
        f.timestamps.push_back(std::stoll(cells[0]));
        f.labels.push_back(std::stoi(cells[1]));
        f.combined.push_back(std::stod(cells.back()));
    }
    return f;
}

struct EvaluatedSplit {
    std::vector<std::vector<double>> member_probs;
    std::vector<double> combined;
    std::vector<std::vector<double>> weight_trajectory;  // weights used per step
};

// Member probabilities plus the dynamic combination for one split, either
// continuing `state` walk-forward or freezing the weights it currently holds.
EvaluatedSplit evaluate_split(const model::Haelt& net, const data::SequenceDataset& ds,
                              ensemble::EnsembleState& state, bool walk_forward, int batch_size) {
    EvaluatedSplit out;
    out.member_probs = train::member_probabilities(net, ds, batch_size);
    const size_t members = out.member_probs.size();
    const size_t steps = ds.size();
    out.combined.resize(steps);
    if (!net.ensemble_active()) {
        out.combined = out.member_probs.back();
        for (size_t t = 0; t < steps; ++t) out.weight_trajectory.push_back(state.weights());
        return out;
    }
    std::vector<double> probs_at(members), losses(members);
    for (size_t t = 0; t < steps; ++t) {
        const std::vector<double> w =
            walk_forward ? state.update_weights() : state.weights();
        for (size_t m = 0; m < members; ++m) probs_at[m] = out.member_probs[m][t];
        out.combined[t] = ensemble::EnsembleState::combine(w, probs_at);
        out.weight_trajectory.push_back(w);
        if (walk_forward) {
            for (size_t m = 0; m < members; ++m) {
                constexpr double kClip = 1e-7;
                const double pc = std::clamp(probs_at[m], kClip, 1.0 - kClip);
                losses[m] = -(ds.labels[t] ? std::log(pc) : std::log(1.0 - pc));
            }
            state.record_step(losses);
        }
    }
    return out;
}

model::HaeltConfig resolve_model_config(const RunConfig& cfg, int n_features) {
    model::HaeltConfig mc = cfg.model;
    mc.n_features = n_features;
    mc.validate();
    return mc;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory '" + dir.string() + "'");
}

// per-row direction labels; row t is labelled by close[t+1] vs close[t]
std::vector<int> row_labels(const std::vector<double>& close) {
    std::vector<int> y(close.size() - 1);
    for (size_t t = 0; t + 1 < close.size(); ++t) y[t] = close[t + 1] > close[t] ? 1 : 0;
    return y;
}

}  // namespace

PreparedData prepare_data(const RunConfig& cfg) {
    data::OhlcvSeries raw;
    if (cfg.source == "csv") {
        raw = data::load_csv(cfg.csv_path);
    } else {
        synth::SyntheticSpec spec = cfg.synthetic;
        if (!cfg.synthetic_seed_set) spec.seed = Rng(cfg.seed).fork("data").seed();
        raw = synth::generate(spec);
    }

    const data::OhlcvSeries filled = data::forward_fill(raw);
    const data::OhlcvSeries winsorized = data::winsorize(filled);

    feat::FeatureFrame frame = feat::compute_feature_set(winsorized);
    const size_t warm = static_cast<size_t>(frame.max_warmup());
    frame.drop_front(warm);
    frame.validate();

    PreparedData d;
    d.rows_raw = raw.size();
    d.warmup_dropped = warm;
    const std::vector<double> closes = filled.closes();
    d.close.assign(closes.begin() + static_cast<std::ptrdiff_t>(warm), closes.end());
    const auto ts = filled.timestamps();
    d.timestamps.assign(ts.begin() + static_cast<std::ptrdiff_t>(warm), ts.end());

    d.rows = data::chronological_split(frame.rows(), cfg.train_frac, cfg.val_frac);
    d.scaler = data::fit_scaler(frame.names, frame.columns, 0, d.rows.train_end);
    feat::FeatureFrame scaled = frame;
    scaled.columns = data::apply_scaler(d.scaler, frame.columns);
    d.scaled = std::move(scaled);

    d.dataset = data::make_sequences(d.scaled.names, d.scaled.columns, d.close, d.timestamps,
                                     cfg.model.seq_len);
    d.windows = data::split_windows(d.dataset, d.rows);
    if (d.windows.train_end == 0 || d.windows.val_end <= d.windows.train_end ||
        d.windows.val_end >= d.dataset.size()) {
        throw DataError("prepare: dataset too small for train/val/test windows");
    }
    return d;
}

json manifest_json(const PreparedData& d) {
    json scaler = json::object();
    for (size_t c = 0; c < d.scaler.names.size(); ++c) {
        scaler[d.scaler.names[c]] = {{"min", d.scaler.min[c]},
                                     {"max", d.scaler.max[c]},
                                     {"degenerate", static_cast<bool>(d.scaler.degenerate[c])}};
    }
    return {{"rows_raw", d.rows_raw},
            {"warmup_dropped", d.warmup_dropped},
            {"rows_after_trim", d.rows.n},
            {"split_rows",
             {{"train", d.rows.train_size()},
              {"val", d.rows.val_size()},
              {"test", d.rows.test_size()},
              {"train_end", d.rows.train_end},
              {"val_end", d.rows.val_end}}},
            {"windows",
             {{"total", d.dataset.size()},
              {"train", d.windows.train_end},
              {"val", d.windows.val_end - d.windows.train_end},
              {"test", d.dataset.size() - d.windows.val_end}}},
            {"seq_len", d.dataset.seq_len},
            {"feature_names", d.dataset.feature_names},
            {"scaler", scaler}};
}

void cmd_synth(const RunConfig& cfg, const std::string& out_csv) {
    synth::SyntheticSpec spec = cfg.synthetic;
    if (!cfg.synthetic_seed_set) spec.seed = Rng(cfg.seed).fork("data").seed();
    const data::OhlcvSeries s = synth::generate(spec);
    const fs::path out(out_csv);
    if (out.has_parent_path()) ensure_dir(out.parent_path());
    data::save_csv(s, out_csv);
    std::cout << "wrote " << s.size() << " rows to " << out_csv << "\n";
}

void cmd_prepare(const RunConfig& cfg, const std::string& out_dir) {
    const PreparedData d = prepare_data(cfg);
    ensure_dir(out_dir);
    write_json(fs::path(out_dir) / "manifest.json", manifest_json(d));
    feat::write_csv(d.scaled, d.timestamps, (fs::path(out_dir) / "features.csv").string());
    {
        RunConfig recorded = cfg;
        recorded.out_dir = out_dir;
        write_json(fs::path(out_dir) / "config.json", recorded.to_json());
    }
    std::cout << "prepared " << d.rows.n << " rows (" << d.dataset.size() << " windows) into "
              << out_dir << "\n";
}

void cmd_train(const RunConfig& cfg, const std::string& out_dir) {
    const PreparedData d = prepare_data(cfg);
    ensure_dir(out_dir);
    {
        RunConfig recorded = cfg;
        recorded.out_dir = out_dir;
        write_json(fs::path(out_dir) / "config.json", recorded.to_json());
    }
    write_json(fs::path(out_dir) / "manifest.json", manifest_json(d));

    const Rng master(cfg.seed);
    model::Haelt net(resolve_model_config(cfg, d.dataset.n_features), master.fork("init"));

    const data::SequenceDataset train_set = d.dataset.slice(0, d.windows.train_end);
    const data::SequenceDataset val_set = d.dataset.slice(d.windows.train_end, d.windows.val_end);
    const data::SequenceDataset test_set = d.dataset.slice(d.windows.val_end, d.dataset.size());

    const train::TrainLog log = train::fit(net, train_set, cfg.train, cfg.ensemble,
                                           master.fork("train"));

    // JSON-lines: one record per epoch plus a trailing summary record
    {
        std::ofstream out(fs::path(out_dir) / "trainlog.jsonl");
        for (const train::EpochRecord& r : log.epochs) {
            out << json({{"epoch", r.epoch},
                         {"train_loss", r.train_loss},
                         {"val_loss", r.val_loss},
                         {"val_accuracy", r.val_accuracy},
                         {"lr", r.lr},
                         {"ensemble_weights", r.ensemble_weights}})
                       .dump()
                << '\n';
        }
        out << json({{"best_epoch", log.best_epoch}, {"stop_reason", log.stop_reason}}).dump()
            << '\n';
    }

    json ckpt = net.checkpoint();
    ckpt["config"] = cfg.to_json();
    write_json(fs::path(out_dir) / "checkpoint.json", ckpt);

    // walk-forward evaluation: the validation pass seeds the loss window, so
    // the first test step weighs members by their recent validation losses
    const bool walk = cfg.ensemble.mode == ensemble::EnsembleConfig::Mode::walk_forward;
    ensemble::EnsembleState state(net.member_names(), cfg.ensemble.k, cfg.ensemble.tau);
    const EvaluatedSplit val_eval =
        evaluate_split(net, val_set, state, true, cfg.train.batch_size);
    if (!walk) state.update_weights();  // freeze the validation-tail weights
    const EvaluatedSplit test_eval =
        evaluate_split(net, test_set, state, walk, cfg.train.batch_size);

    const eval::MetricsReport val_report = eval::full_report(val_set.labels, val_eval.combined);
    const eval::MetricsReport test_report = eval::full_report(test_set.labels, test_eval.combined);
    write_json(fs::path(out_dir) / "metrics_val.json",
               report_json(val_report, eval::confusion(val_set.labels, val_eval.combined)));
    write_json(fs::path(out_dir) / "metrics_test.json",
               report_json(test_report, eval::confusion(test_set.labels, test_eval.combined)));

    write_predictions_csv(fs::path(out_dir) / "predictions_val.csv", val_set.timestamps,
                          val_set.labels, net.member_names(), val_eval.member_probs,
                          val_eval.combined);
    write_predictions_csv(fs::path(out_dir) / "predictions_test.csv", test_set.timestamps,
                          test_set.labels, net.member_names(), test_eval.member_probs,
                          test_eval.combined);

    {
        std::ofstream out(fs::path(out_dir) / "ensemble_weights.csv");
        out << "timestamp";
        for (const std::string& m : net.member_names()) out << ',' << m;
        out << '\n';
        for (size_t t = 0; t < val_set.size(); ++t) {
            out << val_set.timestamps[t];
            for (const double w : val_eval.weight_trajectory[t]) out << ',' << fmt(w);
            out << '\n';
        }
        for (size_t t = 0; t < test_set.size(); ++t) {
            out << test_set.timestamps[t];
            for (const double w : test_eval.weight_trajectory[t]) out << ',' << fmt(w);
            out << '\n';
        }
    }

    std::cout << "variant " << model::variant_to_string(cfg.model.variant) << ": test accuracy "
              << test_report.accuracy << ", f1 " << test_report.f1 << ", auc "
              << test_report.auc_roc << " (best epoch " << log.best_epoch << ", "
              << log.stop_reason << ")\n";
}

void cmd_ablate(const RunConfig& cfg, const std::string& out_dir) {
    ensure_dir(out_dir);
    struct Row {
        std::string variant;
        int64_t params;
        eval::MetricsReport report;
    };
    std::vector<Row> rows;
    std::vector<std::string> failures;

    for (const model::Variant v : model::all_variants()) {
        RunConfig vc = cfg;
        vc.model.variant = v;
        const std::string name = model::variant_to_string(v);
        const fs::path subdir = fs::path(out_dir) / name;
        try {
            cmd_train(vc, subdir.string());
            const json m = load_json(subdir / "metrics_test.json");
            const json ck = load_json(subdir / "checkpoint.json");
            int64_t params = 0;
            for (const auto& [key, val] : ck.at("params").items()) {
                (void)key;
                params += static_cast<int64_t>(val.at("values").size());
            }
            Row r;
            r.variant = name;
            r.params = params;
            r.report.accuracy = m.at("accuracy").get<double>();
            r.report.precision = m.at("precision").get<double>();
            r.report.recall = m.at("recall").get<double>();
            r.report.f1 = m.at("f1").get<double>();
            r.report.auc_roc = m.at("auc_roc").get<double>();
            rows.push_back(std::move(r));
        } catch (const std::exception& e) {
            failures.push_back(name + ": " + e.what());
        }
    }

    std::ofstream out(fs::path(out_dir) / "ablation.csv");
    out << "variant,parameters,accuracy,precision,recall,f1,auc_roc\n";
    for (const Row& r : rows) {
        out << r.variant << ',' << r.params << ',' << fmt(r.report.accuracy) << ','
            << fmt(r.report.precision) << ',' << fmt(r.report.recall) << ',' << fmt(r.report.f1)
            << ',' << fmt(r.report.auc_roc) << '\n';
    }
    out.close();

    if (!failures.empty()) {
        std::string msg = "ablation incomplete (" + std::to_string(rows.size()) + "/" +
                          std::to_string(model::all_variants().size()) + " variants):";
        for (const std::string& f : failures) msg += "\n  " + f;
        throw NumericError(msg);
    }
    std::cout << "ablation table with " << rows.size() << " variants in " << out_dir << "\n";
}

void cmd_baselines(const RunConfig& cfg, const std::string& out_dir) {
    const PreparedData d = prepare_data(cfg);
    ensure_dir(out_dir);
    {
        RunConfig recorded = cfg;
        recorded.out_dir = out_dir;
        write_json(fs::path(out_dir) / "config.json", recorded.to_json());
    }

    const std::vector<int> labels = row_labels(d.close);
    const size_t train_end = d.rows.train_end;
    const size_t test_begin = d.rows.val_end;
    const size_t test_end = labels.size();  // last labelled row is n-2

    auto feature_row = [&](size_t t) {
        std::vector<double> x(d.scaled.columns.size());
        for (size_t f = 0; f < d.scaled.columns.size(); ++f) x[f] = d.scaled.columns[f][t];
        return x;
    };

    std::vector<std::vector<double>> x_train;
    std::vector<int> y_train;
    for (size_t t = 0; t < train_end; ++t) {
        x_train.push_back(feature_row(t));
        y_train.push_back(labels[t]);
    }
    std::vector<int> y_test;
    std::vector<int64_t> ts_test;
    for (size_t t = test_begin; t < test_end; ++t) {
        y_test.push_back(labels[t]);
        ts_test.push_back(d.timestamps[t]);
    }

    json summary;

    // logistic regression on the scaled feature rows
    {
        const baseline::LogisticModel lm =
            baseline::fit_logistic(x_train, y_train, cfg.logistic_l2);
        std::vector<double> probs;
        for (size_t t = test_begin; t < test_end; ++t) probs.push_back(lm.predict_one(feature_row(t)));
        const eval::MetricsReport rep = eval::full_report(y_test, probs);
        write_json(fs::path(out_dir) / "metrics_logistic.json",
                   report_json(rep, eval::confusion(y_test, probs)));
        write_predictions_csv(fs::path(out_dir) / "predictions_test_logistic.csv", ts_test, y_test,
                              {}, {}, probs);
        summary["logistic"] = {{"l2", lm.l2}, {"bias", lm.bias}, {"auc", rep.auc_roc}};
    }

    // AR on once-differenced close; direction via the Gaussian CDF
    {
        std::vector<double> train_levels(d.close.begin(),
                                         d.close.begin() + static_cast<std::ptrdiff_t>(train_end));
        const baseline::ArimaModel am = baseline::fit_arima(train_levels, cfg.arima_p);
        std::vector<double> probs;
        for (size_t t = test_begin; t < test_end; ++t) {
            std::vector<double> history(d.close.begin(),
                                        d.close.begin() + static_cast<std::ptrdiff_t>(t + 1));
            probs.push_back(am.direction_probability(history));
        }
        const eval::MetricsReport rep = eval::full_report(y_test, probs);
        write_json(fs::path(out_dir) / "metrics_arima.json",
                   report_json(rep, eval::confusion(y_test, probs)));
        write_predictions_csv(fs::path(out_dir) / "predictions_test_arima.csv", ts_test, y_test,
                              {}, {}, probs);
        summary["arima"] = {{"p", am.p},      {"d", am.d},          {"q", am.q},
                            {"intercept", am.intercept}, {"phi", am.phi}, {"sigma2", am.sigma2},
                            {"auc", rep.auc_roc}};
    }

    // GARCH volatility fit; its direction signal is the training class prior
    {
        std::vector<double> returns;
        for (size_t t = 1; t < train_end; ++t) {
            returns.push_back(std::log(d.close[t] / d.close[t - 1]));
        }
        const baseline::GarchModel gm = baseline::fit_garch(returns);
        double prior = 0.0;
        for (const int y : y_train) prior += y;
        prior /= static_cast<double>(y_train.size());
        const std::vector<double> probs(y_test.size(), prior);
        const eval::MetricsReport rep = eval::full_report(y_test, probs);
        write_json(fs::path(out_dir) / "metrics_garch.json",
                   report_json(rep, eval::confusion(y_test, probs)));
        write_predictions_csv(fs::path(out_dir) / "predictions_test_garch.csv", ts_test, y_test,
                              {}, {}, probs);
        summary["garch"] = {{"omega", gm.omega},       {"alpha", gm.alpha},
                            {"beta", gm.beta},         {"log_likelihood", gm.log_likelihood},
                            {"iterations", gm.iterations}, {"prior", prior},
                            {"auc", rep.auc_roc}};
    }

    write_json(fs::path(out_dir) / "baselines.json", summary);
    std::cout << "baselines written to " << out_dir << "\n";
}

void cmd_importance(const std::string& run_dir) {
    const fs::path dir(run_dir);
    std::vector<std::string> missing;
    for (const char* f : {"config.json", "checkpoint.json"}) {
        if (!fs::exists(dir / f)) missing.push_back(f);
    }
    if (!missing.empty()) {
        std::string msg = "importance: missing artifacts in '" + run_dir + "':";
        for (const std::string& m : missing) msg += " " + m;
        throw DataError(msg);
    }

    const RunConfig cfg = RunConfig::from_json(load_json(dir / "config.json"));
    const PreparedData d = prepare_data(cfg);
    model::Haelt net(resolve_model_config(cfg, d.dataset.n_features), Rng(cfg.seed).fork("init"));
    net.load_checkpoint(load_json(dir / "checkpoint.json"));

    const data::SequenceDataset test_set = d.dataset.slice(d.windows.val_end, d.dataset.size());

    // Importance uses the model's deterministic integrated probability (the
    // fused head when present, the single head otherwise); the walk-forward
    // combination depends on evaluation order, which permutation breaks.
    auto predict = [&](const data::SequenceDataset& ds) {
        const auto probs = train::member_probabilities(net, ds, cfg.train.batch_size);
        return probs.back();
    };

    const eval::ImportanceResult res =
        eval::permutation_importance(predict, test_set, cfg.importance_metric,
                                     cfg.importance_repeats, Rng(cfg.seed).fork("permutation").seed());

    std::ofstream out(dir / "importance_full.csv");
    out << "feature,importance\n";
    for (const eval::ImportanceEntry& e : res.entries) {
        out << e.feature << ',' << fmt(e.importance) << '\n';
    }
    out.close();
    std::cout << "importance (" << res.metric << ", baseline " << res.baseline << ") for "
              << res.entries.size() << " features in " << run_dir << "\n";
}

void cmd_report(const std::string& run_dir) {
    const fs::path dir(run_dir);
    std::vector<std::string> missing;
    for (const char* f : {"predictions_test.csv", "metrics_test.json", "importance_full.csv"}) {
        if (!fs::exists(dir / f)) missing.push_back(f);
    }
    if (!missing.empty()) {
        std::string msg = "report: missing artifacts in '" + run_dir + "':";
        for (const std::string& m : missing) msg += " " + m;
        throw DataError(msg);
    }

    struct ModelPreds {
        std::string name;
        PredictionsFile preds;
        json metrics;
    };
    std::vector<ModelPreds> models;
    models.push_back({"haelt", read_predictions_csv(dir / "predictions_test.csv"),
                      load_json(dir / "metrics_test.json")});
    for (const char* base : {"logistic", "arima", "garch"}) {
        const fs::path p = dir / ("predictions_test_" + std::string(base) + ".csv");
        const fs::path m = dir / ("metrics_" + std::string(base) + ".json");
        if (fs::exists(p) && fs::exists(m)) {
            models.push_back({base, read_predictions_csv(p), load_json(m)});
        }
    }

    // ROC point files (one per model whose scores are not all tied)
    for (const ModelPreds& m : models) {
        bool has0 = false, has1 = false;
        for (const int y : m.preds.labels) (y ? has1 : has0) = true;
        if (!has0 || !has1) continue;
        write_roc_csv(dir / ("roc_" + m.name + ".csv"), m.preds.labels, m.preds.combined);
    }

    // metric bar-chart data
    {
        std::ofstream out(dir / "metrics_bar.csv");
        out << "model,accuracy,precision,recall,f1,auc_roc\n";
        for (const ModelPreds& m : models) {
            out << m.name << ',' << fmt(m.metrics.at("accuracy").get<double>()) << ','
                << fmt(m.metrics.at("precision").get<double>()) << ','
                << fmt(m.metrics.at("recall").get<double>()) << ','
                << fmt(m.metrics.at("f1").get<double>()) << ','
                << fmt(m.metrics.at("auc_roc").get<double>()) << '\n';
        }
    }

    // confusion matrices
    {
        json conf = json::object();
        for (const ModelPreds& m : models) conf[m.name] = m.metrics.at("confusion");
        write_json(dir / "confusion.json", conf);
    }

    // top-15 importance extract
    {
        std::ifstream in(dir / "importance_full.csv");
        std::string line;
        std::getline(in, line);  // header
        std::vector<std::pair<std::string, double>> rows;
        while (std::getline(in, line)) {
            const size_t comma = line.rfind(',');
            if (comma == std::string::npos) continue;
            rows.emplace_back(line.substr(0, comma), std::stod(line.substr(comma + 1)));
        }
        std::stable_sort(rows.begin(), rows.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        if (rows.size() > 15) rows.resize(15);
        std::ofstream out(dir / "importance_top15.csv");
        out << "feature,importance\n";
        for (const auto& [name, value] : rows) out << name << ',' << fmt(value) << '\n';
    }
    std::cout << "report bundle written to " << run_dir << "\n";
}

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"HAELT forecasting workbench"};
    app.require_subcommand(1);

    std::string config_path, out_override, variant_override, run_dir;
    int64_t seed_override = -1;

    auto add_common = [&](CLI::App* sub, bool with_out) {
        sub->add_option("--config", config_path, "JSON run configuration");
        sub->add_option("--seed", seed_override, "master seed override");
        if (with_out) sub->add_option("--out", out_override, "output path override");
    };

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic OHLCV csv");
    add_common(synth, true);
    CLI::App* prepare = app.add_subcommand("prepare", "run the preprocessing chain");
    add_common(prepare, true);
    CLI::App* train_cmd = app.add_subcommand("train", "train and evaluate one variant");
    add_common(train_cmd, true);
    train_cmd->add_option("--variant", variant_override, "model variant override");
    CLI::App* ablate = app.add_subcommand("ablate", "train every ablation variant");
    add_common(ablate, true);
    CLI::App* baselines = app.add_subcommand("baselines", "fit the classical baselines");
    add_common(baselines, true);
    CLI::App* importance = app.add_subcommand("importance", "permutation feature importance");
    importance->add_option("--run", run_dir, "completed run directory")->required();
    CLI::App* report = app.add_subcommand("report", "emit plot-ready data for a run");
    report->add_option("--run", run_dir, "completed run directory")->required();

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            std::cout << app.help();
            return 0;
        }
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg = RunConfig::load(config_path);
        if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);
        if (!variant_override.empty()) {
            cfg.model.variant = model::variant_from_string(variant_override);
        }
        if (!out_override.empty()) cfg.out_dir = out_override;
        const std::string out = cfg.out_dir;

        if (synth->parsed()) {
            cmd_synth(cfg, out_override.empty() ? (cfg.out_dir + "/synthetic.csv") : out_override);
        } else if (prepare->parsed()) {
            cmd_prepare(cfg, out);
        } else if (train_cmd->parsed()) {
            cmd_train(cfg, out);
        } else if (ablate->parsed()) {
            cmd_ablate(cfg, out);
        } else if (baselines->parsed()) {
            cmd_baselines(cfg, out);
        } else if (importance->parsed()) {
            cmd_importance(run_dir);
        } else if (report->parsed()) {
            cmd_report(run_dir);
        }
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace haelt::cli
