#include "haelt/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace haelt::train {

void TrainConfig::validate() const {
    if (lr <= 0.0) throw UsageError("train config: lr must be positive");
    if (batch_size < 1) throw UsageError("train config: batch_size must be >= 1");
    if (max_epochs < 1) throw UsageError("train config: max_epochs must be >= 1");
    if (es_patience < 1 || plateau_patience < 1) {
        throw UsageError("train config: patiences must be >= 1");
    }
    if (plateau_factor <= 0.0 || plateau_factor >= 1.0) {
        throw UsageError("train config: plateau factor must be in (0,1)");
    }
    if (min_lr <= 0.0) throw UsageError("train config: min_lr must be positive");
    if (val_fraction_of_train <= 0.0 || val_fraction_of_train >= 1.0) {
        throw UsageError("train config: val fraction must be in (0,1)");
    }
}

std::pair<double, double> class_weights(const std::vector<int>& labels) {
    int64_t pos = 0;
    for (const int y : labels) pos += y;
    const int64_t neg = static_cast<int64_t>(labels.size()) - pos;
    if (pos == 0 || neg == 0) {
        throw DataError("class_weights: both classes must be present");
    }
    const double n = static_cast<double>(labels.size());
    return {n / (2.0 * static_cast<double>(neg)), n / (2.0 * static_cast<double>(pos))};
}

double weighted_bce(const std::vector<int>& y, const std::vector<double>& p, double w_neg,
                    double w_pos) {
    if (y.size() != p.size() || y.empty()) throw DataError("weighted_bce: length mismatch");
    constexpr double kClip = 1e-7;
    double acc = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
        const double pc = std::clamp(p[i], kClip, 1.0 - kClip);
        acc += y[i] ? w_pos * std::log(pc) : w_neg * std::log(1.0 - pc);
    }
    return -acc / static_cast<double>(y.size());
}

double accuracy_at(const std::vector<int>& y, const std::vector<double>& p, double threshold) {
    if (y.size() != p.size() || y.empty()) throw DataError("accuracy: length mismatch");
    size_t hit = 0;
    for (size_t i = 0; i < y.size(); ++i) {
        if ((p[i] >= threshold ? 1 : 0) == y[i]) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(y.size());
}

ProtocolController::ProtocolController(const TrainConfig& cfg) : cfg_(cfg), lr_(cfg.lr) {
    cfg_.validate();
}

ProtocolController::Decision ProtocolController::observe(double val_loss, double val_accuracy) {
    ++epoch_;
    Decision d;

    d.is_best = val_accuracy > best_accuracy_;
    if (d.is_best) {
        best_accuracy_ = val_accuracy;
        best_epoch_ = epoch_;
    }

    if (!has_loss_ || val_loss < best_loss_) {
        best_loss_ = val_loss;
        has_loss_ = true;
        plateau_count_ = 0;
    } else {
        ++plateau_count_;
        if (plateau_count_ >= cfg_.plateau_patience) {
            lr_ = std::max(lr_ * cfg_.plateau_factor, cfg_.min_lr);
            plateau_count_ = 0;
        }
    }

    d.stop = epoch_ - best_epoch_ >= cfg_.es_patience || epoch_ >= cfg_.max_epochs;
    d.lr = lr_;
    return d;
}

std::vector<std::vector<size_t>> make_batches(size_t n, int batch_size, Rng& rng) {
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<std::vector<size_t>> batches;
    for (size_t i = 0; i < n; i += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(n, i + static_cast<size_t>(batch_size));
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

ad::Tensor batch_tensor(const data::SequenceDataset& ds, const std::vector<size_t>& indices) {
    const size_t plane = static_cast<size_t>(ds.seq_len) * ds.n_features;
    std::vector<double> values(indices.size() * plane);
    for (size_t i = 0; i < indices.size(); ++i) {
        const double* src = ds.window(indices[i]);
        std::copy(src, src + plane, values.begin() + i * plane);
    }
    return ad::Tensor::from_values({static_cast<int>(indices.size()), ds.seq_len, ds.n_features},
                                   std::move(values));
}

std::vector<std::vector<double>> member_probabilities(const model::Haelt& net,
                                                      const data::SequenceDataset& ds,
                                                      int batch_size) {
    const size_t members = net.member_names().size();
    std::vector<std::vector<double>> probs(members, std::vector<double>(ds.size()));
    for (size_t start = 0; start < ds.size(); start += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(ds.size(), start + static_cast<size_t>(batch_size));
        std::vector<size_t> idx(end - start);
        std::iota(idx.begin(), idx.end(), start);
        ad::Graph g;
        g.set_recording(false);
        const model::ModelOutputs out = net.forward(g, batch_tensor(ds, idx));
        const std::vector<std::vector<double>> head_vals = out.head_probs();
        if (head_vals.size() != members) {
            throw NumericError("member_probabilities: head count mismatch");
        }
        for (size_t m = 0; m < members; ++m) {
            for (size_t i = 0; i < idx.size(); ++i) probs[m][start + i] = head_vals[m][i];
        }
    }
    return probs;
}

namespace {

double step_bce(int y, double p) {
    constexpr double kClip = 1e-7;
    const double pc = std::clamp(p, kClip, 1.0 - kClip);
    return -(y ? std::log(pc) : std::log(1.0 - pc));
}

}  // namespace

std::vector<double> walk_forward_combine(ensemble::EnsembleState& state,
                                         const std::vector<std::vector<double>>& member_probs,
                                         const std::vector<int>& labels) {
    const size_t members = member_probs.size();
    if (members != state.members().size()) {
        throw NumericError("walk_forward_combine: member count mismatch");
    }
    const size_t steps = labels.size();
    std::vector<double> combined(steps);
    std::vector<double> probs_at(members), losses(members);
    for (size_t t = 0; t < steps; ++t) {
        const std::vector<double>& w = state.update_weights();
        for (size_t m = 0; m < members; ++m) probs_at[m] = member_probs[m][t];
        combined[t] = ensemble::EnsembleState::combine(w, probs_at);
        for (size_t m = 0; m < members; ++m) losses[m] = step_bce(labels[t], probs_at[m]);
        state.record_step(losses);
    }
    return combined;
}

TrainLog fit(model::Haelt& net, const data::SequenceDataset& train_windows,
             const TrainConfig& cfg, const ensemble::EnsembleConfig& ecfg, const Rng& rng) {
    cfg.validate();
    const size_t total = train_windows.size();
    const size_t val_count =
        static_cast<size_t>(std::floor(cfg.val_fraction_of_train * static_cast<double>(total)));
    if (val_count == 0 || val_count >= total) {
        throw DataError("fit: training set too small for a validation slice");
    }
    const size_t fit_count = total - val_count;

    const data::SequenceDataset fit_set = train_windows.slice(0, fit_count);
    const data::SequenceDataset val_set = train_windows.slice(fit_count, total);
    const auto [w_neg, w_pos] = class_weights(fit_set.labels);

    Rng shuffle_rng = rng.fork("batch-shuffle");
    Rng dropout_rng = rng.fork("dropout");

    ad::AdamState adam;
    adam.cfg.lr = cfg.lr;
    adam.init(net.params());

    ProtocolController protocol(cfg);
    TrainLog log;
    std::vector<std::vector<double>> best_weights = net.snapshot_weights();

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const double epoch_lr = adam.cfg.lr;
        double train_loss_sum = 0.0;
        size_t train_seen = 0;

        const auto batches = make_batches(fit_count, cfg.batch_size, shuffle_rng);
        int batch_no = 0;
        for (const std::vector<size_t>& batch : batches) {
            ++batch_no;
            for (const size_t i : batch) {
                if (i >= fit_count) {
                    throw NumericError("fit: batch index crossed into the validation slice");
                }
            }
            std::vector<int> yb(batch.size());
            for (size_t i = 0; i < batch.size(); ++i) yb[i] = fit_set.labels[batch[i]];

            ad::Graph g;
            const ad::Tensor x = batch_tensor(fit_set, batch);
            const model::ModelOutputs out = net.forward(g, x, true, &dropout_rng);
            const std::vector<ad::Tensor> heads = out.heads();
            ad::Tensor loss;
            for (size_t h = 0; h < heads.size(); ++h) {
                ad::Tensor l = g.bce_loss(heads[h], yb, w_neg, w_pos);
                loss = h == 0 ? l : g.add(loss, l);
            }
            loss = g.scale(loss, 1.0 / static_cast<double>(heads.size()));

            const double loss_value = loss.scalar();
            if (!std::isfinite(loss_value)) {
                throw NumericError("fit: non-finite loss at epoch " + std::to_string(epoch) +
                                   " batch " + std::to_string(batch_no));
            }
            net.zero_grads();
            g.backward(loss);
            adam_step(adam, net.params());

            train_loss_sum += loss_value * static_cast<double>(batch.size());
            train_seen += batch.size();
        }

        // validation pass: members combined walk-forward from a fresh state
        const std::vector<std::vector<double>> val_members =
            member_probabilities(net, val_set, cfg.batch_size);
        ensemble::EnsembleState ens(net.member_names(), ecfg.k, ecfg.tau);
        std::vector<double> val_combined;
        if (net.ensemble_active()) {
            val_combined = walk_forward_combine(ens, val_members, val_set.labels);
        } else {
            val_combined = val_members.back();  // fused (or single) head
            ens.update_weights();
        }
        const double val_loss = weighted_bce(val_set.labels, val_combined, w_neg, w_pos);
        const double val_accuracy = accuracy_at(val_set.labels, val_combined);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = train_seen ? train_loss_sum / static_cast<double>(train_seen) : 0.0;
        rec.val_loss = val_loss;
        rec.val_accuracy = val_accuracy;
        rec.lr = epoch_lr;
        rec.ensemble_weights = ens.weights();
        log.epochs.push_back(std::move(rec));

        const ProtocolController::Decision d = protocol.observe(val_loss, val_accuracy);
        if (d.is_best) best_weights = net.snapshot_weights();
        adam.cfg.lr = d.lr;
        if (d.stop) {
            log.stop_reason = epoch >= cfg.max_epochs ? "max_epochs" : "early_stop";
            break;
        }
    }
    if (log.stop_reason.empty()) log.stop_reason = "max_epochs";

    net.restore_weights(best_weights);
    log.best_epoch = protocol.best_epoch();
    return log;
}

}  // namespace haelt::train
