#pragma once

#include <string>
#include <utility>
#include <vector>

#include "haelt/adam.hpp"
#include "haelt/ensemble.hpp"
#include "haelt/errors.hpp"
#include "haelt/model.hpp"
#include "haelt/pipeline.hpp"
#include "haelt/rng.hpp"

namespace haelt::train {

struct TrainConfig {
    double lr = 5e-4;
    int batch_size = 64;
    int max_epochs = 100;
    int es_patience = 30;  // on validation accuracy
    double plateau_factor = 0.8;
    int plateau_patience = 8;  // on validation loss
    double min_lr = 1e-4;
    double val_fraction_of_train = 0.1;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    double lr = 0.0;  // rate in effect during this epoch
    std::vector<double> ensemble_weights;

    bool operator==(const EpochRecord&) const = default;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    std::string stop_reason;

    bool operator==(const TrainLog&) const = default;
};

// Balanced class weights w_c = N / (2 * N_c); both classes must be present.
std::pair<double, double> class_weights(const std::vector<int>& labels);

// Mean over samples of w(y_i) [y_i log p_i + (1-y_i) log(1-p_i)], negated,
// with p clipped to [1e-7, 1-1e-7]. Plain evaluation path (no graph).
double weighted_bce(const std::vector<int>& y, const std::vector<double>& p, double w_neg = 1.0,
                    double w_pos = 1.0);

double accuracy_at(const std::vector<int>& y, const std::vector<double>& p,
                   double threshold = 0.5);

// Early stopping on validation accuracy plus ReduceLROnPlateau on validation
// loss, factored out of the epoch loop so the counters can be driven with
// simulated traces.
class ProtocolController {
public:
    explicit ProtocolController(const TrainConfig& cfg);

    struct Decision {
        double lr = 0.0;   // in effect from the next epoch on
        bool stop = false;
        bool is_best = false;
    };

    // Call once per epoch, in order.
    Decision observe(double val_loss, double val_accuracy);

    int epoch() const { return epoch_; }
    int best_epoch() const { return best_epoch_; }
    double lr() const { return lr_; }

private:
    TrainConfig cfg_;
    int epoch_ = 0;
    int best_epoch_ = 0;
    int plateau_count_ = 0;
    double best_accuracy_ = -1.0;
    double best_loss_ = 0.0;
    bool has_loss_ = false;
    double lr_ = 0.0;
};

// Deterministic shuffled batches over [0, n); each index appears exactly once.
std::vector<std::vector<size_t>> make_batches(size_t n, int batch_size, Rng& rng);

ad::Tensor batch_tensor(const data::SequenceDataset& ds, const std::vector<size_t>& indices);

// Per-member probabilities for every window, eval mode, batched.
std::vector<std::vector<double>> member_probabilities(const model::Haelt& net,
                                                      const data::SequenceDataset& ds,
                                                      int batch_size);

// Walk-forward combination in time order: weights from losses recorded
// strictly before each step, then the step's realized per-member BCE is
// recorded. Returns the combined probability per step.
std::vector<double> walk_forward_combine(ensemble::EnsembleState& state,
                                         const std::vector<std::vector<double>>& member_probs,
                                         const std::vector<int>& labels);

// The full training protocol. The validation slice is carved from the
// chronological tail of the supplied training windows and is never shuffled;
// gradient batches draw from the leading portion only. Restores the weights
// of the best epoch before returning.
TrainLog fit(model::Haelt& net, const data::SequenceDataset& train_windows,
             const TrainConfig& cfg, const ensemble::EnsembleConfig& ecfg, const Rng& rng);

}  // namespace haelt::train
