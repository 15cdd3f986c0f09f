#pragma once

#include <deque>
#include <string>
#include <vector>

#include "haelt/errors.hpp"

namespace haelt::ensemble {

struct EnsembleConfig {
    int k = 24;        // rolling window, one trading day of hours
    double tau = 1.0;  // softmax temperature
    enum class Mode { walk_forward, fixed_validation };
    Mode mode = Mode::walk_forward;
};

EnsembleConfig::Mode mode_from_string(const std::string& s);
std::string mode_to_string(EnsembleConfig::Mode m);

// Rolling-window inverse-loss softmax combiner. Per-step losses are recorded
// strictly in time order (single writer); weights at step t depend only on
// the last k losses recorded before t. Before any history the weights are
// uniform.
class EnsembleState {
public:
    EnsembleState(std::vector<std::string> members, int k, double tau);

    const std::vector<std::string>& members() const { return members_; }
    int window_length() const { return k_; }
    double temperature() const { return tau_; }

    bool has_history() const { return !window_.empty() && !window_.front().empty(); }
    size_t recorded_steps() const { return window_.empty() ? 0 : window_.front().size(); }

    // One realized step's loss per member; entries beyond k fall off.
    void record_step(const std::vector<double>& losses);

    // Mean of the most recent min(k, recorded) losses. Throws without history.
    double rolling_loss(size_t member) const;
    double rolling_loss(const std::string& member) const;

    // w_i = exp(-L_i/tau) / sum_m exp(-L_m/tau), computed with max
    // subtraction; uniform during warm-up. Also stores the weights.
    const std::vector<double>& update_weights();
    const std::vector<double>& weights() const { return weights_; }

    // Convex combination; probabilities must lie in [0,1] and weights must be
    // normalized to 1.
    static double combine(const std::vector<double>& weights, const std::vector<double>& probs);

private:
    std::vector<std::string> members_;
    int k_ = 0;
    double tau_ = 1.0;
    std::vector<std::deque<double>> window_;  // aligned ring buffers
    std::vector<double> weights_;
};

}  // namespace haelt::ensemble
