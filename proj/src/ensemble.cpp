#include "haelt/ensemble.hpp"

#include <algorithm>
#include <cmath>

namespace haelt::ensemble {

EnsembleConfig::Mode mode_from_string(const std::string& s) {
    if (s == "walk_forward") return EnsembleConfig::Mode::walk_forward;
    if (s == "fixed_validation") return EnsembleConfig::Mode::fixed_validation;
    throw UsageError("unknown ensemble mode '" + s + "'");
}

std::string mode_to_string(EnsembleConfig::Mode m) {
    return m == EnsembleConfig::Mode::walk_forward ? "walk_forward" : "fixed_validation";
}

EnsembleState::EnsembleState(std::vector<std::string> members, int k, double tau)
    : members_(std::move(members)), k_(k), tau_(tau) {
    if (members_.empty()) throw UsageError("ensemble: no members");
    if (k_ < 1) throw UsageError("ensemble: window length must be >= 1");
    if (tau_ <= 0.0) throw UsageError("ensemble: temperature must be positive");
    window_.resize(members_.size());
    weights_.assign(members_.size(), 1.0 / static_cast<double>(members_.size()));
}

void EnsembleState::record_step(const std::vector<double>& losses) {
    if (losses.size() != members_.size()) {
        throw NumericError("ensemble: got " + std::to_string(losses.size()) + " losses for " +
                           std::to_string(members_.size()) + " members");
    }
    for (size_t m = 0; m < members_.size(); ++m) {
        window_[m].push_back(losses[m]);
        if (window_[m].size() > static_cast<size_t>(k_)) window_[m].pop_front();
    }
}

double EnsembleState::rolling_loss(size_t member) const {
    if (member >= members_.size()) throw NumericError("ensemble: member index out of range");
    if (!has_history()) throw NumericError("ensemble: no recorded history");
    const std::deque<double>& w = window_[member];
    double acc = 0.0;
    for (const double v : w) acc += v;
    return acc / static_cast<double>(w.size());
}

double EnsembleState::rolling_loss(const std::string& member) const {
    for (size_t m = 0; m < members_.size(); ++m) {
        if (members_[m] == member) return rolling_loss(m);
    }
    throw NumericError("ensemble: unknown member '" + member + "'");
}

const std::vector<double>& EnsembleState::update_weights() {
    if (!has_history()) {
        weights_.assign(members_.size(), 1.0 / static_cast<double>(members_.size()));
        return weights_;
    }
    std::vector<double> score(members_.size());
    double top = -std::numeric_limits<double>::infinity();
    for (size_t m = 0; m < members_.size(); ++m) {
        score[m] = -rolling_loss(m) / tau_;
        top = std::max(top, score[m]);
    }
    double denom = 0.0;
    for (size_t m = 0; m < members_.size(); ++m) {
        score[m] = std::exp(score[m] - top);
        denom += score[m];
    }
    for (size_t m = 0; m < members_.size(); ++m) weights_[m] = score[m] / denom;
    return weights_;
}

double EnsembleState::combine(const std::vector<double>& weights,
                              const std::vector<double>& probs) {
    if (weights.size() != probs.size() || weights.empty()) {
        throw NumericError("ensemble combine: " + std::to_string(weights.size()) +
                           " weights for " + std::to_string(probs.size()) + " probabilities");
    }
    double wsum = 0.0, out = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] < 0.0) throw NumericError("ensemble combine: negative weight");
        if (probs[i] < 0.0 || probs[i] > 1.0) {
            throw NumericError("ensemble combine: probability outside [0,1]");
        }
        wsum += weights[i];
        out += weights[i] * probs[i];
    }
    if (std::abs(wsum - 1.0) > 1e-9) {
        throw NumericError("ensemble combine: weights sum to " + std::to_string(wsum));
    }
    return out;
}

}  // namespace haelt::ensemble
