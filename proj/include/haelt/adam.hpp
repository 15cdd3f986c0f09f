#pragma once

#include <string>
#include <vector>

#include "haelt/tensor.hpp"

namespace haelt::ad {

struct NamedParam {
    std::string name;
    Tensor tensor;
};

struct AdamConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// First/second moment buffers aligned one-to-one with a parameter list.
// step increments by exactly one per apply call.
struct AdamState {
    AdamConfig cfg;
    int64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    void init(const std::vector<NamedParam>& params);
    bool initialized() const { return !m.empty(); }
};

// Bias-corrected Adam update in place. Throws NumericError naming the
// parameter if its gradient buffer is missing.
void adam_step(AdamState& state, std::vector<NamedParam>& params);

}  // namespace haelt::ad
