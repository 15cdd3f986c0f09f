#include "haelt/adam.hpp"

#include <cmath>

namespace haelt::ad {

void AdamState::init(const std::vector<NamedParam>& params) {
    m.assign(params.size(), {});
    v.assign(params.size(), {});
    for (size_t i = 0; i < params.size(); ++i) {
        m[i].assign(params[i].tensor.values->size(), 0.0);
        v[i].assign(params[i].tensor.values->size(), 0.0);
    }
    step = 0;
}

void adam_step(AdamState& state, std::vector<NamedParam>& params) {
    if (!state.initialized()) state.init(params);
    if (state.m.size() != params.size()) {
        throw NumericError("adam_step: state tracks " + std::to_string(state.m.size()) +
                           " parameters, got " + std::to_string(params.size()));
    }
    state.step += 1;
    const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& t = params[i].tensor;
        if (!t.grad) {
            throw NumericError("adam_step: missing gradient for parameter '" + params[i].name + "'");
        }
        if (state.m[i].size() != t.values->size()) {
            throw NumericError("adam_step: size mismatch for parameter '" + params[i].name + "'");
        }
        double* p = t.data();
        const double* g = t.gdata();
        double* mi = state.m[i].data();
        double* vi = state.v[i].data();
        const size_t n = t.values->size();
        for (size_t j = 0; j < n; ++j) {
            mi[j] = b1 * mi[j] + (1.0 - b1) * g[j];
            vi[j] = b2 * vi[j] + (1.0 - b2) * g[j] * g[j];
            const double mhat = mi[j] / bc1;
            const double vhat = vi[j] / bc2;
            p[j] -= state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.epsilon);
        }
    }
}

}  // namespace haelt::ad
