#pragma once
// Classical Adam with coupled (L2) weight decay and bias-corrected moments.

#include "glancevad/core_types.hpp"

#include <cmath>
#include <string>

namespace glancevad {

struct AdamState {
    Vector m;
    Vector v;
    long long step = 0;

    static AdamState zeros(Index n) { return {Vector::Zero(n), Vector::Zero(n), 0}; }
};

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

inline void adam_step(Vector& params, const Vector& grads, AdamState& state, double lr, double weight_decay,
                      const AdamHyper& hyper = {}) {
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ShapeError("adam_step: parameter, gradient and state sizes differ");
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
    for (Index i = 0; i < params.size(); ++i) {
        const double g = grads[i] + weight_decay * params[i];
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        const double delta = lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
        if (!std::isfinite(delta)) throw NumericError("adam_step: non-finite update at parameter " + std::to_string(i));
        params[i] -= delta;
    }
}

}  // namespace glancevad
