#pragma once

#include "lcps/core/param_store.hpp"

#include <cmath>

namespace lcps {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <typename Scalar>
struct AdamState {
    AdamConfig config;
    long step = 0;
    std::vector<Eigen::Array<Scalar, Eigen::Dynamic, 1>> m;
    std::vector<Eigen::Array<Scalar, Eigen::Dynamic, 1>> v;

    AdamState(const ParamStore<Scalar>& params, AdamConfig cfg) : config(cfg)
    {
        for (const auto& p : params) {
            m.push_back(Eigen::Array<Scalar, Eigen::Dynamic, 1>::Zero(p.value.size()));
            v.push_back(Eigen::Array<Scalar, Eigen::Dynamic, 1>::Zero(p.value.size()));
        }
    }
};

enum class StepStatus { updated, empty_trainable_set };

/// One Adam update restricted to `trainable`. Elements outside the set keep their
/// exact bits and their moment estimates are left untouched.
template <typename Scalar>
StepStatus adam_step(ParamStore<Scalar>& params, AdamState<Scalar>& state, const TrainableSet& trainable)
{
    if (trainable.size() != params.size() || state.m.size() != params.size())
        throw StructuralError("adam: trainable set / optimizer state do not match the parameter store");
    if (trainable.empty())
        return StepStatus::empty_trainable_set;

    ++state.step;
    const auto& c = state.config;
    const Scalar lr = static_cast<Scalar>(c.learning_rate);
    const Scalar b1 = static_cast<Scalar>(c.beta1);
    const Scalar b2 = static_cast<Scalar>(c.beta2);
    const Scalar eps = static_cast<Scalar>(c.epsilon);
    const Scalar bc1 = Scalar(1) - static_cast<Scalar>(std::pow(c.beta1, static_cast<double>(state.step)));
    const Scalar bc2 = Scalar(1) - static_cast<Scalar>(std::pow(c.beta2, static_cast<double>(state.step)));

    for (std::size_t p = 0; p < params.size(); ++p) {
        const auto& mask = trainable[p];
        if (!mask.any())
            continue;
        auto& value = params[p].value.array();
        const auto& g = params[p].grad.array();
        auto& m = state.m[p];
        auto& v = state.v[p];
        for (Index i = 0; i < value.size(); ++i) {
            if (!mask[i])
                continue;
            const Scalar gi = g[i];
            m[i] = b1 * m[i] + (Scalar(1) - b1) * gi;
            v[i] = b2 * v[i] + (Scalar(1) - b2) * gi * gi;
            const Scalar mhat = m[i] / bc1;
            const Scalar vhat = v[i] / bc2;
            value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
    return StepStatus::updated;
}

} // namespace lcps
