#pragma once

#include "lcps/engine/continual.hpp"

namespace lcps {

enum class BaselineKind { finetune, joint, single, regularized };

std::string_view baseline_name(BaselineKind kind);
BaselineKind parse_baseline(std::string_view name);

/// Quadratic anchor for the regularized baseline: previous parameters, per-element
/// importance weights and strength lambda.
template <typename Scalar>
struct RegBaselineState {
    std::vector<Eigen::ArrayXd> previous;
    std::vector<Eigen::ArrayXd> omega;
    double lambda = 0.0;

    /// lambda/2 * sum omega (theta - previous)^2; adds its gradient into the store.
    double apply(ParamStore<Scalar>& params) const
    {
        double value = 0.0;
        for (std::size_t p = 0; p < params.size(); ++p) {
            auto& prm = params[p];
            const Eigen::ArrayXd diff = prm.value.array().template cast<double>() - previous[p];
            value += 0.5 * lambda * (omega[p] * diff.square()).sum();
            prm.grad.array() += (lambda * omega[p] * diff).template cast<Scalar>();
        }
        return value;
    }
};

/// Adds an importance estimate for the task just trained into `omega`.
template <typename Scalar>
using OmegaEstimator = std::function<void(UNetModel<Scalar>&, std::span<const ImageSample>, const TrainConfig&,
                                          std::vector<Eigen::ArrayXd>& omega)>;

/// Mean over the task's training batches of the squared task-loss gradient.
template <typename Scalar>
void squared_gradient_omega(UNetModel<Scalar>& model, std::span<const ImageSample> data, const TrainConfig& config,
                            std::vector<Eigen::ArrayXd>& omega)
{
    const TrainingPlan<Scalar> plan = dense_plan(model, 0);
    std::vector<Eigen::ArrayXd> acc;
    for (const auto& p : model.params())
        acc.push_back(Eigen::ArrayXd::Zero(p.value.size()));
    std::size_t batches = 0;
    for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(config.batch_size)) {
        std::vector<const ImageSample*> ptrs;
        for (std::size_t k = start; k < std::min(data.size(), start + static_cast<std::size_t>(config.batch_size)); ++k)
            ptrs.push_back(&data[k]);
        Tensor<Scalar> images, targets;
        make_batch<Scalar>(ptrs, images, targets);
        batch_gradient(model, images, targets, plan, config.eps_smooth);
        for (std::size_t p = 0; p < acc.size(); ++p)
            acc[p] += model.params()[p].grad.array().template cast<double>().square();
        ++batches;
    }
    for (std::size_t p = 0; p < acc.size(); ++p)
        omega[p] += acc[p] / static_cast<double>(batches);
}

template <typename Scalar>
struct BaselineResult {
    MetricsMatrix metrics;
    /// Model after the last step (the last task's model for `single`).
    UNetModel<Scalar> model;
};

/// Reference strategies with one shared output head:
///   finetune     sequential training, nothing protected;
///   joint        a fresh model trained on the union of tasks 1..t at step t;
///   single       a fresh model per task, evaluated on its own task;
///   regularized  finetune plus lambda/2 sum omega (theta - theta_prev)^2.
template <typename Scalar>
BaselineResult<Scalar> run_baseline(BaselineKind kind, std::span<const TaskDataset> tasks,
                                    const ContinualConfig& config, double lambda = 0.0,
                                    OmegaEstimator<Scalar> estimator = squared_gradient_omega<Scalar>,
                                    const std::function<void(std::size_t, int, double)>& on_epoch = {})
{
    config.validate();
    if (tasks.empty())
        throw ConfigError("baseline: need at least one task");
    if (!(lambda >= 0.0))
        throw ConfigError("baseline: lambda must be non-negative");
    std::vector<std::string> names;
    for (const auto& t : tasks) {
        t.validate();
        names.push_back(t.name);
    }
    const Routing routing = kind == BaselineKind::single ? Routing::oracle : Routing::none;
    BaselineResult<Scalar> res{MetricsMatrix(names, {routing}), build_unet<Scalar>(config.unet, config.seed)};
    std::vector<UNetModel<Scalar>> singles;
    RegBaselineState<Scalar> reg;
    reg.lambda = lambda;
    for (const auto& p : res.model.params())
        reg.omega.push_back(Eigen::ArrayXd::Zero(p.value.size()));

    for (std::size_t t = 0; t < tasks.size(); ++t) {
        Rng rng = make_rng(config.seed, "shuffle", t);
        EpochCallback hook;
        if (on_epoch)
            hook = [&on_epoch, t](int e, double loss) { on_epoch(t, e, loss); };
        std::vector<ImageSample> data;
        if (kind == BaselineKind::joint) {
            res.model = build_unet<Scalar>(config.unet, config.seed);
            for (std::size_t s = 0; s <= t; ++s)
                data.insert(data.end(), tasks[s].train.begin(), tasks[s].train.end());
        } else {
            if (kind == BaselineKind::single)
                res.model = build_unet<Scalar>(config.unet, config.seed);
            data = tasks[t].train;
        }
        TrainingPlan<Scalar> plan = dense_plan(res.model, 0);
        if (kind == BaselineKind::regularized && lambda != 0.0 && t > 0)
            plan.penalty = [&reg](ParamStore<Scalar>& p) { return reg.apply(p); };
        train_epochs(res.model, std::span<const ImageSample>(data), plan, config.train, config.train.epochs, rng,
                     hook);

        if (kind == BaselineKind::regularized) {
            estimator(res.model, tasks[t].train, config.train, reg.omega);
            reg.previous.clear();
            for (const auto& p : res.model.params())
                reg.previous.push_back(p.value.array().template cast<double>());
        }
        if (kind == BaselineKind::single)
            singles.push_back(res.model);

        for (std::size_t s = 0; s <= t; ++s) {
            const UNetModel<Scalar>& m = kind == BaselineKind::single ? singles[s] : res.model;
            res.metrics.set(routing, t, s, mean_iou(m, std::span<const ImageSample>(tasks[s].test), nullptr, 0,
                                                    config.threshold));
        }
    }
    return res;
}

} // namespace lcps
