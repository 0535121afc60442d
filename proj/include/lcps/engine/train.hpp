#pragma once

#include "lcps/core/adam.hpp"
#include "lcps/data/image.hpp"
#include "lcps/engine/loss.hpp"
#include "lcps/unet/unet.hpp"

#include <functional>
#include <numeric>
#include <optional>
#include <span>

namespace lcps {

struct TrainConfig {
    int epochs = 20;
    Index batch_size = 8;
    AdamConfig adam;
    double eps_smooth = 1.0;

    void validate() const
    {
        if (epochs < 1)
            throw ConfigError("train: epochs must be >= 1");
        if (batch_size < 1)
            throw ConfigError("train: batch_size must be >= 1");
        if (!(adam.learning_rate > 0.0))
            throw ConfigError("train: learning rate must be positive");
        if (!(eps_smooth > 0.0))
            throw ConfigError("train: eps_smooth must be positive");
    }
};

/// Extra loss term: adds its gradient into the store's grad buffers and returns its value.
template <typename Scalar>
using Penalty = std::function<double(ParamStore<Scalar>&)>;

/// What one training phase touches: the subnetwork used in the forward pass, the
/// output head, and the element-level set of parameters Adam may update.
template <typename Scalar>
struct TrainingPlan {
    std::optional<std::vector<KernelGate>> gates;
    std::size_t head = 0;
    TrainableSet trainable;
    Penalty<Scalar> penalty;
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/// Fisher-Yates over [0, n) driven by `rng`.
inline std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng)
{
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i - 1)));
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

/// Image tensors of consecutive chunks of `data`, in order.
template <typename Scalar>
std::vector<Tensor<Scalar>> image_batches(std::span<const ImageSample> data, Index batch_size)
{
    std::vector<Tensor<Scalar>> out;
    for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(data.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<const ImageSample*> ptrs;
        for (std::size_t k = start; k < end; ++k)
            ptrs.push_back(&data[k]);
        Tensor<Scalar> images, targets;
        make_batch<Scalar>(ptrs, images, targets);
        out.push_back(std::move(images));
    }
    return out;
}

/// Loss and gradients for one batch; gradients land in the model's store.
template <typename Scalar>
double batch_gradient(UNetModel<Scalar>& model, const Tensor<Scalar>& images, const Tensor<Scalar>& targets,
                      const TrainingPlan<Scalar>& plan, double eps_smooth)
{
    Trace<Scalar> trace(model.params());
    const ForwardRecord rec = record_forward(trace, model, images, plan.gates ? &*plan.gates : nullptr, plan.head);
    const IouLoss<Scalar> loss = iou_loss(trace.value(rec.output), targets, eps_smooth);
    trace.backward(rec.output, loss.grad, model.params());
    double value = loss.value;
    if (plan.penalty)
        value += plan.penalty(model.params());
    return value;
}

/// Runs `epochs` passes of minibatch Adam over `data` with a fresh optimizer state.
/// Returns the mean loss of every epoch.
template <typename Scalar>
std::vector<double> train_epochs(UNetModel<Scalar>& model, std::span<const ImageSample> data,
                                 const TrainingPlan<Scalar>& plan, const TrainConfig& config, int epochs, Rng& shuffle,
                                 const EpochCallback& on_epoch = {})
{
    config.validate();
    if (data.empty())
        throw ConfigError("train: no training samples");
    if (plan.trainable.size() != model.params().size())
        throw StructuralError("train: trainable set does not match the parameter store");
    AdamState<Scalar> adam(model.params(), config.adam);
    std::vector<double> losses;
    const auto bs = static_cast<std::size_t>(config.batch_size);
    for (int e = 0; e < epochs; ++e) {
        const std::vector<std::size_t> order = shuffled_order(data.size(), shuffle);
        double total = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += bs) {
            std::vector<const ImageSample*> ptrs;
            for (std::size_t k = start; k < std::min(order.size(), start + bs); ++k)
                ptrs.push_back(&data[order[k]]);
            Tensor<Scalar> images, targets;
            make_batch<Scalar>(ptrs, images, targets);
            const double loss = batch_gradient(model, images, targets, plan, config.eps_smooth);
            if (!std::isfinite(loss))
                throw NumericError("train: non-finite loss at epoch " + std::to_string(e + 1) + ", batch starting with '"
                                   + ptrs.front()->id + "'");
            adam_step(model.params(), adam, plan.trainable);
            total += loss;
            ++batches;
        }
        losses.push_back(total / static_cast<double>(batches));
        if (on_epoch)
            on_epoch(e + 1, losses.back());
    }
    return losses;
}

/// Plan for training inside `candidate`: kernels that are in the candidate and not
/// frozen, biases of candidate filters no frozen task owns, and all of head `head`.
template <typename Scalar>
TrainingPlan<Scalar> subnetwork_plan(const UNetModel<Scalar>& model, const MaskRegistry& registry,
                                     const KernelSet& candidate, std::size_t head)
{
    const KernelSpace& space = model.kernel_space();
    registry.require_compatible(space);
    if (candidate.size() != space.total())
        throw StructuralError("train: candidate set does not address this architecture");
    TrainingPlan<Scalar> plan;
    plan.gates = candidate.gates(space);
    plan.head = head;
    plan.trainable = TrainableSet::none(model.params());
    const KernelSet free = trainable_kernels(registry, space) & candidate;
    const auto owned = frozen_filters(registry, space);
    for (std::size_t l = 0; l < space.layer_count(); ++l) {
        const ConvLayerRef& c = model.prunable()[l];
        const Index area = c.kernel * c.kernel;
        auto& w = plan.trainable[c.weight];
        auto& b = plan.trainable[c.bias];
        for (Index j = 0; j < c.out; ++j) {
            for (Index i = 0; i < c.in; ++i)
                if (free.test(space.index({l, j, i})))
                    w.segment((j * c.in + i) * area, area).setConstant(true);
            b[j] = (*plan.gates)[l].bias[j] && !owned[l][j];
        }
    }
    const ConvLayerRef& h = model.head(head);
    plan.trainable[h.weight].setConstant(true);
    plan.trainable[h.bias].setConstant(true);
    return plan;
}

/// Plan for ordinary training of the whole network through head `head`.
template <typename Scalar>
TrainingPlan<Scalar> dense_plan(const UNetModel<Scalar>& model, std::size_t head = 0)
{
    TrainingPlan<Scalar> plan;
    plan.head = head;
    plan.trainable = TrainableSet::all(model.params());
    for (std::size_t h = 0; h < model.head_count(); ++h)
        if (h != head) {
            plan.trainable[model.head(h).weight].setConstant(false);
            plan.trainable[model.head(h).bias].setConstant(false);
        }
    return plan;
}

/// Per-pixel probabilities of one image through head `head`, optionally restricted
/// to a subnetwork.
template <typename Scalar>
GrayImage segment(const UNetModel<Scalar>& model, const GrayImage& image, const TaskMask* mask, std::size_t head)
{
    const Tensor<Scalar> x = image_tensor<Scalar>(image);
    const Tensor<Scalar> p = unet_forward(model, x, mask, head);
    return p.plane(0, 0).template cast<float>().array();
}

/// Mean IoU over `samples` after binarizing at `threshold`.
template <typename Scalar>
double mean_iou(const UNetModel<Scalar>& model, std::span<const ImageSample> samples, const TaskMask* mask,
                std::size_t head, double threshold)
{
    if (samples.empty())
        throw ConfigError("evaluate: no test samples");
    double sum = 0.0;
    for (const auto& s : samples)
        sum += iou_score(binarize(segment(model, s.image, mask, head).matrix(), threshold), s.mask);
    return sum / static_cast<double>(samples.size());
}

} // namespace lcps
