#pragma once

// Signal-strength kernel importance and the per-filter keep rule used to carve a
// task's subnetwork out of the shared U-Net.

#include "lcps/unet/unet.hpp"

#include <functional>
#include <iosfwd>
#include <numeric>
#include <span>
#include <vector>

namespace lcps {

struct PruneConfig {
    /// Fraction of each filter's importance mass to keep.
    double alpha = 0.9;
    int num_iters = 3;
    int retrain_epochs = 10;
    /// Adam step size while retraining a pruned candidate. Pruning perturbs the
    /// unnormalized activations heavily, and full-size steps diverge from there.
    double retrain_lr = 3e-4;
    /// Importance is measured on the first this-many training samples; 0 uses all.
    int importance_samples = 0;

    void validate() const
    {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw ConfigError("prune: alpha must lie in (0, 1)");
        if (num_iters < 1)
            throw ConfigError("prune: num_iters must be >= 1");
        if (retrain_epochs < 0)
            throw ConfigError("prune: retrain_epochs must be >= 0");
        if (!(retrain_lr > 0.0))
            throw ConfigError("prune: retrain_lr must be positive");
        if (importance_samples < 0)
            throw ConfigError("prune: importance_samples must be >= 0");
    }
};

struct FilterImportance {
    /// Normalized score per input channel; zero for inactive kernels.
    std::vector<double> scores;
    /// Total (unnormalized) importance over active kernels.
    double total = 0.0;
    /// Active kernels but zero total signal; such filters are never pruned.
    bool degenerate = false;
};

struct LayerImportance {
    std::size_t layer = 0;
    std::vector<FilterImportance> filters;
    Index samples = 0;
};

/// Streams layer inputs and accumulates, for every active kernel K(j, i), the sum
/// over samples of || |K(j, i)| * |x_i| ||_F (convolution with the layer's geometry).
template <typename Scalar>
class ImportanceAccumulator {
public:
    ImportanceAccumulator(const Tensor<Scalar>& weight, ConvGeometry geometry, KernelGate active, std::size_t layer = 0)
        : geometry_(geometry), active_(std::move(active)), layer_(layer)
    {
        const Shape& ws = weight.shape();
        if (active_.kernel.rows() != ws.n || active_.kernel.cols() != ws.c)
            throw DimensionError("importance: active set does not match layer dimensions");
        out_ = ws.n;
        in_ = ws.c;
        r_ = ws.h;
        abs_kernels_.resize(in_);
        for (Index i = 0; i < in_; ++i) {
            abs_kernels_[i].resize(out_, r_ * r_);
            for (Index j = 0; j < out_; ++j)
                for (Index q = 0; q < r_ * r_; ++q)
                    abs_kernels_[i](j, q) = std::abs(weight[(j * in_ + i) * r_ * r_ + q]);
        }
        sums_ = Eigen::MatrixXd::Zero(out_, in_);
    }

    void add(const Tensor<Scalar>& inputs)
    {
        const Shape& s = inputs.shape();
        if (s.c != in_)
            throw DimensionError("importance: input has " + std::to_string(s.c) + " channels, layer expects "
                                 + std::to_string(in_));
        const Index oh = geometry_.out_size(s.h, r_);
        const Index ow = geometry_.out_size(s.w, r_);
        RowMatrix<Scalar> cols;
        RowMatrix<Scalar> response;
        std::vector<Scalar> plane(static_cast<std::size_t>(s.plane()));
        for (Index n = 0; n < s.n; ++n) {
            for (Index i = 0; i < in_; ++i) {
                if (!active_.kernel.col(i).any())
                    continue;
                const Scalar* x = inputs.data() + (n * s.c + i) * s.plane();
                for (Index p = 0; p < s.plane(); ++p)
                    plane[static_cast<std::size_t>(p)] = std::abs(x[p]);
                detail::im2col(plane.data(), 1, s.h, s.w, r_, geometry_, oh, ow, cols);
                response.noalias() = abs_kernels_[i] * cols;
                for (Index j = 0; j < out_; ++j)
                    if (active_.kernel(j, i))
                        sums_(j, i) += std::sqrt(response.row(j).template cast<double>().squaredNorm());
            }
        }
        samples_ += s.n;
    }

    Index samples() const { return samples_; }

    LayerImportance finish() const
    {
        if (samples_ == 0)
            throw PruningError("importance: no samples were accumulated for layer " + std::to_string(layer_));
        LayerImportance li;
        li.layer = layer_;
        li.samples = samples_;
        for (Index j = 0; j < out_; ++j) {
            FilterImportance f;
            f.scores.assign(static_cast<std::size_t>(in_), 0.0);
            for (Index i = 0; i < in_; ++i)
                if (active_.kernel(j, i))
                    f.total += sums_(j, i) / static_cast<double>(samples_);
            if (f.total > 0.0) {
                for (Index i = 0; i < in_; ++i)
                    if (active_.kernel(j, i))
                        f.scores[static_cast<std::size_t>(i)] = sums_(j, i) / static_cast<double>(samples_) / f.total;
            } else {
                f.degenerate = active_.kernel.row(j).any();
            }
            li.filters.push_back(std::move(f));
        }
        return li;
    }

private:
    ConvGeometry geometry_;
    KernelGate active_;
    std::size_t layer_;
    Index out_ = 0;
    Index in_ = 0;
    Index r_ = 0;
    std::vector<RowMatrix<Scalar>> abs_kernels_;
    Eigen::MatrixXd sums_;
    Index samples_ = 0;
};

/// Importance table for one conv layer over a stream of recorded inputs.
template <typename Scalar>
LayerImportance kernel_importance(const Tensor<Scalar>& weight, ConvGeometry geometry,
                                  std::span<const Tensor<Scalar>> inputs, const KernelGate& active)
{
    ImportanceAccumulator<Scalar> acc(weight, geometry, active);
    for (const auto& batch : inputs)
        acc.add(batch);
    return acc.finish();
}

/// Indices kept for one filter: sort scores descending (stable by index), find the
/// shortest prefix whose sum reaches `alpha`, and keep every kernel scoring at least
/// the last prefix element. All-zero scores keep everything.
std::vector<std::size_t> select_keep_set(std::span<const double> scores, double alpha);

struct PruneOutcome {
    TaskMask mask;
    std::vector<LayerImportance> importance;
};

/// Scores every kernel in `candidate` on the given batches (forwarded through the
/// `candidate` subnetwork with output head `head`) and keeps, per filter, the
/// kernels selected by select_keep_set. Output heads are not part of the kernel space
/// and are never pruned.
template <typename Scalar>
PruneOutcome prune_model(const UNetModel<Scalar>& model, const MaskRegistry& registry, const KernelSet& candidate,
                         std::span<const Tensor<Scalar>> batches, double alpha, std::size_t head, int task_id = 0)
{
    const KernelSpace& space = model.kernel_space();
    registry.require_compatible(space);
    if (candidate.size() != space.total())
        throw StructuralError("prune: candidate set does not address this architecture");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ConfigError("prune: alpha must lie in (0, 1)");

    const std::vector<KernelGate> gates = candidate.gates(space);
    const ConvGeometry same{1, model.config().kernel_size / 2};
    std::vector<ImportanceAccumulator<Scalar>> acc;
    for (std::size_t l = 0; l < space.layer_count(); ++l)
        acc.emplace_back(model.params()[model.prunable()[l].weight].value, same, gates[l], l);

    for (const auto& batch : batches) {
        Trace<Scalar> trace(model.params());
        const ForwardRecord rec = record_forward(trace, model, batch, &gates, head);
        for (std::size_t l = 0; l < acc.size(); ++l)
            acc[l].add(trace.value(rec.layer_inputs[l]));
    }

    PruneOutcome out;
    out.mask = TaskMask{task_id, KernelSet(space.total())};
    for (std::size_t l = 0; l < acc.size(); ++l) {
        LayerImportance li = acc[l].finish();
        const auto& dims = space.layer(l);
        std::size_t kept_in_layer = 0;
        for (Index j = 0; j < dims.out; ++j) {
            std::vector<std::size_t> active;
            std::vector<double> scores;
            for (Index i = 0; i < dims.in; ++i)
                if (gates[l].kernel(j, i)) {
                    active.push_back(static_cast<std::size_t>(i));
                    scores.push_back(li.filters[static_cast<std::size_t>(j)].scores[static_cast<std::size_t>(i)]);
                }
            if (active.empty())
                continue;
            std::vector<std::size_t> keep;
            if (li.filters[static_cast<std::size_t>(j)].degenerate) {
                keep.resize(active.size());
                std::iota(keep.begin(), keep.end(), std::size_t{0});
            } else {
                keep = select_keep_set(scores, alpha);
            }
            for (std::size_t k : keep)
                out.mask.kernels.set(space.index({l, j, static_cast<Index>(active[k])}));
            kept_in_layer += keep.size();
        }
        if (kept_in_layer == 0)
            throw PruningError("prune: layer '" + model.prunable()[l].name + "' would lose every kernel");
        out.importance.push_back(std::move(li));
    }
    return out;
}

struct PruneRetrainResult {
    TaskMask mask;
    /// Active kernel count after each pruning iteration.
    std::vector<std::size_t> active_counts;
    std::vector<LayerImportance> importance;
};

/// Runs `config.num_iters` rounds of prune -> retrain. `retrain` receives the current
/// candidate set and is expected to update only free kernels inside it.
template <typename Scalar>
PruneRetrainResult prune_and_retrain(UNetModel<Scalar>& model, const MaskRegistry& registry, KernelSet candidate,
                                     std::span<const Tensor<Scalar>> batches, const PruneConfig& config,
                                     std::size_t head, int task_id,
                                     const std::function<void(const KernelSet&)>& retrain)
{
    config.validate();
    PruneRetrainResult result;
    for (int it = 0; it < config.num_iters; ++it) {
        PruneOutcome p = prune_model(model, registry, candidate, batches, config.alpha, head, task_id);
        candidate = p.mask.kernels;
        result.active_counts.push_back(candidate.count());
        result.importance = std::move(p.importance);
        if (retrain)
            retrain(candidate);
    }
    result.mask = TaskMask{task_id, candidate};
    return result;
}

/// Writes `layer,filter,kernel,score` rows.
void write_importance_csv(std::ostream& os, std::span<const LayerImportance> tables);

} // namespace lcps
