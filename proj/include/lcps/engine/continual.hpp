#pragma once

#include "lcps/engine/metrics.hpp"
#include "lcps/engine/train.hpp"
#include "lcps/lda/extractor.hpp"
#include "lcps/lda/slda.hpp"
#include "lcps/prune/nnrelief.hpp"

#include <string_view>

namespace lcps {

struct ContinualConfig {
    UNetConfig unet{{8, 16, 32}, 64, 1, 1, 3, 64};
    TrainConfig train;
    PruneConfig prune;
    double eps_shrinkage = 1e-4;
    double threshold = 0.5;
    std::uint64_t seed = 0;
    /// Re-draw every unassigned kernel after each task freezes.
    bool reinit_free = false;
    /// Training mIoU of a final subnetwork below this is reported as a warning.
    double collapse_floor = 0.05;

    void validate() const
    {
        unet.validate();
        train.validate();
        prune.validate();
        if (!(eps_shrinkage > 0.0 && eps_shrinkage <= 1.0))
            throw ConfigError("config: eps_shrinkage must lie in (0, 1]");
        if (!(threshold > 0.0 && threshold < 1.0))
            throw ConfigError("config: threshold must lie in (0, 1)");
        if (!(collapse_floor >= 0.0 && collapse_floor <= 1.0))
            throw ConfigError("config: collapse_floor must lie in [0, 1]");
    }
};

/// Everything inference needs: the shared weights, one frozen mask and head per
/// task, and the task classifier.
template <typename Scalar>
struct ContinualState {
    UNetModel<Scalar> model;
    MaskRegistry registry;
    LdaState lda;
    std::vector<std::string> tasks;

    std::size_t task_count() const { return registry.task_count(); }
};

/// Fraction of kernels not yet assigned to any task.
inline double free_fraction(const MaskRegistry& registry)
{
    return static_cast<double>(registry.kernel_count() - registry.frozen().count())
           / static_cast<double>(registry.kernel_count());
}

template <typename Scalar>
Eigen::MatrixXd embed(const FeatureExtractor& extractor, std::span<const ImageSample> samples)
{
    Eigen::MatrixXd z(extractor.dimension(), static_cast<Index>(samples.size()));
    for (std::size_t k = 0; k < samples.size(); ++k)
        z.col(static_cast<Index>(k)) = extractor.extract(samples[k]);
    return z;
}

struct Inference {
    int task = 0;
    BinaryMask mask;
    GrayImage probabilities;
};

/// Two-stage prediction: pick the subnetwork with LDA on the image embedding, then
/// segment through it. `force_task` bypasses the classifier.
template <typename Scalar>
Inference infer(const ContinualState<Scalar>& state, const FeatureExtractor& extractor, const GrayImage& image,
                const std::string& id, double threshold, std::optional<int> force_task = std::nullopt)
{
    if (state.task_count() == 0)
        throw StateError("infer: no task has been frozen");
    Inference out;
    out.task = force_task ? *force_task : state.lda.predict(extractor.extract(image, id));
    const TaskMask& mask = state.registry.active_mask(out.task);
    out.probabilities = segment(state.model, image, &mask, static_cast<std::size_t>(out.task));
    out.mask = binarize(out.probabilities.matrix(), threshold);
    return out;
}

struct TaskEvaluation {
    double miou = 0.0;
    std::size_t images = 0;
    std::size_t routed_correctly = 0;
};

/// Test mIoU of task `task` with images routed either by their true task id or by LDA.
template <typename Scalar>
TaskEvaluation evaluate_task(const ContinualState<Scalar>& state, const FeatureExtractor& extractor,
                             std::span<const ImageSample> test, std::size_t task, Routing routing, double threshold)
{
    if (routing == Routing::none)
        throw ConfigError("evaluate: continual runs route by oracle or lda");
    if (test.empty())
        throw ConfigError("evaluate: no test samples");
    TaskEvaluation ev;
    double sum = 0.0;
    for (const auto& s : test) {
        std::optional<int> forced;
        if (routing == Routing::oracle)
            forced = static_cast<int>(task);
        const Inference r = infer(state, extractor, s.image, s.id, threshold, forced);
        sum += iou_score(r.mask, s.mask);
        ev.routed_correctly += r.task == static_cast<int>(task);
    }
    ev.images = test.size();
    ev.miou = sum / static_cast<double>(test.size());
    return ev;
}

/// Fills row `step` of `metrics` for every task seen so far, for each routing the
/// matrix records, plus the LDA task-id accuracy over all those test images.
template <typename Scalar>
void evaluate_step(const ContinualState<Scalar>& state, const FeatureExtractor& extractor,
                   std::span<const TaskDataset> tasks, std::size_t step, double threshold, MetricsMatrix& metrics)
{
    std::size_t correct = 0, total = 0;
    for (Routing r : metrics.routings())
        for (std::size_t t = 0; t <= step; ++t) {
            const TaskEvaluation ev = evaluate_task(state, extractor, tasks[t].test, t, r, threshold);
            metrics.set(r, step, t, ev.miou);
            if (r == Routing::lda) {
                correct += ev.routed_correctly;
                total += ev.images;
            }
        }
    if (total > 0)
        metrics.set_accuracy(step, static_cast<double>(correct) / static_cast<double>(total));
}

/// Hooks into a continual run; every member is optional.
template <typename Scalar>
struct ContinualObserver {
    /// phase is "train" or "retrain<k>".
    std::function<void(std::size_t task, std::string_view phase, int epoch, double loss)> on_epoch;
    std::function<void(std::size_t task, const PruneRetrainResult&)> on_prune;
    /// Called after task `step` froze and its metrics row was filled.
    std::function<void(std::size_t step, const ContinualState<Scalar>&, const MetricsMatrix&)> on_step;
};

template <typename Scalar>
struct ContinualResult {
    ContinualState<Scalar> state;
    MetricsMatrix metrics;
    /// Free-kernel fraction after each task froze.
    std::vector<double> free_fractions;
    /// Active kernel count after every pruning iteration, per task.
    std::vector<std::vector<std::size_t>> active_counts;
    /// Non-fatal problems, e.g. a subnetwork that collapsed after pruning.
    std::vector<std::string> warnings;
};

/// Trains the tasks in order: dense training of the free kernels, iterative
/// prune/retrain, freeze, then LDA fit and a full evaluation row.
template <typename Scalar>
ContinualResult<Scalar> run_continual(std::span<const TaskDataset> tasks, const ContinualConfig& config,
                                      const FeatureExtractor& extractor,
                                      const ContinualObserver<Scalar>& observer = {})
{
    config.validate();
    if (tasks.empty())
        throw ConfigError("continual: need at least one task");
    std::vector<std::string> names;
    for (const auto& t : tasks) {
        t.validate();
        if (t.train.empty() || t.test.empty())
            throw ConfigError("continual: task '" + t.name + "' needs train and test samples");
        for (const auto* split : {&t.train, &t.test})
            for (const auto& s : *split)
                if (s.image.rows() != config.unet.image_side || s.image.cols() != config.unet.image_side)
                    throw DimensionError("continual: '" + s.id + "' is not " + std::to_string(config.unet.image_side)
                                         + " pixels square");
        names.push_back(t.name);
    }

    ContinualResult<Scalar> res{
        {build_unet<Scalar>(config.unet, config.seed), MaskRegistry{}, LdaState(extractor.dimension()), names},
        MetricsMatrix(names, {Routing::oracle, Routing::lda}),
        {},
        {},
        {}};
    ContinualState<Scalar>& st = res.state;
    st.registry = MaskRegistry(st.model.kernel_space());
    const KernelSpace& space = st.model.kernel_space();
    const std::uint64_t phases_per_task = static_cast<std::uint64_t>(config.prune.num_iters) + 1;

    for (std::size_t t = 0; t < tasks.size(); ++t) {
        const TaskDataset& task = tasks[t];
        const std::size_t head = t == 0 ? 0 : st.model.add_head();
        auto epoch_hook = [&](std::string phase) -> EpochCallback {
            if (!observer.on_epoch)
                return {};
            return [&observer, t, phase](int e, double loss) { observer.on_epoch(t, phase, e, loss); };
        };

        const KernelSet everything(space.total(), true);
        Rng rng = make_rng(config.seed, "shuffle", t * phases_per_task);
        train_epochs(st.model, std::span<const ImageSample>(task.train),
                     subnetwork_plan(st.model, st.registry, everything, head), config.train, config.train.epochs, rng,
                     epoch_hook("train"));

        std::span<const ImageSample> scored(task.train);
        if (config.prune.importance_samples > 0)
            scored = scored.first(std::min(scored.size(), static_cast<std::size_t>(config.prune.importance_samples)));
        const std::vector<Tensor<Scalar>> batches = image_batches<Scalar>(scored, config.train.batch_size);
        int round = 0;
        auto retrain = [&](const KernelSet& candidate) {
            ++round;
            if (config.prune.retrain_epochs == 0)
                return;
            Rng r = make_rng(config.seed, "shuffle", t * phases_per_task + static_cast<std::uint64_t>(round));
            TrainConfig retrain_config = config.train;
            retrain_config.adam.learning_rate = config.prune.retrain_lr;
            train_epochs(st.model, std::span<const ImageSample>(task.train),
                         subnetwork_plan(st.model, st.registry, candidate, head), retrain_config,
                         config.prune.retrain_epochs, r, epoch_hook("retrain" + std::to_string(round)));
        };
        const PruneRetrainResult pr =
            prune_and_retrain(st.model, st.registry, everything, std::span<const Tensor<Scalar>>(batches),
                              config.prune, head, static_cast<int>(t), retrain);
        if (observer.on_prune)
            observer.on_prune(t, pr);
        const double train_miou =
            mean_iou(st.model, std::span<const ImageSample>(task.train), &pr.mask, head, config.threshold);
        if (train_miou < config.collapse_floor)
            res.warnings.push_back("task '" + task.name + "': training mIoU " + std::to_string(train_miou)
                                   + " after pruning is below the collapse floor "
                                   + std::to_string(config.collapse_floor));
        st.registry.freeze_task(static_cast<int>(t), pr.mask);
        if (config.reinit_free)
            st.model.reinitialize_kernels(trainable_kernels(st.registry, space), t);

        st.lda.fit_task(embed<Scalar>(extractor, task.train));
        st.lda.finalize(config.eps_shrinkage);

        evaluate_step(st, extractor, tasks, t, config.threshold, res.metrics);
        res.free_fractions.push_back(free_fraction(st.registry));
        res.active_counts.push_back(pr.active_counts);
        if (observer.on_step)
            observer.on_step(t, st, res.metrics);
    }
    return res;
}

} // namespace lcps
