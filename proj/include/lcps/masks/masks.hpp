#pragma once

#include "lcps/core/layers.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace lcps {

/// One kernel K(layer, out, in) of a prunable convolution.
struct KernelAddress {
    std::size_t layer = 0;
    Index out = 0;
    Index in = 0;

    bool operator==(const KernelAddress&) const = default;
};

/// Kernel layout of an architecture: per prunable layer, its (out, in) extent,
/// flattened layer by layer in row-major (out, in) order.
class KernelSpace {
public:
    struct Layer {
        Index out;
        Index in;
    };

    KernelSpace() = default;
    explicit KernelSpace(std::vector<Layer> layers);

    std::size_t layer_count() const { return layers_.size(); }
    const Layer& layer(std::size_t l) const { return layers_.at(l); }
    std::size_t offset(std::size_t l) const { return offsets_.at(l); }
    std::size_t total() const { return total_; }

    std::size_t index(const KernelAddress& a) const;
    KernelAddress address(std::size_t flat) const;

    /// Stable hash of the layer extents; identifies compatible architectures.
    std::uint64_t fingerprint() const;

private:
    std::vector<Layer> layers_;
    std::vector<std::size_t> offsets_;
    std::size_t total_ = 0;
};

/// Fixed-size bitset over the kernels of one architecture.
class KernelSet {
public:
    KernelSet() = default;
    explicit KernelSet(std::size_t size, bool value = false);

    std::size_t size() const { return size_; }
    bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1U; }
    void set(std::size_t i, bool value = true);
    std::size_t count() const;
    bool empty() const { return count() == 0; }

    KernelSet operator|(const KernelSet& o) const;
    KernelSet operator&(const KernelSet& o) const;
    KernelSet operator~() const;
    bool operator==(const KernelSet& o) const = default;
    bool subset_of(const KernelSet& o) const;

    std::vector<std::size_t> indices() const;
    const std::vector<std::uint64_t>& words() const { return words_; }
    static KernelSet from_words(std::size_t size, std::vector<std::uint64_t> words);

    /// Gate for layer `l` of `space`: kernels on where set, bias on for filters
    /// with any kernel on.
    KernelGate gate(const KernelSpace& space, std::size_t l) const;
    std::vector<KernelGate> gates(const KernelSpace& space) const;

private:
    void check_same(const KernelSet& o) const;
    void trim();

    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
};

/// The kernels one task's subnetwork uses.
struct TaskMask {
    int task_id = 0;
    KernelSet kernels;

    bool operator==(const TaskMask&) const = default;
};

/// Ordered record of frozen task masks. The frozen set is always the exact union
/// of the stored masks, and stored masks never change once added.
class MaskRegistry {
public:
    MaskRegistry() = default;
    explicit MaskRegistry(const KernelSpace& space);

    std::uint64_t fingerprint() const { return fingerprint_; }
    std::size_t kernel_count() const { return kernel_count_; }
    std::size_t task_count() const { return masks_.size(); }
    const std::vector<TaskMask>& masks() const { return masks_; }
    const KernelSet& frozen() const { return frozen_; }

    void freeze_task(int task_id, const TaskMask& mask);
    const TaskMask& active_mask(int task_id) const;
    bool contains(int task_id) const;

    /// Throws StructuralError if `space` is not the architecture this registry tracks.
    void require_compatible(const KernelSpace& space) const;

private:
    std::uint64_t fingerprint_ = 0;
    std::size_t kernel_count_ = 0;
    std::vector<TaskMask> masks_;
    KernelSet frozen_;
};

/// Complement of the frozen set: kernels still available to future tasks.
KernelSet trainable_kernels(const MaskRegistry& registry, const KernelSpace& space);

/// Returns `registry` with `mask` stored under `task_id`.
MaskRegistry freeze_task(MaskRegistry registry, int task_id, const TaskMask& mask);

const TaskMask& active_mask(const MaskRegistry& registry, int task_id);

/// Filters (layer, out) whose bias is owned by some frozen task, i.e. touched by any
/// stored mask. Returned per layer.
std::vector<Eigen::Array<bool, Eigen::Dynamic, 1>> frozen_filters(const MaskRegistry& registry,
                                                                 const KernelSpace& space);

} // namespace lcps
