#include "lcps/masks/masks.hpp"

#include "lcps/core/rng.hpp"

#include <algorithm>
#include <bit>
#include <string>

namespace lcps {

KernelSpace::KernelSpace(std::vector<Layer> layers) : layers_(std::move(layers))
{
    for (const auto& l : layers_) {
        if (l.out < 1 || l.in < 1)
            throw StructuralError("kernel space: layer extents must be positive");
        offsets_.push_back(total_);
        total_ += static_cast<std::size_t>(l.out * l.in);
    }
}

std::size_t KernelSpace::index(const KernelAddress& a) const
{
    if (a.layer >= layers_.size() || a.out < 0 || a.out >= layers_[a.layer].out || a.in < 0
        || a.in >= layers_[a.layer].in)
        throw StructuralError("kernel space: address (" + std::to_string(a.layer) + "," + std::to_string(a.out) + ","
                              + std::to_string(a.in) + ") out of bounds");
    return offsets_[a.layer] + static_cast<std::size_t>(a.out * layers_[a.layer].in + a.in);
}

KernelAddress KernelSpace::address(std::size_t flat) const
{
    if (flat >= total_)
        throw StructuralError("kernel space: flat index out of bounds");
    const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), flat);
    const auto l = static_cast<std::size_t>(std::distance(offsets_.begin(), it) - 1);
    const auto local = static_cast<Index>(flat - offsets_[l]);
    return {l, local / layers_[l].in, local % layers_[l].in};
}

std::uint64_t KernelSpace::fingerprint() const
{
    std::uint64_t h = fnv1a("kernel-space");
    for (const auto& l : layers_)
        h = splitmix64(h ^ splitmix64(static_cast<std::uint64_t>(l.out) * 1000003ULL + static_cast<std::uint64_t>(l.in)));
    return h;
}

KernelSet::KernelSet(std::size_t size, bool value)
    : size_(size), words_((size + 63) / 64, value ? ~std::uint64_t{0} : std::uint64_t{0})
{
    trim();
}

void KernelSet::set(std::size_t i, bool value)
{
    if (i >= size_)
        throw StructuralError("kernel set: index " + std::to_string(i) + " out of range");
    const std::uint64_t bit = std::uint64_t{1} << (i & 63);
    if (value)
        words_[i >> 6] |= bit;
    else
        words_[i >> 6] &= ~bit;
}

std::size_t KernelSet::count() const
{
    std::size_t c = 0;
    for (auto w : words_)
        c += static_cast<std::size_t>(std::popcount(w));
    return c;
}

void KernelSet::check_same(const KernelSet& o) const
{
    if (o.size_ != size_)
        throw StructuralError("kernel set: size mismatch " + std::to_string(size_) + " vs " + std::to_string(o.size_));
}

void KernelSet::trim()
{
    if (size_ % 64 != 0 && !words_.empty())
        words_.back() &= (std::uint64_t{1} << (size_ % 64)) - 1;
}

KernelSet KernelSet::operator|(const KernelSet& o) const
{
    check_same(o);
    KernelSet r = *this;
    for (std::size_t i = 0; i < words_.size(); ++i)
        r.words_[i] |= o.words_[i];
    return r;
}

KernelSet KernelSet::operator&(const KernelSet& o) const
{
    check_same(o);
    KernelSet r = *this;
    for (std::size_t i = 0; i < words_.size(); ++i)
        r.words_[i] &= o.words_[i];
    return r;
}

KernelSet KernelSet::operator~() const
{
    KernelSet r = *this;
    for (auto& w : r.words_)
        w = ~w;
    r.trim();
    return r;
}

bool KernelSet::subset_of(const KernelSet& o) const
{
    check_same(o);
    for (std::size_t i = 0; i < words_.size(); ++i)
        if (words_[i] & ~o.words_[i])
            return false;
    return true;
}

std::vector<std::size_t> KernelSet::indices() const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size_; ++i)
        if (test(i))
            out.push_back(i);
    return out;
}

KernelSet KernelSet::from_words(std::size_t size, std::vector<std::uint64_t> words)
{
    if (words.size() != (size + 63) / 64)
        throw StructuralError("kernel set: word count does not match size");
    KernelSet s;
    s.size_ = size;
    s.words_ = std::move(words);
    const auto before = s.words_.empty() ? 0 : s.words_.back();
    s.trim();
    if (!s.words_.empty() && before != s.words_.back())
        throw StructuralError("kernel set: bits set beyond the declared size");
    return s;
}

KernelGate KernelSet::gate(const KernelSpace& space, std::size_t l) const
{
    if (size_ != space.total())
        throw StructuralError("kernel set: does not address this architecture");
    const auto& dims = space.layer(l);
    KernelGate g = KernelGate::all(dims.out, dims.in, false);
    std::size_t flat = space.offset(l);
    for (Index o = 0; o < dims.out; ++o)
        for (Index i = 0; i < dims.in; ++i)
            g.kernel(o, i) = test(flat++);
    g.derive_bias();
    return g;
}

std::vector<KernelGate> KernelSet::gates(const KernelSpace& space) const
{
    std::vector<KernelGate> out;
    out.reserve(space.layer_count());
    for (std::size_t l = 0; l < space.layer_count(); ++l)
        out.push_back(gate(space, l));
    return out;
}

MaskRegistry::MaskRegistry(const KernelSpace& space)
    : fingerprint_(space.fingerprint()), kernel_count_(space.total()), frozen_(space.total())
{
}

void MaskRegistry::freeze_task(int task_id, const TaskMask& mask)
{
    if (contains(task_id))
        throw RegistryError("mask registry: task " + std::to_string(task_id) + " is already frozen");
    if (mask.kernels.size() != kernel_count_)
        throw StructuralError("mask registry: mask addresses " + std::to_string(mask.kernels.size())
                              + " kernels, architecture has " + std::to_string(kernel_count_));
    if (mask.kernels.empty())
        throw RegistryError("mask registry: refusing to freeze an empty mask for task " + std::to_string(task_id));
    TaskMask stored = mask;
    stored.task_id = task_id;
    masks_.push_back(std::move(stored));
    frozen_ = frozen_ | mask.kernels;
}

bool MaskRegistry::contains(int task_id) const
{
    return std::any_of(masks_.begin(), masks_.end(), [&](const TaskMask& m) { return m.task_id == task_id; });
}

const TaskMask& MaskRegistry::active_mask(int task_id) const
{
    for (const auto& m : masks_)
        if (m.task_id == task_id)
            return m;
    throw LookupError("mask registry: unknown task " + std::to_string(task_id));
}

void MaskRegistry::require_compatible(const KernelSpace& space) const
{
    if (space.fingerprint() != fingerprint_ || space.total() != kernel_count_)
        throw StructuralError("mask registry: architecture fingerprint mismatch");
}

KernelSet trainable_kernels(const MaskRegistry& registry, const KernelSpace& space)
{
    registry.require_compatible(space);
    return ~registry.frozen();
}

MaskRegistry freeze_task(MaskRegistry registry, int task_id, const TaskMask& mask)
{
    registry.freeze_task(task_id, mask);
    return registry;
}

const TaskMask& active_mask(const MaskRegistry& registry, int task_id)
{
    return registry.active_mask(task_id);
}

std::vector<Eigen::Array<bool, Eigen::Dynamic, 1>> frozen_filters(const MaskRegistry& registry,
                                                                 const KernelSpace& space)
{
    registry.require_compatible(space);
    std::vector<Eigen::Array<bool, Eigen::Dynamic, 1>> out;
    for (std::size_t l = 0; l < space.layer_count(); ++l)
        out.push_back(registry.frozen().gate(space, l).bias);
    return out;
}

} // namespace lcps
