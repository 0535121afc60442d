#pragma once

#include "lcps/core/rng.hpp"
#include "lcps/core/trace.hpp"
#include "lcps/masks/masks.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace lcps {

struct UNetConfig {
    std::vector<Index> encoder_channels{16, 32, 64, 128};
    Index bottleneck_channels = 256;
    Index in_channels = 1;
    Index out_channels = 1;
    Index kernel_size = 3;
    Index image_side = 224;

    std::size_t depth() const { return encoder_channels.size(); }

    void validate() const
    {
        if (encoder_channels.empty())
            throw ConfigError("unet: encoder depth must be at least 1");
        for (Index c : encoder_channels)
            if (c < 1)
                throw ConfigError("unet: encoder channel counts must be positive");
        if (bottleneck_channels < 1 || in_channels < 1 || out_channels < 1)
            throw ConfigError("unet: channel counts must be positive");
        if (kernel_size < 1 || kernel_size % 2 == 0)
            throw ConfigError("unet: kernel size must be a positive odd integer");
        const Index factor = Index(1) << depth();
        if (image_side < factor || image_side % factor != 0)
            throw ConfigError("unet: image side " + std::to_string(image_side) + " is not divisible by 2^"
                              + std::to_string(depth()) + " = " + std::to_string(factor));
    }

    /// 16-32-64-128 encoder with a 256-channel bottleneck.
    static UNetConfig small(Index side = 224) { return {{16, 32, 64, 128}, 256, 1, 1, 3, side}; }
    /// 64-128-256-512 encoder with a 1024-channel bottleneck.
    static UNetConfig full(Index side = 224) { return {{64, 128, 256, 512}, 1024, 1, 1, 3, side}; }

    bool operator==(const UNetConfig&) const = default;
};

/// A convolution's parameters inside the model's ParamStore.
struct ConvLayerRef {
    std::string name;
    std::size_t weight = 0;
    std::size_t bias = 0;
    Index in = 0;
    Index out = 0;
    Index kernel = 0;
};

/// Encoder-decoder U-Net with double-conv blocks, nearest-neighbour upsampling
/// followed by a prunable conv, and one private 1x1 output head per task.
///
/// Prunable layers, in order: enc{k}.a, enc{k}.b for every level, bottleneck.a,
/// bottleneck.b, then for every level from deepest to shallowest dec{k}.up,
/// dec{k}.a, dec{k}.b. Output heads are never pruned.
template <typename Scalar>
class UNetModel {
public:
    const UNetConfig& config() const { return config_; }
    std::uint64_t seed() const { return seed_; }
    ParamStore<Scalar>& params() { return params_; }
    const ParamStore<Scalar>& params() const { return params_; }
    const std::vector<ConvLayerRef>& prunable() const { return convs_; }
    const KernelSpace& kernel_space() const { return space_; }
    std::size_t head_count() const { return heads_.size(); }
    const ConvLayerRef& head(std::size_t h) const
    {
        if (h >= heads_.size())
            throw LookupError("unet: no output head " + std::to_string(h));
        return heads_[h];
    }
    Index parameter_count() const { return params_.element_count(); }

    /// Appends an output head and returns its index. The first head is freshly
    /// initialized; later ones start at zero, i.e. p = 0.5 everywhere. Trained
    /// features are large enough that any random head saturates the sigmoid.
    std::size_t add_head()
    {
        const std::size_t h = heads_.size();
        const std::string base = "head." + std::to_string(h);
        heads_.push_back(add_conv(base, config_.encoder_channels.front(), config_.out_channels, 1, true));
        if (h > 0)
            params_[heads_[h].weight].value.set_zero();
        return h;
    }

    /// Re-draws the kernels in `which` from the initialization distribution, using an
    /// rng stream keyed by `round`.
    void reinitialize_kernels(const KernelSet& which, std::uint64_t round)
    {
        if (which.size() != space_.total())
            throw StructuralError("unet: kernel set does not address this architecture");
        Rng rng = make_rng(seed_, "reinit", round);
        for (std::size_t flat : which.indices()) {
            const KernelAddress a = space_.address(flat);
            const ConvLayerRef& ref = convs_[a.layer];
            auto& w = params_[ref.weight].value;
            const double bound = std::sqrt(6.0 / static_cast<double>(ref.in * ref.kernel * ref.kernel));
            for (Index y = 0; y < ref.kernel; ++y)
                for (Index x = 0; x < ref.kernel; ++x)
                    w(a.out, a.in, y, x) = static_cast<Scalar>(uniform(rng, -bound, bound));
        }
    }

    template <typename Other>
    UNetModel<Other> cast() const
    {
        UNetModel<Other> m;
        m.config_ = config_;
        m.seed_ = seed_;
        m.params_ = params_.template cast<Other>();
        m.convs_ = convs_;
        m.heads_ = heads_;
        m.space_ = space_;
        return m;
    }

    template <typename S>
    friend UNetModel<S> build_unet(const UNetConfig& config, std::uint64_t seed);
    template <typename S>
    friend class UNetModel;

private:
    ConvLayerRef add_conv(const std::string& name, Index in, Index out, Index k, bool head)
    {
        const std::size_t index = params_.size();
        Rng rng = make_rng(seed_, "init", index);
        Tensor<Scalar> w(Shape{out, in, k, k});
        const double fan_in = static_cast<double>(in * k * k);
        // He-uniform for ReLU layers; the sigmoid head uses a plain 1/sqrt(fan_in) range.
        const double bound = head ? 1.0 / std::sqrt(fan_in) : std::sqrt(6.0 / fan_in);
        for (Index i = 0; i < w.size(); ++i)
            w[i] = static_cast<Scalar>(uniform(rng, -bound, bound));
        ConvLayerRef ref{name, 0, 0, in, out, k};
        ref.weight = params_.add(name + ".weight", std::move(w));
        ref.bias = params_.add(name + ".bias", Tensor<Scalar>(Shape{out, 1, 1, 1}));
        return ref;
    }

    UNetConfig config_;
    std::uint64_t seed_ = 0;
    ParamStore<Scalar> params_;
    std::vector<ConvLayerRef> convs_;
    std::vector<ConvLayerRef> heads_;
    KernelSpace space_;
};

template <typename Scalar>
UNetModel<Scalar> build_unet(const UNetConfig& config, std::uint64_t seed)
{
    config.validate();
    UNetModel<Scalar> m;
    m.config_ = config;
    m.seed_ = seed;
    const Index k = config.kernel_size;
    const auto& enc = config.encoder_channels;
    Index in = config.in_channels;
    for (std::size_t level = 0; level < enc.size(); ++level) {
        const std::string base = "enc" + std::to_string(level);
        m.convs_.push_back(m.add_conv(base + ".a", in, enc[level], k, false));
        m.convs_.push_back(m.add_conv(base + ".b", enc[level], enc[level], k, false));
        in = enc[level];
    }
    m.convs_.push_back(m.add_conv("bottleneck.a", in, config.bottleneck_channels, k, false));
    m.convs_.push_back(m.add_conv("bottleneck.b", config.bottleneck_channels, config.bottleneck_channels, k, false));
    in = config.bottleneck_channels;
    for (std::size_t level = enc.size(); level-- > 0;) {
        const std::string base = "dec" + std::to_string(level);
        m.convs_.push_back(m.add_conv(base + ".up", in, enc[level], k, false));
        m.convs_.push_back(m.add_conv(base + ".a", 2 * enc[level], enc[level], k, false));
        m.convs_.push_back(m.add_conv(base + ".b", enc[level], enc[level], k, false));
        in = enc[level];
    }
    std::vector<KernelSpace::Layer> layers;
    for (const auto& c : m.convs_)
        layers.push_back({c.out, c.in});
    m.space_ = KernelSpace(std::move(layers));
    m.add_head();
    return m;
}

/// Node ids of interest from one recorded forward pass.
struct ForwardRecord {
    std::size_t output = 0;
    /// Head output before the sigmoid.
    std::size_t logits = 0;
    /// Input node of every prunable conv, in prunable-layer order.
    std::vector<std::size_t> layer_inputs;
};

/// Records a forward pass into `trace`. `gates` (one per prunable layer) restricts
/// the pass to a subnetwork; null means every kernel participates.
template <typename Scalar>
ForwardRecord record_forward(Trace<Scalar>& trace, const UNetModel<Scalar>& model, const Tensor<Scalar>& batch,
                             const std::vector<KernelGate>* gates, std::size_t head)
{
    const UNetConfig& cfg = model.config();
    const Shape& s = batch.shape();
    if (s.c != cfg.in_channels || s.h != cfg.image_side || s.w != cfg.image_side)
        throw DimensionError("unet: batch " + s.str() + " does not match config (" + std::to_string(cfg.in_channels)
                             + " channels, side " + std::to_string(cfg.image_side) + ")");
    const auto& convs = model.prunable();
    if (gates && gates->size() != convs.size())
        throw StructuralError("unet: mask addresses " + std::to_string(gates->size()) + " layers, model has "
                              + std::to_string(convs.size()));
    const ConvLayerRef& out_head = model.head(head);
    const ConvGeometry same{1, cfg.kernel_size / 2};

    ForwardRecord rec;
    std::size_t layer = 0;
    auto conv_relu = [&](std::size_t x) {
        const ConvLayerRef& c = convs[layer];
        std::optional<KernelGate> g;
        if (gates)
            g = (*gates)[layer];
        rec.layer_inputs.push_back(x);
        ++layer;
        return trace.relu(trace.conv(x, c.weight, c.bias, same, std::move(g), c.name), c.name + ".relu");
    };

    std::size_t x = trace.input(batch);
    std::vector<std::size_t> skips;
    for (std::size_t level = 0; level < cfg.depth(); ++level) {
        x = conv_relu(conv_relu(x));
        skips.push_back(x);
        x = trace.maxpool2(x, "enc" + std::to_string(level) + ".pool");
    }
    x = conv_relu(conv_relu(x));
    for (std::size_t level = cfg.depth(); level-- > 0;) {
        x = conv_relu(trace.upsample2(x, "dec" + std::to_string(level) + ".upsample"));
        x = trace.concat(skips[level], x, "dec" + std::to_string(level) + ".concat");
        x = conv_relu(conv_relu(x));
    }
    rec.logits = trace.conv(x, out_head.weight, out_head.bias, ConvGeometry{1, 0}, std::nullopt, out_head.name);
    rec.output = trace.sigmoid(rec.logits, out_head.name + ".sigmoid");
    return rec;
}

/// Per-pixel defect probabilities, shape (n, out_channels, side, side). With a mask,
/// kernels outside it (and biases of filters it does not touch) act as zeros.
template <typename Scalar>
Tensor<Scalar> unet_forward(const UNetModel<Scalar>& model, const Tensor<Scalar>& batch,
                            const TaskMask* mask = nullptr, std::size_t head = 0)
{
    std::vector<KernelGate> gates;
    if (mask) {
        if (mask->kernels.size() != model.kernel_space().total())
            throw StructuralError("unet: mask addresses " + std::to_string(mask->kernels.size())
                                  + " kernels, model has " + std::to_string(model.kernel_space().total()));
        gates = mask->kernels.gates(model.kernel_space());
    }
    Trace<Scalar> trace(model.params());
    const ForwardRecord rec = record_forward(trace, model, batch, mask ? &gates : nullptr, head);
    return trace.value(rec.output);
}

} // namespace lcps
