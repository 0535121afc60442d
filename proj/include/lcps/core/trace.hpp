#pragma once

#include "lcps/core/layers.hpp"
#include "lcps/core/param_store.hpp"

#include <optional>
#include <string>
#include <vector>

namespace lcps {

/// Records a forward computation over the U-Net layer set and differentiates it.
///
/// A trace reads parameters from the store it was constructed with, and backward()
/// must be handed that same store. backward() zeroes every gradient in the store and
/// recomputes it from scratch, so calling it twice with the same output gradient
/// yields identical gradients.
template <typename Scalar>
class Trace {
public:
    using NodeId = std::size_t;

    explicit Trace(const ParamStore<Scalar>& params) : params_(&params), param_count_(params.size()) {}

    /// Input gradients are only materialized for inputs created with `requires_grad`.
    NodeId input(Tensor<Scalar> x, bool requires_grad = false, std::string name = "input")
    {
        x.require_finite(name);
        Node n{Kind::input, {}, std::move(x), std::move(name)};
        n.requires_grad = requires_grad;
        return push(std::move(n));
    }

    NodeId conv(NodeId x, std::size_t weight, std::size_t bias, ConvGeometry geometry,
                std::optional<KernelGate> gate = std::nullopt, std::string name = "conv")
    {
        const KernelGate* g = gate ? &*gate : nullptr;
        Tensor<Scalar> y = conv2d(value(x), (*params_)[weight].value, (*params_)[bias].value, geometry, g, name);
        y.require_finite(name);
        Node n{Kind::conv, {x}, std::move(y), std::move(name)};
        n.weight = weight;
        n.bias = bias;
        n.geometry = geometry;
        n.gate = std::move(gate);
        return push(std::move(n));
    }

    NodeId relu(NodeId x, std::string name = "relu")
    {
        return push(Node{Kind::relu, {x}, lcps::relu(value(x)), std::move(name)});
    }

    NodeId sigmoid(NodeId x, std::string name = "sigmoid")
    {
        Tensor<Scalar> y = lcps::sigmoid(value(x));
        y.require_finite(name);
        return push(Node{Kind::sigmoid, {x}, std::move(y), std::move(name)});
    }

    NodeId maxpool2(NodeId x, std::string name = "maxpool2")
    {
        Node n{Kind::maxpool2, {x}, Tensor<Scalar>(), std::move(name)};
        n.value = lcps::maxpool2(value(x), &n.argmax, n.name);
        return push(std::move(n));
    }

    NodeId upsample2(NodeId x, std::string name = "upsample2")
    {
        return push(Node{Kind::upsample2, {x}, lcps::upsample2(value(x)), std::move(name)});
    }

    NodeId concat(NodeId a, NodeId b, std::string name = "concat")
    {
        Tensor<Scalar> y = lcps::concat(value(a), value(b), name);
        return push(Node{Kind::concat, {a, b}, std::move(y), std::move(name)});
    }

    const Tensor<Scalar>& value(NodeId id) const
    {
        if (id >= nodes_.size())
            throw StructuralError("trace: node " + std::to_string(id) + " does not exist");
        return nodes_[id].value;
    }

    std::size_t size() const { return nodes_.size(); }

    /// Gradient with respect to a node's value from the last backward() call.
    const Tensor<Scalar>& grad(NodeId id) const
    {
        if (id >= grads_.size() || !grads_[id])
            throw StateError("trace: no gradient recorded for node " + std::to_string(id));
        return *grads_[id];
    }

    void backward(NodeId output, const Tensor<Scalar>& output_grad, ParamStore<Scalar>& params)
    {
        if (&params != params_)
            throw StructuralError("trace: backward() called with a parameter store the trace was not recorded on");
        if (output >= nodes_.size())
            throw StructuralError("trace: output node " + std::to_string(output) + " is not part of this trace");
        if (params_->size() != param_count_)
            throw StructuralError("trace: parameter store changed since the forward pass was recorded");
        if (output_grad.shape() != nodes_[output].value.shape())
            throw StructuralError("trace: loss gradient shape " + output_grad.shape().str()
                                  + " does not match output " + nodes_[output].value.shape().str());
        params.zero_grad();
        grads_.assign(nodes_.size(), std::nullopt);
        grads_[output] = output_grad;

        for (std::size_t k = output + 1; k-- > 0;) {
            if (!grads_[k])
                continue;
            const Node& n = nodes_[k];
            const Tensor<Scalar>& dy = *grads_[k];
            switch (n.kind) {
            case Kind::input:
                break;
            case Kind::conv: {
                auto& w = params[n.weight];
                auto& b = params[n.bias];
                const Node& src = nodes_[n.inputs[0]];
                const bool need_dx = src.kind != Kind::input || src.requires_grad;
                Tensor<Scalar> dx;
                conv2d_backward(src.value, w.value, n.geometry, n.gate ? &*n.gate : nullptr, dy,
                                need_dx ? &dx : nullptr, w.grad, b.grad);
                if (need_dx)
                    accumulate(n.inputs[0], std::move(dx));
                break;
            }
            case Kind::relu:
                accumulate(n.inputs[0], relu_backward(n.value, dy));
                break;
            case Kind::sigmoid:
                accumulate(n.inputs[0], sigmoid_backward(n.value, dy));
                break;
            case Kind::maxpool2:
                accumulate(n.inputs[0], maxpool2_backward(value(n.inputs[0]).shape(), n.argmax, dy));
                break;
            case Kind::upsample2:
                accumulate(n.inputs[0], upsample2_backward(dy));
                break;
            case Kind::concat: {
                Tensor<Scalar> da, db;
                concat_backward(dy, value(n.inputs[0]).shape().c, da, db);
                accumulate(n.inputs[0], std::move(da));
                accumulate(n.inputs[1], std::move(db));
                break;
            }
            }
        }
    }

private:
    enum class Kind { input, conv, relu, sigmoid, maxpool2, upsample2, concat };

    struct Node {
        Node(Kind k, std::vector<NodeId> in, Tensor<Scalar> v, std::string n)
            : kind(k), inputs(std::move(in)), value(std::move(v)), name(std::move(n))
        {
        }

        Kind kind;
        std::vector<NodeId> inputs;
        Tensor<Scalar> value;
        std::string name;
        std::size_t weight = 0;
        std::size_t bias = 0;
        ConvGeometry geometry{};
        std::optional<KernelGate> gate;
        std::vector<Index> argmax;
        bool requires_grad = false;
    };

    NodeId push(Node n)
    {
        for (NodeId in : n.inputs)
            if (in >= nodes_.size())
                throw StructuralError("trace: node '" + n.name + "' consumes unknown node " + std::to_string(in));
        nodes_.push_back(std::move(n));
        return nodes_.size() - 1;
    }

    void accumulate(NodeId id, Tensor<Scalar> g)
    {
        if (!grads_[id])
            grads_[id] = std::move(g);
        else
            grads_[id]->array() += g.array();
    }

    const ParamStore<Scalar>* params_;
    std::size_t param_count_;
    std::vector<Node> nodes_;
    std::vector<std::optional<Tensor<Scalar>>> grads_;
};

} // namespace lcps
