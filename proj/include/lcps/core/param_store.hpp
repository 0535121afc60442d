#pragma once

#include "lcps/core/tensor.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace lcps {

template <typename Scalar>
struct Parameter {
    std::string name;
    Tensor<Scalar> value;
    Tensor<Scalar> grad;
};

/// Ordered, uniquely named parameters with gradient buffers of identical shape.
template <typename Scalar>
class ParamStore {
public:
    std::size_t add(std::string name, Tensor<Scalar> value)
    {
        if (index_.contains(name))
            throw StructuralError("param store: duplicate parameter name '" + name + "'");
        Tensor<Scalar> grad(value.shape());
        index_.emplace(name, params_.size());
        params_.push_back({std::move(name), std::move(value), std::move(grad)});
        return params_.size() - 1;
    }

    std::size_t size() const { return params_.size(); }
    Parameter<Scalar>& operator[](std::size_t i) { return params_[i]; }
    const Parameter<Scalar>& operator[](std::size_t i) const { return params_[i]; }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    bool contains(const std::string& name) const { return index_.contains(name); }

    std::size_t index_of(const std::string& name) const
    {
        auto it = index_.find(name);
        if (it == index_.end())
            throw LookupError("param store: no parameter named '" + name + "'");
        return it->second;
    }

    void zero_grad()
    {
        for (auto& p : params_)
            p.grad.set_zero();
    }

    Index element_count() const
    {
        Index total = 0;
        for (const auto& p : params_)
            total += p.value.size();
        return total;
    }

    template <typename Other>
    ParamStore<Other> cast() const
    {
        ParamStore<Other> out;
        for (const auto& p : params_)
            out.add(p.name, p.value.template cast<Other>());
        return out;
    }

private:
    std::vector<Parameter<Scalar>> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Element-level update permissions aligned with a ParamStore.
class TrainableSet {
public:
    using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

    template <typename Scalar>
    static TrainableSet all(const ParamStore<Scalar>& store, bool on = true)
    {
        TrainableSet t;
        for (const auto& p : store)
            t.masks_.push_back(Mask::Constant(p.value.size(), on));
        return t;
    }

    template <typename Scalar>
    static TrainableSet none(const ParamStore<Scalar>& store)
    {
        return all(store, false);
    }

    std::size_t size() const { return masks_.size(); }
    Mask& operator[](std::size_t param) { return masks_[param]; }
    const Mask& operator[](std::size_t param) const { return masks_[param]; }

    bool empty() const
    {
        for (const auto& m : masks_)
            if (m.any())
                return false;
        return true;
    }

    Index count() const
    {
        Index c = 0;
        for (const auto& m : masks_)
            c += m.count();
        return c;
    }

private:
    std::vector<Mask> masks_;
};

} // namespace lcps
