#pragma once

#include "lcps/core/errors.hpp"

#include <Eigen/Core>

#include <initializer_list>
#include <string>

namespace lcps {

using Index = Eigen::Index;

/// Dense NCHW shape. Every component is at least one.
struct Shape {
    Index n = 1;
    Index c = 1;
    Index h = 1;
    Index w = 1;

    Index count() const { return n * c * h * w; }
    Index plane() const { return h * w; }
    Index sample() const { return c * h * w; }

    bool operator==(const Shape&) const = default;

    std::string str() const
    {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + ","
             + std::to_string(w) + ")";
    }
};

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense 4-D array in NCHW order. Scalar is float for training and double for
/// verification runs.
template <typename Scalar>
class Tensor {
public:
    using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
    using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;
    using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

    Tensor() : Tensor(Shape{}) {}

    explicit Tensor(const Shape& shape, Scalar fill = Scalar(0)) : shape_(checked(shape))
    {
        data_.setConstant(shape_.count(), fill);
    }

    Tensor(const Shape& shape, std::initializer_list<Scalar> values) : shape_(checked(shape))
    {
        if (static_cast<Index>(values.size()) != shape_.count())
            throw DimensionError("tensor: " + std::to_string(values.size()) + " values for shape "
                                 + shape_.str());
        data_.resize(shape_.count());
        Index i = 0;
        for (Scalar v : values)
            data_[i++] = v;
    }

    Tensor(const Shape& shape, Storage values) : shape_(checked(shape)), data_(std::move(values))
    {
        if (data_.size() != shape_.count())
            throw DimensionError("tensor: storage size does not match shape " + shape_.str());
    }

    const Shape& shape() const { return shape_; }
    Index size() const { return data_.size(); }

    Storage& array() { return data_; }
    const Storage& array() const { return data_; }
    Scalar* data() { return data_.data(); }
    const Scalar* data() const { return data_.data(); }

    Scalar& operator[](Index i) { return data_[i]; }
    Scalar operator[](Index i) const { return data_[i]; }

    Scalar& operator()(Index n, Index c, Index h, Index w) { return data_[offset(n, c, h, w)]; }
    Scalar operator()(Index n, Index c, Index h, Index w) const { return data_[offset(n, c, h, w)]; }

    Index offset(Index n, Index c, Index h, Index w) const
    {
        return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }

    /// One sample viewed as a (channels x h*w) row-major matrix.
    MatrixMap sample(Index n)
    {
        return MatrixMap(data_.data() + n * shape_.sample(), shape_.c, shape_.plane());
    }
    ConstMatrixMap sample(Index n) const
    {
        return ConstMatrixMap(data_.data() + n * shape_.sample(), shape_.c, shape_.plane());
    }

    /// One (h x w) feature map.
    MatrixMap plane(Index n, Index c)
    {
        return MatrixMap(data_.data() + (n * shape_.c + c) * shape_.plane(), shape_.h, shape_.w);
    }
    ConstMatrixMap plane(Index n, Index c) const
    {
        return ConstMatrixMap(data_.data() + (n * shape_.c + c) * shape_.plane(), shape_.h, shape_.w);
    }

    void set_zero() { data_.setZero(); }

    bool all_finite() const { return data_.allFinite(); }

    /// Throws NumericError naming `where` if any element is NaN or infinite.
    const Tensor& require_finite(const std::string& where) const
    {
        if (!all_finite())
            throw NumericError(where + ": non-finite value in tensor of shape " + shape_.str());
        return *this;
    }

    template <typename Other>
    Tensor<Other> cast() const
    {
        return Tensor<Other>(shape_, data_.template cast<Other>().eval());
    }

    bool operator==(const Tensor& other) const
    {
        return shape_ == other.shape_ && (data_ == other.data_).all();
    }

private:
    static Shape checked(const Shape& s)
    {
        if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1)
            throw DimensionError("tensor: shape components must be >= 1, got " + s.str());
        return s;
    }

    Shape shape_;
    Storage data_;
};

} // namespace lcps
