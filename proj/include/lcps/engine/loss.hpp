#pragma once

#include "lcps/data/image.hpp"

#include <cmath>

namespace lcps {

/// |Y n Yhat| / |Y u Yhat| over binary masks. Two empty masks score 1.
double iou_score(const BinaryMask& predicted, const BinaryMask& truth);

/// Pixels with probability strictly above `threshold` become 1.
template <typename Derived>
BinaryMask binarize(const Eigen::MatrixBase<Derived>& probabilities, double threshold)
{
    return (probabilities.array().template cast<double>() > threshold).template cast<std::uint8_t>();
}

template <typename Scalar>
struct IouLoss {
    double value = 0.0;
    /// d value / d probs.
    Tensor<Scalar> grad;
};

/// Soft IoU loss averaged over the batch. For one image with probabilities P and
/// target Y:  L = 1 - (sum PY + eps) / (sum (P + Y - PY) + eps).
template <typename Scalar>
IouLoss<Scalar> iou_loss(const Tensor<Scalar>& probs, const Tensor<Scalar>& target, double eps_smooth = 1.0)
{
    if (probs.shape() != target.shape())
        throw DimensionError("iou loss: prediction " + probs.shape().str() + " vs target " + target.shape().str());
    if (!(eps_smooth > 0.0))
        throw ConfigError("iou loss: smoothing must be positive");
    probs.require_finite("iou loss prediction");

    const Shape& s = probs.shape();
    const Index per = s.sample();
    IouLoss<Scalar> out{0.0, Tensor<Scalar>(s)};
    const double inv_n = 1.0 / static_cast<double>(s.n);
    for (Index n = 0; n < s.n; ++n) {
        const Scalar* p = probs.data() + n * per;
        const Scalar* y = target.data() + n * per;
        double inter = 0.0;
        double uni = 0.0;
        for (Index k = 0; k < per; ++k) {
            const double pk = p[k], yk = y[k];
            inter += pk * yk;
            uni += pk + yk - pk * yk;
        }
        const double num = inter + eps_smooth;
        const double den = uni + eps_smooth;
        out.value += (1.0 - num / den) * inv_n;
        Scalar* g = out.grad.data() + n * per;
        for (Index k = 0; k < per; ++k) {
            const double yk = y[k];
            g[k] = static_cast<Scalar>(-(yk * den - num * (1.0 - yk)) / (den * den) * inv_n);
        }
    }
    if (!std::isfinite(out.value))
        throw NumericError("iou loss: non-finite value");
    return out;
}

} // namespace lcps
