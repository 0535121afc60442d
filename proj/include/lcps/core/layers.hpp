#pragma once

// Forward and backward kernels for the U-Net layer set. All functions are free,
// templated on the scalar type and operate sample by sample, so a sample's result
// never depends on what else is in the batch.

#include "lcps/core/tensor.hpp"

#include <cstring>
#include <string>
#include <vector>

namespace lcps {

struct ConvGeometry {
    Index stride = 1;
    Index padding = 0;

    Index out_size(Index in, Index kernel) const { return (in + 2 * padding - kernel) / stride + 1; }
};

/// Per-kernel on/off switches for one convolution. `kernel` is out_ch x in_ch;
/// a filter's bias participates only when `bias[out]` is set. Disabled kernels and
/// biases behave exactly as if their values were zero.
struct KernelGate {
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> kernel;
    Eigen::Array<bool, Eigen::Dynamic, 1> bias;

    static KernelGate all(Index out_ch, Index in_ch, bool on = true)
    {
        KernelGate g;
        g.kernel.setConstant(out_ch, in_ch, on);
        g.bias.setConstant(out_ch, on);
        return g;
    }

    /// Bias enabled exactly for filters that keep at least one kernel.
    void derive_bias()
    {
        bias.resize(kernel.rows());
        for (Index o = 0; o < kernel.rows(); ++o)
            bias[o] = kernel.row(o).any();
    }

    Index active_kernels() const { return kernel.count(); }
};

template <typename Scalar>
bool bit_equal(const Tensor<Scalar>& a, const Tensor<Scalar>& b)
{
    return a.shape() == b.shape()
        && std::memcmp(a.data(), b.data(), sizeof(Scalar) * static_cast<std::size_t>(a.size())) == 0;
}

namespace detail {

inline void check(bool ok, const std::string& layer, const std::string& what)
{
    if (!ok)
        throw DimensionError(layer + ": " + what);
}

/// Unfolds one sample (C x H x W) into a (C*r*r) x (OH*OW) patch matrix.
template <typename Scalar>
void im2col(const Scalar* x, Index c, Index h, Index w, Index r, const ConvGeometry& g, Index oh, Index ow,
            RowMatrix<Scalar>& cols)
{
    cols.resize(c * r * r, oh * ow);
    for (Index ci = 0; ci < c; ++ci) {
        const Scalar* xc = x + ci * h * w;
        for (Index ki = 0; ki < r; ++ki) {
            for (Index kj = 0; kj < r; ++kj) {
                Scalar* row = cols.data() + ((ci * r + ki) * r + kj) * oh * ow;
                for (Index oy = 0; oy < oh; ++oy) {
                    const Index iy = oy * g.stride - g.padding + ki;
                    Scalar* dst = row + oy * ow;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + ow, Scalar(0));
                        continue;
                    }
                    const Scalar* src = xc + iy * w;
                    if (g.stride == 1) {
                        const Index lo = std::max<Index>(0, g.padding - kj);
                        const Index hi = std::min<Index>(ow, w + g.padding - kj);
                        std::fill(dst, dst + std::max<Index>(lo, 0), Scalar(0));
                        if (hi > lo)
                            std::memcpy(dst + lo, src + lo - g.padding + kj, sizeof(Scalar) * (hi - lo));
                        std::fill(dst + std::max(hi, lo), dst + ow, Scalar(0));
                    } else {
                        for (Index ox = 0; ox < ow; ++ox) {
                            const Index ix = ox * g.stride - g.padding + kj;
                            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : Scalar(0);
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of im2col: scatters patch gradients back onto the (C x H x W) input.
template <typename Scalar>
void col2im(const RowMatrix<Scalar>& cols, Index c, Index h, Index w, Index r, const ConvGeometry& g, Index oh,
            Index ow, Scalar* dx)
{
    for (Index ci = 0; ci < c; ++ci) {
        Scalar* dxc = dx + ci * h * w;
        for (Index ki = 0; ki < r; ++ki) {
            for (Index kj = 0; kj < r; ++kj) {
                const Scalar* row = cols.data() + ((ci * r + ki) * r + kj) * oh * ow;
                for (Index oy = 0; oy < oh; ++oy) {
                    const Index iy = oy * g.stride - g.padding + ki;
                    if (iy < 0 || iy >= h)
                        continue;
                    const Scalar* src = row + oy * ow;
                    Scalar* dst = dxc + iy * w;
                    for (Index ox = 0; ox < ow; ++ox) {
                        const Index ix = ox * g.stride - g.padding + kj;
                        if (ix >= 0 && ix < w)
                            dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

/// Weight matrix (out x in*r*r) with gated kernels replaced by zero.
template <typename Scalar>
RowMatrix<Scalar> effective_weight(const Tensor<Scalar>& weight, const KernelGate* gate)
{
    const Shape& ws = weight.shape();
    RowMatrix<Scalar> wm = Eigen::Map<const RowMatrix<Scalar>>(weight.data(), ws.n, ws.c * ws.h * ws.w);
    if (gate) {
        const Index rr = ws.h * ws.w;
        for (Index o = 0; o < ws.n; ++o)
            for (Index i = 0; i < ws.c; ++i)
                if (!gate->kernel(o, i))
                    wm.row(o).segment(i * rr, rr).setZero();
    }
    return wm;
}

} // namespace detail

/// 2-D convolution (cross-correlation) of an NCHW batch with (out, in, r, r) kernels.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias,
                      const ConvGeometry& g, const KernelGate* gate = nullptr, const std::string& layer = "conv")
{
    const Shape& xs = x.shape();
    const Shape& ws = weight.shape();
    detail::check(ws.h == ws.w, layer, "kernel must be square, got " + ws.str());
    detail::check(xs.c == ws.c, layer,
                  "input has " + std::to_string(xs.c) + " channels, kernels expect " + std::to_string(ws.c));
    detail::check(bias.size() == ws.n, layer, "bias length " + std::to_string(bias.size()) + " != out channels "
                                                  + std::to_string(ws.n));
    detail::check(g.stride >= 1 && g.padding >= 0, layer, "invalid stride/padding");
    if (gate)
        detail::check(gate->kernel.rows() == ws.n && gate->kernel.cols() == ws.c && gate->bias.size() == ws.n,
                      layer, "kernel gate does not match layer dimensions");
    const Index r = ws.h;
    const Index oh = g.out_size(xs.h, r);
    const Index ow = g.out_size(xs.w, r);
    detail::check(oh >= 1 && ow >= 1, layer, "input " + xs.str() + " smaller than kernel");

    const RowMatrix<Scalar> wm = detail::effective_weight(weight, gate);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> b = bias.array().matrix();
    if (gate)
        for (Index o = 0; o < ws.n; ++o)
            if (!gate->bias[o])
                b[o] = Scalar(0);

    Tensor<Scalar> y(Shape{xs.n, ws.n, oh, ow});
    RowMatrix<Scalar> cols;
    for (Index n = 0; n < xs.n; ++n) {
        detail::im2col(x.data() + n * xs.sample(), xs.c, xs.h, xs.w, r, g, oh, ow, cols);
        auto out = y.sample(n);
        out.noalias() = wm * cols;
        out.colwise() += b;
    }
    return y;
}

/// Gradients of conv2d. `dx` may be null when the input gradient is not needed.
/// `dweight` and `dbias` are accumulated into, not overwritten.
template <typename Scalar>
void conv2d_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const ConvGeometry& g,
                     const KernelGate* gate, const Tensor<Scalar>& dy, Tensor<Scalar>* dx, Tensor<Scalar>& dweight,
                     Tensor<Scalar>& dbias)
{
    const Shape& xs = x.shape();
    const Shape& ws = weight.shape();
    const Index r = ws.h;
    const Index oh = dy.shape().h;
    const Index ow = dy.shape().w;
    const Index k = ws.c * r * r;

    const RowMatrix<Scalar> wm = detail::effective_weight(weight, gate);
    RowMatrix<Scalar> dw = RowMatrix<Scalar>::Zero(ws.n, k);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> db = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(ws.n);
    RowMatrix<Scalar> cols;
    RowMatrix<Scalar> dcols;
    if (dx)
        *dx = Tensor<Scalar>(xs);
    for (Index n = 0; n < xs.n; ++n) {
        const auto dyn = dy.sample(n);
        detail::im2col(x.data() + n * xs.sample(), xs.c, xs.h, xs.w, r, g, oh, ow, cols);
        dw.noalias() += dyn * cols.transpose();
        db += dyn.rowwise().sum();
        if (dx) {
            dcols.noalias() = wm.transpose() * dyn;
            detail::col2im(dcols, xs.c, xs.h, xs.w, r, g, oh, ow, dx->data() + n * xs.sample());
        }
    }
    if (gate) {
        const Index rr = r * r;
        for (Index o = 0; o < ws.n; ++o) {
            for (Index i = 0; i < ws.c; ++i)
                if (!gate->kernel(o, i))
                    dw.row(o).segment(i * rr, rr).setZero();
            if (!gate->bias[o])
                db[o] = Scalar(0);
        }
    }
    Eigen::Map<RowMatrix<Scalar>>(dweight.data(), ws.n, k) += dw;
    dbias.array() += db.array();
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x)
{
    return Tensor<Scalar>(x.shape(), x.array().max(Scalar(0)).eval());
}

/// Uses the forward output: the derivative is 1 where y > 0.
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& y, const Tensor<Scalar>& dy)
{
    return Tensor<Scalar>(y.shape(), (y.array() > Scalar(0)).select(dy.array(), Scalar(0)).eval());
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x)
{
    return Tensor<Scalar>(x.shape(), (Scalar(1) / (Scalar(1) + (-x.array()).exp())).eval());
}

template <typename Scalar>
Tensor<Scalar> sigmoid_backward(const Tensor<Scalar>& y, const Tensor<Scalar>& dy)
{
    return Tensor<Scalar>(y.shape(), (dy.array() * y.array() * (Scalar(1) - y.array())).eval());
}

/// 2x2 max pooling with stride 2. `argmax` receives, for each output element, the
/// flat input index that won (first maximum in row-major window order).
template <typename Scalar>
Tensor<Scalar> maxpool2(const Tensor<Scalar>& x, std::vector<Index>* argmax = nullptr,
                        const std::string& layer = "maxpool2")
{
    const Shape& s = x.shape();
    detail::check(s.h % 2 == 0 && s.w % 2 == 0, layer, "spatial size must be even, got " + s.str());
    Tensor<Scalar> y(Shape{s.n, s.c, s.h / 2, s.w / 2});
    if (argmax)
        argmax->assign(static_cast<std::size_t>(y.size()), 0);
    Index out = 0;
    for (Index nc = 0; nc < s.n * s.c; ++nc) {
        const Index base = nc * s.plane();
        for (Index oy = 0; oy < s.h / 2; ++oy) {
            for (Index ox = 0; ox < s.w / 2; ++ox, ++out) {
                Index best = base + 2 * oy * s.w + 2 * ox;
                for (Index dy = 0; dy < 2; ++dy)
                    for (Index dx = 0; dx < 2; ++dx) {
                        const Index i = base + (2 * oy + dy) * s.w + 2 * ox + dx;
                        if (x[i] > x[best])
                            best = i;
                    }
                y[out] = x[best];
                if (argmax)
                    (*argmax)[static_cast<std::size_t>(out)] = best;
            }
        }
    }
    return y;
}

template <typename Scalar>
Tensor<Scalar> maxpool2_backward(const Shape& input_shape, const std::vector<Index>& argmax, const Tensor<Scalar>& dy)
{
    Tensor<Scalar> dx(input_shape);
    for (Index i = 0; i < dy.size(); ++i)
        dx[argmax[static_cast<std::size_t>(i)]] += dy[i];
    return dx;
}

/// Nearest-neighbour x2 upsampling.
template <typename Scalar>
Tensor<Scalar> upsample2(const Tensor<Scalar>& x)
{
    const Shape& s = x.shape();
    Tensor<Scalar> y(Shape{s.n, s.c, 2 * s.h, 2 * s.w});
    for (Index nc = 0; nc < s.n * s.c; ++nc) {
        const Scalar* src = x.data() + nc * s.plane();
        Scalar* dst = y.data() + nc * 4 * s.plane();
        for (Index yy = 0; yy < 2 * s.h; ++yy)
            for (Index xx = 0; xx < 2 * s.w; ++xx)
                dst[yy * 2 * s.w + xx] = src[(yy / 2) * s.w + xx / 2];
    }
    return y;
}

template <typename Scalar>
Tensor<Scalar> upsample2_backward(const Tensor<Scalar>& dy)
{
    const Shape& s = dy.shape();
    Tensor<Scalar> dx(Shape{s.n, s.c, s.h / 2, s.w / 2});
    const Index ow = s.w / 2;
    for (Index nc = 0; nc < s.n * s.c; ++nc) {
        const Scalar* src = dy.data() + nc * s.plane();
        Scalar* dst = dx.data() + nc * s.plane() / 4;
        for (Index yy = 0; yy < s.h; ++yy)
            for (Index xx = 0; xx < s.w; ++xx)
                dst[(yy / 2) * ow + xx / 2] += src[yy * s.w + xx];
    }
    return dx;
}

/// Stacks `a` then `b` along the channel axis.
template <typename Scalar>
Tensor<Scalar> concat(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const std::string& layer = "concat")
{
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    detail::check(sa.n == sb.n && sa.h == sb.h && sa.w == sb.w, layer,
                  "cannot concatenate " + sa.str() + " with " + sb.str());
    Tensor<Scalar> y(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
    for (Index n = 0; n < sa.n; ++n) {
        auto out = y.sample(n);
        out.topRows(sa.c) = a.sample(n);
        out.bottomRows(sb.c) = b.sample(n);
    }
    return y;
}

template <typename Scalar>
void concat_backward(const Tensor<Scalar>& dy, Index channels_a, Tensor<Scalar>& da, Tensor<Scalar>& db)
{
    const Shape& s = dy.shape();
    da = Tensor<Scalar>(Shape{s.n, channels_a, s.h, s.w});
    db = Tensor<Scalar>(Shape{s.n, s.c - channels_a, s.h, s.w});
    for (Index n = 0; n < s.n; ++n) {
        da.sample(n) = dy.sample(n).topRows(channels_a);
        db.sample(n) = dy.sample(n).bottomRows(s.c - channels_a);
    }
}

} // namespace lcps
