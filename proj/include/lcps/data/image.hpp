#pragma once

#include "lcps/core/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lcps {

/// Grayscale image with values in [0, 1].
using GrayImage = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Binary defect mask, values in {0, 1}.
using BinaryMask = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Raw 8-bit pixels as stored on disk.
using Image8 = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ImageSample {
    std::string id;
    GrayImage image;
    BinaryMask mask;
};

struct TaskDataset {
    std::string name;
    std::vector<ImageSample> train;
    std::vector<ImageSample> test;

    /// Throws if masks are not binary, sizes disagree, or an id is in both splits.
    void validate() const;
};

/// Reads an 8-bit grayscale PGM (P2/P5) or PNG. Colour PNGs are converted to gray.
Image8 read_image8(const std::filesystem::path& path);
/// Writes PNG when the extension is .png, binary PGM otherwise.
void write_image8(const std::filesystem::path& path, const Image8& pixels);

GrayImage to_gray(const Image8& pixels);
Image8 to_image8(const GrayImage& image);
Image8 mask_to_image8(const BinaryMask& mask);

/// Half-pixel-centred bilinear resampling.
GrayImage resize_bilinear(const GrayImage& src, Index rows, Index cols);
template <typename T>
Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
resize_nearest(const Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& src, Index rows, Index cols)
{
    Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(rows, cols);
    for (Index y = 0; y < rows; ++y) {
        const Index sy = std::min<Index>(src.rows() - 1, (2 * y + 1) * src.rows() / (2 * rows));
        for (Index x = 0; x < cols; ++x) {
            const Index sx = std::min<Index>(src.cols() - 1, (2 * x + 1) * src.cols() / (2 * cols));
            out(y, x) = src(sy, sx);
        }
    }
    return out;
}

/// Packs samples into an (n, 1, h, w) image batch and matching binary target batch.
template <typename Scalar>
void make_batch(std::span<const ImageSample* const> samples, Tensor<Scalar>& images, Tensor<Scalar>& targets)
{
    if (samples.empty())
        throw DimensionError("batch: no samples");
    const Index h = samples.front()->image.rows();
    const Index w = samples.front()->image.cols();
    const Shape shape{static_cast<Index>(samples.size()), 1, h, w};
    images = Tensor<Scalar>(shape);
    targets = Tensor<Scalar>(shape);
    for (Index n = 0; n < shape.n; ++n) {
        const ImageSample& s = *samples[static_cast<std::size_t>(n)];
        if (s.image.rows() != h || s.image.cols() != w)
            throw DimensionError("batch: sample '" + s.id + "' has a different size");
        images.plane(n, 0) = s.image.matrix().template cast<Scalar>();
        targets.plane(n, 0) = s.mask.matrix().template cast<Scalar>();
    }
}

template <typename Scalar>
Tensor<Scalar> image_tensor(const GrayImage& image)
{
    Tensor<Scalar> t(Shape{1, 1, image.rows(), image.cols()});
    t.plane(0, 0) = image.matrix().template cast<Scalar>();
    return t;
}

} // namespace lcps
