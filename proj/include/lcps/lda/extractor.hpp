#pragma once

#include "lcps/data/image.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <map>
#include <memory>
#include <string>

namespace lcps {

/// Maps a grayscale image to a fixed-length embedding. Implementations are pure:
/// the same image always yields the same vector.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual Index dimension() const = 0;
    /// `id` identifies the image for extractors backed by precomputed vectors.
    virtual Eigen::VectorXd extract(const GrayImage& image, const std::string& id) const = 0;
    virtual std::string describe() const = 0;

    Eigen::VectorXd extract(const ImageSample& s) const { return extract(s.image, s.id); }
};

/// Hand-crafted pooled statistics: grid x grid cell means, then global mean,
/// standard deviation, mean absolute horizontal and vertical gradients, and the
/// fractions of pixels more than two standard deviations above / below the mean.
class PooledStatsExtractor final : public FeatureExtractor {
public:
    PooledStatsExtractor(Index side, Index grid = 4);

    using FeatureExtractor::extract;
    Index dimension() const override { return grid_ * grid_ + 6; }
    Eigen::VectorXd extract(const GrayImage& image, const std::string& id) const override;
    std::string describe() const override;

    Index side() const { return side_; }
    Index grid() const { return grid_; }

private:
    Index side_;
    Index grid_;
};

/// Embeddings computed elsewhere, looked up by image id.
///
/// File layout (little-endian): magic "LCPE", u32 version (1), u64 record count,
/// then per record: u32 id length, id bytes (UTF-8), u32 dimension d, d x f64.
class PrecomputedEmbeddings final : public FeatureExtractor {
public:
    static constexpr std::uint32_t kVersion = 1;

    PrecomputedEmbeddings() = default;
    explicit PrecomputedEmbeddings(std::map<std::string, Eigen::VectorXd> vectors);

    static PrecomputedEmbeddings load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    using FeatureExtractor::extract;
    Index dimension() const override { return dimension_; }
    Eigen::VectorXd extract(const GrayImage& image, const std::string& id) const override;
    std::string describe() const override;
    const std::map<std::string, Eigen::VectorXd>& vectors() const { return vectors_; }

private:
    std::map<std::string, Eigen::VectorXd> vectors_;
    Index dimension_ = 0;
};

} // namespace lcps
